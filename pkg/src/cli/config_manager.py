import configparser
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Tuple

import numpy as np

from services.potential_service import SHAPES, PotentialSpec, RadialTerm
from utils.errors import ConfigError, SpectralError

SECTION_RE = re.compile(r"^\[(?P<name>[^\]]+)\]\s*$")
KEY_RE = re.compile(r"^(?P<key>[^=:\s][^=:]*?)\s*[=:]\s*(?P<value>.*)$")

MODEL_KEYS = {"alpha"}
TERM_KEYS = {"component", "shape", "amplitude", "width", "center_radius"}
SWEEP_KEYS = {"eps_start", "eps_stop", "points", "log_scale", "correct_w", "bs_path"}
NUMERIC_KEYS = {"r_max", "n_r", "n_theta", "m_max", "quad_tol", "phi_eps"}
OUTPUT_KEYS = {"csv", "json", "formats"}
BS_PATHS = ("channels", "2d", "off")
FORMATS = ("csv", "json")


@dataclass(frozen=True)
class SweepSettings:
    eps_start: float = 1e-3
    eps_stop: float = 1e-1
    points: int = 10
    log_scale: bool = True
    correct_w: bool = True
    bs_path: str = "channels"


@dataclass(frozen=True)
class NumericSettings:
    r_max: float = 12.0
    n_r: int = 96
    n_theta: int = 64
    m_max: int = 12
    quad_tol: float = 1e-12
    phi_eps: float = 1e-6


@dataclass(frozen=True)
class OutputSettings:
    csv: str = "sweep.csv"
    json: str = "sweep.json"
    formats: Tuple[str, ...] = FORMATS


@dataclass(frozen=True)
class RunConfig:
    alpha: float
    potential: PotentialSpec
    terms: List[Dict[str, Any]] = field(default_factory=list)
    sweep: SweepSettings = field(default_factory=SweepSettings)
    numerics: NumericSettings = field(default_factory=NumericSettings)
    output: OutputSettings = field(default_factory=OutputSettings)

    @property
    def eps_values(self) -> List[float]:
        s = self.sweep
        if s.points == 0:
            return []
        if s.points == 1:
            return [s.eps_start]
        if s.log_scale:
            values = np.geomspace(s.eps_start, s.eps_stop, s.points)
        else:
            values = np.linspace(s.eps_start, s.eps_stop, s.points)
        return sorted(float(v) for v in values)

    def as_dict(self):
        return {
            "alpha": self.alpha,
            "terms": self.terms,
            "sweep": vars(self.sweep),
            "numerics": vars(self.numerics),
            "output": {"csv": self.output.csv, "json": self.output.json, "formats": list(self.output.formats)},
            "assumption": dict(self.potential.metadata),
        }


def _index_lines(text, offset=0):
    """Map (section, key) and section names to line numbers; catch duplicates early."""
    keys, sections = {}, {}
    section = "model"
    for lineno, raw in enumerate(text.splitlines(), start=1 - offset):
        line = raw.strip()
        if not line or line[0] in "#;" or raw[:1].isspace():
            continue
        header = SECTION_RE.match(line)
        if header:
            section = header.group("name").strip()
            if section in sections:
                raise ConfigError(f"duplicate section [{section}], first defined on line {sections[section]}", lineno)
            sections[section] = lineno
            continue
        match = KEY_RE.match(line)
        if not match:
            raise ConfigError(f"cannot parse {line!r}; expected 'key = value'", lineno)
        key = match.group("key").strip().lower()
        if (section, key) in keys:
            raise ConfigError(f"duplicate key '{key}' in [{section}], first defined on line {keys[section, key]}",
                              lineno)
        keys[section, key] = lineno
    return keys, sections


class _Reader:
    """Typed accessors over one configparser section that report line numbers."""

    def __init__(self, parser, section, lines, allowed):
        self.section = section
        self.values = parser[section] if parser.has_section(section) else {}
        self.lines = lines
        for key in self.values:
            if key not in allowed:
                raise ConfigError(f"unknown key '{key}' in [{section}]; allowed: {', '.join(sorted(allowed))}",
                                  self.line(key))

    def line(self, key):
        return self.lines.get((self.section, key))

    def has(self, key):
        return key in self.values

    def text(self, key, default=None):
        return self.values[key].strip() if key in self.values else default

    def number(self, key, default, cast=float, positive=True, allow_zero=False):
        if key not in self.values:
            return default
        raw = self.values[key].strip()
        try:
            value = cast(raw)
        except ValueError:
            raise ConfigError(f"{key} must be a {cast.__name__}, got {raw!r}", self.line(key)) from None
        if cast is float and not math.isfinite(value):
            raise ConfigError(f"{key} must be finite, got {raw!r}", self.line(key))
        if positive and not (value > 0 or (allow_zero and value == 0)):
            bound = ">= 0" if allow_zero else "> 0"
            raise ConfigError(f"{key} must be {bound}, got {raw!r}", self.line(key))
        return value

    def flag(self, key, default):
        if key not in self.values:
            return default
        raw = self.values[key].strip().lower()
        if raw in ("1", "yes", "true", "on"):
            return True
        if raw in ("0", "no", "false", "off"):
            return False
        raise ConfigError(f"{key} must be a boolean, got {raw!r}", self.line(key))

    def choice(self, key, default, options):
        value = self.text(key, default).lower()
        if value not in options:
            raise ConfigError(f"{key} must be one of {', '.join(options)}, got {value!r}", self.line(key))
        return value


def _parse_amplitude(raw, lineno):
    try:
        return complex(raw.replace(" ", ""))
    except ValueError:
        raise ConfigError(f"amplitude must be a complex literal such as -1 or -1+0.5j, got {raw!r}", lineno) from None


def _parse_term(reader):
    name = reader.section[len("term"):].strip()
    missing = [k for k in ("shape", "amplitude", "width") if not reader.has(k)]
    if missing:
        raise ConfigError(f"[{reader.section}] is missing {', '.join(missing)}", reader.lines.get(reader.section))
    component = reader.choice("component", "both", ("v11", "v22", "both"))
    shape = reader.choice("shape", None, SHAPES)
    amplitude = _parse_amplitude(reader.text("amplitude"), reader.line("amplitude"))
    width = reader.number("width", None)
    center = reader.number("center_radius", 0.0, allow_zero=True)
    try:
        term = RadialTerm(shape=shape, amplitude=amplitude, width=width, center_radius=center)
    except SpectralError as e:
        raise ConfigError(str(e), reader.lines.get(reader.section)) from None
    source = {"name": name, "component": component, "shape": shape, "amplitude": amplitude,
              "width": width, "center_radius": center}
    return component, term, source


def parse_config(text: str) -> RunConfig:
    offset = 0
    stripped = [ln for ln in text.splitlines() if ln.strip() and ln.strip()[0] not in "#;"]
    if stripped and not SECTION_RE.match(stripped[0].strip()):
        if re.search(r"^\s*\[model\]\s*$", text, flags=re.MULTILINE):
            raise ConfigError("keys before the first section belong to [model]; do not repeat [model]", 1)
        text = "[model]\n" + text
        offset = 1
    keys, sections = _index_lines(text, offset)
    lines = dict(keys)
    lines.update(sections)

    parser = configparser.ConfigParser(strict=True, interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as e:
        lineno = getattr(e, "lineno", None)
        raise ConfigError(str(e).replace("\n", " "), lineno - offset if lineno else None) from None

    for name in parser.sections():
        if name not in ("model", "sweep", "numerics", "output") and not name.startswith("term "):
            raise ConfigError(f"unknown section [{name}]", lines.get(name))

    model = _Reader(parser, "model", lines, MODEL_KEYS)
    if not model.has("alpha"):
        raise ConfigError("alpha is required in [model]")
    alpha = model.number("alpha", None, positive=False)
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must lie in (0, 1), got {alpha}", model.line("alpha"))

    v11, v22, sources = [], [], []
    for name in parser.sections():
        if not name.startswith("term "):
            continue
        component, term, source = _parse_term(_Reader(parser, name, lines, TERM_KEYS))
        if component in ("v11", "both"):
            v11.append(term)
        if component in ("v22", "both"):
            v22.append(term)
        sources.append(source)
    if not sources:
        raise ConfigError("potential is empty: add at least one [term NAME] section")

    s = _Reader(parser, "sweep", lines, SWEEP_KEYS)
    sweep = SweepSettings(
        eps_start=s.number("eps_start", SweepSettings.eps_start),
        eps_stop=s.number("eps_stop", SweepSettings.eps_stop),
        points=s.number("points", SweepSettings.points, cast=int, allow_zero=True),
        log_scale=s.flag("log_scale", SweepSettings.log_scale),
        correct_w=s.flag("correct_w", SweepSettings.correct_w),
        bs_path=s.choice("bs_path", SweepSettings.bs_path, BS_PATHS),
    )
    if sweep.points > 1 and sweep.eps_stop <= sweep.eps_start:
        raise ConfigError("eps_stop must exceed eps_start", s.line("eps_stop"))

    n = _Reader(parser, "numerics", lines, NUMERIC_KEYS)
    numerics = NumericSettings(
        r_max=n.number("r_max", NumericSettings.r_max),
        n_r=n.number("n_r", NumericSettings.n_r, cast=int),
        n_theta=n.number("n_theta", NumericSettings.n_theta, cast=int),
        m_max=n.number("m_max", NumericSettings.m_max, cast=int),
        quad_tol=n.number("quad_tol", NumericSettings.quad_tol),
        phi_eps=n.number("phi_eps", NumericSettings.phi_eps),
    )

    o = _Reader(parser, "output", lines, OUTPUT_KEYS)
    formats = tuple(f.strip().lower() for f in o.text("formats", ",".join(FORMATS)).split(",") if f.strip())
    for fmt in formats:
        if fmt not in FORMATS:
            raise ConfigError(f"unknown output format {fmt!r}; allowed: {', '.join(FORMATS)}", o.line("formats"))
    output = OutputSettings(csv=o.text("csv", OutputSettings.csv), json=o.text("json", OutputSettings.json),
                            formats=formats)

    potential = PotentialSpec(v11=v11, v22=v22).check_assumption(alpha)
    return RunConfig(alpha=alpha, potential=potential, terms=sources, sweep=sweep, numerics=numerics, output=output)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from None
    return parse_config(text)
