import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from services.bs_service import BirmanSchwingerService, build_grid
from services.coupling_service import CouplingService
from utils.common import format_duration, loglog_slope
from utils.domain import NoEigenvalue
from utils.errors import SpectralError

SOURCES = ("asym", "impl", "bs")
SPINS = ("plus", "minus")
DEFAULT_BRACKET = (-10.0, -1e-12)


@dataclass
class SweepRow:
    eps: float
    z_asym_plus: Optional[complex] = None
    z_asym_minus: Optional[complex] = None
    z_impl_plus: Optional[complex] = None
    z_impl_minus: Optional[complex] = None
    z_bs_plus: Optional[complex] = None
    z_bs_minus: Optional[complex] = None
    rel_err_plus: Optional[float] = None
    rel_err_minus: Optional[float] = None
    flags: Dict[str, str] = field(default_factory=dict)
    seconds: float = 0.0
    error: Optional[str] = None

    def value(self, source, spin) -> Optional[complex]:
        return getattr(self, f"z_{source}_{spin}")

    @property
    def failed(self) -> bool:
        return self.error is not None and all(self.value(s, p) is None for s in SOURCES for p in SPINS)

    def fill_relative_errors(self):
        for spin in SPINS:
            bs, asym = self.value("bs", spin), self.value("asym", spin)
            rel = None if bs is None or asym is None or asym == 0 else abs(bs - asym) / abs(asym)
            setattr(self, f"rel_err_{spin}", rel)


@dataclass
class SweepResult:
    rows: List[SweepRow]
    summary: Dict[str, Dict[str, float]]

    @property
    def all_failed(self) -> bool:
        return bool(self.rows) and all(row.failed for row in self.rows)


def exponent_summary(rows: List[SweepRow], alpha) -> Dict[str, Dict[str, float]]:
    """Slope and R^2 of log|z| against log eps per source and spin."""
    expected = {"plus": 1.0 / (1.0 - alpha), "minus": 1.0 / alpha}
    summary = {}
    for source in SOURCES:
        for spin in SPINS:
            points = [(r.eps, abs(r.value(source, spin))) for r in rows
                      if r.value(source, spin) is not None and r.value(source, spin) != 0]
            if len(points) < 2:
                continue
            eps, mag = zip(*points)
            slope, r2 = loglog_slope(eps, mag)
            summary[f"{source}_{spin}"] = {"slope": slope, "r_squared": r2, "expected": expected[spin],
                                           "points": len(points)}
    return summary


class SweepManager:

    def __init__(self, config, threads=1, verbose=False):
        self.config = config
        self.threads = max(1, int(threads))
        self.verbose = verbose
        n = config.numerics
        self.bs = BirmanSchwingerService(config.alpha, quad_tol=n.quad_tol, phi_eps=n.phi_eps, m_max=n.m_max,
                                         verbose=verbose)
        self.coupling = CouplingService(config.alpha, bs=self.bs, verbose=verbose)
        self.grid = build_grid(config.potential, r_max=n.r_max, n_r=n.n_r, n_theta=n.n_theta)
        self._u = None

    @property
    def u(self):
        if self._u is None:
            self._u = self.coupling.compute_U(self.config.potential)
        return self._u

    def _bracket(self, row):
        known = [z.real for z in (row.z_asym_plus, row.z_asym_minus)
                 if z is not None and z.imag == 0.0 and z.real < 0.0]
        if not known:
            return DEFAULT_BRACKET
        return 50.0 * min(known), max(known) / 50.0

    def compute_row(self, eps) -> SweepRow:
        started = time.perf_counter()
        row = SweepRow(eps=float(eps))
        errors = []
        potential = self.config.potential
        sweep = self.config.sweep

        try:
            asym = self.coupling.asymptotic_eigenvalues(eps, self.u)
            row.z_asym_plus, row.z_asym_minus = asym.z_plus, asym.z_minus
            row.flags.update({f"asym_{k}": v for k, v in asym.flags.items()})
        except SpectralError as e:
            errors.append(f"asym: {e}")

        try:
            if sweep.correct_w:
                roots = self.coupling.self_consistent_roots(eps, potential, self.grid)
            else:
                roots = self.coupling.implicit_roots(eps, self.u.a0, self.u.b0, self.u.a0 * self.u.b0)
            row.z_impl_plus, row.z_impl_minus = roots.get("plus"), roots.get("minus")
            row.flags.update({f"impl_{k}": v for k, v in roots.flags.items()})
        except SpectralError as e:
            errors.append(f"impl: {e}")

        if sweep.bs_path != "off" and potential.is_real:
            try:
                found = self.bs.find_bound_states(eps, potential, self._bracket(row), sweep.bs_path, self.grid)
                for spin, z in found.items():
                    if isinstance(z, NoEigenvalue):
                        row.flags[f"bs_{spin}"] = "none"
                    else:
                        setattr(row, f"z_bs_{spin}", complex(z))
                        row.flags[f"bs_{spin}"] = "found"
            except SpectralError as e:
                errors.append(f"bs: {e}")
        elif sweep.bs_path != "off":
            row.flags["bs"] = "skipped-complex"

        row.fill_relative_errors()
        row.error = "; ".join(errors) if errors else None
        row.seconds = time.perf_counter() - started
        if row.error:
            print(f"✗ eps={eps:.6g}: {row.error}")
        elif self.verbose:
            print(f"✓ eps={eps:.6g} done in {format_duration(row.seconds)}")
        return row

    def run(self) -> SweepResult:
        eps_values = self.config.eps_values
        if self.verbose:
            print(f"Sweeping {len(eps_values)} eps value(s) at alpha={self.config.alpha} on {self.threads} thread(s)")
        if self.threads > 1 and len(eps_values) > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                rows = list(pool.map(self.compute_row, eps_values))
        else:
            rows = [self.compute_row(eps) for eps in eps_values]
        rows.sort(key=lambda r: r.eps)
        summary = exponent_summary(rows, self.config.alpha)
        for key, fit in summary.items():
            marker = "✓" if np.isclose(fit["slope"], fit["expected"], rtol=0.05) else "⚠"
            print(f"{marker} {key}: slope {fit['slope']:.4f} (expected {fit['expected']:.4f}), R^2={fit['r_squared']:.6f}")
        return SweepResult(rows=rows, summary=summary)
