from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Tuple

import numpy as np
from scipy import integrate

from utils.domain import FluxAlpha, SpinChannel
from utils.errors import DomainError, IntegrationError

SHAPES = ("gaussian", "annular-gaussian", "disk-indicator")
# exp(-64) is below double precision relative to the peak
_GAUSSIAN_REACH = 8.0


@dataclass(frozen=True)
class RadialTerm:
    shape: str
    amplitude: complex
    width: float
    center_radius: float = 0.0

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise DomainError(f"unknown shape {self.shape!r}, expected one of {', '.join(SHAPES)}")
        if not (self.width > 0.0 and math.isfinite(self.width)):
            raise DomainError(f"width must be positive, got {self.width}")
        if not (self.center_radius >= 0.0 and math.isfinite(self.center_radius)):
            raise DomainError(f"center_radius must be >= 0, got {self.center_radius}")
        if self.shape == "gaussian" and self.center_radius != 0.0:
            raise DomainError("gaussian terms are centred at the origin; use annular-gaussian")
        object.__setattr__(self, "amplitude", complex(self.amplitude))

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.shape == "disk-indicator":
            inside = (r >= self.center_radius) & (r <= self.center_radius + self.width)
            return np.where(inside, self.amplitude, 0.0 + 0.0j)
        return self.amplitude * np.exp(-((r - self.center_radius) / self.width) ** 2)

    @property
    def support_radius(self) -> float:
        if self.shape == "disk-indicator":
            return self.center_radius + self.width
        return self.center_radius + _GAUSSIAN_REACH * self.width

    @property
    def breakpoints(self) -> Tuple[float, ...]:
        if self.shape == "disk-indicator":
            inner = (self.center_radius,) if self.center_radius > 0.0 else ()
            return inner + (self.center_radius + self.width,)
        if self.shape == "annular-gaussian":
            return (self.center_radius,)
        return ()


@dataclass(frozen=True)
class PotentialSpec:
    """Diagonal potential diag(v11, v22), each entry a sum of radial terms."""

    v11: Tuple[RadialTerm, ...] = ()
    v22: Tuple[RadialTerm, ...] = ()
    metadata: Dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "v11", tuple(self.v11))
        object.__setattr__(self, "v22", tuple(self.v22))

    def terms(self, spin) -> Tuple[RadialTerm, ...]:
        return self.v11 if SpinChannel.of(spin) is SpinChannel.PLUS else self.v22

    def evaluate(self, r, spin):
        r = np.asarray(r, dtype=float)
        total = np.zeros(r.shape, dtype=complex)
        for term in self.terms(spin):
            total = total + term(r)
        return total

    @property
    def is_real(self) -> bool:
        return all(t.amplitude.imag == 0.0 for t in self.v11 + self.v22)

    def is_empty(self, spin) -> bool:
        return all(t.amplitude == 0 for t in self.terms(spin))

    def support_radius(self, spin=None) -> float:
        terms = self.v11 + self.v22 if spin is None else self.terms(spin)
        return max((t.support_radius for t in terms), default=0.0)

    def breakpoints(self, spin=None, r_end=None):
        terms = self.v11 + self.v22 if spin is None else self.terms(spin)
        points = sorted({p for t in terms for p in t.breakpoints if p > 0.0})
        if r_end is not None:
            points = [p for p in points if p < r_end]
        return points

    def radial_integral(self, spin, weight_power, use_modulus=False):
        """Integral over r in (0, inf) of v(r) r**weight_power (complex unless use_modulus)."""
        terms = self.terms(spin)
        if not terms:
            return 0.0 + 0.0j
        end = self.support_radius(spin)
        edges = [0.0] + self.breakpoints(spin, r_end=end) + [end]

        def value(r):
            v = self.evaluate(r, spin)
            return np.abs(v) if use_modulus else v

        return _piecewise_integral(value, edges, weight_power)

    def check_assumption(self, alpha) -> PotentialSpec:
        """Record the moment integrability data for nu = max(alpha, 1 - alpha)."""
        flux = FluxAlpha.of(alpha)
        nu = max(flux.alpha, 1.0 - flux.alpha)
        end = self.support_radius()
        edges = [0.0] + self.breakpoints(r_end=end) + [end] if end > 0.0 else [0.0, 1.0]

        def modulus(r):
            return np.maximum(np.abs(self.evaluate(r, "plus")), np.abs(self.evaluate(r, "minus")))

        two_pi = 2.0 * math.pi
        m_plus = two_pi * _piecewise_integral(modulus, edges, 1.0 + 2.0 * nu).real
        m_minus = two_pi * _piecewise_integral(modulus, edges, 1.0 - 2.0 * nu).real
        l2 = two_pi * _piecewise_integral(lambda r: modulus(r) ** 2, edges, 1.0).real
        ok = all(math.isfinite(x) for x in (m_plus, m_minus, l2))
        metadata = dict(self.metadata)
        metadata.update({"nu": nu, "M_plus": m_plus, "M_minus": m_minus, "L2": l2, "assumption_ok": ok})
        if not ok:
            print(f"⚠ Potential moments not finite: M+={m_plus}, M-={m_minus}, L2={l2}")
        return replace(self, metadata=metadata)


def _piecewise_integral(func, edges, weight_power):
    """Sum of quad over consecutive edges; the first panel carries r**p as an algebraic weight."""
    total = 0.0 + 0.0j
    for k, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        if b <= a:
            continue
        for part in (np.real, np.imag):
            def integrand(r, part=part):
                return float(part(func(r)))
            if k == 0 and a == 0.0:
                val, err = integrate.quad(integrand, a, b, weight="alg", wvar=(weight_power, 0.0),
                                          epsabs=0.0, epsrel=1e-12, limit=200)
            else:
                val, err = integrate.quad(lambda r: integrand(r) * r ** weight_power, a, b,
                                          epsabs=0.0, epsrel=1e-12, limit=200)
            if not math.isfinite(val):
                raise IntegrationError(f"radial integral diverged on [{a}, {b}]")
            total += val if part is np.real else 1j * val
    return total


@dataclass(frozen=True)
class FactorPair:
    """Pointwise factors with V = B A: A = |V|^(1/2), B = phase(V) |V|^(1/2)."""

    potential: PotentialSpec

    def a(self, r):
        return np.stack([polar_split(self.potential.evaluate(r, s))[0] for s in ("plus", "minus")])

    def b(self, r):
        return np.stack([polar_split(self.potential.evaluate(r, s))[1] for s in ("plus", "minus")])

    def pair(self, r, spin):
        return polar_split(self.potential.evaluate(r, spin))


def polar_split(v):
    v = np.asarray(v, dtype=complex)
    modulus = np.abs(v)
    a = np.sqrt(modulus)
    phase = np.where(modulus > 0.0, v / np.where(modulus > 0.0, modulus, 1.0), 0.0)
    return a, phase * a


def polar_factors(potential: PotentialSpec) -> FactorPair:
    return FactorPair(potential)
