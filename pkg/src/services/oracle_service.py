"""Independent verification paths.

Each check here reaches its number by a different route from the module it
checks: tanh-sinh quadrature (mpmath) for the residue identity, series terms
for the Bessel products, a midpoint rule for U and a finite-volume radial
eigensolver for bound states.  Only the special functions are shared.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence

import mpmath
import numpy as np
from scipy import integrate, linalg

from services.coupling_service import CouplingMatrix
from services.potential_service import PotentialSpec
from services.specfun_service import bessel_k, gamma_real
from utils.common import loglog_slope
from utils.domain import FluxAlpha, NoEigenvalue, SpectralParameter, SpinChannel
from utils.errors import DomainError

FD_R_MIN = 1e-4
FD_R_MAX = 400.0
FD_POINTS = 4000
BOUNDARY_CONDITIONS = ("maximal", "friedrichs")


def residue_residual(alpha, phi) -> float:
    """|2 pi C(phi) - sin(pi a)/pi e^{i a phi} int e^{-a s}/(1 + e^{-s + i phi}) ds|."""
    flux = FluxAlpha.of(alpha)
    phi = float(phi)
    if not (-2.0 * math.pi < phi < 2.0 * math.pi):
        raise DomainError(f"phi={phi} outside (-2pi, 2pi)")
    if abs(abs(phi) - math.pi) <= 1e-3:
        raise DomainError(f"phi={phi} too close to +-pi")
    a = flux.alpha
    if abs(phi) < math.pi:
        two_pi_c = 1.0
    else:
        two_pi_c = complex(mpmath.exp(2j * mpmath.pi * a * (1 if phi > 0 else -1)))

    with mpmath.workdps(30):
        eip = mpmath.exp(1j * mpmath.mpf(phi))

        def integrand(s):
            return mpmath.exp(-a * s) / (1 + mpmath.exp(-s) * eip)

        total = mpmath.quad(integrand, [-mpmath.inf, -1, 0, 1, mpmath.inf], method="tanh-sinh")
        rhs = mpmath.sin(mpmath.pi * a) / mpmath.pi * mpmath.exp(1j * a * mpmath.mpf(phi)) * total
        return float(abs(two_pi_c - complex(rhs)))


def kk_expansion(alpha, z, r, r0, spin):
    """Three-term small-z expansion of K_nu(kappa r) K_nu(kappa r0)."""
    nu = SpinChannel.of(spin).nu(FluxAlpha.of(alpha))
    sp = SpectralParameter.of(z)
    g_plus = gamma_real(nu)
    g_minus = gamma_real(1.0 - nu) / (-nu)
    x = -sp.z * r * r0 / 4.0
    leading = (g_plus / 2.0) ** 2 * x ** (-nu)
    cross = g_plus * g_minus / 4.0 * ((r / r0) ** nu + (r0 / r) ** nu)
    third = (g_minus / 2.0) ** 2 * x ** nu
    return complex(leading + cross + third)


def kk_product_residual(alpha, z, r, r0, spin) -> float:
    flux = FluxAlpha.of(alpha)
    sp = SpectralParameter.of(z)
    nu = SpinChannel.of(spin).nu(flux)
    kappa = sp.kappa.real if sp.is_real else sp.kappa
    exact = bessel_k(nu, kappa * r) * bessel_k(nu, kappa * r0)
    return float(abs(exact - kk_expansion(flux, sp, r, r0, spin)))


def brute_U(alpha, potential: PotentialSpec, n=512):
    """U by a midpoint rule on polar cells uniform in u = r^(2 - 2 nu) and theta."""
    if int(n) < 64:
        raise DomainError(f"brute_U needs n >= 64, got {n}")
    flux = FluxAlpha.of(alpha)
    n = int(n)
    n_theta = max(8, n // 16)
    theta = -math.pi + 2.0 * math.pi * (np.arange(n_theta) + 0.5) / n_theta
    u = np.zeros((2, 2), dtype=complex)
    for spin in SpinChannel:
        if potential.is_empty(spin):
            continue
        nu = spin.nu(flux)
        beta = 2.0 - 2.0 * nu
        end = potential.support_radius(spin)
        radial_edges = [0.0] + potential.breakpoints(spin, r_end=end) + [end]
        edges = np.asarray(radial_edges) ** beta
        counts = np.maximum(1, np.round(n * np.diff(edges) / edges[-1]).astype(int))
        # |D|^2 r dr = C Gamma(nu)^2 2^(2 nu) du / beta
        d = math.sqrt(flux.c_alpha * 2.0 ** (2.0 * nu) / beta) * gamma_real(nu) * (
            np.exp(1j * theta) if spin is SpinChannel.PLUS else np.ones(n_theta))
        total = 0.0 + 0.0j
        for lo, hi, count in zip(edges[:-1], edges[1:], counts):
            du = (hi - lo) / count
            r = (lo + du * (np.arange(count) + 0.5)) ** (1.0 / beta)
            cell = potential.evaluate(r, spin)[:, None] * (d * np.conj(d))[None, :]
            total += du * (2.0 * math.pi / n_theta) * np.sum(cell)
        u[spin.index, spin.index] = total
    return CouplingMatrix(u=u, alpha=flux.alpha)


@dataclass(frozen=True)
class RadialGrid1D:
    r_min: float = FD_R_MIN
    r_max: float = FD_R_MAX
    n: int = FD_POINTS
    bc: str = "maximal"
    breakpoints: tuple = ()

    def __post_init__(self):
        if not (0.0 < self.r_min < self.r_max) or int(self.n) < 8:
            raise DomainError(f"invalid radial grid r_min={self.r_min}, r_max={self.r_max}, n={self.n}")
        if self.bc not in BOUNDARY_CONDITIONS:
            raise DomainError(f"bc must be one of {BOUNDARY_CONDITIONS}, got {self.bc!r}")

    @property
    def faces(self):
        inner = [b for b in self.breakpoints if self.r_min < b < self.r_max]
        return np.unique(np.concatenate([[0.0], np.geomspace(self.r_min, self.r_max, int(self.n)), inner]))

    @property
    def nodes(self):
        f = self.faces
        centers = np.sqrt(f[1:-1] * f[2:])
        return np.concatenate([[0.5 * f[1]], centers])

    def for_potential(self, potential: PotentialSpec) -> RadialGrid1D:
        return RadialGrid1D(self.r_min, self.r_max, self.n, self.bc,
                            tuple(potential.breakpoints(r_end=self.r_max)))


def radial_fd_ground_state(alpha, eps, potential: PotentialSpec, spin, grid: RadialGrid1D = None):
    """Lowest eigenvalue of the channel operator carrying the virtual state of a spin block.

    With f = r^(-+mu) g the operator becomes -(p g')'/w + eps v g with
    p = w = r^(1 -+ 2 mu); zero flux at r = 0 admits exactly f ~ r^(-+mu).
    """
    flux = FluxAlpha.of(alpha)
    spin = SpinChannel.of(spin)
    if not potential.is_real:
        raise DomainError("the radial oracle needs a real potential")
    grid = (grid or RadialGrid1D()).for_potential(potential)
    mu = spin.nu(flux)
    power = 1.0 - 2.0 * mu if grid.bc == "maximal" else 1.0 + 2.0 * mu
    faces = grid.faces
    centers = grid.nodes
    mass = (faces[1:] ** (power + 1.0) - faces[:-1] ** (power + 1.0)) / (power + 1.0)
    conductance = faces[1:-1] ** power / np.diff(centers)
    outer = faces[-1] ** power / (faces[-1] - centers[-1])

    diagonal = np.zeros(centers.size)
    diagonal[:-1] += conductance
    diagonal[1:] += conductance
    diagonal[-1] += outer
    v = potential.evaluate(centers, spin).real
    diagonal += float(eps) * v * mass

    scale = 1.0 / np.sqrt(mass)
    main = diagonal * scale ** 2
    off = -conductance * scale[:-1] * scale[1:]
    # entries near r_min reach 1e10; the default bisection tolerance eps*norm(T) would swamp the ground state
    lowest = linalg.eigh_tridiagonal(main, off, select="i", select_range=(0, 0), eigvals_only=True,
                                     lapack_driver="stebz", tol=np.finfo(float).tiny)[0]
    if lowest >= 0.0:
        return NoEigenvalue(f"no negative eigenvalue ({grid.bc} condition, eps={eps})")
    return float(lowest)


def cutoff_bump(t):
    """Smooth xi with xi = 1 on [0, 1] and xi = 0 on [2, inf)."""
    t = np.asarray(t, dtype=float)
    inside = (t > 1.0) & (t < 2.0)
    a, b = _bump_parts(np.where(inside, t, 1.5))
    return np.where(t <= 1.0, 1.0, np.where(inside, a / (a + b), 0.0))


def cutoff_bump_derivative(t):
    t = np.asarray(t, dtype=float)
    inside = (t > 1.0) & (t < 2.0)
    s = np.where(inside, t, 1.5)
    a, b = _bump_parts(s)
    slope = -a * b * (1.0 / (2.0 - s) ** 2 + 1.0 / (s - 1.0) ** 2) / (a + b) ** 2
    return np.where(inside, slope, 0.0)


def _bump_parts(s):
    return np.exp(-1.0 / (2.0 - s)), np.exp(-1.0 / (s - 1.0))


@dataclass(frozen=True)
class CutoffDecay:
    n: List[float]
    values: List[float]
    slope: float
    r_squared: float


def cutoff_form_decay(alpha, spin, n_list: Sequence[float]) -> CutoffDecay:
    flux = FluxAlpha.of(alpha)
    spin = SpinChannel.of(spin)
    n_values = [float(n) for n in n_list]
    if not n_values or any(n <= 0.0 for n in n_values) or any(b <= a for a, b in zip(n_values, n_values[1:])):
        raise DomainError("n_list must be increasing and positive")
    power = 2.0 * flux.alpha - 1.0 if spin is SpinChannel.PLUS else 1.0 - 2.0 * flux.alpha

    values = []
    for n in n_values:
        val, _ = integrate.quad(lambda r: r ** power * cutoff_bump_derivative(r / n) ** 2 / n ** 2,
                                n, 2.0 * n, epsabs=0.0, epsrel=1e-12, limit=200)
        values.append(2.0 * math.pi * val)
    slope, r2 = loglog_slope(n_values, values) if len(values) > 1 else (math.nan, math.nan)
    return CutoffDecay(n=n_values, values=values, slope=slope, r_squared=r2)
