"""Coupling matrices U, W(eps) and the weak-coupling eigenvalue equation."""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
from scipy import linalg

from services.bs_service import BirmanSchwingerService, QuadGrid, build_grid, hs_norm
from services.potential_service import PotentialSpec, polar_split
from services.specfun_service import gamma_real
from utils.domain import FluxAlpha, PolarPoint, SpectralParameter, SpinChannel
from utils.errors import DomainError, IntegrationError, NeumannSeriesError

NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 50
# arguments closer than this to the admissible sector edge count as outside
_SECTOR_MARGIN = 1e-12

ADMISSIBLE = "admissible"
INADMISSIBLE = "inadmissible"
ABSENT = "absent"
DIVERGED = "diverged"


@dataclass(frozen=True)
class CouplingMatrix:
    u: np.ndarray
    alpha: float
    eps: float = 0.0
    w_eps: Optional[np.ndarray] = None

    @property
    def w(self):
        return self.u if self.w_eps is None else self.w_eps

    @property
    def a0(self) -> complex:
        return complex(self.u[0, 0])

    @property
    def b0(self) -> complex:
        return complex(self.u[1, 1])

    @property
    def a(self) -> complex:
        return complex(self.w[0, 0])

    @property
    def b(self) -> complex:
        return complex(self.w[1, 1])

    @property
    def c(self) -> complex:
        return complex(np.linalg.det(self.w))

    @property
    def correction_norm(self) -> float:
        return float(np.linalg.norm(self.w - self.u, 2))


@dataclass(frozen=True)
class AsymptoticPair:
    z_plus: Optional[complex]
    z_minus: Optional[complex]
    flags: Dict[str, str] = field(default_factory=dict)

    def get(self, spin):
        return self.z_plus if SpinChannel.of(spin) is SpinChannel.PLUS else self.z_minus


@dataclass(frozen=True)
class ImplicitRoots:
    roots: List[complex]
    spins: List[str]
    flags: Dict[str, str] = field(default_factory=dict)
    coupling: Optional[CouplingMatrix] = None

    def get(self, spin) -> Optional[complex]:
        name = SpinChannel.of(spin).value
        return self.roots[self.spins.index(name)] if name in self.spins else None

    def __len__(self):
        return len(self.roots)


def _branch_root(rhs: complex, power: float):
    """zeta with zeta**power = rhs on the principal branch, or None."""
    if rhs == 0:
        return None
    if abs(cmath.phase(rhs)) >= power * math.pi - _SECTOR_MARGIN:
        return None
    return cmath.exp(cmath.log(rhs) / power)


class CouplingService:

    def __init__(self, alpha, bs: Optional[BirmanSchwingerService] = None, verbose=False, **bs_options):
        self.flux = FluxAlpha.of(alpha)
        self.bs = bs or BirmanSchwingerService(self.flux, verbose=verbose, **bs_options)
        self.verbose = verbose

    @property
    def alpha(self):
        return self.flux.alpha

    def _d_radial(self, r, spin):
        spin = SpinChannel.of(spin)
        nu = spin.nu(self.flux)
        return math.sqrt(self.flux.c_alpha) * gamma_real(nu) * (np.asarray(r, dtype=float) / 2.0) ** (-nu)

    def d_matrix(self, w: PolarPoint):
        if w.r <= 0.0:
            raise DomainError("D(w) needs |w| > 0")
        plus = complex(self._d_radial(w.r, "plus")) * cmath.exp(1j * w.theta)
        minus = complex(self._d_radial(w.r, "minus"))
        return np.diag([plus, minus]).astype(complex)

    def compute_U(self, potential: PotentialSpec) -> CouplingMatrix:
        """Diagonal of the integral of D V D*; the angular phases cancel."""
        u = np.zeros((2, 2), dtype=complex)
        for spin in SpinChannel:
            if potential.is_empty(spin):
                continue
            nu = spin.nu(self.flux)
            integral = potential.radial_integral(spin, 1.0 - 2.0 * nu)
            if not cmath.isfinite(integral):
                raise IntegrationError(f"moment of v in the {spin.value} block diverges")
            u[spin.index, spin.index] = (self.flux.c_alpha * gamma_real(nu) ** 2 * 2.0 * math.pi
                                         * 2.0 ** (2.0 * nu) * integral)
        return CouplingMatrix(u=u, alpha=self.alpha)

    def compute_W(self, eps, z, potential: PotentialSpec, grid: Optional[QuadGrid] = None,
                  u: Optional[CouplingMatrix] = None) -> CouplingMatrix:
        """U + U_1(eps) from the regular-part channel kernels.

        The grid value at eps is offset by its own eps = 0 value so that the
        quadrature error of U cancels.
        """
        eps = float(eps)
        u = u or self.compute_U(potential)
        if eps == 0.0:
            return CouplingMatrix(u=u.u, alpha=self.alpha, eps=0.0, w_eps=u.u.copy())
        grid = grid or build_grid(potential)
        q = self.bs.assemble_channels(z, 1.0, potential, grid, regular=True)
        norm = hs_norm(q)
        if eps * norm >= 1.0:
            raise NeumannSeriesError(f"eps*||Q_z||_HS = {eps * norm:.3f} >= 1 at z={complex(z)}")
        root = np.sqrt(grid.radial_measure)
        w = u.u.copy()
        for spin in SpinChannel:
            a, b = polar_split(potential.evaluate(grid.r, spin))
            if not np.any(a):
                continue
            d = self._d_radial(grid.r, spin)
            column = root * a * d
            row = root * d * b
            block = q.block(f"{spin.value}:{spin.critical_m}")
            solved = linalg.solve(np.eye(grid.n_r) + eps * block, column)
            shift = 2.0 * math.pi * (row @ solved - row @ column)
            w[spin.index, spin.index] += shift
        if self.verbose:
            print(f"✓ W(eps={eps:.4g}) at z={complex(z):.6g}: ||Q_z||_HS={norm:.4f}")
        return CouplingMatrix(u=u.u, alpha=self.alpha, eps=eps, w_eps=w)

    def implicit_residual(self, eps, a, b, c, z) -> float:
        zeta = -SpectralParameter.of(z).z
        alpha = self.alpha
        value = eps * eps * c / zeta + eps * (a * zeta ** (alpha - 1.0) + b * zeta ** (-alpha)) + 1.0
        return float(abs(value))

    def _factorized(self, eps, a, b):
        found = {}
        for spin, coeff, power in (("plus", a, 1.0 - self.alpha), ("minus", b, self.alpha)):
            if coeff == 0:
                found[spin] = (None, ABSENT)
                continue
            zeta = _branch_root(-eps * complex(coeff), power)
            found[spin] = (None, INADMISSIBLE) if zeta is None else (zeta, ADMISSIBLE)
        return found

    def _newton(self, eps, a, b, c, zeta):
        alpha = self.alpha
        for _ in range(NEWTON_MAX_ITER):
            g = eps * eps * c + eps * (a * zeta ** alpha + b * zeta ** (1.0 - alpha)) + zeta
            if abs(g / zeta) <= NEWTON_TOL:
                return zeta
            dg = eps * (a * alpha * zeta ** (alpha - 1.0) + b * (1.0 - alpha) * zeta ** (-alpha)) + 1.0
            zeta = zeta - g / dg
            if zeta == 0 or (zeta.imag == 0.0 and zeta.real < 0.0):
                return None
        return None

    def implicit_roots(self, eps, a, b, c) -> ImplicitRoots:
        eps = float(eps)
        if not eps > 0.0:
            raise DomainError(f"eps must be positive, got {eps}")
        a, b, c = complex(a), complex(b), complex(c)
        found = self._factorized(eps, a, b)
        general = abs(c - a * b) > NEWTON_TOL * max(1.0, abs(a * b))
        roots, spins, flags = [], [], {}
        for spin, (zeta, flag) in found.items():
            if general and zeta is not None:
                zeta = self._newton(eps, a, b, c, zeta)
                if zeta is None:
                    print(f"⚠ Newton iteration for the {spin} root diverged; root dropped")
                    flag = DIVERGED
            flags[spin] = flag
            if zeta is not None:
                roots.append(complex(-zeta))
                spins.append(spin)
        return ImplicitRoots(roots=roots, spins=spins, flags=flags)

    def asymptotic_eigenvalues(self, eps, u: CouplingMatrix) -> AsymptoticPair:
        eps = float(eps)
        if eps == 0.0:
            return AsymptoticPair(z_plus=0j, z_minus=0j, flags={"plus": ADMISSIBLE, "minus": ADMISSIBLE})
        found = self._factorized(eps, u.a0, u.b0)
        z = {spin: (None if zeta is None else complex(-zeta)) for spin, (zeta, _) in found.items()}
        return AsymptoticPair(z_plus=z["plus"], z_minus=z["minus"],
                              flags={spin: flag for spin, (_, flag) in found.items()})

    def self_consistent_roots(self, eps, potential: PotentialSpec, grid: Optional[QuadGrid] = None,
                              iterations=2) -> ImplicitRoots:
        """Roots with W(eps) re-evaluated at the current iterate of each root."""
        grid = grid or build_grid(potential)
        u = self.compute_U(potential)
        start = self.implicit_roots(eps, u.a0, u.b0, u.a0 * u.b0)
        current = dict(zip(start.spins, start.roots))
        flags = dict(start.flags)
        w = u.u.copy()
        for _ in range(int(iterations)):
            for spin, z in list(current.items()):
                channel = SpinChannel.of(spin)
                coupling = self.compute_W(eps, z, potential, grid, u=u)
                w[channel.index, channel.index] = coupling.w[channel.index, channel.index]
                power = 1.0 - self.alpha if channel is SpinChannel.PLUS else self.alpha
                zeta = _branch_root(-eps * complex(w[channel.index, channel.index]), power)
                if zeta is None:
                    flags[spin] = INADMISSIBLE
                    del current[spin]
                    continue
                current[spin] = complex(-zeta)
        spins = [s for s in ("plus", "minus") if s in current]
        coupling = CouplingMatrix(u=u.u, alpha=self.alpha, eps=float(eps), w_eps=w)
        return ImplicitRoots(roots=[current[s] for s in spins], spins=spins, flags=flags, coupling=coupling)
