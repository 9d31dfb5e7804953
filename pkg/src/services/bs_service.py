"""Birman-Schwinger operators eps A (H - z)^{-1} B on quadrature grids."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import linalg, optimize, special

from services.green_service import PHI_EPS, QUAD_TOL, GreenService
from services.potential_service import PotentialSpec, polar_split
from services.specfun_service import bessel_ik_product, gamma_real
from utils.common import principal_power
from utils.domain import NoEigenvalue, SpectralParameter, SpinChannel
from utils.errors import DomainError, UnsupportedPotentialError

R_MAX = 12.0
N_R = 96
N_THETA = 64
M_MAX = 12
PANEL_ORDER = 8
# eigenvalues with a larger imaginary part are not counted as crossings of -1
_IMAG_TOL = 1e-9


@dataclass(frozen=True)
class QuadGrid:
    r: np.ndarray
    r_weights: np.ndarray
    theta: np.ndarray
    r_max: float

    @property
    def n_r(self) -> int:
        return self.r.size

    @property
    def n_theta(self) -> int:
        return self.theta.size

    @property
    def d_theta(self) -> float:
        return 2.0 * math.pi / self.n_theta

    @property
    def radial_measure(self):
        """Weights of r dr."""
        return self.r_weights * self.r

    @property
    def weights(self):
        return np.repeat(self.radial_measure * self.d_theta, self.n_theta)


def build_grid(potential: Optional[PotentialSpec] = None, r_max=R_MAX, n_r=N_R, n_theta=N_THETA,
               order=PANEL_ORDER, graded_panels=3) -> QuadGrid:
    """Composite Gauss-Legendre radial rule with panels split at the potential's breakpoints.

    The grid ends at the support radius of the potential when that is inside
    r_max. The first panel is subdivided geometrically toward r = 0.
    """
    if not (r_max > 0.0 and math.isfinite(r_max)) or int(n_r) < 1 or int(n_theta) < 1:
        raise DomainError(f"invalid grid r_max={r_max}, n_r={n_r}, n_theta={n_theta}")
    end = float(r_max)
    inner = []
    if potential is not None and potential.support_radius() > 0.0:
        end = min(end, potential.support_radius())
        inner = potential.breakpoints(r_end=end)
    edges = np.asarray([0.0] + list(inner) + [end])
    order = max(1, min(int(order), int(n_r)))
    lengths = np.diff(edges)
    n_panels = max(math.ceil(int(n_r) / order), lengths.size)
    counts = np.maximum(1, np.floor(n_panels * lengths / end).astype(int))
    while counts.sum() < n_panels:
        counts[np.argmax(lengths / counts)] += 1

    panels = []
    for k, (a, b, c) in enumerate(zip(edges[:-1], edges[1:], counts)):
        n_geo = min(int(graded_panels), c - 1) if k == 0 else 0
        cuts = np.linspace(a, b, c - n_geo + 1)
        if n_geo > 0:
            geo = cuts[1] * 0.5 ** np.arange(n_geo, 0, -1)
            cuts = np.concatenate([[0.0], geo, cuts[1:]])
        panels.extend(zip(cuts[:-1], cuts[1:]))

    x, w = np.polynomial.legendre.leggauss(order)
    a, b = np.asarray(panels).T
    half = 0.5 * (b - a)
    r = (half[:, None] * x[None, :] + 0.5 * (a + b)[:, None]).ravel()
    r_weights = (half[:, None] * w[None, :]).ravel()
    theta = -math.pi + 2.0 * math.pi * (np.arange(int(n_theta)) + 0.5) / int(n_theta)
    return QuadGrid(r=r, r_weights=r_weights, theta=theta, r_max=end)


@dataclass(frozen=True)
class KernelMatrix:
    """Block-diagonal symmetrized kernel; one block per spin or per angular channel."""

    blocks: Tuple[np.ndarray, ...]
    labels: Tuple[str, ...]
    z: complex
    eps: float
    alpha: float
    grid: Optional[QuadGrid] = None

    @property
    def shape(self):
        size = sum(b.shape[0] for b in self.blocks)
        return size, size

    def block(self, label):
        return self.blocks[self.labels.index(label)]

    def eigenvalues(self, labels: Optional[Sequence[str]] = None):
        """Eigenvalues of the selected blocks, ordered by decreasing modulus."""
        chosen = [b for b, lab in zip(self.blocks, self.labels) if labels is None or lab in labels]
        values = [linalg.eigvals(b) if np.any(b) else np.zeros(b.shape[0], dtype=complex) for b in chosen]
        values = np.concatenate(values) if values else np.zeros(0, dtype=complex)
        return values[np.argsort(-np.abs(values), kind="stable")]


def hs_norm(kernel) -> float:
    blocks = kernel.blocks if isinstance(kernel, KernelMatrix) else (np.asarray(kernel),)
    return float(math.sqrt(sum(np.linalg.norm(b) ** 2 for b in blocks)))


def _one_minus_x_k1(x):
    """1 - x K_1(x), with its small-argument series where the difference cancels."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x < 1e-2
    xs = x[small]
    log_half = np.log(xs / 2.0) + np.euler_gamma
    out[small] = -(xs ** 2 / 2.0) * (log_half - 0.5) - (xs ** 4 / 16.0) * (log_half - 1.25)
    xl = x[~small]
    out[~small] = 1.0 - xl * special.k1(xl)
    return out


def k0_cell_average(kappa, width, height, order=24):
    """Mean of K_0(kappa |y|) over the rectangle [-w/2, w/2] x [-h/2, h/2].

    Integrated along rays from the centre, where the radial antiderivative is
    (1 - kappa rho K_1(kappa rho)) / kappa^2.
    """
    kappa = float(kappa)
    width = np.atleast_1d(np.asarray(width, dtype=float))
    height = np.atleast_1d(np.asarray(height, dtype=float))
    x, w = np.polynomial.legendre.leggauss(order)
    corner = np.arctan2(height, width)
    total = np.zeros(width.shape)
    for lo, hi, near in ((np.zeros_like(corner), corner, True), (corner, np.full_like(corner, 0.5 * math.pi), False)):
        half = 0.5 * (hi - lo)
        psi = half[:, None] * x[None, :] + (0.5 * (hi + lo))[:, None]
        if near:
            rho = 0.5 * width[:, None] / np.cos(psi)
        else:
            rho = 0.5 * height[:, None] / np.sin(psi)
        total += half * np.sum(w[None, :] * _one_minus_x_k1(kappa * rho), axis=1)
    return 4.0 * total / (kappa ** 2 * width * height)


class BirmanSchwingerService:

    def __init__(self, alpha, quad_tol=QUAD_TOL, phi_eps=PHI_EPS, m_max=M_MAX, threads=1, verbose=False):
        self.green = GreenService(alpha, quad_tol=quad_tol, phi_eps=phi_eps, threads=threads, verbose=verbose)
        self.flux = self.green.flux
        self.m_max = int(m_max)
        self.threads = max(1, int(threads))
        self.verbose = verbose

    @property
    def alpha(self):
        return self.flux.alpha

    def channels(self):
        return range(-self.m_max, self.m_max + 1)

    def channel_kernel(self, z, radii, m, spin, regular=False):
        """I_mu(kappa r<) K_nu(kappa r>) on radii x radii for angular channel m.

        The critical channel of the spin uses mu = -nu; with regular=True its
        leading (-z r r0 / 4)^{-nu} part is removed.
        """
        sp = SpectralParameter.of(z)
        spin = SpinChannel.of(spin)
        kappa = sp.kappa.real if sp.is_real else sp.kappa
        radii = np.asarray(radii, dtype=float)
        nu = abs(int(m) + self.alpha)
        critical = int(m) == spin.critical_m
        mu = -nu if critical else nu
        lo = np.minimum.outer(radii, radii)
        hi = np.maximum.outer(radii, radii)
        g = np.asarray(bessel_ik_product(mu, nu, kappa * lo, kappa * hi), dtype=complex)
        if regular and critical:
            prefactor = self.flux.sin_pi_alpha / (2.0 * math.pi) * gamma_real(nu) ** 2
            g = g - prefactor * principal_power(-sp.z * np.multiply.outer(radii, radii) / 4.0, -nu)
        return g

    def assemble_bs_radial_channel(self, z, eps, potential: PotentialSpec, m, spin,
                                   grid: Optional[QuadGrid] = None, regular=False) -> KernelMatrix:
        sp = SpectralParameter.of(z)
        spin = SpinChannel.of(spin)
        grid = grid or build_grid(potential)
        block = self._channel_block(sp, eps, potential, m, spin, grid, regular)
        return KernelMatrix(blocks=(block,), labels=(f"{spin.value}:{int(m)}",), z=sp.z, eps=float(eps),
                            alpha=self.alpha, grid=grid)

    def _channel_block(self, sp, eps, potential, m, spin, grid, regular):
        a, b = polar_split(potential.evaluate(grid.r, spin))
        if not np.any(a):
            return np.zeros((grid.n_r, grid.n_r), dtype=complex)
        root = np.sqrt(grid.radial_measure)
        g = self.channel_kernel(sp, grid.r, m, spin, regular)
        return float(eps) * (root * a)[:, None] * g * (b * root)[None, :]

    def assemble_channels(self, z, eps, potential: PotentialSpec, grid: Optional[QuadGrid] = None,
                          spins=None, regular=False) -> KernelMatrix:
        """All channels |m| <= m_max of the selected spins as one block-diagonal kernel."""
        sp = SpectralParameter.of(z)
        grid = grid or build_grid(potential)
        spins = [SpinChannel.of(s) for s in (spins or SpinChannel)]
        blocks, labels = [], []
        for spin in spins:
            for m in self.channels():
                blocks.append(self._channel_block(sp, eps, potential, m, spin, grid, regular))
                labels.append(f"{spin.value}:{m}")
        return KernelMatrix(blocks=tuple(blocks), labels=tuple(labels), z=sp.z, eps=float(eps),
                            alpha=self.alpha, grid=grid)

    def assemble_bs_2d(self, z, eps, potential: PotentialSpec, grid: Optional[QuadGrid] = None,
                       spins=None, regular=False) -> KernelMatrix:
        sp = SpectralParameter.of(z)
        if not sp.is_real:
            raise DomainError(f"the 2D kernel is assembled for real z < 0 only, got {sp.z}")
        grid = grid or build_grid(potential)
        spins = [SpinChannel.of(s) for s in (spins or SpinChannel)]
        n_r, n_t = grid.n_r, grid.n_theta
        size = n_r * n_t
        if all(potential.is_empty(s) for s in spins):
            zero = tuple(np.zeros((size, size), dtype=complex) for _ in spins)
            return KernelMatrix(blocks=zero, labels=tuple(s.value for s in spins), z=sp.z,
                                eps=float(eps), alpha=self.alpha, grid=grid)

        kappa = sp.kappa.real
        phis = 2.0 * math.pi * np.arange(n_t) / n_t
        base = self.green.friedrichs_table(sp.z, grid.r, phis)
        idx = np.arange(n_r)
        average = k0_cell_average(kappa, grid.r_weights, grid.r * grid.d_theta)
        base[idx, idx, 0] += average / (2.0 * math.pi)

        shift = (np.arange(n_t)[:, None] - np.arange(n_t)[None, :]) % n_t
        root = np.sqrt(grid.weights)
        blocks = []
        for spin in spins:
            a, b = polar_split(potential.evaluate(grid.r, spin))
            if not np.any(a):
                blocks.append(np.zeros((size, size), dtype=complex))
                continue
            table = base + self.green.rank_one_table(sp.z, grid.r, phis, spin)
            if regular:
                table = table - self.green.leading_table(sp.z, grid.r, phis, spin)
            full = table[:, :, shift].transpose(0, 2, 1, 3).reshape(size, size)
            left = root * np.repeat(a, n_t)
            right = np.repeat(b, n_t) * root
            blocks.append(float(eps) * left[:, None] * full * right[None, :])
        if self.verbose:
            print(f"✓ Assembled 2D kernel: {len(blocks)} block(s) of {size}x{size} at z={sp.z.real:.6g}")
        return KernelMatrix(blocks=tuple(blocks), labels=tuple(s.value for s in spins), z=sp.z,
                            eps=float(eps), alpha=self.alpha, grid=grid)

    def lowest_eigenvalue(self, z, eps, potential, spin, grid, path="channels"):
        """Most negative real eigenvalue of R_{z,eps} in one spin block (0 if none)."""
        if path == "2d":
            kernel = self.assemble_bs_2d(z, eps, potential, grid, spins=[spin])
        elif path == "channels":
            kernel = self.assemble_channels(z, eps, potential, grid, spins=[spin])
        else:
            raise DomainError(f"unknown path {path!r}, expected '2d' or 'channels'")
        values = kernel.eigenvalues()
        scale = max(float(np.max(np.abs(values))) if values.size else 0.0, 1.0)
        real = values[np.abs(values.imag) <= _IMAG_TOL * scale].real
        return float(min(real.min(), 0.0)) if real.size else 0.0

    def find_bound_state(self, eps, potential: PotentialSpec, bracket=(-1.0, -1e-8), path="channels",
                         spin=None, grid: Optional[QuadGrid] = None):
        """Bound state from eigenvalue(R_{z,eps}) = -1 on a real bracket.

        With spin=None both blocks are searched and the lower root is returned.
        """
        if spin is None:
            found = self.find_bound_states(eps, potential, bracket, path, grid)
            roots = [z for z in found.values() if not isinstance(z, NoEigenvalue)]
            if roots:
                return min(roots)
            return NoEigenvalue("; ".join(f"{k}: {v.reason}" for k, v in found.items()))
        if not potential.is_real:
            raise UnsupportedPotentialError("complex potentials go through the implicit equation")
        z_lo, z_hi = (float(b) for b in bracket)
        if not (z_lo < z_hi < 0.0):
            raise DomainError(f"bracket must satisfy z_lo < z_hi < 0, got {bracket}")
        spin = SpinChannel.of(spin)
        if potential.is_empty(spin):
            return NoEigenvalue("potential vanishes in this spin block")
        grid = grid or build_grid(potential)

        def crossing(t):
            return self.lowest_eigenvalue(-math.exp(t), eps, potential, spin, grid, path) + 1.0

        t_near, t_far = math.log(-z_hi), math.log(-z_lo)
        f_near = crossing(t_near)
        if f_near >= 0.0:
            return NoEigenvalue(f"eigenvalues stay above -1 on [{z_lo:.3g}, {z_hi:.3g}]")
        if crossing(t_far) < 0.0:
            print(f"⚠ {spin.value}: bound state lies below z={z_lo:.3g}; widen the bracket")
            return NoEigenvalue(f"bound state below {z_lo:.3g}")
        t_root = optimize.brentq(crossing, t_near, t_far, xtol=1e-10)
        z = -math.exp(t_root)
        if self.verbose:
            print(f"✓ {spin.value}: eps={eps:.6g} bound state z={z:.12g} ({path})")
        return z

    def find_bound_states(self, eps, potential: PotentialSpec, bracket=(-1.0, -1e-8), path="channels",
                          grid: Optional[QuadGrid] = None):
        grid = grid or build_grid(potential)

        def solve(spin):
            return self.find_bound_state(eps, potential, bracket, path, spin, grid)

        if self.threads > 1:
            with ThreadPoolExecutor(max_workers=2) as pool:
                results = list(pool.map(solve, SpinChannel))
        else:
            results = [solve(s) for s in SpinChannel]
        return {s.value: res for s, res in zip(SpinChannel, results)}
