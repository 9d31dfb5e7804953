"""Green functions of the Aharonov-Bohm Pauli operator.

The Friedrichs kernel is evaluated through its gauge-removed form
P(r, r0, phi) = exp(-i alpha phi) G_z, which is 2*pi periodic in phi.  The
s-integral is written with K_0(kappa (r + r0)) subtracted, so the pole of the
integrand at s = 0, phi = +-pi cancels; the subtracted constant is integrated
in closed form on the tails |s| > S.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from services.specfun_service import bessel_ik_product, bessel_k, gamma_real
from utils.common import principal_power, wrap_angle
from utils.domain import FluxAlpha, PolarPoint, SpectralParameter, SpinChannel
from utils.errors import DiagonalSingularityError, DomainError, FitFailureError

QUAD_TOL = 1e-12
PHI_EPS = 1e-6
# K_0 beyond this argument is below 1e-17 and is dropped from the s-integral
_K0_NEGLIGIBLE = 40.0
_PAIR_CHUNK = 256


def _s_kernel(alpha, s, phi):
    """exp(-alpha s) / (1 + exp(-s + i phi)), written without overflow."""
    s = np.asarray(s, dtype=float)
    eip = np.exp(1j * np.asarray(phi, dtype=float))
    t = np.exp(-np.abs(s))
    positive = s >= 0.0
    num = np.where(positive, t ** alpha, t ** (1.0 - alpha))
    den = np.where(positive, 1.0 + t * eip, t + eip)
    return num / den


def _tail_integral(alpha, phi, S):
    """Integral of the s-kernel over |s| > S, summed as two geometric series."""
    phi = np.asarray(phi, dtype=float)
    n = np.arange(int(math.ceil(45.0 / S)) + 2, dtype=float).reshape((-1,) + (1,) * phi.ndim)
    sign = (-1.0) ** n
    upper = sign * np.exp(1j * n * phi) * np.exp(-(alpha + n) * S) / (alpha + n)
    lower = sign * np.exp(-1j * (n + 1.0) * phi) * np.exp(-(n + 1.0 - alpha) * S) / (n + 1.0 - alpha)
    return (upper + lower).sum(axis=0)


@lru_cache(maxsize=16)
def _graded_rule(S, order=12, finest=1e-9, ratio=4.0):
    """Composite Gauss-Legendre rule on [-S, S], panels shrinking toward s = 0."""
    x, w = np.polynomial.legendre.leggauss(order)
    edges = [0.0, finest]
    while edges[-1] * ratio < 1.0:
        edges.append(edges[-1] * ratio)
    edges.append(1.0)
    while edges[-1] < S:
        edges.append(min(edges[-1] + 2.0, S))
    edges = np.asarray(edges)
    a, b = edges[:-1], edges[1:]
    half = 0.5 * (b - a)
    nodes = (half[:, None] * x[None, :] + 0.5 * (a + b)[:, None]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    nodes = np.concatenate([-nodes[::-1], nodes])
    weights = np.concatenate([weights[::-1], weights])
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


@dataclass(frozen=True)
class BoundaryFit:
    phi1_m1: complex
    phi2_m1: complex
    phi1_0: complex
    phi2_0: complex
    residual: float


class GreenService:

    def __init__(self, alpha, quad_tol=QUAD_TOL, phi_eps=PHI_EPS, threads=1, verbose=False):
        self.flux = FluxAlpha.of(alpha)
        self.quad_tol = float(quad_tol)
        self.phi_eps = float(phi_eps)
        self.threads = max(1, int(threads))
        self.verbose = verbose

    @property
    def alpha(self):
        return self.flux.alpha

    def c_hat(self, phi):
        phi = float(phi)
        if not (-2.0 * math.pi < phi < 2.0 * math.pi):
            raise DomainError(f"angle difference {phi} outside (-2pi, 2pi)")
        if abs(abs(phi) - math.pi) < 1e-9:
            raise DomainError(f"angle difference {phi} is on the cut +-pi")
        if abs(phi) < math.pi:
            return complex(1.0 / (2.0 * math.pi))
        turn = -1.0 if phi < 0.0 else 1.0
        return complex(np.exp(2j * math.pi * self.alpha * turn) / (2.0 * math.pi))

    def _clamp_phi(self, phi):
        phi = np.asarray(phi, dtype=float)
        dist = np.abs(np.abs(phi) - math.pi)
        near = dist < self.phi_eps
        if not np.any(near):
            return phi
        if self.verbose:
            print(f"⚠ {int(near.sum())} angle(s) clamped to distance {self.phi_eps} from the cut")
        inside = np.abs(phi) <= math.pi
        magnitude = np.where(inside, math.pi - self.phi_eps, math.pi + self.phi_eps)
        return np.where(near, np.sign(phi) * magnitude, phi)

    def _kappa(self, z):
        sp = SpectralParameter.of(z)
        # real kappa keeps the Bessel calls on the real fast path
        return sp, (sp.kappa.real if sp.is_real else sp.kappa)

    def _cutoff(self, kappa, r, r0):
        re_kappa = abs(complex(kappa).real)
        smallest = float(np.min(np.sqrt(np.asarray(r) * np.asarray(r0))))
        S = 2.0 * math.log(max(_K0_NEGLIGIBLE / max(re_kappa * smallest, 1e-300), 1.0))
        return float(min(max(math.ceil(2.0 * S) / 2.0, 8.0), 400.0))

    @staticmethod
    def _distance(r, r0, phi):
        return np.sqrt((r - r0) ** 2 + 4.0 * r * r0 * np.sin(0.5 * phi) ** 2)

    def _local_part(self, kappa, r, r0, phi, k_sum, drop_coincident):
        d = self._distance(r, r0, phi)
        coincident = d == 0.0
        if np.any(coincident) and not drop_coincident:
            raise DiagonalSingularityError("Green function evaluated at coincident points")
        k_d = np.where(coincident, 0.0, bessel_k(0, kappa * np.where(coincident, 1.0, d)))
        return np.exp(-1j * self.alpha * phi) / (2.0 * math.pi) * (k_d - k_sum)

    def _gauge_removed(self, z, r, r0, phi, drop_coincident=False):
        """P(r, r0, phi) on the wrapped angle, arrays broadcast together."""
        _, kappa = self._kappa(z)
        r, r0, phi = np.broadcast_arrays(
            np.asarray(r, dtype=float), np.asarray(r0, dtype=float), wrap_angle(phi)
        )
        shape = r.shape
        r, r0, phi = r.ravel(), r0.ravel(), phi.ravel()
        if np.any(r <= 0.0) or np.any(r0 <= 0.0):
            raise DomainError("Green functions need r, r0 > 0")
        alpha = self.alpha
        k_sum = bessel_k(0, kappa * (r + r0))
        local = self._local_part(kappa, r, r0, phi, k_sum, drop_coincident)

        S = self._cutoff(kappa, r, r0)
        size = r.size

        def integrand(s):
            R = np.sqrt(r * r + r0 * r0 + 2.0 * r * r0 * np.cosh(s))
            val = (bessel_k(0, kappa * R) - k_sum) * _s_kernel(alpha, s, phi)
            return np.concatenate([val.real, val.imag])

        res, err, info = integrate.quad_vec(
            integrand, -S, S, epsabs=self.quad_tol, epsrel=1e-14,
            norm="max", points=(0.0,), limit=20000, full_output=True,
        )
        if info.status != 0:
            print(f"⚠ s-integral stopped early (status {info.status}), error estimate {float(err):.2e}")
        interior = res[:size] + 1j * res[size:]
        integral = interior - k_sum * _tail_integral(alpha, phi, S)
        value = local - self.flux.sin_pi_alpha / (2.0 * math.pi ** 2) * integral
        return value.reshape(shape)

    def _rank_one(self, z, r, r0, phi, spin):
        _, kappa = self._kappa(z)
        spin = SpinChannel.of(spin)
        nu = spin.nu(self.flux)
        term = self.flux.sin_pi_alpha / math.pi ** 2 * bessel_k(nu, kappa * np.asarray(r, dtype=float)) \
            * bessel_k(nu, kappa * np.asarray(r0, dtype=float))
        if spin is SpinChannel.PLUS:
            term = term * np.exp(-1j * np.asarray(phi, dtype=float))
        return np.asarray(term, dtype=complex)

    def _leading(self, z, r, r0, phi, spin):
        sp = SpectralParameter.of(z)
        spin = SpinChannel.of(spin)
        nu = spin.nu(self.flux)
        base = -sp.z * np.asarray(r, dtype=float) * np.asarray(r0, dtype=float) / 4.0
        value = self.flux.c_alpha * gamma_real(nu) ** 2 * principal_power(base, -nu)
        if spin is SpinChannel.PLUS:
            value = value * np.exp(-1j * np.asarray(phi, dtype=float))
        return value

    @staticmethod
    def _unpack(x, x0):
        if x.r <= 0.0 or x0.r <= 0.0:
            raise DomainError("Green functions need r, r0 > 0")
        return x.r, x0.r, x.theta - x0.theta

    def friedrichs_many(self, z, r, theta, r0, theta0):
        phi = self._clamp_phi(np.asarray(theta, dtype=float) - np.asarray(theta0, dtype=float))
        return np.exp(1j * self.alpha * phi) * self._gauge_removed(z, r, r0, phi)

    def pauli_many(self, z, r, theta, r0, theta0, spin):
        phi = self._clamp_phi(np.asarray(theta, dtype=float) - np.asarray(theta0, dtype=float))
        return self._gauge_removed(z, r, r0, phi) + self._rank_one(z, r, r0, phi, spin)

    def regular_many(self, z, r, theta, r0, theta0, spin):
        phi = self._clamp_phi(np.asarray(theta, dtype=float) - np.asarray(theta0, dtype=float))
        return self.pauli_many(z, r, theta, r0, theta0, spin) - self._leading(z, r, r0, phi, spin)

    def green_friedrichs(self, z, x: PolarPoint, x0: PolarPoint) -> complex:
        r, r0, _ = self._unpack(x, x0)
        return complex(self.friedrichs_many(z, r, x.theta, r0, x0.theta))

    def green_pauli(self, z, x: PolarPoint, x0: PolarPoint, spin) -> complex:
        r, r0, _ = self._unpack(x, x0)
        return complex(self.pauli_many(z, r, x.theta, r0, x0.theta, spin))

    def green_regular(self, z, x: PolarPoint, x0: PolarPoint, spin) -> complex:
        r, r0, _ = self._unpack(x, x0)
        return complex(self.regular_many(z, r, x.theta, r0, x0.theta, spin))

    def leading_singularity(self, z, x: PolarPoint, x0: PolarPoint, spin) -> complex:
        r, r0, phi = self._unpack(x, x0)
        return complex(self._leading(z, r, r0, phi, spin))

    def partial_wave_green(self, z, x: PolarPoint, x0: PolarPoint, m_max=80):
        """Channel sum of the Friedrichs kernel; returns (value, tail estimate)."""
        if int(m_max) < 1:
            raise DomainError(f"m_max must be >= 1, got {m_max}")
        r, r0, phi = self._unpack(x, x0)
        if r == r0 and wrap_angle(phi) == 0.0:
            raise DiagonalSingularityError("partial-wave sum at coincident points")
        _, kappa = self._kappa(z)
        m = np.arange(-int(m_max), int(m_max) + 1)
        nu = np.abs(m + self.alpha)
        r_lo, r_hi = min(r, r0), max(r, r0)
        products = bessel_ik_product(nu, nu, np.full(nu.shape, kappa * r_lo), np.full(nu.shape, kappa * r_hi))
        total = np.sum(np.exp(1j * m * phi) * products)
        value = complex(np.exp(1j * self.alpha * phi) * total / (2.0 * math.pi))
        ratio = r_lo / r_hi
        nu_tail = int(m_max) + 1 - self.alpha
        tail = math.inf if ratio >= 1.0 else ratio ** nu_tail / (2.0 * math.pi * nu_tail * (1.0 - ratio))
        return value, tail

    def residue_identity_residual(self, phi, S=30.0):
        """|2 pi C(phi) - sin(pi a)/pi e^{i a phi} int h ds| with this module's quadrature."""
        c_hat = self.c_hat(phi)
        alpha = self.alpha

        def integrand(s):
            val = _s_kernel(alpha, s, phi)
            return np.array([val.real, val.imag])

        res, _ = integrate.quad_vec(integrand, -S, S, epsabs=1e-14, epsrel=1e-13, points=(0.0,), limit=20000)
        total = res[0] + 1j * res[1] + complex(_tail_integral(alpha, phi, S))
        lhs = 2.0 * math.pi * c_hat - self.flux.sin_pi_alpha / math.pi * np.exp(1j * alpha * phi) * total
        return float(abs(lhs))

    def friedrichs_table(self, z, radii, phis):
        """Gauge-removed Friedrichs kernel on radii x radii x phis.

        Entries with r_i = r_j and phi = 0 hold the kernel minus
        K_0(kappa |x - x0|)/(2 pi); callers add the cell average of that part.
        """
        _, kappa = self._kappa(z)
        radii = np.asarray(radii, dtype=float)
        phis = wrap_angle(phis)
        n = radii.size
        iu, ju = np.triu_indices(n)
        ri, rj = radii[iu], radii[ju]
        alpha = self.alpha

        S = self._cutoff(kappa, ri, rj)
        nodes, weights = _graded_rule(S)
        h = _s_kernel(alpha, nodes[:, None], phis[None, :])
        cosh = np.cosh(nodes)
        k_sum = bessel_k(0, kappa * (ri + rj))
        integral = np.empty((ri.size, phis.size), dtype=complex)

        def work(start):
            stop = min(start + _PAIR_CHUNK, ri.size)
            a, b = ri[start:stop, None], rj[start:stop, None]
            R = np.sqrt(a * a + b * b + 2.0 * a * b * cosh[None, :])
            diff = (bessel_k(0, kappa * R) - k_sum[start:stop, None]) * weights[None, :]
            integral[start:stop] = diff @ h

        starts = range(0, ri.size, _PAIR_CHUNK)
        if self.threads > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                list(pool.map(work, starts))
        else:
            for start in starts:
                work(start)

        integral -= k_sum[:, None] * _tail_integral(alpha, phis, S)[None, :]
        local = self._local_part(kappa, ri[:, None], rj[:, None], phis[None, :], k_sum[:, None], True)
        values = local - self.flux.sin_pi_alpha / (2.0 * math.pi ** 2) * integral

        table = np.empty((n, n, phis.size), dtype=complex)
        table[iu, ju] = values
        table[ju, iu] = values
        if self.verbose:
            print(f"✓ Friedrichs table {n}x{n}x{phis.size} with {nodes.size} s-nodes (S={S})")
        return table

    def rank_one_table(self, z, radii, phis, spin):
        _, kappa = self._kappa(z)
        spin = SpinChannel.of(spin)
        k = bessel_k(spin.nu(self.flux), kappa * np.asarray(radii, dtype=float))
        outer = self.flux.sin_pi_alpha / math.pi ** 2 * np.multiply.outer(k, k)
        if spin is SpinChannel.PLUS:
            return outer[:, :, None] * np.exp(-1j * np.asarray(phis, dtype=float))[None, None, :]
        return np.repeat(outer[:, :, None], np.size(phis), axis=2).astype(complex)

    def leading_table(self, z, radii, phis, spin):
        radii = np.asarray(radii, dtype=float)
        return self._leading(z, radii[:, None, None], radii[None, :, None],
                             np.asarray(phis, dtype=float)[None, None, :], spin)


def _power_fit(r, y, nu, cond_max):
    basis = np.column_stack([r ** -nu, r ** nu, r ** (2.0 - nu), r ** (2.0 + nu)])
    scale = np.max(np.abs(basis), axis=0)
    scaled = basis / scale
    cond = np.linalg.cond(scaled)
    if not np.isfinite(cond) or cond > cond_max:
        raise FitFailureError(f"boundary fit ill-conditioned (cond={cond:.3e})")
    coef, *_ = np.linalg.lstsq(scaled.astype(complex), y, rcond=None)
    coef = coef / scale
    resid = y - basis @ coef
    norm = np.linalg.norm(y)
    return coef, float(np.linalg.norm(resid) / norm) if norm > 0 else 0.0


def boundary_fit(f, alpha, r_min=1e-6, r_max=1e-3, n_r=24, n_theta=16, cond_max=1e8):
    """Fit the small-r coefficients behind the boundary functionals.

    The e^{-i theta} mode is fitted on r^{-(1-a)}, r^{1-a}; the constant mode on
    r^{-a}, r^{a}.  Both fits carry the next r^2 corrections as extra columns.
    """
    flux = FluxAlpha.of(alpha)
    if n_theta < 16:
        raise FitFailureError("boundary fit needs at least 16 angles")
    r = np.geomspace(r_min, r_max, int(n_r))
    theta = -math.pi + 2.0 * math.pi * (np.arange(int(n_theta)) + 0.5) / n_theta
    R, TH = np.meshgrid(r, theta, indexing="ij")
    values = np.asarray(f(R, TH), dtype=complex)
    if values.shape != R.shape or not np.all(np.isfinite(values)):
        raise FitFailureError("sampled function is not finite on the fit window")
    mode_m1 = np.mean(values * np.exp(1j * TH), axis=1)
    mode_0 = np.mean(values, axis=1)
    c_m1, res_m1 = _power_fit(r, mode_m1, flux.nu_plus, cond_max)
    c_0, res_0 = _power_fit(r, mode_0, flux.nu_minus, cond_max)
    return BoundaryFit(
        phi1_m1=complex(c_m1[0]), phi2_m1=complex(c_m1[1]),
        phi1_0=complex(c_0[0]), phi2_0=complex(c_0[1]),
        residual=max(res_m1, res_0),
    )
