"""Special functions on the right half-plane.

Thin validated layer over ``scipy.special``: Gamma on the positive axis, the
modified Bessel functions K_nu and I_nu, exponentially scaled I.K products
and the logarithmic split of K_0 used by kernel regularization.

Real inputs return real arrays; complex inputs return complex arrays.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import special

from utils.errors import DomainError, UnsupportedOrderError


def _as_arg(w, allow_zero=False):
    arr = np.asarray(w)
    if np.iscomplexobj(arr) and not np.any(arr.imag):
        arr = arr.real
    if not np.iscomplexobj(arr):
        arr = arr.astype(float)
    re = arr.real
    bad = (re < 0.0) if allow_zero else (re <= 0.0)
    if allow_zero:
        bad = bad | ((re == 0.0) & (arr.imag != 0.0))
    if np.any(bad) or not np.all(np.isfinite(arr)):
        raise DomainError("argument must satisfy Re w > 0")
    return arr


def _check_k_order(nu):
    arr = np.asarray(nu, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0.0):
        raise DomainError(f"K order must be finite and >= 0, got {nu}")
    if np.any((arr > 0.0) & (arr == np.round(arr))):
        raise UnsupportedOrderError(f"integer K order {nu} > 0 is not supported")
    return arr.item() if arr.ndim == 0 else arr


def _scalar_or_array(arr, template):
    return arr.item() if np.ndim(template) == 0 else arr


def gamma_real(x):
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0) or not np.all(np.isfinite(x)):
        raise DomainError("gamma_real needs x > 0")
    return _scalar_or_array(special.gamma(x), x)


def bessel_k(order, w):
    nu = _check_k_order(order)
    arr = _as_arg(w)
    if np.ndim(nu) == 0 and nu == 0.0 and not np.iscomplexobj(arr):
        out = special.k0(arr)
    else:
        out = special.kv(nu, arr)
    return _scalar_or_array(out, w)


def bessel_i(order, w):
    mu = float(order)
    if not math.isfinite(mu):
        raise DomainError(f"I order must be finite, got {order}")
    arr = _as_arg(w, allow_zero=True)
    if mu < 0.0 and np.any(arr == 0.0):
        raise DomainError("negative I order is singular at w = 0")
    out = special.iv(mu, arr)
    return _scalar_or_array(out, w)


def bessel_ik_product(mu, nu, w_small, w_large):
    """I_mu(w_small) * K_nu(w_large) without overflow in the scaled factors.

    mu may be negative (reflection handled by scipy); nu follows the K rules.
    Products that underflow in both scaled factors are returned as 0.
    """
    nu = _check_k_order(nu)
    small = _as_arg(w_small)
    large = _as_arg(w_large)
    scaled = special.ive(np.asarray(mu, dtype=float), small) * special.kve(nu, large)
    with np.errstate(over="ignore", invalid="ignore"):
        out = scaled * np.exp(np.abs(small.real) - large)
    out = np.where(np.isfinite(out), out, 0.0)
    if np.ndim(out) == 0:
        return out.item()
    return out


def k0_split(w):
    """Return (f, g) with K_0(w) = log(w) f(w) + g(w).

    f(w) = -exp(-2w)(1 + 2w) I_0(w): f(0) = -1, f + 1 = O(w^2) and f decays
    on the real axis, so g stays bounded where K_0 is small.
    """
    arr = _as_arg(w)
    # ive carries exp(-|Re w|)
    f = -(1.0 + 2.0 * arr) * special.ive(0, arr) * np.exp(np.abs(arr.real) - 2.0 * arr)
    k0 = bessel_k(0, arr)
    g = k0 - np.log(arr) * f
    return _scalar_or_array(f, w), _scalar_or_array(g, w)
