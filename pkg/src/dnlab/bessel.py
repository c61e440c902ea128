"""Integer-order Bessel functions ``I_n`` and ``J_n`` for real nonnegative arguments.

``I_n`` uses its power series for ``s <= 12`` and Miller's downward recurrence
normalised by ``I_0 + 2 sum I_k = exp(s)`` beyond.  ``J_n`` uses the
series only for ``s <= 4`` and otherwise the downward recurrence normalised by
``J_0 + 2 sum J_2k = 1``, which avoids the cancellation of the alternating
series.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

__all__ = ["BesselEval", "bessel_i", "bessel_j", "bessel_i_eval", "bessel_j_eval", "i_ratio", "j_ratio",
           "bessel_j0_zero"]

SERIES_MAX = 12.0
J_SERIES_MAX = 4.0
_SERIES_TERMS = 60
_BIG = 1e250


def _i_series(n: int, s: np.ndarray) -> np.ndarray:
    half = 0.5 * s
    q = half * half
    term = half**n / math.factorial(n) * np.ones_like(s)
    total = term.copy()
    for k in range(1, _SERIES_TERMS):
        term = term * q / (k * (k + n))
        total += term
        if np.all(term <= 1e-17 * total):
            break
    return total


def _j_series(n: int, s: np.ndarray) -> np.ndarray:
    half = 0.5 * s
    q = -half * half
    term = half**n / math.factorial(n) * np.ones_like(s)
    total = term.copy()
    for k in range(1, _SERIES_TERMS):
        term = term * q / (k * (k + n))
        total += term
        if np.all(np.abs(term) <= 1e-17 * np.abs(total)):
            break
    return total


def _miller_start(n: int, s: float) -> int:
    m = max(n, int(s)) + 20 + int(math.sqrt(60.0 * max(n, s, 1.0)))
    return m + (m % 2)


def _miller(n: int, s: float, modified: bool) -> float:
    """Downward recurrence from a tiny seed, normalised by the addition theorem.

    Returns ``exp(-s) I_n(s)`` when ``modified`` else ``J_n(s)``.
    """
    M = _miller_start(n, s)
    sign = 1.0 if modified else -1.0
    nxt, cur = 0.0, 1e-30  # b_{k+1}, b_k at k = M
    val = cur if n == M else 0.0
    norm = 2.0 * cur if (modified or M % 2 == 0) else 0.0
    for k in range(M, 0, -1):
        nxt, cur = cur, (2.0 * k / s) * cur + sign * nxt
        j = k - 1
        if j == n:
            val = cur
        if j == 0:
            norm += cur
        elif modified or j % 2 == 0:
            norm += 2.0 * cur
        if abs(cur) > _BIG:
            cur, nxt, val, norm = cur / _BIG, nxt / _BIG, val / _BIG, norm / _BIG
    return val / norm


def _i_miller_scaled(n: int, s: float) -> float:
    return _miller(n, s, True)


def _j_miller(n: int, s: float) -> float:
    return _miller(n, s, False)


def bessel_i(n: int, s):
    """Modified Bessel function of the first kind ``I_n(s)``, ``s >= 0``."""
    n = abs(int(n))
    arr = np.asarray(s, dtype=float)
    if np.any(arr < 0):
        raise ValueError("argument must be nonnegative")
    flat = np.atleast_1d(arr).ravel()
    out = np.empty_like(flat)
    small = flat <= SERIES_MAX
    if np.any(small):
        out[small] = _i_series(n, flat[small])
    for idx in np.flatnonzero(~small):
        x = flat[idx]
        out[idx] = _i_miller_scaled(n, x) * math.exp(x)
    out = out.reshape(np.shape(arr))
    return float(out) if out.ndim == 0 else out


def bessel_j(n: int, s):
    """Bessel function of the first kind ``J_n(s)``, ``s >= 0``, integer ``n``."""
    sign = -1.0 if (n < 0 and n % 2) else 1.0
    n = abs(int(n))
    arr = np.asarray(s, dtype=float)
    if np.any(arr < 0):
        raise ValueError("argument must be nonnegative")
    flat = np.atleast_1d(arr).ravel()
    out = np.empty_like(flat)
    # the alternating series loses no accuracy this close to the origin
    small = flat <= J_SERIES_MAX
    if np.any(small):
        out[small] = _j_series(n, flat[small])
    for idx in np.flatnonzero(~small):
        out[idx] = _j_miller(n, flat[idx])
    out = sign * out.reshape(np.shape(arr))
    return float(out) if out.ndim == 0 else out


def i_ratio(n: int, s: float) -> float:
    """``I_{n+1}(s) / I_n(s)``."""
    n = abs(int(n))
    if s == 0:
        return 0.0
    if s <= SERIES_MAX:
        return bessel_i(n + 1, s) / bessel_i(n, s)
    return _i_miller_scaled(n + 1, s) / _i_miller_scaled(n, s)


def j_ratio(n: int, s: float) -> float:
    """``J_{n+1}(s) / J_n(s)``."""
    n = abs(int(n))
    if s == 0:
        return 0.0
    return _j_miller(n + 1, s) / _j_miller(n, s)


@dataclass(frozen=True)
class BesselEval:
    order: int
    argument: float
    value: float
    derivative: float


def bessel_i_eval(n: int, s: float) -> BesselEval:
    n = abs(int(n))
    val = bessel_i(n, s)
    der = bessel_i(1, s) if n == 0 else 0.5 * (bessel_i(n - 1, s) + bessel_i(n + 1, s))
    return BesselEval(n, float(s), val, der)


def bessel_j_eval(n: int, s: float) -> BesselEval:
    n = abs(int(n))
    val = bessel_j(n, s)
    der = -bessel_j(1, s) if n == 0 else 0.5 * (bessel_j(n - 1, s) - bessel_j(n + 1, s))
    return BesselEval(n, float(s), val, der)


def bessel_j0_zero(k: int = 1) -> float:
    """``k``-th positive zero of ``J_0`` by bracketed root finding."""
    # McMahon's estimate (k - 1/4) pi locates each zero inside its bracket
    guess = (k - 0.25) * math.pi
    return brentq(lambda x: bessel_j(0, x), guess - 0.5, guess + 0.5, xtol=1e-15, rtol=4 * np.finfo(float).eps,
                  maxiter=200)
