"""Closed forms for the unit disk with generator ``Delta/2 - lambda``.

Fourier mode ``e^{in theta}`` is an eigenfunction of the DN operator ``D_lambda``:
the ``lambda``-harmonic extension is ``I_n(s r)`` (``s = sqrt(2 lambda)``) for
``lambda > 0`` and ``J_n(s r)`` (``s = sqrt(-2 lambda)``) for ``lambda < 0``, and
the operator carries the factor 1/2 of the generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .bessel import bessel_i, bessel_j, bessel_j0_zero, i_ratio, j_ratio
from .exceptions import InputError, NotGaugeable, NumericError

__all__ = [
    "DiskModel",
    "first_dirichlet_eigenvalue",
    "gauge_threshold",
    "dn_eigenvalue",
    "douglas_energy",
    "poisson_kernel",
    "gauge",
    "v_lambda",
]


@lru_cache(maxsize=None)
def first_dirichlet_eigenvalue() -> float:
    """``-j_{0,1}^2``: the first eigenvalue of the Dirichlet Laplacian on the disk."""
    return -bessel_j0_zero(1) ** 2


def gauge_threshold() -> float:
    """Half the first Dirichlet eigenvalue; gaugeability holds strictly above it."""
    return 0.5 * first_dirichlet_eigenvalue()


@dataclass(frozen=True)
class DiskModel:
    """Parameters of a disk computation.

    ``quadrature`` is ``(radial, angular)`` node counts for area integrals.
    """

    lam: float = 0.0
    bessel_order_max: int = 8
    quadrature: tuple = (512, 512)

    @property
    def s(self) -> float:
        return math.sqrt(2.0 * abs(self.lam))

    def require_gauge(self):
        if not self.lam > gauge_threshold():
            raise NotGaugeable(f"lambda={self.lam} is not above lambda_1^D/2={gauge_threshold():.12g}")


def dn_eigenvalue(model: DiskModel, n: int) -> float:
    """Eigenvalue ``mu_n(lambda)`` of ``D_lambda`` on the mode ``e^{in theta}``.

    Uses ``I_n'/I_n = n/s + I_{n+1}/I_n`` (and its ``J`` analogue), which is
    exact at ``lambda = 0``.
    """
    n = abs(int(n))
    if n > model.bessel_order_max:
        raise InputError(f"mode {n} exceeds bessel_order_max={model.bessel_order_max}", "n")
    lam = model.lam
    if lam == 0:
        return 0.5 * n
    s = model.s
    if lam > 0:
        return 0.5 * n + 0.5 * s * i_ratio(n, s)
    jn = bessel_j(n, s)
    if abs(jn) < 1e-14:
        raise NumericError(f"lambda={lam} is (numerically) half a Dirichlet eigenvalue for mode {n}")
    return 0.5 * n - 0.5 * s * j_ratio(n, s)


def _samples(phi, n_nodes):
    if callable(phi):
        theta = 2.0 * np.pi * np.arange(n_nodes) / n_nodes
        return np.asarray(phi(theta), dtype=float)
    return np.asarray(phi, dtype=float)


def _douglas(f):
    N = len(f)
    h = 2.0 * np.pi / N
    fh = np.fft.rfft(f)
    # circular autocorrelation c_j = mean_theta f(theta) f(theta - j h)
    c = np.fft.irfft(np.abs(fh) ** 2, n=N) / N
    j = np.arange(1, N)
    off = 2.0 * (c[0] - c[1:]) / np.sin(0.5 * j * h) ** 2
    # diagonal: (f(t)-f(t'))^2 / sin^2((t-t')/2) -> 4 f'(t)^2
    k = np.arange(len(fh))
    dfh = 1j * k * fh
    if N % 2 == 0:
        dfh[-1] = 0.0
    df = np.fft.irfft(dfh, n=N)
    diag = 4.0 * np.mean(df**2)
    total = 2.0 * np.pi * h * (off.sum() + diag)
    return total / (16.0 * np.pi)


def douglas_energy(phi, n_nodes: int = 4096, rtol: float = 1e-8, return_flag: bool = False):
    """Douglas integral of a periodic boundary function.

    ``phi`` is either a callable of the angle or equispaced samples on
    ``[0, 2 pi)``.  The double integral is evaluated by the periodic trapezoid
    rule in the angle difference, with the diagonal node replaced by its
    analytic limit ``4 phi'(theta)^2``.  With ``return_flag`` the result is
    ``(value, converged)`` where convergence compares against half resolution.
    """
    f = _samples(phi, n_nodes)
    if f.ndim != 1 or len(f) < 4:
        raise InputError("need at least 4 equispaced samples", "phi")
    val = _douglas(f)
    if not return_flag:
        return val
    if len(f) % 2:
        return val, True
    coarse = _douglas(f[::2])
    return val, bool(abs(val - coarse) <= rtol * max(abs(val), 1e-300) or abs(val - coarse) < 1e-14)


def poisson_kernel(x, xi):
    """``K(x, xi) = (1 - |x|^2) / (2 pi |x - xi|^2)`` for ``|x| < 1`` and boundary angle ``xi``."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 2:
        raise InputError("x must be a point in the plane", "x")
    r2 = np.sum(x**2, axis=-1)
    if np.any(r2 >= 1.0):
        raise InputError("x must lie in the open unit disk", "x")
    xi = np.asarray(xi, dtype=float)
    d2 = (x[..., 0] - np.cos(xi)) ** 2 + (x[..., 1] - np.sin(xi)) ** 2
    return (1.0 - r2) / (2.0 * np.pi * d2)


def _gauge_radial(model: DiskModel, r):
    lam = model.lam
    r = np.asarray(r, dtype=float)
    if lam == 0:
        return np.ones_like(r)
    s = model.s
    if lam > 0:
        return bessel_i(0, s * r) / bessel_i(0, s)
    return bessel_j(0, s * r) / bessel_j(0, s)


def gauge(model: DiskModel, x) -> float:
    """``E_x[exp(-lambda tau)]`` for the exit time ``tau`` of the disk."""
    model.require_gauge()
    x = np.asarray(x, dtype=float)
    r = np.sqrt(np.sum(x**2, axis=-1))
    if np.any(r >= 1.0):
        raise InputError("x must lie in the open unit disk", "x")
    out = _gauge_radial(model, r)
    return float(out) if np.ndim(out) == 0 else out


def _v_quad(model, n_rad, n_ang):
    # polar coordinates centred at the boundary point xi = (1, 0):
    # x = xi + rho (-cos psi, sin psi), K dx = (2 cos psi - rho) / (2 pi) drho dpsi
    tp, wp = np.polynomial.legendre.leggauss(n_ang)
    psi = 0.5 * np.pi * tp
    wpsi = 0.5 * np.pi * wp
    tr, wr = np.polynomial.legendre.leggauss(n_rad)
    c = np.cos(psi)[:, None]
    rho = c * (1.0 + tr[None, :])  # in [0, 2 cos psi]
    wrho = c * wr[None, :]
    r2 = 1.0 - 2.0 * rho * c + rho**2
    r = np.sqrt(np.clip(r2, 0.0, None))
    g = _gauge_radial(model, np.minimum(r, 1.0))
    integrand = (2.0 * c - rho) * g
    total = np.sum(wpsi[:, None] * wrho * integrand)
    return model.lam * total / (2.0 * np.pi)


def v_lambda(model: DiskModel, rtol: float = 1e-6, return_flag: bool = False):
    """``V_lambda = lambda * int_D K(x, xi) E_x[exp(-lambda tau)] dx`` by quadrature.

    Independent of ``xi`` by rotation invariance; computed at ``xi = (1, 0)``
    in polar coordinates centred there, where the Poisson-kernel singularity
    cancels against the area element.
    """
    model.require_gauge()
    if model.lam == 0:
        return (0.0, True) if return_flag else 0.0
    n_rad, n_ang = model.quadrature
    val = _v_quad(model, n_rad, n_ang)
    if not return_flag:
        return val
    coarse = _v_quad(model, max(n_rad // 2, 2), max(n_ang // 2, 2))
    return val, bool(abs(val - coarse) <= rtol * max(abs(val), 1e-300))
