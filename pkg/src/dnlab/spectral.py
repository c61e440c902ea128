"""Ground states, excessive functions and h-transforms of DN operators."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import NonPositiveH, NotExcessive, NumericError, PositivityUnknown
from .forms import is_irreducible_matrix, is_markovian
from .tolerances import DEFAULTS
from .trace import DnOperator

log = logging.getLogger(__name__)

__all__ = [
    "SpectralResult",
    "HTransform",
    "Trichotomy",
    "spectrum",
    "is_alpha_excessive",
    "h_transform",
    "trichotomy",
    "semigroup",
    "T_GRID",
]

T_GRID = tuple(2.0**k for k in range(-20, 7))


@dataclass(frozen=True, eq=False)
class SpectralResult:
    """Eigen-decomposition of ``N`` on ``L^2(F, mu)``.

    ``simple_flag`` is ``None`` when the gap between the two lowest eigenvalues
    is too small to decide.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    ground_state: np.ndarray
    simple_flag: bool | None

    @property
    def lambda1(self) -> float:
        return float(self.eigenvalues[0])


def _sign_convention(V):
    for k in range(V.shape[1]):
        col = V[:, k]
        nz = np.flatnonzero(np.abs(col) > 1e-12 * np.max(np.abs(col)))
        if len(nz) and col[nz[0]] < 0:
            V[:, k] = -col
    return V


def spectrum(dn: DnOperator, gap_tol=DEFAULTS["simple_gap_rel"]) -> SpectralResult:
    """Solve ``S v = lambda diag(mu) v`` with ``mu``-orthonormal eigenvectors."""
    S = 0.5 * (dn.S + dn.S.T)
    try:
        w, V = scipy.linalg.eigh(S, np.diag(dn.mu))
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericError(f"eigensolver failed: {exc}") from exc
    V = _sign_convention(V)
    ground = V[:, 0].copy()
    if ground.sum() < 0:
        ground = -ground
    if len(w) == 1:
        simple = True
    else:
        scale = max(np.max(np.abs(w)), 1.0)
        gap = (w[1] - w[0]) / scale
        simple = True if gap > gap_tol else None
        if simple is None:
            log.info("lowest eigenvalue gap %.3e below %.1e: simplicity undecided", gap, gap_tol)
    return SpectralResult(w, V, ground, simple)


def semigroup(dn: DnOperator, t: float) -> np.ndarray:
    """``exp(-t N)`` by scaling and squaring."""
    return scipy.linalg.expm(-t * dn.N)


def is_alpha_excessive(dn: DnOperator, phi, alpha: float, fallback: bool = True,
                       t_grid=T_GRID, tol=DEFAULTS["markov_rel"]) -> bool:
    """Whether ``phi >= 0`` and ``exp(-alpha t) T_t phi <= phi`` for all ``t``.

    When the trace semigroup is positivity preserving this is decided exactly by
    ``(N + alpha) phi >= 0``.  Otherwise, with ``fallback`` set, the semigroup
    inequality is checked on ``t_grid`` only (logged as grid-certified); without
    it ``PositivityUnknown`` is raised.
    """
    phi = np.asarray(phi, dtype=float)
    scale = max(np.max(np.abs(phi)), 1e-300)
    if np.any(phi < -tol * scale):
        return False
    if is_markovian(dn.S, tol):
        r = dn.N @ phi + alpha * phi
        rscale = max(np.max(np.abs(dn.N)) * scale, abs(alpha) * scale, 1e-300)
        return bool(np.all(r >= -tol * rscale))
    if not fallback:
        raise PositivityUnknown("trace semigroup is not positivity preserving; generator test is not valid")
    for t in t_grid:
        lhs = np.exp(-alpha * t) * (semigroup(dn, t) @ phi)
        if np.any(lhs > phi + tol * max(scale, np.max(np.abs(lhs)))):
            return False
    log.info("alpha-excessiveness grid-certified on %d time points", len(t_grid))
    return True


@dataclass(frozen=True, eq=False)
class HTransform:
    """Doob transform ``L^h = diag(h)^-1 (N + alpha) diag(h)`` on ``L^2(F, h^2 mu)``."""

    h: np.ndarray
    alpha: float
    transformed_generator: np.ndarray
    transformed_measure: np.ndarray
    base: DnOperator

    def form_matrix(self) -> np.ndarray:
        """``diag(h^2 mu) L^h``, the matrix of the transformed form."""
        return self.transformed_measure[:, None] * self.transformed_generator

    def semigroup(self, t: float) -> np.ndarray:
        return scipy.linalg.expm(-t * self.transformed_generator)

    def conjugated_semigroup(self, t: float) -> np.ndarray:
        """``phi -> exp(-alpha t) T_t(phi h) / h`` as a matrix."""
        T = semigroup(self.base, t)
        return np.exp(-self.alpha * t) * (T * self.h[None, :]) / self.h[:, None]

    def row_sums(self) -> np.ndarray:
        return self.transformed_generator.sum(axis=1)

    def beurling_deny(self):
        """Jump kernel ``h_i h_j (J0 - J_P)_ij`` and killing ``k^h_i = h_i ((S+alpha mu) h)_i``."""
        M = self.base.S + self.alpha * np.diag(self.base.mu)
        J = -M * np.outer(self.h, self.h)
        np.fill_diagonal(J, 0.0)
        k = self.h * (M @ self.h)
        return J, k


def h_transform(dn: DnOperator, h, alpha: float, tol=DEFAULTS["positive_rel"]) -> HTransform:
    h = np.asarray(h, dtype=float)
    if h.shape != dn.mu.shape:
        raise NonPositiveH(f"h must have length {len(dn.mu)}", "h")
    if not np.all(np.isfinite(h)) or np.any(h <= tol * np.max(np.abs(h))):
        raise NonPositiveH("h must be strictly positive", "h")
    k = len(h)
    L = (dn.N + alpha * np.eye(k)) * h[None, :] / h[:, None]
    return HTransform(h, float(alpha), L, h**2 * dn.mu, dn)


@dataclass(frozen=True)
class Trichotomy:
    irreducible: bool
    nonnegative: bool
    recurrent: bool
    ground_state_case: bool

    @property
    def consistent(self) -> bool:
        """Recurrence coincides with ``alpha = -lambda_1`` and ``h`` proportional to the ground state."""
        return self.recurrent == self.ground_state_case


def trichotomy(dn: DnOperator, h, alpha: float, spec: SpectralResult | None = None,
               tol=DEFAULTS["recurrent_abs"]) -> Trichotomy:
    """Irreducibility, non-negativity and recurrence of the h-transformed form."""
    h = np.asarray(h, dtype=float)
    if not is_markovian(dn.S):
        raise PositivityUnknown("base trace semigroup is not positivity preserving")
    if not is_alpha_excessive(dn, h, alpha):
        raise NotExcessive(f"h is not {alpha}-excessive")
    ht = h_transform(dn, h, alpha)
    spec = spectrum(dn) if spec is None else spec
    lam1 = spec.lambda1
    irreducible = is_irreducible_matrix(ht.transformed_generator)
    nonnegative = bool(alpha >= -lam1 - tol)
    recurrent = bool(irreducible and np.max(np.abs(ht.row_sums())) < tol)
    # cross-check against the spectral characterisation, in the mu-weighted geometry
    g = spec.ground_state
    hn = h / np.sqrt(h @ (dn.mu * h))
    gn = g / np.sqrt(g @ (dn.mu * g))
    gs_case = bool(abs(alpha + lam1) < tol and np.max(np.abs(hn - gn)) < tol)
    out = Trichotomy(irreducible, nonnegative, recurrent, gs_case)
    if not out.consistent:
        log.warning("recurrence (%s) disagrees with ground-state characterisation (%s)", recurrent, gs_case)
    return out
