"""Discrete Calderón problem for interior Schrödinger potentials."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InputError, MaxIterExceeded, SingularInterior
from .forms import FormSpec, extension_matrix
from .trace import DnOperator, dn_operator

log = logging.getLogger(__name__)

__all__ = [
    "InverseProblem",
    "RecoveryResult",
    "forward_map",
    "forward_jacobian",
    "integral_identity_residual",
    "recover_interior",
]


def _full_potential(base: FormSpec, V, support=None):
    V = np.asarray(V, dtype=float)
    if support is None:
        if V.shape == (base.n,):
            return V
        if V.shape == (len(base.G),):
            full = np.zeros(base.n)
            full[base.G] = V
            return full
        raise InputError(f"potential must have length {base.n} or {len(base.G)}", "V")
    full = np.zeros(base.n)
    full[support] = V
    return full


def forward_map(base: FormSpec, V, support=None) -> DnOperator:
    """DN operator of ``A + diag(V)``; ``V`` given on ``support`` (default: the interior)."""
    return dn_operator(base, shift=_full_potential(base, V, support))


def forward_jacobian(base: FormSpec, V, support) -> np.ndarray:
    """``dS/dV_k = E_k E_k^T`` with ``E`` the V-harmonic extension matrix.

    Returns an array of shape ``(len(support), |F|, |F|)``.
    """
    E = extension_matrix(base, _full_potential(base, V, support))
    rows = E[np.asarray(support, dtype=int)]
    return rows[:, :, None] * rows[:, None, :]


def integral_identity_residual(base: FormSpec, V1, V2, phi) -> float:
    """``sum_x (V1 - V2)(x) (H^{V1} phi)(x) (H^{V2} phi)(x)``.

    Equals ``phi (S_{V1} - S_{V2}) phi`` and so vanishes when the DN maps agree.
    """
    V1 = _full_potential(base, V1)
    V2 = _full_potential(base, V2)
    phi = np.asarray(phi, dtype=float)
    u1 = extension_matrix(base, V1) @ phi
    u2 = extension_matrix(base, V2) @ phi
    return float(np.sum((V1 - V2) * u1 * u2))


@dataclass
class InverseProblem:
    base_form: FormSpec
    observed_dn: DnOperator
    unknown_support: np.ndarray
    regularization: float = 0.0

    def __post_init__(self):
        k = len(self.base_form.F)
        if self.observed_dn.S.shape != (k, k):
            raise InputError(f"observed DN matrix must be {k}x{k}", "observed_dn")
        support = np.asarray(self.unknown_support, dtype=int)
        if not set(support.tolist()) <= set(self.base_form.G.tolist()):
            raise InputError("unknown support must lie in the interior", "unknown_support")
        self.unknown_support = support
        if self.regularization < 0:
            raise InputError("regularization must be nonnegative", "regularization")
        if len(support) > k * (k + 1) // 2:
            warnings.warn(
                f"{len(support)} unknowns exceed the {k * (k + 1) // 2} independent entries of the data",
                stacklevel=2,
            )

    @classmethod
    def from_ids(cls, base, observed_dn, support_ids, regularization=0.0):
        return cls(base, observed_dn, [base.index[i] for i in support_ids], regularization)


@dataclass
class RecoveryResult:
    potential_estimate: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool
    jacobian_rank: int = 0
    history: list = field(default_factory=list)


def _objective(problem, V, init):
    S = forward_map(problem.base_form, V, problem.unknown_support).S
    R = S - problem.observed_dn.S
    f = np.sum(R**2) + problem.regularization * np.sum((V - init) ** 2)
    return f, R


def recover_interior(problem: InverseProblem, init=None, max_iter: int = 50, tol: float = 1e-12,
                     raise_on_fail: bool = True) -> RecoveryResult:
    """Gauss-Newton on ``||S_V - S_obs||_F^2 + reg ||V - init||^2``.

    Stops when the gradient norm drops below ``tol`` or the misfit reaches
    zero; singular interior blocks met during the line search halve the step.
    """
    base, support = problem.base_form, problem.unknown_support
    p = len(support)
    init = np.zeros(p) if init is None else np.asarray(init, dtype=float)
    reg = problem.regularization
    V = init.copy()
    f, R = _objective(problem, V, init)
    history = [float(np.sqrt(f))]
    converged = False
    it = 0
    J = None
    for it in range(max_iter + 1):
        dS = forward_jacobian(base, V, support)
        J = dS.reshape(p, -1).T  # (|F|^2, p)
        grad = 2.0 * (J.T @ R.ravel() + reg * (V - init))
        if np.linalg.norm(grad) < tol or f == 0.0:
            converged = True
            break
        if it == max_iter:
            break
        H = J.T @ J + reg * np.eye(p)
        step = -np.linalg.lstsq(H, J.T @ R.ravel() + reg * (V - init), rcond=None)[0]
        t = 1.0
        while t > 1e-12:
            try:
                f_new, R_new = _objective(problem, V + t * step, init)
            except SingularInterior:
                t *= 0.5
                continue
            if f_new <= f:
                break
            t *= 0.5
        else:
            log.info("line search stalled at iteration %d", it)
            converged = np.linalg.norm(grad) < max(tol, 1e3 * np.finfo(float).eps)
            break
        V, f, R = V + t * step, f_new, R_new
        history.append(float(np.sqrt(f)))
    rank = int(np.linalg.matrix_rank(J)) if J is not None else 0
    result = RecoveryResult(V, float(np.sqrt(np.sum(R**2))), it, converged, rank, history)
    if not converged and raise_on_fail:
        raise MaxIterExceeded(f"no convergence after {max_iter} iterations", result=result)
    return result
