"""Dirichlet-to-Neumann operators as Schur complements and their trace forms."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .exceptions import InputError, NotMarkovian
from .forms import FormSpec, extension_matrix, interior_solver
from .tolerances import DEFAULTS

__all__ = [
    "DnOperator",
    "BeurlingDenyData",
    "schur_complement",
    "dn_operator",
    "beurling_deny",
    "verify_trace_generator",
    "to_csv",
]


@dataclass(frozen=True, eq=False)
class DnOperator:
    """Boundary matrix pair of a DN operator.

    Attributes
    ----------
    boundary_ids : tuple
    S : ndarray
        Trace-form matrix, ``phi @ S @ psi = E(H phi, H psi)``.
    N : ndarray
        Operator on ``L^2(F, mu)``: ``N = diag(mu)^-1 S``.
    mu : ndarray
    extension : ndarray or None
        ``n x |F|`` matrix of harmonic extensions of coordinate vectors, when
        the operator was produced from a form.
    """

    boundary_ids: tuple
    S: np.ndarray
    N: np.ndarray
    mu: np.ndarray
    extension: np.ndarray | None = None

    @classmethod
    def from_matrix(cls, S, mu=None, boundary_ids=None, extension=None):
        S = np.asarray(S, dtype=float)
        if S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise InputError(f"trace matrix must be square, got shape {S.shape}", "S")
        k = S.shape[0]
        mu = np.ones(k) if mu is None else np.asarray(mu, dtype=float)
        if mu.shape != (k,) or np.any(mu <= 0):
            raise InputError("boundary measure must be positive", "mu")
        ids = tuple(range(k)) if boundary_ids is None else tuple(boundary_ids)
        return cls(ids, S, S / mu[:, None], mu, extension)

    # aliases matching the field names used in reports
    @property
    def form_matrix_S(self):
        return self.S

    @property
    def generator_N(self):
        return self.N

    def is_symmetric(self, tol=DEFAULTS["markov_rel"]) -> bool:
        scale = max(np.max(np.abs(self.S)), 1.0)
        return bool(np.max(np.abs(self.S - self.S.T)) <= tol * scale)


@dataclass(frozen=True)
class BeurlingDenyData:
    """Jump kernel and killing density of a Markovian trace matrix."""

    jump_kernel: np.ndarray
    killing_vector: np.ndarray

    def quadratic_form(self, phi) -> float:
        phi = np.asarray(phi, dtype=float)
        diff = phi[:, None] - phi[None, :]
        return float(0.5 * np.sum(diff**2 * self.jump_kernel) + phi**2 @ self.killing_vector)


def schur_complement(M, keep, tol=DEFAULTS["singular_rel"]) -> np.ndarray:
    """Schur complement of the symmetric matrix ``M`` onto the index set ``keep``."""
    M = np.asarray(M, dtype=float)
    keep = np.asarray(keep, dtype=int)
    drop = np.setdiff1d(np.arange(M.shape[0]), keep)
    S = M[np.ix_(keep, keep)]
    if len(drop) == 0:
        return S.copy()
    solve = interior_solver(M[np.ix_(drop, drop)], tol)
    S = S - M[np.ix_(keep, drop)] @ solve(M[np.ix_(drop, keep)])
    return 0.5 * (S + S.T)


def dn_operator(form: FormSpec, shift=None, tol=DEFAULTS["singular_rel"]) -> DnOperator:
    """Trace matrix ``S = A_FF - A_FG A_GG^-1 A_GF`` and ``N = diag(mu)^-1 S``.

    ``shift`` adds a vertex vector to the diagonal of ``A`` before elimination
    (used for perturbed operators).
    """
    E = extension_matrix(form, shift, tol)
    M = form.A if shift is None else form.A + np.diag(shift)
    F = form.F
    # E(H e_i, H e_j) = (M E)_F restricted, since (M E)_G = 0
    S = (M @ E)[F]
    S = 0.5 * (S + S.T)
    return DnOperator.from_matrix(S, form.mu, form.boundary, E)


def beurling_deny(dn: DnOperator, tol=DEFAULTS["markov_rel"]) -> BeurlingDenyData:
    """Read the jump kernel ``J = -offdiag(S)`` and killing ``row sums of S``."""
    S = dn.S
    J = -S.copy()
    np.fill_diagonal(J, 0.0)
    scale = max(np.max(np.abs(S)), 1.0)
    worst = -np.min(J) if J.size else 0.0
    if worst > tol * scale:
        raise NotMarkovian(f"positive off-diagonal entry {worst:.3e} in trace matrix", violation=worst)
    J = np.clip(J, 0.0, None)
    return BeurlingDenyData(jump_kernel=J, killing_vector=S.sum(axis=1))


def verify_trace_generator(form: FormSpec, dn: DnOperator | None = None, samples: int = 100_000,
                           seed: int = 0, workers: int = 1, sigmas: float = DEFAULTS["mc_sigmas"]) -> dict:
    """Compare the Monte Carlo generator of the boundary-traced chain with ``-N``."""
    from .simulate import traced_boundary_generator

    dn = dn_operator(form) if dn is None else dn
    est = traced_boundary_generator(form, samples=samples, seed=seed, workers=workers)
    target = -dn.N
    dev = np.abs(est.value - target)
    # entries with zero standard error must agree exactly (structural zeros)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(est.stderr > 0, dev / est.stderr, np.where(dev > 1e-12, np.inf, 0.0))
    return {
        "estimate": est.value,
        "stderr": est.stderr,
        "target": target,
        "max_deviation": float(dev.max()),
        "max_z": float(z.max()),
        "passed": bool(z.max() < sigmas),
        "samples": samples,
        "seed": seed,
    }


def to_csv(matrix, ids, row_ids=None) -> str:
    """Matrix as CSV with a header row of ids (row ids in the first column)."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    row_ids = ids if row_ids is None else row_ids
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id"] + [str(i) for i in ids])
    for rid, row in zip(row_ids, matrix):
        w.writerow([str(rid)] + [repr(float(x)) for x in row])
    return buf.getvalue()
