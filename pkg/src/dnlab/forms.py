"""Finite symmetric Dirichlet forms on weighted graphs with a boundary.

A form is described by symmetric jump weights ``w_ij``, a killing vector ``k``,
a reference measure ``m`` and a boundary set ``F`` carrying its own measure
``mu``.  Its energy matrix is

    A = diag(sum_j w_ij + k_i) - W

so that ``u @ A @ v`` equals ``sum_{i<j} w_ij (u_i-u_j)(v_i-v_j) + sum_i k_i u_i v_i``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np
import scipy.linalg
from scipy.sparse.csgraph import connected_components

from .exceptions import InputError, SingularInterior
from .tolerances import DEFAULTS

__all__ = [
    "FormSpec",
    "Decomposition",
    "energy",
    "harmonic_extension",
    "decompose",
    "extension_matrix",
    "is_markovian",
    "is_sub_markovian",
    "is_irreducible",
    "is_irreducible_matrix",
    "path_graph",
    "star_graph",
    "random_form",
]


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FormSpec:
    """Immutable weighted graph with boundary partition.

    Parameters
    ----------
    vertices : sequence of hashable ids
    weights : (n, n) array
        Symmetric nonnegative jump weights with zero diagonal.
    kill : (n,) array
        Nonnegative killing weights.
    m : (n,) array
        Positive reference measure.
    boundary : sequence of ids
        Nonempty boundary set ``F``; its order fixes the row order of every
        boundary matrix.
    mu : (|F|,) array
        Positive boundary measure, in boundary order.
    """

    vertices: tuple
    weights: np.ndarray
    kill: np.ndarray
    m: np.ndarray
    boundary: tuple
    mu: np.ndarray
    index: dict = field(init=False, repr=False)
    F: np.ndarray = field(init=False, repr=False)
    G: np.ndarray = field(init=False, repr=False)
    A: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        set_ = object.__setattr__
        vertices = tuple(self.vertices)
        set_(self, "vertices", vertices)
        n = len(vertices)
        index = {v: i for i, v in enumerate(vertices)}
        if len(index) != n:
            raise InputError("duplicate vertex ids", "vertices")
        set_(self, "index", index)

        W = np.array(self.weights, dtype=float)
        if W.shape != (n, n):
            raise InputError(f"expected shape {(n, n)}, got {W.shape}", "edges")
        if not np.all(np.isfinite(W)):
            raise InputError("weights must be finite", "edges")
        if np.any(W < 0):
            i, j = np.argwhere(W < 0)[0]
            raise InputError(f"negative weight between {vertices[i]!r} and {vertices[j]!r}", "edges")
        if np.any(np.diag(W) != 0):
            i = int(np.flatnonzero(np.diag(W))[0])
            raise InputError(f"self-loop at {vertices[i]!r}", "edges")
        if not np.array_equal(W, W.T):
            raise InputError("weights must be symmetric", "edges")
        set_(self, "weights", _frozen(W))

        k = np.zeros(n) if self.kill is None else np.array(self.kill, dtype=float)
        if k.shape != (n,) or np.any(~np.isfinite(k)) or np.any(k < 0):
            raise InputError("killing weights must be a finite nonnegative vertex vector", "kill")
        set_(self, "kill", _frozen(k))

        m = np.ones(n) if self.m is None else np.array(self.m, dtype=float)
        if m.shape != (n,) or np.any(~np.isfinite(m)) or np.any(m <= 0):
            raise InputError("reference measure must be a finite positive vertex vector", "m")
        set_(self, "m", _frozen(m))

        boundary = tuple(self.boundary)
        if not boundary:
            raise InputError("boundary must be nonempty", "boundary")
        for b in boundary:
            if b not in index:
                raise InputError(f"unknown vertex {b!r}", "boundary")
        if len(set(boundary)) != len(boundary):
            raise InputError("duplicate boundary ids", "boundary")
        set_(self, "boundary", boundary)
        F = np.array([index[b] for b in boundary], dtype=int)
        inF = np.zeros(n, dtype=bool)
        inF[F] = True
        set_(self, "F", F)
        set_(self, "G", np.flatnonzero(~inF))

        mu = np.ones(len(F)) if self.mu is None else np.array(self.mu, dtype=float)
        if mu.shape != (len(F),) or np.any(~np.isfinite(mu)) or np.any(mu <= 0):
            raise InputError("boundary measure must be a finite positive boundary vector", "mu")
        set_(self, "mu", _frozen(mu))

        A = np.diag(W.sum(axis=1) + k) - W
        set_(self, "A", _frozen(A))

    @classmethod
    def from_edges(cls, vertices, edges, boundary, kill=None, m=None, mu=None):
        """Build a form from ``(i, j, w)`` triples and id-keyed dicts.

        Repeated edges accumulate.  ``kill``, ``m`` and ``mu`` may be dicts
        (missing ids default to 0, 1 and 1) or full vectors.
        """
        vertices = list(vertices)
        index = {v: i for i, v in enumerate(vertices)}
        n = len(vertices)
        W = np.zeros((n, n))
        for e, (i, j, w) in enumerate(edges):
            if i not in index or j not in index:
                raise InputError(f"unknown vertex in edge ({i!r}, {j!r})", f"edges[{e}]")
            if i == j:
                raise InputError(f"self-loop at {i!r}", f"edges[{e}]")
            w = float(w)
            if not np.isfinite(w) or w < 0:
                raise InputError(f"weight must be finite and >= 0, got {w}", f"edges[{e}].w")
            W[index[i], index[j]] += w
            W[index[j], index[i]] += w

        def vec(values, ids, default, name):
            if values is None:
                return None
            if isinstance(values, dict):
                out = np.full(len(ids), default, dtype=float)
                pos = {v: p for p, v in enumerate(ids)}
                for key, val in values.items():
                    if key not in pos:
                        raise InputError(f"unknown vertex {key!r}", f"{name}.{key}")
                    out[pos[key]] = float(val)
                return out
            return np.asarray(values, dtype=float)

        return cls(
            vertices,
            W,
            vec(kill, vertices, 0.0, "kill"),
            vec(m, vertices, 1.0, "m"),
            tuple(boundary),
            vec(mu, list(boundary), 1.0, "mu"),
        )

    @property
    def n(self) -> int:
        return len(self.vertices)

    @property
    def interior(self) -> tuple:
        return tuple(self.vertices[i] for i in self.G)

    def vertex_vector(self, values, default=0.0) -> np.ndarray:
        """Vertex vector from a dict keyed by id, or pass an array through."""
        if isinstance(values, dict):
            out = np.full(self.n, default, dtype=float)
            for key, val in values.items():
                if key not in self.index:
                    raise InputError(f"unknown vertex {key!r}")
                out[self.index[key]] = float(val)
            return out
        out = np.asarray(values, dtype=float)
        if out.shape != (self.n,):
            raise InputError(f"expected a vertex vector of length {self.n}, got shape {out.shape}")
        return out

    def to_dict(self) -> dict:
        iu = np.argwhere(np.triu(self.weights) > 0)
        return {
            "vertices": list(self.vertices),
            "edges": [
                {"i": self.vertices[i], "j": self.vertices[j], "w": float(self.weights[i, j])}
                for i, j in iu
            ],
            "kill": {v: float(x) for v, x in zip(self.vertices, self.kill) if x != 0},
            "m": {v: float(x) for v, x in zip(self.vertices, self.m)},
            "boundary": list(self.boundary),
            "mu": {v: float(x) for v, x in zip(self.boundary, self.mu)},
        }


@dataclass(frozen=True)
class Decomposition:
    """``u = harmonic_part + interior_part`` with ``interior_part`` vanishing on F."""

    harmonic_part: np.ndarray
    interior_part: np.ndarray


def _check_vector(u, n, name="u"):
    u = np.asarray(u, dtype=float)
    if u.shape != (n,):
        raise InputError(f"expected length {n}, got shape {u.shape}", name)
    return u


def energy(form: FormSpec, u, v=None) -> float:
    """Bilinear energy ``u @ A @ v`` (``v`` defaults to ``u``)."""
    u = _check_vector(u, form.n, "u")
    v = u if v is None else _check_vector(v, form.n, "v")
    return float(u @ form.A @ v)


def interior_solver(block: np.ndarray, tol: float = DEFAULTS["singular_rel"]):
    """Return ``solve(rhs)`` for a symmetric interior block, or raise SingularInterior.

    The block is declared singular when its smallest absolute eigenvalue falls
    below ``tol`` times its spectral radius.
    """
    if block.shape[0] == 0:
        return lambda rhs: np.zeros((0,) + np.shape(rhs)[1:])
    ev = np.linalg.eigvalsh(block)
    radius = np.max(np.abs(ev))
    margin = np.min(np.abs(ev))
    if radius == 0 or margin < tol * radius:
        raise SingularInterior(
            f"interior block is singular (min |eigenvalue| {margin:.3e}, spectral radius {radius:.3e})",
            margin=margin,
        )
    lu = scipy.linalg.lu_factor(block) if np.min(ev) < 0 else None
    if lu is None:
        cho = scipy.linalg.cho_factor(block)
        return lambda rhs: scipy.linalg.cho_solve(cho, rhs)
    return lambda rhs: scipy.linalg.lu_solve(lu, rhs)


def extension_matrix(form: FormSpec, shift=None, tol: float = DEFAULTS["singular_rel"]) -> np.ndarray:
    """Columns are the (shifted-)harmonic extensions of boundary coordinate vectors.

    ``shift`` is an optional vertex vector added to the diagonal of ``A``; this
    gives the kappa-harmonic extension for a signed potential ``kappa``.
    """
    M = form.A if shift is None else form.A + np.diag(shift)
    F, G = form.F, form.G
    E = np.zeros((form.n, len(F)))
    E[F, np.arange(len(F))] = 1.0
    if len(G):
        solve = interior_solver(M[np.ix_(G, G)], tol)
        E[G] = -solve(M[np.ix_(G, F)])
    return E


def harmonic_extension(form: FormSpec, phi, shift=None) -> np.ndarray:
    """Extension ``u`` of boundary data with ``u|_F = phi`` and ``(A u)|_G = 0``."""
    phi = _check_vector(phi, len(form.F), "phi")
    return extension_matrix(form, shift) @ phi


def decompose(form: FormSpec, u) -> Decomposition:
    """Split ``u`` into its harmonic part and a part vanishing on the boundary."""
    u = _check_vector(u, form.n)
    h = harmonic_extension(form, u[form.F])
    rest = u - h
    rest[form.F] = 0.0
    return Decomposition(harmonic_part=h, interior_part=rest)


def is_markovian(M, tol: float = DEFAULTS["markov_rel"]) -> bool:
    """True iff every off-diagonal entry is <= 0 up to ``tol`` times ``max|M|``.

    On a finite space this is equivalent to ``E(f+, f-) <= 0`` for all ``f``,
    i.e. positivity preservation of the associated semigroup.
    """
    M = np.asarray(M, dtype=float)
    off = M - np.diag(np.diag(M))
    scale = max(np.max(np.abs(M)), 1.0) if M.size else 1.0
    return bool(np.all(off <= tol * scale))


def is_sub_markovian(M, tol: float = DEFAULTS["markov_rel"]) -> bool:
    """Off-diagonals <= 0 and row sums >= 0: a finite Dirichlet form matrix."""
    M = np.asarray(M, dtype=float)
    scale = max(np.max(np.abs(M)), 1.0) if M.size else 1.0
    return is_markovian(M, tol) and bool(np.all(M.sum(axis=1) >= -tol * scale))


def is_irreducible_matrix(M, tol: float = 0.0) -> bool:
    """Connectivity of the graph of nonzero off-diagonal entries."""
    M = np.asarray(M, dtype=float)
    if M.shape[0] <= 1:
        return True
    scale = np.max(np.abs(M)) or 1.0
    adj = np.abs(M) > tol * scale
    np.fill_diagonal(adj, False)
    n_comp, _ = connected_components(adj, directed=False)
    return n_comp == 1


def is_irreducible(form: FormSpec) -> bool:
    return is_irreducible_matrix(form.weights)


# -- small named graphs and random instances -------------------------------


def path_graph(n: int = 3, weight: float = 1.0, boundary: str = "ends", **kw) -> FormSpec:
    """Path on ids ``0..n-1``; for ``n == 3`` the ids are ``a, b, c``."""
    ids = list("abc") if n == 3 else list(range(n))
    edges = [(ids[i], ids[i + 1], weight) for i in range(n - 1)]
    bnd = [ids[0], ids[-1]] if boundary == "ends" else list(boundary)
    return FormSpec.from_edges(ids, edges, bnd, **kw)


def star_graph(leaves: int = 3, weight: float = 1.0, **kw) -> FormSpec:
    """Star with interior center ``"c"`` and boundary leaves ``"l0", "l1", ...``."""
    ids = ["c"] + [f"l{i}" for i in range(leaves)]
    edges = [("c", f"l{i}", weight) for i in range(leaves)]
    return FormSpec.from_edges(ids, edges, ids[1:], **kw)


def random_form(
    rng: np.random.Generator,
    n: int | None = None,
    n_boundary: int | None = None,
    density: float = 0.5,
    kill: bool = False,
    measures: bool = True,
) -> FormSpec:
    """Random connected form: spanning tree plus random extra (long-range) edges."""
    n = int(rng.integers(3, 11)) if n is None else n
    n_boundary = int(rng.integers(1, n)) if n_boundary is None else n_boundary
    W = np.zeros((n, n))
    order = rng.permutation(n)
    for t in range(1, n):
        i, j = order[t], order[rng.integers(0, t)]
        W[i, j] = W[j, i] = rng.uniform(0.2, 2.0)
    extra = np.triu(rng.random((n, n)) < density, 1)
    vals = np.triu(rng.uniform(0.1, 2.0, (n, n)), 1) * extra
    W = np.where(W > 0, W, vals + vals.T)
    np.fill_diagonal(W, 0.0)
    k = rng.uniform(0.0, 1.0, n) * (rng.random(n) < 0.3) if kill else None
    m = rng.uniform(0.5, 2.0, n) if measures else None
    mu = rng.uniform(0.5, 2.0, n_boundary) if measures else None
    boundary = sorted(rng.choice(n, n_boundary, replace=False).tolist())
    return FormSpec(range(n), W, k, m, boundary, mu)
