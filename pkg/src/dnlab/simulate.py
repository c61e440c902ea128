"""Monte Carlo counterparts of the DN constructions.

All estimators split their samples into fixed-size blocks.  Block ``b`` draws
from a Philox generator keyed by ``(seed, b)``, per-sample results are
concatenated in block order and reduced once, so estimates are bit-identical
for any number of workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache, partial

import numpy as np
import scipy.linalg

from .bessel import bessel_j
from .disk import DiskModel
from .exceptions import InputError, NumericError
from .forms import FormSpec
from .perturbation import SignedPotential

__all__ = [
    "ChainPath",
    "McEstimate",
    "block_rng",
    "run_blocks",
    "simulate_chain",
    "feynman_kac_matrix",
    "feynman_kac_exact",
    "traced_boundary_generator",
    "wos_harmonic_extension",
    "sample_ball_exit_time",
    "ConstantData",
    "FourierMode",
    "BLOCK_SIZE",
    "EPS_SHELL",
    "STEP_CAP",
]

BLOCK_SIZE = 4096
EPS_SHELL = 1e-4
STEP_CAP = 10_000
MAX_DISCARD = 1e-3  # tolerated fraction of walks stopped by STEP_CAP


@dataclass(frozen=True)
class ChainPath:
    states: list
    holding_times: np.ndarray
    feynman_kac_weight: float
    killed: bool = False


@dataclass(frozen=True)
class McEstimate:
    """Sample mean with standard error ``std / sqrt(samples)``; arrays allowed."""

    value: np.ndarray | float
    stderr: np.ndarray | float
    samples: int
    seed: int
    discarded: int = 0


def block_rng(seed: int, block: int) -> np.random.Generator:
    """Counter-based generator for one block of samples."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(block),))
    return np.random.Generator(np.random.Philox(ss))


def _blocks(samples):
    sizes = [BLOCK_SIZE] * (samples // BLOCK_SIZE)
    if samples % BLOCK_SIZE:
        sizes.append(samples % BLOCK_SIZE)
    return sizes


def run_blocks(func, samples: int, seed: int, workers: int = 1):
    """Evaluate ``func(rng, size)`` on each block; results in block order."""
    sizes = _blocks(samples)
    tasks = [(seed, b, size) for b, size in enumerate(sizes)]
    call = partial(_call_block, func)
    if workers <= 1 or len(tasks) <= 1:
        return [call(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(call, tasks))


def _call_block(func, task):
    seed, b, size = task
    return func(block_rng(seed, b), size)


def _mean_se(x):
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    mean = x.mean(axis=0)
    se = x.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros_like(mean)
    return mean, se


# -- continuous-time chains ------------------------------------------------


def _rates(form: FormSpec):
    """Jump rates ``w_ij / m_i`` with a trailing cemetery column ``k_i / m_i``."""
    Q = np.zeros((form.n, form.n + 1))
    Q[:, : form.n] = form.weights / form.m[:, None]
    Q[:, form.n] = form.kill / form.m
    return Q


def _potential_density(form, kappa):
    if kappa is None:
        return np.zeros(form.n)
    if not isinstance(kappa, SignedPotential):
        kappa = SignedPotential.from_vector(kappa)
    return kappa.vector / form.m


def simulate_chain(form: FormSpec, kappa=None, start=None, horizon: float = 1.0, seed: int = 0,
                   rng: np.random.Generator | None = None) -> ChainPath:
    """Exact path of the chain with rates ``w_ij / m_i`` up to ``horizon``.

    The Feynman-Kac weight is ``exp(-int kappa(X_t)/m(X_t) dt)``, i.e. the
    potential is read as a density against ``m``.  Killing weights send the
    chain to a cemetery, which ends the path early.
    """
    if horizon <= 0:
        raise InputError("horizon must be positive", "horizon")
    rng = block_rng(seed, 0) if rng is None else rng
    Q = _rates(form)
    total = Q.sum(axis=1)
    v = _potential_density(form, kappa)
    i = form.index[form.vertices[0] if start is None else start]
    t = 0.0
    exponent = 0.0
    states, holds = [form.vertices[i]], []
    killed = False
    while True:
        hold = rng.exponential(1.0 / total[i]) if total[i] > 0 else np.inf
        if t + hold >= horizon:
            holds.append(horizon - t)
            exponent += v[i] * (horizon - t)
            break
        holds.append(hold)
        exponent += v[i] * hold
        t += hold
        j = rng.choice(form.n + 1, p=Q[i] / total[i])
        if j == form.n:
            killed = True
            break
        i = j
        states.append(form.vertices[i])
    return ChainPath(states, np.array(holds), math.exp(-exponent), killed)


def _fk_block(Q, v, start, t_end, rng, size):
    n = Q.shape[0]
    total = Q.sum(axis=1)
    cum = np.cumsum(Q / np.where(total > 0, total, 1.0)[:, None], axis=1)
    cum[:, -1] = 1.0
    state = np.full(size, start)
    t = np.zeros(size)
    expo = np.zeros(size)
    alive = np.ones(size, dtype=bool)
    active = np.ones(size, dtype=bool)
    while np.any(active):
        idx = np.flatnonzero(active)
        s = state[idx]
        rate = total[s]
        with np.errstate(divide="ignore"):
            hold = rng.standard_exponential(len(idx)) / rate
        done = t[idx] + hold >= t_end
        stay = np.where(done, t_end - t[idx], hold)
        expo[idx] += v[s] * stay
        t[idx] += stay
        active[idx[done]] = False
        moving = idx[~done]
        if len(moving):
            u = rng.random(len(moving))
            nxt = (u[:, None] > cum[state[moving]]).sum(axis=1)
            dead = nxt == n
            alive[moving[dead]] = False
            active[moving[dead]] = False
            state[moving[~dead]] = nxt[~dead]
    out = np.zeros((size, n))
    w = np.where(alive, np.exp(-expo), 0.0)
    out[np.arange(size), state] = w
    return out


def feynman_kac_matrix(form: FormSpec, kappa, t: float, samples: int = 100_000, seed: int = 0,
                       workers: int = 1) -> McEstimate:
    """Estimate ``P^kappa_t(i, j) = E_i[exp(-int kappa/m) ; X_t = j]`` row by row."""
    Q = _rates(form)
    v = _potential_density(form, kappa)
    vals, ses = [], []
    for i in range(form.n):
        func = partial(_fk_block, Q, v, i, float(t))
        rows = np.concatenate(run_blocks(func, samples, seed * 1_000_003 + i, workers))
        m, s = _mean_se(rows)
        vals.append(m)
        ses.append(s)
    return McEstimate(np.array(vals), np.array(ses), samples, seed)


def feynman_kac_exact(form: FormSpec, kappa, t: float) -> np.ndarray:
    """``exp(-t diag(m)^-1 (A + diag(kappa)))``."""
    v = _potential_density(form, kappa)
    L = form.A / form.m[:, None] + np.diag(v)
    return scipy.linalg.expm(-t * L)


def _trace_block(hold_rate, cum, interior, start, n, rng, size):
    """Excursions from boundary vertex ``start``: boundary-clock holds and landing sites."""
    holds = rng.standard_exponential(size) / hold_rate[start]
    state = np.full(size, start)
    u = rng.random(size)
    state = (u[:, None] > cum[state]).sum(axis=1)
    active = np.flatnonzero(interior[np.minimum(state, n - 1)] & (state < n))
    while len(active):
        u = rng.random(len(active))
        state[active] = (u[:, None] > cum[state[active]]).sum(axis=1)
        keep = (state[active] < n)
        keep[keep] = interior[state[active][keep]]
        active = active[keep]
    return holds, state


def traced_boundary_generator(form: FormSpec, samples: int = 100_000, seed: int = 0,
                              workers: int = 1) -> McEstimate:
    """Empirical generator of the chain watched only on the boundary.

    From each boundary vertex ``i`` (``samples`` excursions apiece) the chain
    holds for an exponential time on the boundary clock ``dmu`` (rate
    ``A_ii / mu_i``), jumps, and runs through the interior until it lands on
    the boundary or is killed.  Rates are ``count / total boundary time`` with
    standard error ``sqrt(count) / total boundary time``; the cemetery is
    folded into the diagonal.  The estimate converges to ``-N``.
    """
    n = form.n
    Q = _rates(form)
    total = Q.sum(axis=1)
    if np.any(total == 0):
        raise InputError("every vertex needs a positive jump or killing rate", "edges")
    cum = np.cumsum(Q / total[:, None], axis=1)
    cum[:, -1] = 1.0
    interior = np.zeros(n, dtype=bool)
    interior[form.G] = True
    diagA = np.diag(form.A)
    hold_rate = np.zeros(n)
    hold_rate[form.F] = diagA[form.F] / form.mu
    k = len(form.F)
    pos = -np.ones(n + 1, dtype=int)
    pos[form.F] = np.arange(k)
    value = np.zeros((k, k))
    stderr = np.zeros((k, k))
    for a, i in enumerate(form.F):
        func = partial(_trace_block, hold_rate, cum, interior, int(i), n)
        parts = run_blocks(func, samples, seed * 1_000_003 + a, workers)
        holds = np.concatenate([p[0] for p in parts])
        land = np.concatenate([p[1] for p in parts])
        T = holds.sum()
        lp = pos[land]  # -1 marks the cemetery
        counts = np.bincount(lp[lp >= 0], minlength=k).astype(float)
        escaped = counts.sum() - counts[a] + np.count_nonzero(lp < 0)
        counts[a] = 0.0
        value[a] = counts / T
        stderr[a] = np.sqrt(counts) / T
        value[a, a] = -escaped / T
        stderr[a, a] = math.sqrt(escaped) / T
    return McEstimate(value, stderr, samples, seed)


# -- walk on spheres -------------------------------------------------------


@lru_cache(maxsize=4)
def _exit_time_table(n_grid: int = 20001, t_max: float = 12.0, n_zeros: int = 400):
    """CDF of the exit time of standard planar Brownian motion from the unit disk."""
    from scipy.special import jn_zeros  # zeros only; the series uses our J_1

    j = jn_zeros(0, n_zeros)
    coef = 2.0 / (j * bessel_j(1, j))
    t = np.linspace(0.0, t_max, n_grid)
    surv = np.ones_like(t)
    tt = t[1:, None]
    surv[1:] = np.sum(coef[None, :] * np.exp(-0.5 * j[None, :] ** 2 * tt), axis=1)
    cdf = np.clip(1.0 - surv, 0.0, 1.0)
    cdf = np.maximum.accumulate(cdf)
    return t, cdf, coef[0], 0.5 * j[0] ** 2


def sample_ball_exit_time(rng: np.random.Generator, size: int) -> np.ndarray:
    """Exit times from the unit disk by inverse-CDF tabulation with an exact exponential tail."""
    t, cdf, c1, a1 = _exit_time_table()
    u = rng.random(size)
    out = np.interp(u, cdf, t)
    tail = u > cdf[-1]
    if np.any(tail):
        out[tail] = np.log(c1 / (1.0 - u[tail])) / a1
    return out


@dataclass(frozen=True)
class ConstantData:
    """Picklable constant boundary function."""

    value: float

    def __call__(self, theta):
        return np.full_like(np.asarray(theta, dtype=float), self.value)


@dataclass(frozen=True)
class FourierMode:
    """Picklable ``cos(n theta)`` (or ``sin`` when ``kind == "sin"``)."""

    n: int
    kind: str = "cos"

    def __call__(self, theta):
        f = np.cos if self.kind == "cos" else np.sin
        return f(self.n * np.asarray(theta, dtype=float))


def _wos_block(lam, x0, phi, rng, size):
    x = np.tile(np.asarray(x0, dtype=float), (size, 1))
    expo = np.zeros(size)
    active = np.ones(size, dtype=bool)
    for _ in range(STEP_CAP):
        idx = np.flatnonzero(active)
        if len(idx) == 0:
            break
        r = np.sqrt(np.sum(x[idx] ** 2, axis=1))
        d = 1.0 - r
        stop = d < EPS_SHELL
        active[idx[stop]] = False
        idx, d = idx[~stop], d[~stop]
        ang = rng.random(len(idx)) * (2.0 * np.pi)
        tau = sample_ball_exit_time(rng, len(idx)) if lam else None
        x[idx, 0] += d * np.cos(ang)
        x[idx, 1] += d * np.sin(ang)
        if lam:
            expo[idx] += lam * d**2 * tau
    discarded = active.copy()
    theta = np.arctan2(x[:, 1], x[:, 0])
    val = np.exp(-expo) * np.asarray(phi(theta), dtype=float)
    return val, discarded


def wos_harmonic_extension(model: DiskModel, phi, x, samples: int = 100_000, seed: int = 0,
                           workers: int = 1) -> McEstimate:
    """Estimate ``E_x[exp(-lambda tau) phi(X_tau)]`` by walk on spheres.

    Each step jumps to a uniform point of the largest ball around the walker
    and multiplies the weight by ``exp(-lambda d^2 tau_1)`` with ``tau_1`` an
    exact unit-disk exit time.  Walks within ``EPS_SHELL`` of the circle are
    projected onto it; walks exceeding ``STEP_CAP`` steps are discarded.
    """
    if model.lam < 0:
        raise InputError("walk on spheres needs lambda >= 0 (bounded weights)", "lambda")
    x = np.asarray(x, dtype=float)
    if x.shape != (2,) or x @ x >= 1.0:
        raise InputError("x must be a point of the open unit disk", "x")
    if not callable(phi):
        phi = ConstantData(float(phi))
    func = partial(_wos_block, float(model.lam), tuple(x), phi)
    parts = run_blocks(func, samples, seed, workers)
    vals = np.concatenate([p[0] for p in parts])
    disc = np.concatenate([p[1] for p in parts])
    if disc.sum() >= MAX_DISCARD * samples:
        raise NumericError(f"{int(disc.sum())} of {samples} walks hit the step cap")
    kept = vals[~disc]
    mean, se = _mean_se(kept)
    return McEstimate(float(mean), float(se), int(len(kept)), seed, int(disc.sum()))
