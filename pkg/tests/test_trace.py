import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from dnlab.exceptions import NotMarkovian
from dnlab.forms import energy, harmonic_extension, is_markovian, is_sub_markovian, random_form
from dnlab.io import load_matrix_csv
from dnlab.trace import DnOperator, beurling_deny, dn_operator, schur_complement, to_csv, verify_trace_generator


def test_p3_exact(p3):
    S = dn_operator(p3).S
    assert np.max(np.abs(S - np.array([[0.5, -0.5], [-0.5, 0.5]]))) <= 1e-14


def test_s3_exact(s3):
    S = dn_operator(s3).S
    assert np.max(np.abs(S - (np.eye(3) - np.ones((3, 3)) / 3))) <= 1e-14


def test_generator_scales_by_boundary_measure(p3):
    form = type(p3).from_edges(p3.vertices, [("a", "b", 1.0), ("b", "c", 1.0)], p3.boundary, mu={"a": 2.0})
    dn = dn_operator(form)
    assert np.allclose(dn.N, np.diag([0.5, 1.0]) @ dn.S)


@pytest.mark.parametrize("seed", range(5))
def test_trace_form_is_minimal_energy(seed):
    # variational oracle: numerical minimisation over the interior values
    rng = np.random.default_rng(seed)
    form = random_form(rng, n=5, n_boundary=3, kill=True)
    phi = rng.standard_normal(3)
    G = form.G

    def e(x):
        u = np.zeros(form.n)
        u[form.F] = phi
        u[G] = x
        return energy(form, u)

    best = minimize(e, np.zeros(len(G)), method="BFGS", options={"gtol": 1e-12}).fun
    S = dn_operator(form).S
    assert phi @ S @ phi == pytest.approx(best, rel=1e-8)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_tower_property(seed):
    # eliminating interior vertices one at a time gives the same trace
    rng = np.random.default_rng(seed)
    form = random_form(rng, n=7, n_boundary=3, kill=True)
    A = form.A
    keep = list(range(form.n))
    M = A
    for g in form.G[::-1]:
        pos = keep.index(g)
        rest = [k for k in range(len(keep)) if k != pos]
        M = schur_complement(M, rest)
        keep.pop(pos)
    order = [keep.index(f) for f in form.F]
    assert np.allclose(M[np.ix_(order, order)], dn_operator(form).S, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_trace_is_symmetric_sub_markovian(seed):
    rng = np.random.default_rng(seed)
    form = random_form(rng, kill=bool(seed % 2))
    S = dn_operator(form).S
    assert np.allclose(S, S.T, atol=0)
    assert is_sub_markovian(S)
    if not np.any(form.kill):
        assert np.allclose(S.sum(axis=1), 0.0, atol=1e-12)


def test_generator_identity(rng):
    for _ in range(10):
        form = random_form(rng, kill=True)
        dn = dn_operator(form)
        phi = rng.standard_normal(len(form.F))
        u = harmonic_extension(form, phi)
        assert phi @ dn.S @ phi == pytest.approx(energy(form, u), rel=1e-10)


def test_beurling_deny_reconstructs_form(rng):
    form = random_form(rng, n=7, n_boundary=4, kill=True)
    dn = dn_operator(form)
    bd = beurling_deny(dn)
    phi = rng.standard_normal(4)
    assert bd.quadratic_form(phi) == pytest.approx(phi @ dn.S @ phi, rel=1e-12)
    assert np.all(bd.jump_kernel >= 0) and np.all(bd.killing_vector >= -1e-12)


def test_beurling_deny_rejects_positive_offdiagonal():
    dn = DnOperator.from_matrix(np.array([[1.0, 0.2], [0.2, 1.0]]))
    with pytest.raises(NotMarkovian):
        beurling_deny(dn)


def test_verify_trace_generator_p3(p3):
    rep = verify_trace_generator(p3, samples=20_000, seed=3)
    assert rep["passed"], rep["max_z"]
    assert np.allclose(rep["target"], -dn_operator(p3).N)


def test_csv_round_trip(tmp_path, s3):
    dn = dn_operator(s3)
    path = tmp_path / "S.csv"
    path.write_text(to_csv(dn.S, dn.boundary_ids))
    ids, M = load_matrix_csv(path)
    assert ids == list(dn.boundary_ids)
    assert np.array_equal(M, dn.S)
    assert is_markovian(M)
