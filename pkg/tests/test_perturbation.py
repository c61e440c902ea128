import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import fixture_form, fixture_kappa, nonsingular_instance, positive_instance, random_kappa
from dnlab.exceptions import InputError, NonDiagonalDifference, SingularInterior
from dnlab.forms import energy, is_markovian, is_sub_markovian, random_form
from dnlab.perturbation import (
    SignedPotential,
    calderon_boundary_recover,
    decomposition_threshold,
    form_bound,
    form_bound_on_trace,
    interior_positivity,
    perturbed_dn,
    perturbed_form,
    trace_positivity_preserving,
    verify_perturbed_trace_identity,
)
from dnlab.trace import dn_operator


def dense_schur(M, F, G):
    return M[np.ix_(F, F)] - M[np.ix_(F, G)] @ np.linalg.solve(M[np.ix_(G, G)], M[np.ix_(G, F)])


def test_overlapping_parts_rejected():
    with pytest.raises(InputError):
        SignedPotential(np.array([1.0, 0.0]), np.array([0.5, 0.0]))


def test_p3_negative_potential(p3):
    kappa = SignedPotential.from_dicts(p3, minus={"b": 1.0})
    S = perturbed_dn(p3, kappa).S
    assert np.allclose(S, [[0.0, -1.0], [-1.0, 0.0]], atol=1e-15)
    assert is_markovian(S)


def test_threshold_detects_singular_block(p3):
    kappa = SignedPotential.from_dicts(p3, minus={"b": 2.0})
    ok, margin = decomposition_threshold(p3, kappa)
    assert not ok and margin < 1e-12
    with pytest.raises(SingularInterior):
        perturbed_dn(p3, kappa)


def test_perturbed_dn_matches_dense_oracle(rng):
    for _ in range(10):
        form, kappa = nonsingular_instance(rng)
        M = perturbed_form(form, kappa)
        S = perturbed_dn(form, kappa).S
        assert np.allclose(S, dense_schur(M, form.F, form.G), atol=1e-10)


def test_identities_on_random_instances(rng):
    for _ in range(25):
        form, kappa = nonsingular_instance(rng)
        rep = verify_perturbed_trace_identity(form, kappa)
        assert rep["passed"], rep
        assert rep["perturbation_symmetry"] <= 1e-12


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_positivity_preservation(seed):
    rng = np.random.default_rng(seed)
    form, kappa = positive_instance(rng)
    assert interior_positivity(form, kappa)
    assert trace_positivity_preserving(form, kappa)


def test_positivity_fails_without_interior_positivity():
    # p3 with kappa_b = -3: interior block is -1, trace off-diagonal becomes +1
    form = fixture_form("p3")
    kappa = SignedPotential.from_dicts(form, minus={"b": 3.0})
    assert not interior_positivity(form, kappa)
    assert not trace_positivity_preserving(form, kappa)


def test_form_bound_inequality(rng):
    for _ in range(10):
        form = random_form(rng, n=6, kill=True)
        kappa = SignedPotential.from_vector(-0.3 * rng.random(form.n))
        cert = form_bound(form, kappa)
        kp = SignedPotential(kappa.kappa_plus, np.zeros(form.n))
        for _ in range(50):
            u = rng.standard_normal(form.n)
            lhs = np.sum(kappa.kappa_minus * u**2)
            rhs = cert.delta * (u @ perturbed_form(form, kp) @ u) + cert.c_delta * np.sum(form.m * u**2)
            assert lhs <= rhs * (1 + 1e-10) + 1e-12


def test_trace_bound_is_no_worse(rng):
    form = random_form(rng, n=7, n_boundary=3, kill=True)
    kappa = SignedPotential.from_vector(-0.2 * rng.random(form.n))
    full = form_bound(form, kappa, c_grid=(1.0,))
    trace = form_bound_on_trace(form, kappa, c_grid=(1.0,))
    assert trace.restricted_to_trace and trace.delta <= full.delta + 1e-12


def test_boundary_perturbation_commutes_with_trace(rng):
    for _ in range(20):
        form = random_form(rng)
        v = np.zeros(form.n)
        v[form.F] = rng.normal(size=len(form.F))
        dn0 = dn_operator(form)
        dnk = perturbed_dn(form, v)
        assert np.max(np.abs(dnk.S - dn0.S - np.diag(v[form.F]))) <= 1e-14 * max(1, np.max(np.abs(dn0.S)))
        assert np.max(np.abs(calderon_boundary_recover(dnk, dn0) - v[form.F])) <= 1e-12


def test_interior_perturbation_is_not_diagonal():
    form = fixture_form("p3")
    kappa = fixture_kappa("p3_negative", form)
    with pytest.raises(NonDiagonalDifference):
        calderon_boundary_recover(perturbed_dn(form, kappa), dn_operator(form))


def test_robin_shift(rng):
    for _ in range(20):
        form = random_form(rng)
        beta = rng.normal(size=len(form.F))
        v = np.zeros(form.n)
        v[form.F] = beta * form.mu
        alpha0 = max(0.0, np.max(-beta))
        S = perturbed_dn(form, v).S + alpha0 * np.diag(form.mu)
        assert is_sub_markovian(S)


def test_perturbed_energy_matches_matrix(rng):
    form, kappa = nonsingular_instance(rng)
    u = rng.standard_normal(form.n)
    assert u @ perturbed_form(form, kappa) @ u == pytest.approx(
        energy(form, u) + np.sum(kappa.vector * u**2), rel=1e-12)


def test_random_kappa_supports_disjoint(rng):
    form = random_form(rng)
    k = random_kappa(rng, form)
    assert not np.any((k.kappa_plus > 0) & (k.kappa_minus > 0))
