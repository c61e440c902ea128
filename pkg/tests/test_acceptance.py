"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

The lines are also collected into the terminal summary (see ``conftest.py``).
"""

import json
import math

import mpmath as mp
import numpy as np

from conftest import ACCEPTANCE_LINES, FIXTURES, fixture_form, fixture_kappa, nonsingular_instance, positive_instance
from dnlab.bessel import bessel_j0_zero
from dnlab.calderon import InverseProblem, forward_jacobian, forward_map, integral_identity_residual, recover_interior
from dnlab.disk import DiskModel, dn_eigenvalue, douglas_energy, first_dirichlet_eigenvalue, gauge, v_lambda
from dnlab.exceptions import NotExcessive
from dnlab.forms import energy, harmonic_extension, is_irreducible_matrix, is_sub_markovian, random_form
from dnlab.perturbation import calderon_boundary_recover, perturbed_dn, verify_perturbed_trace_identity
from dnlab.simulate import (
    BLOCK_SIZE,
    ConstantData,
    FourierMode,
    feynman_kac_matrix,
    traced_boundary_generator,
    wos_harmonic_extension,
)
from dnlab.spectral import is_alpha_excessive, spectrum, trichotomy
from dnlab.trace import dn_operator

MC_SAMPLES = 100_000


def record(number, title, ok, detail=""):
    line = f"criterion {number:02d} [{'PASS' if ok else 'FAIL'}] {title}" + (f" ({detail})" if detail else "")
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def dense_gauss_schur(A, F, G):
    """Textbook Gaussian elimination of the interior unknowns, no pivoting beyond the diagonal."""
    M = np.array(A, dtype=float)
    order = list(G) + list(F)
    M = M[np.ix_(order, order)]
    g = len(G)
    for p in range(g):
        for r in range(p + 1, len(order)):
            f = M[r, p] / M[p, p]
            M[r, p:] -= f * M[p, p:]
    return M[g:, g:]


def test_criterion_01_schur_exactness():
    p3, s3 = fixture_form("p3"), fixture_form("s3")
    S_p3, S_s3 = dn_operator(p3).S, dn_operator(s3).S
    errs = [
        np.max(np.abs(S_p3 - np.array([[0.5, -0.5], [-0.5, 0.5]]))),
        np.max(np.abs(S_s3 - (np.eye(3) - np.ones((3, 3)) / 3))),
        np.max(np.abs(S_p3 - dense_gauss_schur(p3.A, p3.F, p3.G))),
        np.max(np.abs(S_s3 - dense_gauss_schur(s3.A, s3.F, s3.G))),
    ]
    record(1, "Schur/DN exactness on P3 and S3", max(errs) <= 1e-14, f"max error {max(errs):.1e}")


def test_criterion_02_generator_identity():
    rng = np.random.default_rng(202)
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(3, 11))
        # two or more boundary vertices: with one and no killing the form vanishes identically
        form = random_form(rng, n=n, n_boundary=int(rng.integers(2, n)), kill=bool(rng.integers(2)))
        S = dn_operator(form).S
        phi = rng.standard_normal(len(form.F))
        e = energy(form, harmonic_extension(form, phi))
        worst = max(worst, abs(phi @ S @ phi - e) / abs(e))
    zs = {}
    for name in ("p3", "s3"):
        form = fixture_form(name)
        est = traced_boundary_generator(form, samples=MC_SAMPLES, seed=2)
        dev = np.abs(est.value - (-dn_operator(form).N))
        zs[name] = float(np.max(dev / np.where(est.stderr > 0, est.stderr, 1.0)))
    ok = worst <= 1e-10 and max(zs.values()) < 5
    record(2, "generator identity and traced-chain MC", ok,
           f"max rel error {worst:.1e}; max |z| P3 {zs['p3']:.2f}, S3 {zs['s3']:.2f}")


def test_criterion_03_positivity_preservation():
    rng = np.random.default_rng(303)
    worst, bad = -np.inf, 0
    for _ in range(100):
        form, kappa = positive_instance(rng)
        S = perturbed_dn(form, kappa).S
        off = S[~np.eye(len(S), dtype=bool)]
        m = float(off.max()) if off.size else -np.inf
        worst = max(worst, m)
        bad += m > 1e-10
    record(3, "positivity preservation on 100 instances", bad == 0,
           f"{bad} counterexamples, max off-diagonal {worst:.1e}")


def test_criterion_04_perturbed_identities():
    rng = np.random.default_rng(404)
    worst_id, worst_sym, failures = 0.0, 0.0, 0
    for _ in range(100):
        form, kappa = nonsingular_instance(rng)
        rep = verify_perturbed_trace_identity(form, kappa, tol=1e-10)
        worst_id = max(worst_id, rep["resolvent_identity"], rep["trace_sum"], rep["rearranged_form"])
        worst_sym = max(worst_sym, rep["perturbation_symmetry"])
        failures += not rep["passed"]
    ok = failures == 0 and worst_id <= 1e-10 and worst_sym <= 1e-12
    record(4, "perturbed trace identities on 100 instances", ok,
           f"max identity error {worst_id:.1e}, max asymmetry {worst_sym:.1e}")


def _irreducible_positive(rng):
    while True:
        form, kappa = positive_instance(rng)
        dn = perturbed_dn(form, kappa)
        if len(form.F) >= 2 and is_irreducible_matrix(dn.S):
            return dn


def test_criterion_05_ground_state_trichotomy():
    rng = np.random.default_rng(505)
    problems = []
    for trial in range(100):
        dn = _irreducible_positive(rng)
        sp = spectrum(dn)
        g, lam1 = sp.ground_state, sp.lambda1
        if sp.simple_flag is not True or not np.all(g > 0):
            problems.append(f"{trial}: ground state")
            continue
        rec = trichotomy(dn, g, -lam1, sp)
        if not (rec.recurrent and rec.irreducible and rec.nonnegative and rec.ground_state_case):
            problems.append(f"{trial}: not recurrent at ground state")
        delta = 0.1 * max(1.0, abs(lam1))
        above = trichotomy(dn, g, -lam1 + delta, sp)
        if above.recurrent or not above.nonnegative or not above.consistent:
            problems.append(f"{trial}: above threshold")
        h = g * (1.0 + 1e-3 * rng.random(len(g)))
        if is_alpha_excessive(dn, h, -lam1 + delta):
            t = trichotomy(dn, h, -lam1 + delta, sp)
            if t.recurrent or not t.consistent:
                problems.append(f"{trial}: perturbed h recurrent")
        # below -lambda_1: spectrally negative and no positive excessive function
        alpha = -lam1 - delta
        if np.linalg.eigvalsh((dn.S + alpha * np.diag(dn.mu)))[0] >= -1e-9:
            problems.append(f"{trial}: spectral sign below threshold")
        try:
            trichotomy(dn, g, alpha, sp)
            problems.append(f"{trial}: accepted alpha below -lambda_1")
        except NotExcessive:
            pass
        if is_alpha_excessive(dn, h, -lam1):
            problems.append(f"{trial}: non-proportional h excessive at -lambda_1")
    record(5, "ground state and trichotomy on 100 instances", not problems,
           "; ".join(problems[:3]) or "all cases consistent")


def test_criterion_06_disk_closed_forms():
    checks = {}
    checks["cauchy"] = all(dn_eigenvalue(DiskModel(0.0), n) == abs(n) / 2 for n in range(-8, 9))

    def series(n, s, terms=40):
        return sum((s / 2) ** (2 * k + n) / (math.factorial(k) * math.factorial(k + n)) for k in range(terms))

    checks["mu0(0.5)"] = abs(dn_eigenvalue(DiskModel(0.5), 0) - 0.5 * series(1, 1.0) / series(0, 1.0)) <= 1e-10
    grid = (-2.5, -1.0, 0.0, 0.5, 1.0, 2.0, 4.0)
    checks["monotone"] = all(
        np.all(np.diff([dn_eigenvalue(DiskModel(lam), n) for lam in grid]) > 0) for n in range(9))
    checks["douglas"] = abs(douglas_energy(FourierMode(1), n_nodes=4096) - math.pi / 2) <= 1e-6
    checks["v_lambda"] = all(abs(v_lambda(DiskModel(lam)) - dn_eigenvalue(DiskModel(lam), 0)) <= 1e-6
                             for lam in (0.5, 1.0, 2.0))
    j01 = float(mp.besseljzero(0, 1))
    checks["lambda1_D"] = (abs(bessel_j0_zero(1) - j01) <= 1e-12
                           and abs(first_dirichlet_eigenvalue() + j01**2) <= 1e-11)
    failed = [k for k, v in checks.items() if not v]
    record(6, "disk closed forms", not failed, "failed: " + ", ".join(failed) if failed else "6 sub-checks")


def test_criterion_07_walk_on_spheres():
    out = []
    ok = True
    for lam in (0.0, 0.5):
        m = DiskModel(lam)
        est = wos_harmonic_extension(m, ConstantData(1.0), [0.0, 0.0], samples=MC_SAMPLES, seed=7)
        target = gauge(m, [0.0, 0.0])
        good = abs(est.value - target) <= 5 * est.stderr
        ok &= good
        out.append(f"lambda={lam}: {est.value:.5f} vs {target:.5f} +- {est.stderr:.1e}")
    est = wos_harmonic_extension(DiskModel(0.0), FourierMode(1), [0.5, 0.0], samples=MC_SAMPLES, seed=8)
    ok &= abs(est.value - 0.5) <= 5 * est.stderr
    out.append(f"cos: {est.value:.5f} +- {est.stderr:.1e}")
    record(7, "walk-on-spheres against gauge and harmonic data", bool(ok), "; ".join(out))


def test_criterion_08_boundary_supported():
    rng = np.random.default_rng(808)
    worst_id, worst_rec, robin_bad = 0.0, 0.0, 0
    for _ in range(50):
        form = random_form(rng, kill=bool(rng.integers(2)))
        beta = rng.normal(0.0, 1.5, len(form.F))
        v = np.zeros(form.n)
        v[form.F] = beta * form.mu
        dn0 = dn_operator(form)
        dnk = perturbed_dn(form, v)
        worst_id = max(worst_id, float(np.max(np.abs(dnk.S - (dn0.S + np.diag(v[form.F]))))))
        worst_rec = max(worst_rec, float(np.max(np.abs(calderon_boundary_recover(dnk, dn0) - v[form.F]))))
        alpha0 = max(0.0, float(np.max(-beta)))
        robin_bad += not is_sub_markovian(dnk.S + alpha0 * np.diag(form.mu))
    ok = worst_id <= 1e-14 and worst_rec <= 1e-12 and robin_bad == 0
    record(8, "boundary-supported perturbations", ok,
           f"identity {worst_id:.1e}, recovery {worst_rec:.1e}, Robin failures {robin_bad}/50")


def test_criterion_09_calderon():
    worst_res, worst_err = 0.0, 0.0
    for name in ("calderon5", "random8"):
        form = fixture_form(name)
        kappa = fixture_kappa(name, form)
        ids = json.loads((FIXTURES / f"{name}.expected.json").read_text())["calderon_support"]
        support = [form.index[i] for i in ids]
        V = kappa.vector[support]
        res = recover_interior(InverseProblem(form, forward_map(form, V, support), support))
        worst_res = max(worst_res, res.residual_norm)
        worst_err = max(worst_err, float(np.max(np.abs(res.potential_estimate - V))))
    rng = np.random.default_rng(909)
    worst_fd, worst_ii = 0.0, 0.0
    for _ in range(5):
        form = random_form(rng, n=8, n_boundary=3)
        support = list(form.G)
        V = 0.5 * rng.random(len(support))
        J = forward_jacobian(form, V, support)
        h = 1e-5
        for k in range(len(support)):
            d = np.zeros(len(support))
            d[k] = h
            fd = (forward_map(form, V + d, support).S - forward_map(form, V - d, support).S) / (2 * h)
            worst_fd = max(worst_fd, float(np.max(np.abs(fd - J[k])) / np.max(np.abs(J[k]))))
        V1, V2 = np.zeros(form.n), np.zeros(form.n)
        V1[support], V2[support] = V, 0.5 * rng.random(len(support))
        phi = rng.standard_normal(3)
        lhs = integral_identity_residual(form, V1, V2, phi)
        rhs = phi @ (forward_map(form, V1).S - forward_map(form, V2).S) @ phi
        worst_ii = max(worst_ii, abs(lhs - rhs) / max(1.0, abs(rhs)))
    ok = worst_res < 1e-8 and worst_err < 1e-6 and worst_fd < 1e-6 and worst_ii <= 1e-10
    record(9, "Calderon round trip, Jacobian and integral identity", ok,
           f"residual {worst_res:.1e}, error {worst_err:.1e}, FD {worst_fd:.1e}, identity {worst_ii:.1e}")


def test_criterion_10_reproducibility():
    samples = 3 * BLOCK_SIZE + 123
    s3 = fixture_form("s3")
    rng = np.random.default_rng(10)
    form = random_form(rng, n=4, kill=True)
    runs = {}
    for w in (1, 2, 8):
        tr = traced_boundary_generator(s3, samples=samples, seed=5, workers=w)
        fk = feynman_kac_matrix(form, 0.3 * np.ones(4), 0.5, samples=samples, seed=5, workers=w)
        ws = wos_harmonic_extension(DiskModel(0.5), FourierMode(2), [0.2, 0.3], samples=samples, seed=5, workers=w)
        runs[w] = [tr.value, tr.stderr, fk.value, fk.stderr, np.array([ws.value, ws.stderr])]
    ok = all(np.array_equal(a, b) for w in (2, 8) for a, b in zip(runs[1], runs[w]))
    record(10, "bit-identical MC across 1, 2, 8 workers", ok, "traced generator, Feynman-Kac, walk on spheres")

