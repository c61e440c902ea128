"""Structural checks run by ``dn verify-all`` over a directory of fixtures.

A fixture is ``<name>.form.json`` with optional ``<name>.kappa.json`` and
``<name>.expected.json``.  The expected file may hold ``S`` (unperturbed trace
matrix), ``S_kappa`` and ``eigenvalues`` (of the perturbed operator), each
compared to 1e-12 absolute, and ``calderon_support`` (interior ids whose
potential is recovered from the perturbed DN map).
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from . import disk
from .calderon import InverseProblem, forward_map, integral_identity_residual, recover_interior
from .exceptions import DnError, InputError
from .forms import harmonic_extension, is_irreducible_matrix, is_markovian, is_sub_markovian
from .io import load_form, load_kappa
from .perturbation import (
    SignedPotential,
    calderon_boundary_recover,
    decomposition_threshold,
    interior_positivity,
    perturbed_dn,
    verify_perturbed_trace_identity,
)
from .spectral import h_transform, spectrum, trichotomy
from .tolerances import DEFAULTS
from .trace import dn_operator

__all__ = ["check_fixture", "check_disk", "verify_all", "fixture_names"]

EXPECTED_TOL = 1e-12


class _Checks:
    def __init__(self, prefix):
        self.prefix = prefix
        self.items = []

    def add(self, name, passed, **detail):
        self.items.append({"check": f"{self.prefix}:{name}", "passed": bool(passed), **detail})

    def guard(self, name, func):
        try:
            func()
        except DnError as exc:
            self.add(name, False, error=f"{type(exc).__name__}: {exc}")


def fixture_names(directory) -> list:
    directory = Path(directory)
    if not directory.is_dir():
        raise InputError("not a directory", str(directory))
    return sorted(p.name[: -len(".form.json")] for p in directory.glob("*.form.json"))


def check_fixture(directory, name, tol=None, seed=0) -> list:
    tol = dict(DEFAULTS, **(tol or {}))
    directory = Path(directory)
    form = load_form(directory / f"{name}.form.json")
    kpath = directory / f"{name}.kappa.json"
    kappa = load_kappa(kpath, form) if kpath.exists() else SignedPotential.zero(form.n)
    epath = directory / f"{name}.expected.json"
    expected = json.loads(epath.read_text()) if epath.exists() else {}
    c = _Checks(name)
    rng = np.random.default_rng(seed)
    rel = tol["identity_rel"]

    dn0 = dn_operator(form)
    S0 = dn0.S
    if "S" in expected:
        E = np.asarray(expected["S"], dtype=float)
        c.add("expected_S", E.shape == S0.shape and np.max(np.abs(E - S0)) <= EXPECTED_TOL)
        c.add("expected_S_markovian", is_markovian(E, tol["markov_rel"]))

    # trace form equals energy of the harmonic extension
    errs = []
    for _ in range(5):
        phi = rng.standard_normal(len(form.F))
        u = harmonic_extension(form, phi)
        e = u @ form.A @ u
        errs.append(abs(phi @ S0 @ phi - e) / max(abs(e), 1e-300))
    c.add("trace_generator_identity", max(errs) <= rel, max_rel_error=max(errs))
    c.add("trace_is_dirichlet_form", is_sub_markovian(S0, tol["markov_rel"]))

    ok, margin = decomposition_threshold(form, kappa)
    c.add("decomposition_threshold", ok, margin=margin)
    if not ok:
        return c.items

    def perturbed():
        rep = verify_perturbed_trace_identity(form, kappa, rel)
        c.add("perturbed_trace_identities", rep["passed"],
              errors={k: rep[k] for k in ("resolvent_identity", "trace_sum", "perturbation_symmetry",
                                          "rearranged_form")})
        dnk = perturbed_dn(form, kappa)
        if "S_kappa" in expected:
            E = np.asarray(expected["S_kappa"], dtype=float)
            c.add("expected_S_kappa", E.shape == dnk.S.shape and np.max(np.abs(E - dnk.S)) <= EXPECTED_TOL)
        if interior_positivity(form, kappa):
            c.add("positivity_preservation", is_markovian(dnk.S, tol["markov_rel"]))
            if is_irreducible_matrix(dnk.S):
                sp = spectrum(dnk)
                c.add("ground_state_simple_positive",
                      sp.simple_flag is True and np.all(sp.ground_state > 0))
                lam1 = sp.lambda1
                t_rec = trichotomy(dnk, sp.ground_state, -lam1, sp)
                t_tr = trichotomy(dnk, sp.ground_state, -lam1 + 1.0, sp)
                c.add("trichotomy_recurrent_at_ground_state",
                      t_rec.recurrent and t_rec.nonnegative and t_rec.irreducible and t_rec.consistent)
                c.add("trichotomy_transient_above", (not t_tr.recurrent) and t_tr.nonnegative and t_tr.consistent)
                ht = h_transform(dnk, sp.ground_state, -lam1)
                gap = max(np.max(np.abs(ht.semigroup(t) - ht.conjugated_semigroup(t))) for t in (0.1, 1.0, 10.0))
                c.add("h_transform_semigroup", gap < tol["semigroup_abs"], max_gap=gap)
        if "eigenvalues" in expected:
            ev = spectrum(dnk).eigenvalues
            E = np.asarray(expected["eigenvalues"], dtype=float)
            c.add("expected_eigenvalues", E.shape == ev.shape and np.max(np.abs(E - ev)) <= EXPECTED_TOL)

    c.guard("perturbed", perturbed)

    # boundary part of kappa: trace-then-perturb equals perturb-then-trace, and is recoverable
    def boundary():
        kb = np.zeros(form.n)
        kb[form.F] = kappa.vector[form.F]
        dnb = perturbed_dn(form, kb)
        diff = np.max(np.abs(dnb.S - (S0 + np.diag(kb[form.F]))))
        c.add("boundary_perturbation_is_trace_perturbation", diff <= 1e-14 * max(1.0, np.max(np.abs(S0))),
              max_abs_error=diff)
        rec = calderon_boundary_recover(dnb, dn0)
        err = np.max(np.abs(rec - kb[form.F]))
        c.add("boundary_recovery", err <= 1e-12, max_abs_error=err)
        alpha0 = max(0.0, float(np.max(-kb[form.F] / form.mu)))
        c.add("robin_shift_markovian", is_sub_markovian(dnb.S + alpha0 * np.diag(form.mu)))

    c.guard("boundary", boundary)

    support_ids = expected.get("calderon_support")
    if support_ids:
        def inverse():
            lookup = {str(v): i for i, v in enumerate(form.vertices)}
            support = [lookup[str(s)] for s in support_ids]
            V_true = kappa.vector[support]
            obs = forward_map(form, V_true, support)
            res = recover_interior(InverseProblem(form, obs, support), max_iter=50)
            err = float(np.max(np.abs(res.potential_estimate - V_true)))
            c.add("calderon_round_trip", res.residual_norm < 1e-8 and err < 1e-6,
                  residual=res.residual_norm, max_abs_error=err, jacobian_rank=res.jacobian_rank)
            full = np.zeros(form.n)
            full[support] = V_true
            phi = rng.standard_normal(len(form.F))
            lhs = integral_identity_residual(form, full, np.zeros(form.n), phi)
            rhs = phi @ (forward_map(form, full).S - S0) @ phi
            c.add("integral_identity", abs(lhs - rhs) <= rel * max(1.0, abs(rhs)))

        c.guard("calderon", inverse)
    return c.items


def check_disk(tol=None) -> list:
    c = _Checks("disk")
    mu_exact = all(disk.dn_eigenvalue(disk.DiskModel(0.0), n) == 0.5 * n for n in range(9))
    c.add("cauchy_symbol", mu_exact)
    for lam in (0.5, 1.0, 2.0):
        m = disk.DiskModel(lam)
        v = disk.v_lambda(m)
        mu0 = disk.dn_eigenvalue(m, 0)
        c.add(f"v_lambda_{lam}", abs(v - mu0) <= 1e-6, v_lambda=v, mu0=mu0)
    d = disk.douglas_energy(np.cos)
    c.add("douglas_cos", abs(d - math.pi / 2) <= 1e-6, value=d)
    grid = (0.0, 0.5, 1.0, 2.0, 4.0)
    mono = all(
        all(np.diff([disk.dn_eigenvalue(disk.DiskModel(lam), n) for lam in grid]) > 0) for n in range(9)
    )
    c.add("monotone_in_lambda", mono)
    return c.items


def verify_all(directory, tol=None, seed=0) -> dict:
    names = fixture_names(directory)
    if not names:
        raise InputError("no *.form.json fixtures found", str(directory))
    checks = []
    for name in names:
        checks.extend(check_fixture(directory, name, tol, seed))
    checks.extend(check_disk(tol))
    failed = [c["check"] for c in checks if not c["passed"]]
    return {"fixtures": names, "checks": checks, "failed": failed, "passed": not failed}
