"""Command line entry point ``dn``.

Exit codes: 0 success, 2 validation error, 3 numeric error, 4 failed
assertions in ``verify-all``.  Every flag can also be given through an
environment variable ``DN_<FLAG>`` (e.g. ``DN_SEED=3``, ``DN_FORMAT=csv``);
tolerances use ``DN_TOL_<NAME>``.
"""

from __future__ import annotations

import argparse
import logging
import os
import platform
import sys
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__, disk
from .calderon import InverseProblem, integral_identity_residual, recover_interior
from .exceptions import DnError, InputError, MaxIterExceeded, NumericError
from .forms import decompose, energy, harmonic_extension, is_irreducible, is_markovian
from .io import dumps_report, load_form, load_kappa, load_matrix_csv, matrix_payload
from .perturbation import (
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
from .simulate import FourierMode, simulate_chain, wos_harmonic_extension
from .spectral import h_transform, is_alpha_excessive, spectrum, trichotomy
from .tolerances import resolve as resolve_tolerances
from .trace import DnOperator, beurling_deny, dn_operator, to_csv, verify_trace_generator
from .verify import verify_all

log = logging.getLogger("dnlab")

SUBCOMMANDS = ("compute", "perturb", "spectrum", "htransform", "disk", "simulate", "calderon", "verify-all")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_ASSERT = 0, 2, 3, 4


class _ArgError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _ArgError(message)


def _env(name, default=None):
    return os.environ.get("DN_" + name.upper().replace("-", "_"), default)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=int(_env("seed", 0)))
    common.add_argument("--format", choices=("json", "csv"), default=_env("format", "json"))
    common.add_argument("--out", "--report", dest="out", default=_env("out"),
                        help="output file (default: standard output)")
    common.add_argument("--tol", action="append", default=[], metavar="NAME=VALUE")
    common.add_argument("--no-timings", action="store_true", help="omit timing fields from the report")

    p = _Parser(prog="dn", description="Dirichlet-to-Neumann operators on weighted graphs and the disk.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    def form_args(sp, kappa=False):
        sp.add_argument("--form", default=_env("form"), required=_env("form") is None)
        if kappa:
            sp.add_argument("--kappa", default=_env("kappa"))

    sp = sub.add_parser("compute", parents=[common], help="DN operator, trace form and Beurling-Deny data")
    form_args(sp)

    sp = sub.add_parser("perturb", parents=[common], help="perturbed DN operator and its identities")
    form_args(sp, kappa=True)

    sp = sub.add_parser("spectrum", parents=[common], help="spectrum and ground state")
    form_args(sp, kappa=True)

    sp = sub.add_parser("htransform", parents=[common], help="h-transform and trichotomy")
    form_args(sp, kappa=True)
    sp.add_argument("--h", default=_env("h", "ground"), help="'ground' or a JSON file {id: value}")
    sp.add_argument("--alpha", default=_env("alpha", "auto"), help="'auto' (= -lambda_1) or a number")

    sp = sub.add_parser("disk", parents=[common], help="unit-disk closed forms")
    sp.add_argument("--lambda", dest="lam", type=float, default=float(_env("lambda", 0.0)))
    sp.add_argument("--modes", type=int, default=int(_env("modes", 8)))
    sp.add_argument("--quad", type=int, nargs=2, metavar=("R", "A"), default=(512, 512))
    sp.add_argument("--x", type=float, nargs=2, default=(0.5, 0.0), help="interior point for the Poisson kernel")

    sp = sub.add_parser("simulate", parents=[common], help="Monte Carlo estimators")
    sp.add_argument("--mode", choices=("trace", "wos", "path"), default=_env("mode", "trace"))
    sp.add_argument("--form", default=_env("form"))
    sp.add_argument("--kappa", default=_env("kappa"), help="potential for --mode path")
    sp.add_argument("--samples", type=int, default=int(_env("samples", 100_000)))
    sp.add_argument("--workers", type=int, default=int(_env("workers", 1)))
    sp.add_argument("--lambda", dest="lam", type=float, default=float(_env("lambda", 0.0)))
    sp.add_argument("--x", type=float, nargs=2, default=(0.0, 0.0))
    sp.add_argument("--mode-n", dest="mode_n", type=int, default=0, help="boundary data cos(n theta)")
    sp.add_argument("--start", default=None, help="start vertex for --mode path")
    sp.add_argument("--horizon", type=float, default=1.0)

    sp = sub.add_parser("calderon", parents=[common], help="recover an interior potential from DN data")
    sp.add_argument("--base", required=True)
    sp.add_argument("--data", required=True, help="CSV of the observed trace matrix S")
    sp.add_argument("--support", required=True, help="comma-separated interior ids")
    sp.add_argument("--reg", type=float, default=0.0)
    sp.add_argument("--max-iter", type=int, default=50)

    sp = sub.add_parser("verify-all", parents=[common], help="run every structural check over fixtures")
    sp.add_argument("--suite", default=_env("suite"), help="fixture directory (default: shipped fixtures)")
    return p


def _kappa(args, form):
    path = getattr(args, "kappa", None)
    return load_kappa(path, form) if path else SignedPotential.zero(form.n)


def _dn_payload(dn: DnOperator, prefix=""):
    ids = list(dn.boundary_ids)
    out = {prefix + "S": matrix_payload(dn.S, ids), prefix + "N": matrix_payload(dn.N, ids)}
    return out


def cmd_compute(args, tol):
    form = load_form(args.form)
    dn = dn_operator(form, tol=tol["singular_rel"])
    res = {"boundary": list(form.boundary), "irreducible": is_irreducible(form),
           "markovian": is_markovian(dn.S, tol["markov_rel"]), **_dn_payload(dn)}
    bd = beurling_deny(dn, tol["markov_rel"])
    res["J"] = matrix_payload(bd.jump_kernel, list(form.boundary))
    res["killing"] = dict(zip(map(str, form.boundary), bd.killing_vector.tolist()))
    # trace form against the energy of each harmonic extension (basis data)
    ext = []
    for k, b in enumerate(form.boundary):
        phi = np.zeros(len(form.boundary))
        phi[k] = 1.0
        u = harmonic_extension(form, phi)
        parts = decompose(form, u)
        ext.append({"boundary": b, "extension": dict(zip(map(str, form.vertices), u.tolist())),
                    "energy": energy(form, u), "trace_form": float(dn.S[k, k]),
                    "interior_part_norm": float(np.max(np.abs(parts.interior_part)))})
    res["harmonic_extensions"] = ext
    csv = {"S": dn.S, "N": dn.N, "J": bd.jump_kernel, "killing": np.atleast_2d(bd.killing_vector)}
    return res, csv, list(form.boundary)


def cmd_perturb(args, tol):
    form = load_form(args.form)
    kappa = _kappa(args, form)
    ok, margin = decomposition_threshold(form, kappa, tol["singular_rel"])
    res = {"decomposition_threshold": {"ok": ok, "margin": margin},
           "A_kappa": matrix_payload(perturbed_form(form, kappa), list(form.vertices))}
    if not ok:
        raise NumericError(f"perturbed interior block is singular (margin {margin:.3e})")
    dnk = perturbed_dn(form, kappa)
    ids = list(form.boundary)
    rep = verify_perturbed_trace_identity(form, kappa, tol["identity_rel"])
    res.update(_dn_payload(dnk, "kappa_"))
    res["P"] = matrix_payload(rep["P"], ids)
    res["V"] = dict(zip(map(str, ids), rep["V"].tolist()))
    res["identities"] = {k: rep[k] for k in ("resolvent_identity", "trace_sum", "perturbation_symmetry",
                                              "rearranged_form", "passed")}
    res["interior_positivity"] = interior_positivity(form, kappa)
    res["trace_positivity_preserving"] = trace_positivity_preserving(form, kappa, tol["markov_rel"])
    if np.any(kappa.kappa_minus):
        for name, fn in (("form_bound", form_bound), ("form_bound_on_trace", form_bound_on_trace)):
            try:
                cert = fn(form, kappa)
                res[name] = {"delta": cert.delta, "c_delta": cert.c_delta, "grid_c": cert.grid_c,
                             "bounded": cert.bounded}
            except NumericError as exc:
                res[name] = {"error": str(exc)}
    if kappa.is_boundary_supported(form):
        res["boundary_recovery"] = dict(zip(map(str, ids),
                                            calderon_boundary_recover(dnk, dn_operator(form)).tolist()))
    return res, {"S_kappa": dnk.S, "N_kappa": dnk.N, "P": rep["P"]}, ids


def _spectral_setup(args):
    form = load_form(args.form)
    kappa = _kappa(args, form)
    dn = perturbed_dn(form, kappa)
    return form, dn, spectrum(dn)


def cmd_spectrum(args, tol):
    form, dn, sp = _spectral_setup(args)
    ids = list(form.boundary)
    res = {"eigenvalues": sp.eigenvalues.tolist(),
           "eigenvectors": matrix_payload(sp.eigenvectors, [f"v{k}" for k in range(len(ids))], ids),
           "ground_state": dict(zip(map(str, ids), sp.ground_state.tolist())),
           "simple": sp.simple_flag, "lambda1": sp.lambda1}
    return res, {"eigenvectors": sp.eigenvectors}, ids


def cmd_htransform(args, tol):
    form, dn, sp = _spectral_setup(args)
    ids = list(form.boundary)
    if args.h == "ground":
        h = sp.ground_state
    else:
        from .io import _read_json

        data = _read_json(args.h)
        if not isinstance(data, dict):
            raise InputError("expected an object keyed by boundary id", "h")
        lookup = {str(b): k for k, b in enumerate(ids)}
        h = np.zeros(len(ids))
        for key, val in data.items():
            if key not in lookup:
                raise InputError(f"unknown boundary id {key!r}", f"h.{key}")
            h[lookup[key]] = float(val)
    alpha = -sp.lambda1 if args.alpha == "auto" else float(args.alpha)
    ht = h_transform(dn, h, alpha)
    res = {"alpha": alpha, "lambda1": sp.lambda1,
           "L_h": matrix_payload(ht.transformed_generator, ids),
           "row_sums": ht.row_sums().tolist(),
           "excessive": is_alpha_excessive(dn, h, alpha)}
    if res["excessive"] and is_markovian(dn.S):
        t = trichotomy(dn, h, alpha, sp, tol["recurrent_abs"])
        res["trichotomy"] = {"irreducible": t.irreducible, "nonnegative": t.nonnegative,
                             "recurrent": t.recurrent, "consistent": t.consistent}
    return res, {"L_h": ht.transformed_generator}, ids


def cmd_disk(args, tol):
    model = disk.DiskModel(args.lam, args.modes, tuple(args.quad))
    table = [(n, disk.dn_eigenvalue(model, n)) for n in range(args.modes + 1)]
    res = {"lambda": args.lam, "modes": [{"n": n, "mu": mu} for n, mu in table],
           "lambda1_D": disk.first_dirichlet_eigenvalue(),
           "gauge_threshold": disk.gauge_threshold()}
    if args.lam > disk.gauge_threshold():
        v, conv = disk.v_lambda(model, return_flag=True)
        res["V_lambda"] = {"value": v, "converged": conv}
        res["gauge"] = {str(r): disk.gauge(model, [r, 0.0]) for r in (0.0, 0.25, 0.5, 0.75)}
    res["douglas_energy"] = [{"n": n, "value": disk.douglas_energy(FourierMode(n))} for n in range(args.modes + 1)]
    angles = np.linspace(0.0, 2 * np.pi, 9)[:-1]
    res["poisson_kernel"] = {"x": list(args.x), "angles": angles.tolist(),
                             "values": [disk.poisson_kernel(args.x, a) for a in angles]}
    csv_rows = np.array(table, dtype=float)
    return res, {"modes": csv_rows}, ["n", "mu_n"]


def cmd_simulate(args, tol):
    if args.mode in ("trace", "path"):
        if not args.form:
            raise InputError(f"--form is required for --mode {args.mode}", "form")
        form = load_form(args.form)
    if args.mode == "trace":
        rep = verify_trace_generator(form, samples=args.samples, seed=args.seed, workers=args.workers,
                                     sigmas=tol["mc_sigmas"])
        ids = list(form.boundary)
        res = {"estimate": matrix_payload(rep["estimate"], ids), "stderr": matrix_payload(rep["stderr"], ids),
               "exact": matrix_payload(rep["target"], ids), "samples": rep["samples"],
               "max_z": rep["max_z"], "within_tolerance": rep["passed"]}
        return res, {"estimate": rep["estimate"], "stderr": rep["stderr"]}, ids
    if args.mode == "path":
        start = None
        if args.start is not None:
            lookup = {str(v): v for v in form.vertices}
            if args.start not in lookup:
                raise InputError(f"unknown vertex {args.start!r}", "start")
            start = lookup[args.start]
        path = simulate_chain(form, _kappa(args, form), start, args.horizon, args.seed)
        res = {"states": path.states, "holding_times": path.holding_times.tolist(),
               "feynman_kac_weight": path.feynman_kac_weight, "killed": path.killed}
        rows = np.column_stack([np.arange(len(path.holding_times)), path.holding_times])
        return res, {"path": rows}, ["step", "holding_time"]
    model = disk.DiskModel(args.lam)
    est = wos_harmonic_extension(model, FourierMode(args.mode_n), np.array(args.x), args.samples, args.seed,
                                 args.workers)
    res = {"value": est.value, "stderr": est.stderr, "samples": est.samples, "discarded": est.discarded}
    return res, {"estimate": np.array([[est.value, est.stderr]])}, ["value", "stderr"]


def cmd_calderon(args, tol):
    form = load_form(args.base)
    ids, S = load_matrix_csv(args.data)
    if ids != [str(b) for b in form.boundary]:
        raise InputError("CSV header must list the boundary ids in form order", args.data)
    lookup = {str(v): i for i, v in enumerate(form.vertices)}
    support = []
    for s in args.support.split(","):
        if s.strip() not in lookup:
            raise InputError(f"unknown vertex {s!r}", "support")
        support.append(lookup[s.strip()])
    problem = InverseProblem(form, DnOperator.from_matrix(S, form.mu, form.boundary), support, args.reg)
    try:
        r = recover_interior(problem, max_iter=args.max_iter)
    except MaxIterExceeded as exc:
        r = exc.result
    sup_ids = [str(form.vertices[i]) for i in support]
    res = {"potential": dict(zip(sup_ids, r.potential_estimate.tolist())), "residual_norm": r.residual_norm,
           "iterations": r.iterations, "converged": r.converged, "jacobian_rank": r.jacobian_rank}
    full = np.zeros(form.n)
    full[support] = r.potential_estimate
    phi = np.ones(len(form.boundary))
    res["integral_identity"] = {
        "residual": integral_identity_residual(form, full, np.zeros(form.n), phi),
        "dn_difference": float(phi @ (S - dn_operator(form).S) @ phi),
    }
    if not r.converged:
        raise NumericError(f"Gauss-Newton did not converge (residual {r.residual_norm:.3e})")
    return res, {"potential": np.atleast_2d(r.potential_estimate)}, sup_ids


def cmd_verify_all(args, tol):
    if args.suite:
        rep = verify_all(args.suite, tol, args.seed)
    else:
        with resources.as_file(resources.files("dnlab") / "fixtures") as d:
            rep = verify_all(d, tol, args.seed)
    return rep, None, None


COMMANDS = {
    "compute": cmd_compute,
    "perturb": cmd_perturb,
    "spectrum": cmd_spectrum,
    "htransform": cmd_htransform,
    "disk": cmd_disk,
    "simulate": cmd_simulate,
    "calderon": cmd_calderon,
    "verify-all": cmd_verify_all,
}


def _parse_tol(items):
    out = {}
    for item in items:
        if "=" not in item:
            raise InputError(f"expected NAME=VALUE, got {item!r}", "--tol")
        k, v = item.split("=", 1)
        try:
            out[k.strip()] = float(v)
        except ValueError:
            raise InputError(f"not a number: {v!r}", f"--tol {k}") from None
    return out


_PATH_OPTIONS = ("form", "kappa", "base", "data", "suite")


@dataclass
class RunConfig:
    """One invocation: a subcommand, its options, output settings and tolerance overrides."""

    subcommand: str
    options: dict = field(default_factory=dict)
    out: str | None = None
    format: str = "json"
    seed: int = 0
    tol: dict = field(default_factory=dict)
    timings: bool = True

    @classmethod
    def from_argv(cls, argv) -> "RunConfig":
        """Parse command line arguments; raises :class:`InputError` on bad usage."""
        try:
            ns = build_parser().parse_args(argv)
        except _ArgError as exc:
            raise InputError(str(exc), "argv") from None
        opts = vars(ns).copy()
        common = {k: opts.pop(k) for k in ("subcommand", "out", "format", "seed", "tol", "no_timings")}
        return cls(common["subcommand"], opts, common["out"], common["format"], common["seed"],
                   _parse_tol(common["tol"]), not common["no_timings"])

    def validate(self):
        if self.subcommand not in COMMANDS:
            raise InputError(f"unknown subcommand {self.subcommand!r}", "subcommand")
        if self.format not in ("json", "csv"):
            raise InputError(f"unknown format {self.format!r}", "format")
        for key in _PATH_OPTIONS:
            path = self.options.get(key)
            if path and not Path(path).exists():
                raise InputError("file not found", key)
        try:
            return resolve_tolerances(self.tol)
        except KeyError as exc:
            raise InputError(exc.args[0], "tol") from None
        except ValueError as exc:
            raise InputError(str(exc), "tol") from None


def run(config: RunConfig):
    """Dispatch one subcommand; returns ``(report, exit_code)``."""
    report = {
        "subcommand": config.subcommand,
        "inputs": {"options": dict(sorted(config.options.items())), "format": config.format,
                   "seed": config.seed, "tol": dict(sorted(config.tol.items()))},
        "provenance": {"dnlab": __version__, "numpy": np.__version__, "python": platform.python_version(),
                       "seed": config.seed},
    }
    t0 = time.perf_counter()
    try:
        tol = config.validate()
        args = argparse.Namespace(**config.options, seed=config.seed)
        result, csv_data, ids = COMMANDS[config.subcommand](args, tol)
    except InputError as exc:
        report["error"] = str(exc)
        return report, EXIT_INPUT
    except DnError as exc:
        report["error"] = f"{type(exc).__name__}: {exc}"
        return report, EXIT_NUMERIC
    report["results"] = result
    report["csv"] = csv_data
    report["csv_ids"] = ids
    if config.timings:
        report["provenance"]["timings"] = {"total_seconds": time.perf_counter() - t0}
    if config.subcommand == "verify-all":
        return report, EXIT_OK if result["passed"] else EXIT_ASSERT
    return report, EXIT_OK


def render(report, fmt) -> str:
    """JSON report, or concatenated CSV blocks (one per matrix) for ``fmt='csv'``."""
    report = dict(report)
    csv_data = report.pop("csv", None)
    ids = report.pop("csv_ids", None)
    if fmt == "csv" and csv_data:
        blocks = []
        for name, M in csv_data.items():
            M = np.atleast_2d(M)
            cols = ids if M.shape[1] == len(ids or []) else [str(k) for k in range(M.shape[1])]
            rows = ids if M.shape[0] == len(ids or []) and name not in ("modes",) else list(range(M.shape[0]))
            blocks.append(f"# {name}\n" + to_csv(M, cols, rows))
        return "\n".join(blocks)
    return dumps_report(report)


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    argv = sys.argv[1:] if argv is None else argv
    if any(a in ("-h", "--help", "--version") for a in argv):
        try:
            build_parser().parse_args(argv)
        except _ArgError as exc:
            print(f"dn: error: {exc}", file=sys.stderr)
            return EXIT_INPUT
        except SystemExit as exc:
            return int(exc.code or 0)
    try:
        config = RunConfig.from_argv(argv)
    except InputError as exc:
        print(f"dn: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    report, code = run(config)
    if "error" in report:
        print(f"dn: error: {report['error']}", file=sys.stderr)
        return code
    if code == EXIT_ASSERT:
        for name in report["results"]["failed"]:
            print(f"dn: assertion failed: {name}", file=sys.stderr)
    text = render(report, config.format)
    if config.out:
        Path(config.out).write_text(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
