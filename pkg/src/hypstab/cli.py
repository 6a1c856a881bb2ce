"""Command line: ``hypstab analyze | simulate | sweep``.

Exit codes: 0 stable verdict, 1 inconclusive or unstable, 2 error.
"""
from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from . import __version__
from . import scenario as sc
from .boundary import build_coupling
from .errors import HypstabError, UnknownParameterPath
from .models import (
    DensityFlowParams,
    SaintVenantParams,
    density_flow_rho0_sq,
    saint_venant_condition,
)
from .simulator import run
from .stability import verdict_balance, verdict_conservation

EXIT_STABLE, EXIT_UNSTABLE, EXIT_ERROR = 0, 1, 2
SEED_ENV = "HYPSTAB_SEED"


def _g(x) -> str:
    return f"{x:.12g}"


def _vec(v) -> str:
    return "[" + ", ".join(_g(float(x)) for x in np.ravel(v)) + "]"


def _seed(scn) -> int:
    env = os.environ.get(SEED_ENV)
    if env is None or env.strip() == "":
        return scn.data["analysis"]["seed"]
    try:
        return int(env)
    except ValueError:
        raise HypstabError(f"{SEED_ENV} must be an integer, got {env!r}") from None


def _masked(params):
    """Model parameters with controls on unobservable variables set to zero."""
    obs0, obsL = params.obs0, params.obsL
    return replace(
        params,
        k0_11=params.k0_11 if obs0[0] else 0.0,
        k0_12=params.k0_12 if obs0[1] else 0.0,
        kL_21=params.kL_21 if obsL[0] else 0.0,
        kL_22=params.kL_22 if obsL[1] else 0.0,
    )


def analyze_scenario(scn, seed=None):
    """Return ``(built, coupling, report, extras)`` for a parsed scenario."""
    seed = _seed(scn) if seed is None else seed
    built = sc.build(scn)
    budget = sc.budget(scn, seed)
    K = build_coupling(built.rf, built.bc)
    if scn.data["analysis"]["force_numeric"]:
        K = replace(K, structure="general")
    if built.rf.is_balance_law:
        report = verdict_balance(K, built.rf.S, built.rf.lam, budget)
    else:
        report = verdict_conservation(K, budget)
    extras = {}
    p = built.params
    if isinstance(p, DensityFlowParams):
        case = sc.density_flow_case(p)
        if case is not None:
            extras["closed_form_case"] = case
            try:
                extras["closed_form_rho0"] = float(np.sqrt(density_flow_rho0_sq(case, _masked(p))))
            except HypstabError as exc:
                extras["closed_form_rho0"] = f"undefined ({exc})"
    elif isinstance(p, SaintVenantParams):
        try:
            extras["closed_form_condition"] = saint_venant_condition(_masked(p))
        except HypstabError as exc:
            extras["closed_form_condition"] = f"undefined ({exc})"
    return built, K, report, extras


def format_report(scn, built, K, report, extras, seed) -> str:
    rf = built.rf
    out = ["# hypstab analyze report", scn.echo().rstrip("\n")]
    kv = [
        ("seed", str(seed)),
        ("n", str(rf.n)),
        ("m", str(rf.m)),
        ("lambda", _vec(rf.lam)),
        ("K", "[" + ", ".join(_vec(row) for row in K.K) + "]"),
        ("structure", K.structure),
        ("rho0", f"{report.rho0:.6f}"),
        ("rho0_full", _g(report.rho0)),
        ("rho0_method", report.method0),
        ("rho1", f"{report.rho1:.6f}"),
        ("rho1_full", _g(report.rho1)),
        ("rho1_method", report.method1),
        ("verdict_robust", report.verdict_robust),
        ("verdict_exponential", report.verdict_exponential),
    ]
    if rf.is_balance_law:
        cert = report.balance_certificate or report.balance_attempt
        kv.append(("balance_certified", "true" if report.balance_certificate else "false"))
        if cert is not None:
            kv += [
                ("balance_P", _vec(cert.p)),
                ("balance_delta", _vec(cert.delta)),
                ("balance_min_eig", _g(cert.min_eig)),
                ("balance_norm", _g(cert.norm)),
            ]
        else:
            kv.append(("balance_P", "none"))
    for key, val in extras.items():
        kv.append((key, val if isinstance(val, str) else _g(val)))
    kv.append(("stable", "true" if report.is_stable else "false"))
    width = max(len(k) for k, _ in kv)
    out += [f"{k.ljust(width)} = {v}" for k, v in kv]
    return "\n".join(out) + "\n"


def _write(text, path):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def cmd_analyze(args) -> int:
    scn = sc.load(args.scenario)
    seed = _seed(scn)
    built, K, report, extras = analyze_scenario(scn, seed)
    _write(format_report(scn, built, K, report, extras, seed), args.output)
    return EXIT_STABLE if report.is_stable else EXIT_UNSTABLE


def simulate_scenario(scn):
    built = sc.build(scn)
    K = build_coupling(built.rf, built.bc)
    cfg = sc.sim_config(scn)
    return run(built.rf, K, cfg), cfg, built


def format_simulation(scn, res, cfg, built) -> str:
    out = ["# hypstab simulate", scn.echo().rstrip("\n")]
    out.append(f"# cells = {cfg.cells(built.rf.L)}")
    out.append(f"# dt = {_g(res.dt)}")
    out.append("t,l2_norm")
    out += [f"{_g(t)},{_g(v)}" for t, v in zip(res.times, res.norms)]
    if res.decay is not None:
        out.append(f"# nu = {_g(res.decay.nu)}")
        out.append(f"# c_decay = {_g(res.decay.c_decay)}")
        out.append(f"# fit_window = {_g(res.decay.window[0])},{_g(res.decay.window[1])}")
        out.append(f"# fit_residual = {_g(res.decay.residual)}")
    else:
        out.append("# nu = nan")
        out.append("# c_decay = nan")
    out.append(f"# blew_up = {'true' if res.blew_up else 'false'}")
    return "\n".join(out) + "\n"


def cmd_simulate(args) -> int:
    scn = sc.load(args.scenario)
    res, cfg, built = simulate_scenario(scn)
    _write(format_simulation(scn, res, cfg, built), args.output)
    return EXIT_UNSTABLE if res.blew_up else EXIT_STABLE


def _parse_values(args):
    if args.values is not None:
        items = [s.strip() for s in args.values.split(",") if s.strip()]
        try:
            return [float(s) for s in items]
        except ValueError as exc:
            raise HypstabError(f"--values: {exc}") from None
    parts = [s.strip() for s in args.range.split(",")]
    try:
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    except (ValueError, IndexError):
        raise HypstabError("--range expects lo,hi,count") from None
    if len(parts) != 3 or count < 0:
        raise HypstabError("--range expects lo,hi,count with count >= 0")
    return list(np.linspace(lo, hi, count))


def sweep_point(scn, path, value, seed, simulate):
    """One sweep row as a list of strings (errors become a status entry)."""
    width = 7 if simulate else 4
    cells = []
    status = "ok"
    try:
        point = sc.with_param(scn, path, value)
        _, _, report, _ = analyze_scenario(point, seed)
        cells += [_g(report.rho0), _g(report.rho1), report.verdict_robust, report.verdict_exponential]
        if simulate:
            res, _, _ = simulate_scenario(point)
            nu = res.decay.nu if res.decay is not None else float("nan")
            cells += [_g(nu), _g(res.norms[-1]), "true" if res.blew_up else "false"]
    except UnknownParameterPath:
        raise
    except HypstabError as exc:
        status = type(exc).__name__
    cells += [""] * (width - len(cells))
    return [_g(value)] + cells + [status]


def _sweep_job(job):
    return sweep_point(*job)


def cmd_sweep(args) -> int:
    scn = sc.load(args.scenario)
    seed = _seed(scn)
    values = _parse_values(args)
    simulate = not args.no_sim
    if simulate:
        sc.sim_config(scn)  # fail early on a missing [sim] section
    sc.with_param(scn, args.param, 0.0)  # reject a bad path before fanning out
    jobs = [(scn, args.param, v, seed, simulate) for v in values]
    workers = args.workers or os.cpu_count() or 1
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            rows = list(pool.map(_sweep_job, jobs))
    else:
        rows = [_sweep_job(j) for j in jobs]
    header = ["value", "rho0", "rho1", "verdict_robust", "verdict_exponential"]
    if simulate:
        header += ["nu", "final_l2", "blew_up"]
    header.append("status")
    out = ["# hypstab sweep", f"# param = {args.param}", f"# seed = {seed}", scn.echo().rstrip("\n")]
    out.append(",".join(header))
    out += [",".join(r) for r in rows]
    _write("\n".join(out) + "\n", args.output)
    return EXIT_STABLE


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="hypstab",
        description="Stability analysis and simulation of boundary-controlled linear hyperbolic systems.",
    )
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="compute stability indices and verdicts")
    p.add_argument("scenario")
    p.add_argument("-o", "--output", default=None, help="report file (default stdout)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="run the upwind simulation and write t,l2_norm CSV")
    p.add_argument("scenario")
    p.add_argument("-o", "--output", default=None, help="CSV file (default stdout)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="vary one scalar parameter")
    p.add_argument("scenario")
    p.add_argument("--param", required=True, help="section.key or section.key[i,j], e.g. boundary.k0_11")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--values", help="comma-separated list, e.g. -100,-1,0")
    g.add_argument("--range", help="lo,hi,count (inclusive grid)")
    p.add_argument("--no-sim", action="store_true", help="skip the simulation columns")
    p.add_argument("--workers", type=int, default=None, help="parallel evaluations (default: CPU count)")
    p.add_argument("-o", "--output", default=None, help="CSV file (default stdout)")
    p.set_defaults(func=cmd_sweep)
    return ap


def _join_negative(argv):
    # let "--values -1,2" through: argparse would read "-1,2" as an option
    out = []
    it = iter(argv)
    for tok in it:
        if tok in ("--values", "--range"):
            nxt = next(it, None)
            if nxt is None:
                out.append(tok)
            else:
                out.append(f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(_join_negative(argv))
    try:
        return args.func(args)
    except (HypstabError, OSError) as exc:
        print(f"hypstab: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
