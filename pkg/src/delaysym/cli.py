"""Command-line front end.

Subcommands: params (solve and check), abstract (build artifacts),
validate (matched-run check of an artifact), compare (finite-finite
bisimulation check).  Exit codes: 0 success, 2 infeasible parameters,
3 assumption failure, 4 validation violation, 1 anything else.
All emitted files are byte-deterministic for a fixed config and seed.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys as _sys
import time
from pathlib import Path

from .abstraction import build
from .bisimulation import check_bisimulation, validate_against_continuous
from .config import LoadedConfig, load_config
from .errors import (
    AssumptionError,
    DelaysymError,
    InfeasibleError,
    InsufficientContractionError,
    StaleArtifactError,
)
from .parameters import (
    AbstractionParams,
    check_assumptions,
    derive_bounds,
    reachable_bound,
    solve_parameters,
    verify_cond,
)
from .transition_system import import_interchange

EXIT_OK = 0
EXIT_OTHER = 1
EXIT_INFEASIBLE = 2
EXIT_ASSUMPTION = 3
EXIT_VIOLATION = 4

_XI0_PROBE_COUNT = 33


def resolve_parameters(cfg: LoadedConfig, epsilon: float | None = None):
    """Solver output with config overrides applied on top.

    Full manual override (all four of tau, N, theta, lambda_u) bypasses the
    solver; partial overrides replace the corresponding solved fields.
    Returns (params, bounds, slack_dict_or_None).
    """
    eps = cfg.epsilon if epsilon is None else epsilon
    bounds = derive_bounds(cfg.sys, cfg.cert, cfg.b_j)
    xi0 = cfg.xi0(_XI0_PROBE_COUNT)
    ov = cfg.overrides
    manual_all = all(k in ov for k in ("tau", "N", "theta", "lambda_u"))
    if manual_all:
        tau = float(ov["tau"])
        b_x0 = reachable_bound(cfg.sys, bounds, cfg.cert, xi0, tau)
        if b_x0 is None:
            b_x0 = max(xi0.sup_norm(), bounds.B_X)
        params = AbstractionParams(
            tau=tau, N=int(ov["N"]), theta=float(ov["theta"]),
            lambda_u=float(ov["lambda_u"]), epsilon=eps, M=bounds.M,
            b_x0=b_x0)
        return params, dataclasses.replace(bounds, B_X0=b_x0), None
    params, bounds, slack = solve_parameters(
        cfg.sys, bounds, cfg.cert, eps, xi0, tau_grid_div=cfg.tau_grid_div)
    if ov:
        fields = {}
        if "tau" in ov:
            fields["tau"] = float(ov["tau"])
        if "N" in ov:
            fields["N"] = int(ov["N"])
        if "theta" in ov:
            fields["theta"] = float(ov["theta"])
        if "lambda_u" in ov:
            fields["lambda_u"] = float(ov["lambda_u"])
        params = dataclasses.replace(params, **fields)
        if "tau" in fields:
            b_x0 = reachable_bound(cfg.sys, bounds, cfg.cert, xi0,
                                   params.tau)
            if b_x0 is None:
                b_x0 = max(xi0.sup_norm(), bounds.B_X)
            params = dataclasses.replace(params, b_x0=b_x0)
            bounds = dataclasses.replace(bounds, B_X0=b_x0)
        slack = None
    return params, bounds, slack


def params_text(cfg: LoadedConfig, params: AbstractionParams, slack, report):
    lines = [
        "parameters 1",
        f"epsilon {params.epsilon!r}",
        f"tau {params.tau!r}",
        f"N {params.N}",
        f"theta {params.theta!r}",
        f"lambda_u {params.lambda_u!r}",
        f"M {params.M!r}",
        f"B_X0 {params.b_x0!r}",
        f"lambda_bound {params.lam(cfg.sys.delta)!r}",
    ]
    lhs, ok = verify_cond(params, cfg.cert, cfg.sys.delta)
    lines.append(f"precision-lhs {lhs!r}")
    lines.append(f"precision-ok {ok}")
    if slack:
        for key in sorted(slack):
            lines.append(f"slack {key} {slack[key]!r}")
    for ln in report.render().splitlines():
        lines.append(ln)
    return "\n".join(lines) + "\n"


def _assumption_gate(report, force: bool) -> int | None:
    if report.ok:
        return None
    if force:
        print("warning: proceeding past failed assumption checks (--force)")
        return None
    return EXIT_ASSUMPTION


def cmd_params(args) -> int:
    cfg = load_config(args.config)
    params, bounds, slack = resolve_parameters(cfg, args.epsilon)
    xi0 = cfg.xi0(_XI0_PROBE_COUNT)
    report = check_assumptions(cfg.sys, bounds, cfg.cert, xi0, params.tau,
                               cfg.xi0_curvature)
    text = params_text(cfg, params, slack, report)
    print(text, end="")
    gate = _assumption_gate(report, False)
    return EXIT_OK if gate is None else gate


def cmd_abstract(args) -> int:
    cfg = load_config(args.config)
    params, bounds, slack = resolve_parameters(cfg, args.epsilon)
    xi0 = cfg.xi0(_XI0_PROBE_COUNT)
    report = check_assumptions(cfg.sys, bounds, cfg.cert, xi0, params.tau,
                               cfg.xi0_curvature)
    gate = _assumption_gate(report, args.force)
    if gate is not None:
        print(report.render())
        print("assumption checks failed; use --force to build anyway")
        return gate
    lhs, ok = verify_cond(params, cfg.cert, cfg.sys.delta)
    if not ok:
        print(f"warning: precision inequality fails ({lhs!r} > "
              f"{params.epsilon!r}); the built model carries no epsilon "
              f"guarantee")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    ts, brep = build(cfg.sys, params, cfg.xi0(_XI0_PROBE_COUNT),
                     refine=cfg.refine, min_per_cell=cfg.min_per_cell,
                     threads=args.threads,
                     assumption_lines=report.render().splitlines())
    ts.meta = {
        "config": cfg.digest(),
        "tau": repr(params.tau),
        "N": str(params.N),
        "theta": repr(params.theta),
        "lambda_u": repr(params.lambda_u),
        "epsilon": repr(params.epsilon),
        "M": repr(params.M),
    }
    ts.export_interchange(out / "model.tsx")
    ts.export_dot(out / "model.dot")
    (out / "report.txt").write_text(brep.render())
    (out / "params.txt").write_text(params_text(cfg, params, slack, report))
    print(f"built {brep.num_states} states, {brep.num_transitions} "
          f"transitions in {brep.iterations} iterations "
          f"({time.perf_counter() - t0:.2f}s)")
    print(f"artifacts written to {out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    ts = import_interchange(args.artifact)
    if ts.meta.get("config") != cfg.digest():
        raise StaleArtifactError(
            "artifact was built from a different configuration "
            f"({ts.meta.get('config')} != {cfg.digest()})")
    tau = float(ts.meta["tau"])
    epsilon = args.epsilon if args.epsilon is not None else float(
        ts.meta["epsilon"])
    seed = args.seed if args.seed is not None else cfg.seed
    words = int(cfg.validation.get("words", 100))
    word_length = int(cfg.validation.get("word_length", 10))
    xi0 = cfg.xi0(ts.basis.num_samples)
    report = validate_against_continuous(
        cfg.sys, ts, tau, xi0, epsilon, words, word_length, seed,
        min_per_cell=cfg.min_per_cell)
    if args.out:
        report.to_json(args.out)
    print(f"matched runs: {report.probes} words, max gap "
          f"{epsilon - report.min_margin!r}, epsilon {epsilon!r}, "
          f"{len(report.violations)} violations")
    return EXIT_OK if report.ok else EXIT_VIOLATION


def cmd_compare(args) -> int:
    ta = import_interchange(args.a)
    tb = import_interchange(args.b)
    result = check_bisimulation(ta, tb, args.epsilon)
    text = result.render()
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text, end="")
    print(f"bisimulation check: {'ok' if result.ok else 'fail'} at epsilon "
          f"{args.epsilon!r}")
    return EXIT_OK if result.ok else EXIT_VIOLATION


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="delaysym",
        description="finite symbolic models for time-delay systems")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("params", help="solve and check abstraction parameters")
    p.add_argument("--config", required=True)
    p.add_argument("--epsilon", type=float, default=None)
    p.set_defaults(fn=cmd_params)

    p = sub.add_parser("abstract", help="build the symbolic model artifacts")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--force", action="store_true",
                   help="build even if non-mandatory checks fail")
    p.set_defaults(fn=cmd_abstract)

    p = sub.add_parser("validate", help="matched-run validation of an artifact")
    p.add_argument("--config", required=True)
    p.add_argument("--artifact", required=True)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("compare", help="epsilon-bisimulation between two artifacts")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_compare)
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (InfeasibleError, InsufficientContractionError) as exc:
        print(f"error[{exc.code}]: {exc}")
        return EXIT_INFEASIBLE
    except AssumptionError as exc:
        print(f"error[{exc.code}]: {exc}")
        return EXIT_ASSUMPTION
    except DelaysymError as exc:
        print(f"error[{exc.code}]: {exc}")
        return EXIT_OTHER
    except OSError as exc:
        print(f"error[io]: {exc}")
        return EXIT_OTHER


if __name__ == "__main__":
    _sys.exit(main())
