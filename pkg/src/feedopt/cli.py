"""Command-line front end.

Exit codes: 0 success, 2 invalid input, 3 synthesis or fit failure,
4 divergence.
"""

from __future__ import annotations

import argparse
import copy
import sys
from pathlib import Path

from . import bundle as bundle_io
from . import pipeline, scenario
from .errors import Diverged, FeedoptError, FitFailure, InvalidInput
from .linalg import check_necessary_conditions
from .manifold import FitReport
from .regulator import assemble_linear_controller, solve_static_linear

EXIT_OK, EXIT_INVALID, EXIT_SYNTHESIS, EXIT_DIVERGED = 0, 2, 3, 4


def _load_scenario(args) -> dict:
    source = args.scenario or args.target
    if not source:
        raise InvalidInput("give a built-in scenario name or --scenario <file>")
    sc = scenario.load(source)
    sc = copy.deepcopy(sc)
    if args.seed is not None:
        sc["fit"]["seed"] = args.seed
    if args.degree is not None:
        sc["fit"]["d_pi"] = sc["fit"]["d_gamma"] = args.degree
    if args.horizon is not None:
        sc["simulation"]["horizon"] = args.horizon
    if args.step is not None:
        sc["simulation"]["step"] = args.step
    return sc


def _outdir(args, sc) -> Path:
    return Path(args.out) if args.out else Path("runs") / sc["name"]


def _write_header(out: Path, sc: dict) -> str:
    h = scenario.scenario_hash(sc)
    bundle_io.atomic_write(out / "scenario.yaml", f"# scenario_hash {h}\n" + scenario.dumps(sc))
    return h


def _fit_report_text(rep: FitReport, h: str) -> str:
    lines = [
        f"scenario_hash: {h}",
        f"relative_residual: {rep.relative_residual:.6g}",
        f"train_residual: {rep.train_residual:.6g}",
        "per_equation_rms: " + " ".join(f"{v:.6g}" for v in rep.per_equation),
        f"collocation_count: {rep.collocation_count}",
        f"validation_count: {rep.validation_count}",
        f"domain_violations: {rep.domain_violations}",
        f"iterations: {rep.iterations}",
        f"status: {rep.status}",
        f"residual_scale: {rep.scale:.6g}",
        f"seed: {rep.seed}",
    ]
    return "\n".join(lines) + "\n"


def cmd_check(args) -> int:
    sc = _load_scenario(args)
    problem = scenario.build_problem(sc)
    rep = check_necessary_conditions(problem.linearization())
    for line in rep.lines():
        print(line)
    print("overall: " + ("pass" if rep.all_pass else "fail"))
    return EXIT_OK if rep.all_pass else EXIT_SYNTHESIS


def cmd_solve_linear(args) -> int:
    sc = _load_scenario(args)
    out = _outdir(args, sc)
    problem = scenario.build_problem(sc)
    lin = problem.linearization()
    sol = solve_static_linear(lin)
    h = _write_header(out, sc)
    b = bundle_io.Bundle(meta={"content": "linear-regulator", "scenario_hash": h,
                               "residual_sylvester": repr(sol.residual_sylvester),
                               "residual_gradient": repr(sol.residual_gradient),
                               "non_unique": str(sol.non_unique).lower()})
    b.add("Pi", sol.Pi).add("Gamma", sol.Gamma)
    K, L1, L2 = pipeline.design_gains(sc, problem)
    ctrl = assemble_linear_controller(lin, sol.Pi, sol.Gamma, K, L1, L2)
    b.add("A_c", ctrl.A_c).add("B_c", ctrl.B_c).add("C_c", ctrl.C_c)
    bundle_io.save(b, out / "regulator.txt")
    syn = pipeline.Synthesis(problem, None, pipeline.linear_manifold(problem))
    syn.controller = _dynamic_from(problem, syn.manifold, K, L1, L2)
    bundle_io.save(pipeline.controller_bundle(syn, h), out / "controller.txt")
    print(f"residual_sylvester: {sol.residual_sylvester:.3g}")
    print(f"residual_gradient: {sol.residual_gradient:.3g}")
    print(f"non_unique: {str(sol.non_unique).lower()}")
    print(f"wrote {out / 'regulator.txt'} and {out / 'controller.txt'}")
    return EXIT_OK


def _dynamic_from(problem, manifold, K, L1, L2):
    from .synthesis import synthesize_dynamic

    return synthesize_dynamic(problem, manifold, K, L1, L2)


def _fit_or_best(sc, problem):
    try:
        return pipeline.fit(sc, problem), None
    except FitFailure as exc:
        return exc.best, exc


def cmd_fit_manifold(args) -> int:
    sc = _load_scenario(args)
    out = _outdir(args, sc)
    problem = scenario.build_problem(sc)
    man, failure = _fit_or_best(sc, problem)
    h = _write_header(out, sc)
    bundle_io.save(pipeline.manifold_bundle(man, h), out / "manifold.txt")
    bundle_io.atomic_write(out / "fit_report.txt", _fit_report_text(man.report, h))
    print(f"relative_residual: {man.report.relative_residual:.3g}")
    if failure is not None:
        print(f"error: {failure}", file=sys.stderr)
        return EXIT_SYNTHESIS
    return EXIT_OK


def _synthesize_into(sc, out: Path):
    syn = pipeline.synthesize(sc)
    h = _write_header(out, sc)
    bundle_io.save(pipeline.controller_bundle(syn, h), out / "controller.txt")
    if syn.manifold is not None:
        bundle_io.atomic_write(out / "fit_report.txt", _fit_report_text(syn.manifold.report, h))
    return syn, h


def cmd_synthesize(args) -> int:
    sc = _load_scenario(args)
    out = _outdir(args, sc)
    _synthesize_into(sc, out)
    print(f"wrote {out / 'controller.txt'}")
    return EXIT_OK


def _emit_run(out: Path, traj, met, h: str):
    from .plotting import render

    bundle_io.atomic_write(out / "trajectory.csv", f"# scenario_hash {h}\n" + traj.to_csv())
    bundle_io.atomic_write(out / "metrics.txt", "\n".join([f"scenario_hash: {h}", *met.lines()]) + "\n")
    render(traj, out, h)


def cmd_simulate(args) -> int:
    sc = _load_scenario(args)
    out = _outdir(args, sc)
    h = scenario.scenario_hash(sc)
    problem = scenario.build_problem(sc)
    path = out / "controller.txt"
    if path.exists():
        b = bundle_io.load(path)
        if b.meta.get("scenario_hash") != h and not args.force:
            raise InvalidInput(f"{path} was built for another scenario "
                               f"({b.meta.get('scenario_hash', '?')[:12]} != {h[:12]}); use --force to override")
        ctrl = pipeline.controller_from_bundle(b, problem)
        pi = pipeline.manifold_from_bundle(b).pi if "pi.coeffs" in b.matrices else None
        _write_header(out, sc)
    else:
        syn, h = _synthesize_into(sc, out)
        ctrl, pi = syn.controller, (syn.manifold.pi if syn.manifold else None)
    try:
        traj, met = pipeline.simulate(sc, problem, ctrl, pi=pi)
    except Diverged as exc:
        if exc.partial is not None:
            from .simulate import metrics

            _emit_run(out, exc.partial, metrics(exc.partial, float(sc["simulation"]["tolerance"])), h)
        raise
    _emit_run(out, traj, met, h)
    for line in met.lines():
        print(line)
    return EXIT_OK


def cmd_compare_baseline(args) -> int:
    sc = _load_scenario(args)
    out = _outdir(args, sc)
    if args.etas:
        sc["compare"]["etas"] = [float(e) for e in args.etas.split(",")]
    rows = pipeline.compare_baseline(sc)
    h = _write_header(out, sc)
    lines = ["controller,eta,tail_sup_g,settled"]
    for r in rows:
        lines.append(f"{r.controller},{'' if r.eta is None else repr(r.eta)},{r.tail_sup_g!r},{str(r.settled).lower()}")
    bundle_io.atomic_write(out / "comparison.csv", f"# scenario_hash {h}\n" + "\n".join(lines) + "\n")
    print(f"{'controller':<16}{'eta':>8}{'tail_sup_g':>14}  settled")
    for r in rows:
        eta = "-" if r.eta is None else f"{r.eta:g}"
        print(f"{r.controller:<16}{eta:>8}{r.tail_sup_g:>14.3e}  {str(r.settled).lower()}")
    return EXIT_OK


def cmd_bench(args) -> int:
    sc = _load_scenario(args)
    out = _outdir(args, sc)
    syn, h = _synthesize_into(sc, out)
    if syn.manifold is not None:
        print(f"fit relative_residual: {syn.manifold.report.relative_residual:.3g}")
    try:
        traj, met = pipeline.simulate(sc, syn.problem, syn.controller,
                                      pi=syn.manifold.pi if syn.manifold else None)
    except Diverged as exc:
        if exc.partial is not None:
            from .simulate import metrics

            _emit_run(out, exc.partial, metrics(exc.partial, float(sc["simulation"]["tolerance"])), h)
        raise
    _emit_run(out, traj, met, h)
    for line in met.lines():
        print(line)
    verdict = "PASS" if met.settled else "FAIL"
    print(f"{sc['name']}: tail_sup_g {met.tail_sup_g:.3e} vs tolerance {met.tolerance:.1e}: {verdict}")
    return EXIT_OK if met.settled else EXIT_SYNTHESIS


COMMANDS = {
    "check": cmd_check,
    "solve-linear": cmd_solve_linear,
    "fit-manifold": cmd_fit_manifold,
    "synthesize": cmd_synthesize,
    "simulate": cmd_simulate,
    "compare-baseline": cmd_compare_baseline,
    "bench": cmd_bench,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="feedopt", description="Feedback optimization via output regulation.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("target", nargs="?", help="built-in scenario name (or a scenario file)")
        p.add_argument("--scenario", help="scenario YAML file")
        p.add_argument("--out", help="output directory (default runs/<scenario name>)")
        p.add_argument("--seed", type=int)
        p.add_argument("--degree", type=int, help="polynomial degree for both maps")
        p.add_argument("--horizon", type=float)
        p.add_argument("--step", type=float)
        p.add_argument("--force", action="store_true", help="accept a bundle from a different scenario")
        if name == "compare-baseline":
            p.add_argument("--etas", help="comma-separated gradient-flow gains")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except FeedoptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
