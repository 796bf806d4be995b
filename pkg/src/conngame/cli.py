"""Command-line entry points.

    conngame simulate --scenario F [F ...] --out DIR [--jobs N]
    conngame attack-plan --state F --kind {spoof,jam,dos} [--scope ...]
    conngame check-ne --state F [--tol T]
    conngame eigen --graph F

Scenario arguments accept either a file path or the name of a bundled
scenario. Exit codes: 0 success (simulate: every run converged; check-ne:
the state is an equilibrium), 1 usage or input error, 2 non-convergence or
non-equilibrium, 3 solver failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from .attacks import AttackKind, AttackScope, attack_plan_report
from .engine import check_nash
from .errors import ConnGameError, NumericalTrouble, SubproblemInfeasible
from .scenario import (
    bundled_scenario_names,
    bundled_scenario_path,
    load_scenario,
    load_state,
    run_scenario,
)
from .spectral import algebraic_connectivity, build_laplacian, load_graph

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NO_CONVERGENCE = 2
EXIT_SOLVER = 3


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; the artifact reserves 2 for
    # non-convergence, so usage problems must map to 1
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _resolve_scenario(token: str) -> str:
    if os.path.exists(token):
        return token
    name = token[: -len(".json")] if token.endswith(".json") else token
    return bundled_scenario_path(name)  # raises ScenarioParseError when unknown


def _run_one(job: tuple[str, str]) -> tuple[str, int, str]:
    path, out_dir = job
    label = os.path.basename(path)
    try:
        scenario = load_scenario(path)
        artifacts = run_scenario(scenario, out_dir)
    except (SubproblemInfeasible, NumericalTrouble) as e:
        return label, EXIT_SOLVER, f"{label}: solver failure: {e}"
    except ConnGameError as e:
        return label, EXIT_USAGE, f"{label}: {e}"
    rep = artifacts.report
    if rep.converged:
        msg = (
            f"{label}: converged after {rep.steps_to_convergence} steps "
            f"({rep.updates_to_convergence} updates), lambda2={rep.final_lambda2:.6f}, "
            f"slacks=({rep.slack1:.2e}, {rep.slack2:.2e}) -> {out_dir}"
        )
        return label, EXIT_OK, msg
    return label, EXIT_NO_CONVERGENCE, f"{label}: did not converge ({rep.reason}) -> {out_dir}"


def _cmd_simulate(args) -> int:
    try:
        paths = [_resolve_scenario(tok) for tok in args.scenario]
    except ConnGameError as e:
        print(str(e), file=sys.stderr)
        return EXIT_USAGE
    if len(paths) == 1:
        jobs = [(paths[0], args.out)]
    else:
        jobs = []
        for p in paths:
            stem = os.path.splitext(os.path.basename(p))[0]
            jobs.append((p, os.path.join(args.out, stem)))
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    code = EXIT_OK
    for _, c, msg in results:
        print(msg)
        code = max(code, c)
    return code


def _cmd_attack_plan(args) -> int:
    cfg = load_state(args.state)
    report = attack_plan_report(
        cfg, AttackKind(args.kind), AttackScope(args.scope), seed=args.seed
    )
    text = json.dumps(report, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return EXIT_OK


def _cmd_check_ne(args) -> int:
    cfg = load_state(args.state)
    report = check_nash(cfg, ne_tolerance=args.tol)
    print(f"lambda2: {report.final_lambda2!r}")
    print(f"player 1 slack: {report.slack1!r}")
    print(f"player 2 slack: {report.slack2!r}")
    if report.converged:
        print(f"verdict: equilibrium (tolerance {args.tol!r})")
        return EXIT_OK
    print(f"verdict: not an equilibrium (tolerance {args.tol!r})")
    return EXIT_NO_CONVERGENCE


def _cmd_eigen(args) -> int:
    g = load_graph(args.graph)
    s = algebraic_connectivity(build_laplacian(g))
    print(f"lambda2: {s.lambda2!r}")
    print("fiedler: " + " ".join(repr(float(v)) for v in s.fiedler))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="conngame", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run one or more scenarios to convergence")
    p_sim.add_argument(
        "--scenario",
        nargs="+",
        required=True,
        metavar="F",
        help="scenario file path or bundled name "
        f"(bundled: {', '.join(bundled_scenario_names())})",
    )
    p_sim.add_argument("--out", required=True, metavar="DIR", help="artifact output directory")
    p_sim.add_argument("--jobs", type=int, default=1, metavar="N", help="parallel runs")
    p_sim.set_defaults(func=_cmd_simulate)

    p_plan = sub.add_parser("attack-plan", help="score attack targets on a state snapshot")
    p_plan.add_argument("--state", required=True, metavar="F", help="state snapshot JSON")
    p_plan.add_argument("--kind", required=True, choices=[k.value for k in AttackKind])
    p_plan.add_argument(
        "--scope", default="global", choices=[s.value for s in AttackScope]
    )
    p_plan.add_argument("--seed", type=int, default=0, help="sensitivity-rotation seed")
    p_plan.add_argument("--out", metavar="F", help="also write the report JSON here")
    p_plan.set_defaults(func=_cmd_attack_plan)

    p_ne = sub.add_parser("check-ne", help="verify a state snapshot is an equilibrium")
    p_ne.add_argument("--state", required=True, metavar="F")
    p_ne.add_argument("--tol", type=float, default=1e-4)
    p_ne.set_defaults(func=_cmd_check_ne)

    p_eig = sub.add_parser("eigen", help="algebraic connectivity of a graph file")
    p_eig.add_argument("--graph", required=True, metavar="F", help="edge list or JSON graph")
    p_eig.set_defaults(func=_cmd_eigen)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SubproblemInfeasible, NumericalTrouble) as e:
        print(f"solver failure: {e}", file=sys.stderr)
        return EXIT_SOLVER
    except ConnGameError as e:
        print(str(e), file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(str(e), file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
