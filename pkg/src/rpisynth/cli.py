"""Command-line interface: ``rpisynth design | certify | simulate | report``.

Exit codes: 0 success, 1 other error, 2 usage or input error,
3 no feasible start, 4 certification failed, 5 violation observed in a
simulation of a certified design.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .certification import certify
from .errors import InvalidConfig, NoFeasibleStart, RpiSynthError
from .report import boundary_files, design_table, residual_table, set_metrics
from .simulation import ScenarioConfig, export_trajectory, rollout
from .synthesis import synthesize

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_UNCERTIFIED, EXIT_VIOLATION = 0, 1, 2, 3, 4, 5

SCENARIOS = {
    "extreme": {"alpha": "vertex-hop", "disturbance": "extreme"},
    "uniform": {"alpha": "uniform", "disturbance": "uniform"},
    "vertex-hop": {"alpha": "vertex-hop", "disturbance": "uniform"},
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _positive(kind):
    def conv(text):
        val = kind(text)
        if val <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return val
    return conv


def build_parser():
    p = _Parser(prog="rpisynth", description="Design and certify incremental output-feedback "
                "controllers with polyhedral invariant sets.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    d = sub.add_parser("design", help="synthesize gains and sets from a problem file")
    d.add_argument("problem")
    d.add_argument("-o", "--out", required=True, help="solution file to write")
    d.add_argument("--theta", type=float)
    d.add_argument("--lr", type=int, dest="l_r")
    d.add_argument("--starts", type=_positive(int))
    d.add_argument("--seed", type=int)
    d.add_argument("--tol", type=float, default=1e-6, help="certification tolerance")

    c = sub.add_parser("certify", help="certify a solution file")
    c.add_argument("problem")
    c.add_argument("solution")
    c.add_argument("--tol", type=float, default=1e-6)

    s = sub.add_parser("simulate", help="simulate closed-loop rollouts")
    s.add_argument("problem")
    s.add_argument("solution")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--rollouts", type=_positive(int), default=100)
    s.add_argument("--horizon", type=_positive(int), default=200)
    s.add_argument("--scenario", choices=sorted(SCENARIOS), default="extreme")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--tol", type=float, default=1e-6)

    r = sub.add_parser("report", help="print set metrics and write boundary files")
    r.add_argument("problem")
    r.add_argument("solution")
    r.add_argument("--out", help="directory for boundary vertex files")
    r.add_argument("--tol", type=float, default=1e-6)
    return p


def _print_cert(cert):
    print(residual_table(cert.residual, cert.tol))
    print(f"lambda* = {cert.lam_star:.9f}")
    print(f"inner-set excess = {cert.inner_excess:.3e}")
    if cert.du_margin is not None:
        print(f"increment margin = {cert.du_margin:.6f}")
    print(f"k~ = {cert.k_tilde if cert.k_tilde is not None else 'undefined (zero rho entry)'}")
    for cond, pair, row, val in cert.failures:
        where = []
        if pair is not None:
            where.append(f"vertex pair {pair}")
        if row is not None:
            where.append(f"row {row}")
        print(f"violated: {cond} ({', '.join(where) or 'global'}) value {val:.6g}")
    print("verdict:", "certified" if cert.certified else "NOT certified")


def cmd_design(args):
    problem, options = io.load_problem(args.problem)
    cfg = io.synthesis_config(options, theta=args.theta, l_r=args.l_r, starts=args.starts,
                              seed=args.seed)
    try:
        result = synthesize(problem, cfg)
    except NoFeasibleStart as exc:
        print(f"no feasible start: {exc} (profile: {exc.profile})", file=sys.stderr)
        return EXIT_INFEASIBLE
    sol = result.solution
    cert = certify(problem, sol.gains, sol.L, sol.rho, tol=args.tol, eps1=sol.eps1,
                   gammas=sol.gammas, psis=sol.psis)
    doc = io.solution_to_dict(sol.gains, sol.L, sol.rho, sol.lam, sol.eps1, sol.gammas, sol.psis,
                              result.objective, cert.summary(), cfg.seed)
    io.write_json(doc, args.out)
    metrics = set_metrics(sol.L, sol.rho)
    has_gamma = sol.gammas is not None and np.size(sol.gammas) > 0
    mean_gamma = float(np.mean(sol.gammas)) if has_gamma else float("nan")
    print(f"J = {result.objective:.6f}   lambda = {sol.lam:.6f}   "
          f"mean rho = {np.mean(sol.rho):.6f}   mean gamma = {mean_gamma:.6f}")
    print(design_table(metrics, sol.gains))
    print("certification:", "certified" if cert.certified else "NOT certified",
          f"(lambda* = {cert.lam_star:.6f}, tol {args.tol:g})")
    return EXIT_OK


def _load_pair(args):
    problem, _ = io.load_problem(args.problem)
    sol = io.load_solution(args.solution)
    try:
        sol["gains"].check_against(problem)
    except RpiSynthError as exc:
        raise io.SchemaError("/gains", str(exc)) from exc
    return problem, sol


def _certify(problem, sol, tol):
    return certify(problem, sol["gains"], sol["L"], sol["rho"], tol=tol, eps1=sol["eps1"],
                   gammas=sol["gammas"], psis=sol["psis"])


def cmd_certify(args):
    problem, sol = _load_pair(args)
    cert = _certify(problem, sol, args.tol)
    _print_cert(cert)
    return EXIT_OK if cert.certified else EXIT_UNCERTIFIED


def cmd_simulate(args):
    problem, sol = _load_pair(args)
    cert = _certify(problem, sol, args.tol)
    if not cert.certified:
        logging.getLogger(__name__).warning("solution is not certified; simulating anyway")
    scen = ScenarioConfig(horizon=args.horizon, rollouts=args.rollouts, seed=args.seed,
                          **SCENARIOS[args.scenario])
    summary = rollout(problem, sol["gains"], sol["L"], sol["rho"], scen, k_tilde=cert.k_tilde)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    width = len(str(args.rollouts - 1))
    for i, res in enumerate(summary.results):
        export_trajectory(res, out / f"rollout_{i:0{width}d}.csv")
    for name, text in boundary_files(sol["L"], sol["rho"]).items():
        (out / name).write_text(text)
    doc = summary.as_dict()
    doc["certified"] = bool(cert.certified)
    (out / "summary.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(json.dumps(doc, indent=2, sort_keys=True))
    if cert.certified and summary.total_violations:
        print("violation under a certified design", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_report(args):
    problem, sol = _load_pair(args)
    cert = _certify(problem, sol, args.tol)
    metrics = set_metrics(sol["L"], sol["rho"])
    print(design_table(metrics, sol["gains"]))
    print(f"lambda* = {cert.lam_star:.6f}   k~ = {cert.k_tilde}   "
          f"verdict: {'certified' if cert.certified else 'NOT certified'}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in boundary_files(sol["L"], sol["rho"]).items():
            (out / name).write_text(text)
    return EXIT_OK


COMMANDS = {"design": cmd_design, "certify": cmd_certify, "simulate": cmd_simulate,
            "report": cmd_report}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except io.SchemaError as exc:
        print(f"input error at {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvalidConfig as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RpiSynthError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
