"""Command-line entry point.

Exit codes: 0 success, 2 invalid input or usage, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io as instance_io
from .baselines import am_solve, am_solve_anonymous, lm_solve, random_init
from .experiments import (
    METHODS,
    benchmark,
    heatmap,
    heatmap_to_csv,
    records_to_csv,
    score,
)
from .formulation import DegenerateGeometryError
from .geometry import GeometryError
from .lifting import VARIANTS
from .recovery import EPSILON, build_relaxation, solve_mutual_localization
from .sdp import SolverSettings, export_sdpa
from .simulation import simulate

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        if ".." in part:
            a, b = part.split("..")
            out.extend(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def _float_list(text: str) -> list[float]:
    try:
        return [float(p) for p in text.split(",") if p]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from None


def _emit(text: str, out) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _add_edges(p):
    p.add_argument("--edges", choices=("consecutive", "all", "random-k"), default="consecutive")
    p.add_argument("--k", type=int, default=None, help="edge count for random-k")


def _add_solver(p):
    p.add_argument("--variant", choices=sorted(VARIANTS), default="d+r")
    p.add_argument("--eps", type=float, default=EPSILON, help="correspondence norm threshold")
    p.add_argument("--backend", choices=("auto", "cvxopt", "sdpa"), default="auto")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mutloc", description="Certifiable anonymous bearing-only mutual localization.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="write a synthetic instance file")
    p.add_argument("--robots", type=int, required=True)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    _add_edges(p)
    p.add_argument("--out", default=None)

    p = sub.add_parser("solve", help="solve an instance file and print the certified solution")
    p.add_argument("instance")
    _add_solver(p)
    p.add_argument("--out", default=None)

    p = sub.add_parser("baseline", help="run a local solver on an instance file")
    p.add_argument("instance")
    p.add_argument("--method", choices=("am", "lm", "am-anonymous"), default="am")
    p.add_argument("--init", choices=("random", "truth"), default="random")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)

    p = sub.add_parser("benchmark", help="sweep robots, noise and seeds into a CSV table")
    p.add_argument("--robots", type=_int_list, default=[1])
    p.add_argument("--sigma", type=_float_list, default=[0.0])
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--seed", type=int, default=0, help="first seed")
    p.add_argument("--methods", default="SDP", help=f"comma list from {','.join(METHODS)}")
    p.add_argument("--variant", choices=sorted(VARIANTS), default="d+r")
    _add_edges(p)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--omit-timing", action="store_true", help="write zero runtimes for reproducible files")
    p.add_argument("--out", default=None)

    p = sub.add_parser("export-sdpa", help="write the relaxation in SDPA sparse format")
    p.add_argument("instance")
    p.add_argument("--variant", choices=sorted(VARIANTS), default="d+r")
    p.add_argument("--independent-only", action="store_true")
    p.add_argument("--out", default=None)

    p = sub.add_parser("heatmap", help="local-solver outcomes over roll/pitch perturbations of truth")
    p.add_argument("instance")
    p.add_argument("--method", choices=("lm", "am"), default="lm")
    p.add_argument("--grid", type=int, default=9)
    p.add_argument("--out", default=None)
    return parser


def _need_truth(f: instance_io.InstanceFile):
    if f.ground_truth is None:
        raise instance_io.InstanceValidationError("ground_truth", "required for this command")
    return f.ground_truth


def _solution_dict(res, truth) -> dict:
    c = res.certificate
    out = {
        "certified": c.certified,
        "certificate": {"relative_gap": c.relative_gap, "eig_ratio": c.eig_ratio,
                        "suboptimality_bound": c.suboptimality_bound, "f_primal": c.f_primal,
                        "f_dual": c.f_dual, "recovered_cost": c.recovered_cost,
                        "flags": list(c.flags)},
        "correspondence": res.correspondence.astype(int).tolist(),
        "scales": res.scales.tolist(),
        "rotations": [R.reshape(-1).tolist() for R in res.rotations],
        "inner_biases": res.inner_biases.tolist(),
        "translations": res.translations.tolist(),
        "distances": res.distances.tolist(),
        "sdp_status": res.sdp.status if res.sdp is not None else None,
        "timings": res.timings,
        "variant": res.variant,
    }
    if truth is not None:
        out["score"] = vars(score(res, truth))
    return out


def _cmd_simulate(a) -> int:
    instance, truth = simulate(a.robots, a.samples, a.sigma, seed=a.seed, edge_strategy=a.edges, k=a.k)
    _emit(instance_io.dumps(instance, truth) + "\n", a.out)
    return EXIT_OK


def _cmd_solve(a) -> int:
    f = instance_io.load(a.instance)
    res = solve_mutual_localization(f.instance, a.variant, a.eps, SolverSettings(backend=a.backend))
    _emit(json.dumps(_solution_dict(res, f.ground_truth), indent=1) + "\n", a.out)
    if res.sdp is not None and res.sdp.status in ("numerical_failure", "infeasible"):
        return EXIT_NUMERICAL
    return EXIT_OK


def _cmd_baseline(a) -> int:
    f = instance_io.load(a.instance)
    N = f.instance.N
    truth = f.ground_truth
    if a.init == "truth":
        truth = _need_truth(f)
        init = {"rotations": truth.rotations, "scales": truth.scales, "pbars": truth.inner_biases,
                "distances": truth.distances}
    else:
        init = random_init(N, a.seed)
    if a.method == "am-anonymous":
        res = am_solve_anonymous(f.instance, init)
    else:
        theta = _need_truth(f).theta if N > 1 else np.ones((1, 1))
        res = (am_solve if a.method == "am" else lm_solve)(f.instance, theta, init)
    st = res.state
    out = {"method": a.method, "final_cost": res.final_cost, "iterations": res.iterations,
           "converged": res.converged, "correspondence": st.theta.astype(int).tolist(),
           "scales": st.scales.tolist(), "rotations": [R.reshape(-1).tolist() for R in st.rotations],
           "inner_biases": st.pbars.tolist()}
    if truth is not None:
        out["score"] = vars(score(res, truth, f.instance))
    _emit(json.dumps(out, indent=1) + "\n", a.out)
    return EXIT_OK if np.isfinite(res.final_cost) else EXIT_NUMERICAL


def _cmd_benchmark(a) -> int:
    methods = [m.strip() for m in a.methods.split(",") if m.strip()]
    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise instance_io.InstanceValidationError("--methods", f"unknown method(s) {bad}")
    records = benchmark(a.robots, a.sigma, a.trials, a.samples, methods, a.variant, a.edges, a.k,
                        a.seed, a.workers)
    _emit(records_to_csv(records, a.omit_timing), a.out)
    return EXIT_OK


def _cmd_export(a) -> int:
    f = instance_io.load(a.instance)
    _, _, sdp = build_relaxation(f.instance, a.variant)
    text = export_sdpa(sdp, None, independent_only=a.independent_only)
    _emit(text, a.out)
    return EXIT_OK


def _cmd_heatmap(a) -> int:
    f = instance_io.load(a.instance)
    rows = heatmap(f.instance, _need_truth(f), a.method, a.grid)
    _emit(heatmap_to_csv(rows), a.out)
    return EXIT_OK


_COMMANDS = {"simulate": _cmd_simulate, "solve": _cmd_solve, "baseline": _cmd_baseline,
             "benchmark": _cmd_benchmark, "export-sdpa": _cmd_export, "heatmap": _cmd_heatmap}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except instance_io.InstanceValidationError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (DegenerateGeometryError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, GeometryError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
