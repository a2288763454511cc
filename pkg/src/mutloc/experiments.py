"""Scoring, benchmark sweeps and the rotation-perturbation heatmap."""

from __future__ import annotations

import csv
import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np

from .baselines import am_solve, am_solve_anonymous, lm_solve, random_init
from .formulation import ProblemInstance, State
from .geometry import axis_angle, geodesic_distance
from .recovery import RecoveredSolution, solve_mutual_localization, translation
from .sdp import SolverSettings
from .simulation import GroundTruth, simulate

METHODS = ("SDP", "AM", "AM-GT", "LM", "LM-GT", "AM-C")


@dataclass(frozen=True)
class Score:
    """Worst case over the observed robots."""

    rotation_error: float
    translation_error: float
    scale_error: float
    permutation_correct: bool


def _estimate(result):
    if isinstance(result, RecoveredSolution):
        return result.state(), result.translations
    state = result if isinstance(result, State) else result.state
    return state, None


def score(result, truth: GroundTruth | None, instance: ProblemInstance | None = None) -> Score:
    """Errors of a recovered solution, local-solver result or state.

    Translations come from the result when it carries them and are otherwise
    recovered from ``instance``.
    """
    if truth is None:
        raise ValueError("scoring needs a ground-truth block")
    state, t = _estimate(result)
    if t is None:
        if instance is None:
            raise ValueError("an instance is needed to recover translations")
        t = translation(instance, state.theta, state.scales, state.rotations, state.pbars,
                        state.distances)
    N = len(truth.scales)
    rot = max(geodesic_distance(state.rotations[Y], truth.rotations[Y]) for Y in range(N))
    trans = float(np.linalg.norm(np.asarray(t) - truth.translations, axis=1).max())
    scale = float(np.abs(np.asarray(state.scales) - truth.scales).max())
    perm = bool(np.array_equal(np.asarray(state.theta), truth.theta))
    return Score(float(rot), trans, scale, perm)


def summarize(values) -> dict:
    v = np.asarray(list(values), dtype=float)
    if v.size == 0:
        return {"count": 0}
    return {"count": int(v.size), "mean": float(v.mean()), "median": float(np.median(v)),
            "p90": float(np.percentile(v, 90)), "max": float(v.max())}


@dataclass
class BenchmarkRecord:
    scenario: str
    N: int
    n: int
    sigma: float
    variant: str
    method: str
    cost: float
    rotation_error: float
    translation_error: float
    scale_error: float
    permutation_correct: bool
    certified: bool
    eig_ratio: float
    duality_gap: float
    f_dual: float
    runtime: float
    build_time: float
    seed: int


CSV_COLUMNS = tuple(f.name for f in fields(BenchmarkRecord))


def default_samples(N: int) -> int:
    """Samples giving twice the minimum number of consecutive edges."""
    return 2 * (18 * N + 2) + 1


def _record(base: dict, method: str, cost: float, sc: Score, runtime: float, **extra):
    row = dict(base, method=method, cost=float(cost), rotation_error=sc.rotation_error,
               translation_error=sc.translation_error, scale_error=sc.scale_error,
               permutation_correct=sc.permutation_correct, certified=False,
               eig_ratio=float("nan"), duality_gap=float("nan"), f_dual=float("nan"),
               runtime=float(runtime), build_time=0.0)
    row.update(extra)
    return BenchmarkRecord(**row)


def run_trial(N: int, n: int, sigma: float, seed: int, methods=("SDP",), variant: str = "d+r",
              edges: str = "consecutive", k: int | None = None,
              settings: SolverSettings | None = None) -> list[BenchmarkRecord]:
    """One simulated scenario solved by every requested method."""
    instance, truth = simulate(N, n, sigma, seed=seed, edge_strategy=edges, k=k)
    base = dict(scenario=f"N{N}-n{n}-s{sigma:g}-seed{seed}", N=N, n=n, sigma=float(sigma),
                variant=variant, seed=int(seed))
    gt_init = {"rotations": truth.rotations, "scales": truth.scales, "pbars": truth.inner_biases,
               "distances": truth.distances}
    rand_init = random_init(N, [seed, 17])
    rows = []
    for method in methods:
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
        t0 = time.perf_counter()
        if method == "SDP":
            res = solve_mutual_localization(instance, variant, settings=settings)
            c = res.certificate
            rows.append(_record(base, method, c.recovered_cost, score(res, truth),
                                res.timings["solve"], certified=c.certified,
                                eig_ratio=c.eig_ratio, duality_gap=c.relative_gap,
                                f_dual=c.f_dual, build_time=res.timings["build"]))
            continue
        if method == "AM-C":
            res = am_solve_anonymous(instance, rand_init)
        else:
            solver = am_solve if method.startswith("AM") else lm_solve
            res = solver(instance, truth.theta, gt_init if method.endswith("GT") else rand_init)
        rows.append(_record(base, method, res.final_cost, score(res, truth, instance),
                            time.perf_counter() - t0))
    return rows


def _run_trial_args(args):
    return run_trial(*args[0], **args[1])


def benchmark(robots, sigmas, trials: int, samples: int | None = None, methods=("SDP",),
              variant: str = "d+r", edges: str = "consecutive", k: int | None = None,
              seed: int = 0, workers: int = 1) -> list[BenchmarkRecord]:
    """Sweep over robot counts, noise levels and seeds in a fixed order."""
    jobs = []
    for N in robots:
        n = samples if samples else default_samples(N)
        for sigma in sigmas:
            for t in range(trials):
                jobs.append(((N, n, sigma, seed + t),
                             dict(methods=tuple(methods), variant=variant, edges=edges, k=k)))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_run_trial_args, jobs))
    else:
        results = [_run_trial_args(j) for j in jobs]
    return [row for rows in results for row in rows]


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def records_to_csv(records, omit_timing: bool = False) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        row = asdict(r)
        if omit_timing:
            row["runtime"] = row["build_time"] = 0.0
        w.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def read_records(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))


HEATMAP_COLUMNS = ("roll", "pitch", "method", "final_cost", "rotation_error", "converged")


def heatmap(instance: ProblemInstance, truth: GroundTruth, method: str = "lm", grid: int = 9):
    """Local solves started from truth with every rotation perturbed in roll and pitch.

    Returns rows ``(roll, pitch, method, final_cost, rotation_error, converged)``
    over an evenly spaced ``grid x grid`` lattice on ``[-pi, pi]^2``.
    """
    solver = {"lm": lm_solve, "am": am_solve}[method.lower()]
    angles = np.linspace(-np.pi, np.pi, grid)
    rows = []
    for roll in angles:
        for pitch in angles:
            dR = axis_angle([1.0, 0.0, 0.0], roll) @ axis_angle([0.0, 1.0, 0.0], pitch)
            init = {"rotations": np.array([R @ dR for R in truth.rotations]),
                    "scales": truth.scales, "pbars": truth.inner_biases}
            res = solver(instance, truth.theta, init)
            err = max(geodesic_distance(a, b) for a, b in zip(res.state.rotations, truth.rotations))
            rows.append((float(roll), float(pitch), method.lower(), float(res.final_cost),
                         float(err), bool(res.converged)))
    return rows


def heatmap_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEATMAP_COLUMNS)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()
