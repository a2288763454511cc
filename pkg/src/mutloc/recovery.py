"""Extract poses, correspondences and an optimality certificate from the SDP."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .formulation import (
    CostMatrices,
    FullVariableLayout,
    ProblemInstance,
    State,
    build_cost,
    marginalize,
    problem_cost,
    sequence_constants,
    stack_state,
)
from .geometry import GeometryError, project_to_so3, unvec
from .lifting import (
    LiftedLayout,
    assemble_qcqp,
    build_constraints,
    is_permutation,
    uses_separable_objective,
    variant_options,
)
from .sdp import SdpSolution, SolverSettings, relax, solve

EPSILON = 1e-5
GAP_TOL = 1e-5
RATIO_TOL = 1e-4


class RecoveryError(ValueError):
    """The SDP solution cannot be decoded into a valid estimate."""


class UncertifiedOutputError(RecoveryError):
    """The block norms do not select a permutation."""

    def __init__(self, message: str, norms: np.ndarray):
        super().__init__(message)
        self.norms = norms


@dataclass(frozen=True)
class Certificate:
    relative_gap: float
    eig_ratio: float
    certified: bool
    suboptimality_bound: float
    f_primal: float = float("nan")
    f_dual: float = float("nan")
    recovered_cost: float = float("nan")
    flags: tuple = ()


@dataclass
class RecoveredSolution:
    """Estimate per observed trajectory ``Y``; ``distances`` are per sequence."""

    correspondence: np.ndarray
    scales: np.ndarray
    rotations: np.ndarray
    inner_biases: np.ndarray
    translations: np.ndarray
    distances: np.ndarray
    certificate: Certificate
    sdp: SdpSolution | None = None
    timings: dict = field(default_factory=dict)
    variant: str = "d+r"

    @property
    def certified(self) -> bool:
        return self.certificate.certified

    @property
    def matches(self) -> list[tuple[int, int]]:
        return [(int(X), int(Y)) for X, Y in zip(*np.nonzero(self.correspondence))]

    def state(self) -> State:
        return State(self.correspondence.copy(), self.scales.copy(), self.rotations.copy(),
                     self.inner_biases.copy(), self.distances.copy())


def rank_one(Z: np.ndarray, layout: LiftedLayout):
    """Leading eigenvector of ``Z`` scaled to ``y = +1`` and the eigenvalue ratio.

    The ratio ``lambda_2 / lambda_1`` is taken on the ``r`` block, the part of
    the lifted vector the estimate is read from.
    """
    Z = np.asarray(Z, dtype=float)
    Z = 0.5 * (Z + Z.T)
    w, V = np.linalg.eigh(Z)
    lam1 = w[-1]
    if not np.isfinite(lam1) or lam1 <= 0:
        raise RecoveryError(f"leading eigenvalue {lam1:.3e} is not positive")
    z = np.sqrt(lam1) * V[:, -1]
    y = z[layout.y]
    if abs(y) < 1e-6:
        raise RecoveryError(f"homogenizing entry {y:.3e} too small to fix the sign")
    z = z * np.sign(y)
    wr = np.linalg.eigvalsh(Z[:layout.n_r, :layout.n_r])
    ratio = float(max(wr[-2], 0.0) / wr[-1]) if wr[-1] > 0 else float("inf")
    return z, ratio


def block_matrix(z: np.ndarray, layout: LiftedLayout, X: int, Y: int) -> np.ndarray:
    """``r_XY`` reshaped column-first into its 3 x 12 matrix."""
    return unvec(np.asarray(z)[layout.r_slice(X, Y)], 3)


def block_norms(z: np.ndarray, layout: LiftedLayout) -> np.ndarray:
    z = np.asarray(z, dtype=float) / z[layout.y]
    N = layout.N
    return np.array([[np.linalg.norm(block_matrix(z, layout, X, Y), 2) for Y in range(N)]
                     for X in range(N)])


def correspondences(z: np.ndarray, layout: LiftedLayout, eps: float = EPSILON) -> np.ndarray:
    """Permutation of blocks with spectral norm above ``eps``."""
    norms = block_norms(z, layout)
    theta = (norms > eps).astype(float)
    if not is_permutation(theta):
        raise UncertifiedOutputError(
            f"blocks above {eps:g} do not form a permutation", norms)
    return theta


def scale_rotation(M: np.ndarray):
    """Scale ratio and rotation from the first 3 x 3 block ``s R``."""
    S = np.asarray(M, dtype=float)[:, :3]
    det = np.linalg.det(S)
    if not det > 0:
        raise RecoveryError(f"scale block has determinant {det:.3e}; a positive scale is required")
    s = float(np.cbrt(det))
    return s, project_to_so3(S / s)


def inner_bias(M: np.ndarray, s: float, R: np.ndarray) -> np.ndarray:
    """Inner bias from the three ``Pbar_k R`` blocks.

    Each block is fitted by least squares against ``R``, i.e. ``tr(B_k R^T)/3``.
    The fitted vector is already in the observer's (metric) units, so ``s`` only
    enters through the caller's block normalization.
    """
    M = np.asarray(M, dtype=float)
    R = np.asarray(R, dtype=float)
    return np.array([np.trace(M[:, 3 * (k + 1):3 * (k + 2)] @ R.T) / 3.0 for k in range(3)])


def distances(z: np.ndarray, cm: CostMatrices) -> np.ndarray:
    """Minimizing ranges for the ``[r, y]`` part of ``z``, normalized to ``y = 1``."""
    n_r = cm.layout.n_r
    zz = np.asarray(z, dtype=float)[:n_r + 1].copy()
    zz = zz / zz[n_r]
    return cm.recover_distances(zz)


def translation(instance: ProblemInstance, theta: np.ndarray, scales, rotations, pbars,
                D: np.ndarray) -> np.ndarray:
    """First-sample translation of every observed trajectory, averaged over samples."""
    N = instance.N
    A = instance.observer
    out = np.zeros((N, 3))
    for X in range(N):
        Y = int(np.argmax(theta[X]))
        traj = instance.observed[Y]
        b = instance.bearings[X].bearings
        s, R, P = scales[Y], rotations[Y], pbars[Y]
        R_a0, t_a0 = A.rotations[0], A.translations[0]
        R_y0, t_y0 = traj.rotations[0], traj.translations[0]
        terms = []
        for j in range(instance.n):
            t_a = R_a0.T @ (A.translations[j] - t_a0)
            R_a = R_a0.T @ A.rotations[j]
            t_y = R_y0.T @ (traj.translations[j] - t_y0)
            R_yj = R_y0.T @ traj.rotations[j]
            terms.append(t_a + R_a @ (D[X, j] * b[j]) - R @ (R_yj @ P + s * t_y))
        out[Y] = np.mean(terms, axis=0)
    return out


def feasible_cost(instance: ProblemInstance, cm: CostMatrices, theta, scales, rotations,
                  pbars) -> tuple[float, np.ndarray]:
    """Cost of a feasible point with the ranges re-minimized for it."""
    state = State(theta, scales, rotations, pbars)
    z = stack_state(state, 0)
    D = cm.recover_distances(z)
    return problem_cost(instance, State(theta, scales, rotations, pbars, D)), D


def _best_assignment(norms: np.ndarray) -> np.ndarray:
    rows, cols = scipy.optimize.linear_sum_assignment(-norms)
    theta = np.zeros_like(norms)
    theta[rows, cols] = 1.0
    return theta


def build_relaxation(instance: ProblemInstance, variant: str = "d+r"):
    """Cost matrices, lifted layout and SDP for ``instance``."""
    cm = marginalize(build_cost(instance), FullVariableLayout(instance.N, instance.n))
    lay = LiftedLayout(instance.N)
    cons = build_constraints(lay, **variant_options(variant))
    consts = sequence_constants(instance, cm) if uses_separable_objective(variant) else None
    qcqp = assemble_qcqp(cm.C_bar, cons, lay, variant, sequence_constants=consts)
    return cm, lay, relax(qcqp)


def solve_mutual_localization(instance: ProblemInstance, variant: str = "d+r",
                              eps: float = EPSILON,
                              settings: SolverSettings | None = None) -> RecoveredSolution:
    """Full pipeline: cost, relaxation, SDP solve and recovery.

    An uncertified outcome still yields a best-effort estimate; the flags in
    the certificate say which check failed.
    """
    t0 = time.perf_counter()
    cm, lay, sdp = build_relaxation(instance, variant)
    t_build = time.perf_counter() - t0
    sol = solve(sdp, settings)
    t_solve = time.perf_counter() - t0 - t_build
    N = instance.N
    flags = []
    if sol.status not in ("optimal", "near_optimal"):
        flags.append(f"sdp_{sol.status}")

    z, ratio = None, float("inf")
    try:
        z, ratio = rank_one(sol.Z, lay)
    except RecoveryError as exc:
        flags.append(f"rank_one: {exc}")
    if z is None:
        z = np.zeros(lay.d)
        z[lay.y] = 1.0

    try:
        theta = correspondences(z, lay, eps)
    except UncertifiedOutputError as exc:
        flags.append("non_permutation")
        theta = _best_assignment(exc.norms)

    scales = np.ones(N)
    rotations = np.tile(np.eye(3), (N, 1, 1))
    pbars = np.zeros((N, 3))
    zn = z / z[lay.y]
    for X in range(N):
        Y = int(np.argmax(theta[X]))
        M = block_matrix(zn, lay, X, Y)
        try:
            s, R = scale_rotation(M)
        except (RecoveryError, GeometryError) as exc:
            flags.append(f"scale_rotation[{X},{Y}]: {exc}")
            try:
                R = project_to_so3(M[:, :3])
            except GeometryError:
                R = np.eye(3)
            s = max(float(np.trace(M[:, :3] @ R.T)) / 3.0, 1e-12)
        scales[Y], rotations[Y] = s, R
        pbars[Y] = inner_bias(M, s, R)

    D = distances(zn, cm)
    if np.any(D <= 0):
        flags.append("nonpositive_distance")
    t = translation(instance, theta, scales, rotations, pbars, D)
    cost, _ = feasible_cost(instance, cm, theta, scales, rotations, pbars)

    gap = sol.relative_gap if np.isfinite(sol.relative_gap) else float("inf")
    certified = bool(gap <= GAP_TOL and ratio <= RATIO_TOL and not flags)
    cert = Certificate(gap, ratio, certified, cost - sol.f_dual, sol.f_primal, sol.f_dual,
                       cost, tuple(flags))
    timings = {"build": t_build, "solve": t_solve,
               "recover": time.perf_counter() - t0 - t_build - t_solve}
    return RecoveredSolution(theta, scales, rotations, pbars, t, D, cert, sol, timings, variant)
