"""Local solvers over the full cost for a fixed correspondence.

Both work on the same residual: for sequence ``X`` matched to trajectory ``Y``
and edge ``(i1, i2)``::

    e = u2 D2 - u1 D1 + t_A - R (s t_Y + R_Y P)

with ``u = R_A b`` and the hatted increments of the local trajectories.  For
fixed ``R`` this is linear in ``(s, P, D)``; for fixed ``(s, P, D)`` it is
``k - R a`` and the best ``R`` is an orthogonal Procrustes solution.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .formulation import ProblemInstance, State
from .geometry import exp_so3, hat, project_to_so3, random_rotation
from .lifting import is_permutation

MAX_ANONYMOUS_N = 6


@dataclass(frozen=True)
class LocalSettings:
    max_iter: int = 200
    grad_tol: float = 1e-10
    step_tol: float = 1e-14
    initial_damping: float = 1e-3
    max_rounds: int = 500
    cost_tol: float = 1e-12


@dataclass
class LocalSolveResult:
    final_cost: float
    state: State
    iterations: int
    converged: bool
    init_used: dict
    history: list = field(default_factory=list)
    info: dict = field(default_factory=dict)


@dataclass
class _Point:
    rotations: np.ndarray
    scales: np.ndarray
    pbars: np.ndarray
    distances: np.ndarray

    def copy(self) -> "_Point":
        return _Point(self.rotations.copy(), self.scales.copy(), self.pbars.copy(),
                      self.distances.copy())


@dataclass
class _Sequence:
    X: int
    Y: int
    i1: np.ndarray
    i2: np.ndarray
    sw: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    t_a: np.ndarray
    t_y: np.ndarray
    R_y: np.ndarray


class FixedCorrespondenceProblem:
    """The full weighted cost with ``theta`` held at a permutation.

    Parameters are ordered ``[dR_Y (3), s_Y, P_Y (3)]`` per trajectory and then
    every range, sequence-major.  Rotations move by right multiplication with
    ``exp(hat(dR))``.
    """

    def __init__(self, instance: ProblemInstance, theta: np.ndarray):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (instance.N, instance.N) or not is_permutation(theta):
            raise ValueError("correspondence must be an N x N permutation matrix")
        self.instance = instance
        self.theta = theta
        self.N, self.n = instance.N, instance.n
        A = instance.observer
        idx = np.array([instance.edge_indices(e) for e in instance.edges], dtype=int).reshape(-1, 2)
        i1, i2 = idx[:, 0], idx[:, 1]
        self.seqs = []
        for X in range(self.N):
            Y = int(np.argmax(theta[X]))
            traj = instance.observed[Y]
            b = instance.bearings[X].bearings
            self.seqs.append(_Sequence(
                X, Y, i1, i2, np.sqrt(instance.weights[X]),
                np.einsum("eij,ej->ei", A.rotations[i1], b[i1]),
                np.einsum("eij,ej->ei", A.rotations[i2], b[i2]),
                A.translations[i2] - A.translations[i1],
                traj.translations[i2] - traj.translations[i1],
                traj.rotations[i2] - traj.rotations[i1],
            ))
        self.n_params = 7 * self.N + self.N * self.n
        self.n_residuals = 3 * len(i1) * self.N

    # residuals ---------------------------------------------------------
    def _known(self, q: _Sequence, D: np.ndarray) -> np.ndarray:
        return q.u2 * D[q.X, q.i2][:, None] - q.u1 * D[q.X, q.i1][:, None] + q.t_a

    def _lever(self, q: _Sequence, p: _Point) -> np.ndarray:
        return p.scales[q.Y] * q.t_y + q.R_y @ p.pbars[q.Y]

    def residual(self, p: _Point) -> np.ndarray:
        out = []
        for q in self.seqs:
            e = self._known(q, p.distances) - self._lever(q, p) @ p.rotations[q.Y].T
            out.append((q.sw[:, None] * e).reshape(-1))
        return np.concatenate(out) if out else np.zeros(0)

    def cost(self, p: _Point) -> float:
        r = self.residual(p)
        return float(r @ r)

    def jacobian(self, p: _Point) -> np.ndarray:
        E = len(self.seqs[0].i1) if self.seqs else 0
        J = np.zeros((self.n_residuals, self.n_params))
        for q in self.seqs:
            rows = slice(3 * E * q.X, 3 * E * (q.X + 1))
            R = p.rotations[q.Y]
            a = self._lever(q, p)
            blk = np.zeros((E, 3, self.n_params))
            c = 7 * q.Y
            blk[:, :, c:c + 3] = np.einsum("ij,ejk->eik", R, np.array([hat(v) for v in a]))
            blk[:, :, c + 3] = -(q.t_y @ R.T)
            blk[:, :, c + 4:c + 7] = -np.einsum("ij,ejk->eik", R, q.R_y)
            d0 = 7 * self.N + q.X * self.n
            np.add.at(blk, (np.arange(E), slice(None), d0 + q.i1), -q.u1)
            np.add.at(blk, (np.arange(E), slice(None), d0 + q.i2), q.u2)
            J[rows] = (q.sw[:, None, None] * blk).reshape(3 * E, -1)
        return J

    def gradient(self, p: _Point) -> np.ndarray:
        return 2.0 * self.jacobian(p).T @ self.residual(p)

    def retract(self, p: _Point, step: np.ndarray) -> _Point:
        step = np.asarray(step, dtype=float)
        out = p.copy()
        for Y in range(self.N):
            c = 7 * Y
            out.rotations[Y] = p.rotations[Y] @ exp_so3(step[c:c + 3])
            out.scales[Y] = p.scales[Y] + step[c + 3]
            out.pbars[Y] = p.pbars[Y] + step[c + 4:c + 7]
        out.distances = p.distances + step[7 * self.N:].reshape(self.N, self.n)
        return out

    # closed-form blocks -------------------------------------------------
    def solve_linear(self, rotations: np.ndarray):
        """Least-squares ``(s, P, D)`` for fixed rotations; None when singular."""
        scales = np.zeros(self.N)
        pbars = np.zeros((self.N, 3))
        D = np.zeros((self.N, self.n))
        E = len(self.seqs[0].i1) if self.seqs else 0
        for q in self.seqs:
            R = rotations[q.Y]
            M = np.zeros((E, 3, 4 + self.n))
            M[:, :, 0] = -(q.t_y @ R.T)
            M[:, :, 1:4] = -np.einsum("ij,ejk->eik", R, q.R_y)
            np.add.at(M, (np.arange(E), slice(None), 4 + q.i1), -q.u1)
            np.add.at(M, (np.arange(E), slice(None), 4 + q.i2), q.u2)
            M = (q.sw[:, None, None] * M).reshape(3 * E, -1)
            rhs = -(q.sw[:, None] * q.t_a).reshape(-1)
            x, _, rank, sv = np.linalg.lstsq(M, rhs, rcond=None)
            if rank < M.shape[1] or sv[-1] <= 1e-10 * sv[0]:
                return None
            scales[q.Y], pbars[q.Y], D[q.X] = x[0], x[1:4], x[4:]
        return scales, pbars, D

    def solve_rotations(self, p: _Point) -> np.ndarray:
        """Procrustes update of every rotation for fixed ``(s, P, D)``."""
        out = p.rotations.copy()
        for q in self.seqs:
            k = q.sw[:, None] * self._known(q, p.distances)
            a = q.sw[:, None] * self._lever(q, p)
            H = k.T @ a
            if np.linalg.norm(H) == 0:
                continue
            U, _, Vt = np.linalg.svd(H)
            S = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))])
            out[q.Y] = U @ S @ Vt
        return out

    def state(self, p: _Point) -> State:
        return State(self.theta.copy(), p.scales.copy(), p.rotations.copy(), p.pbars.copy(),
                     p.distances.copy())


def random_init(N: int, seed) -> dict:
    """Uniform rotations, unit scales and zero inner biases."""
    rng = np.random.default_rng(seed)
    return {"rotations": np.array([random_rotation(rng) for _ in range(N)]),
            "scales": np.ones(N), "pbars": np.zeros((N, 3))}


def _initial_point(problem: FixedCorrespondenceProblem, init: dict) -> _Point:
    N, n = problem.N, problem.n
    R = np.array([project_to_so3(r) for r in np.asarray(init["rotations"], float).reshape(N, 3, 3)])
    s = np.asarray(init.get("scales", np.ones(N)), dtype=float).reshape(N).copy()
    P = np.asarray(init.get("pbars", np.zeros((N, 3))), dtype=float).reshape(N, 3).copy()
    D = init.get("distances")
    if D is None:
        p = _Point(R, s, P, np.zeros((N, n)))
        D = _best_distances(problem, p)
    return _Point(R, s, P, np.asarray(D, dtype=float).reshape(N, n).copy())


def _best_distances(problem: FixedCorrespondenceProblem, p: _Point) -> np.ndarray:
    """Ranges minimizing the cost with everything else fixed."""
    D = np.zeros((problem.N, problem.n))
    E = len(problem.seqs[0].i1) if problem.seqs else 0
    for q in problem.seqs:
        G = np.zeros((E, 3, problem.n))
        np.add.at(G, (np.arange(E), slice(None), q.i1), -q.u1)
        np.add.at(G, (np.arange(E), slice(None), q.i2), q.u2)
        G = (q.sw[:, None, None] * G).reshape(3 * E, -1)
        rest = q.t_a - problem._lever(q, p) @ p.rotations[q.Y].T
        rhs = -(q.sw[:, None] * rest).reshape(-1)
        D[q.X] = np.linalg.lstsq(G, rhs, rcond=None)[0]
    return D


def _init_record(init: dict) -> dict:
    return {k: np.array(v, dtype=float) for k, v in init.items() if v is not None}


def lm_solve(instance: ProblemInstance, correspondence, init: dict,
             settings: LocalSettings | None = None) -> LocalSolveResult:
    """Levenberg-Marquardt from ``init`` (rotations required; scales, inner
    biases and ranges optional)."""
    settings = settings or LocalSettings()
    problem = FixedCorrespondenceProblem(instance, correspondence)
    p = _initial_point(problem, init)
    r = problem.residual(p)
    cost = float(r @ r)
    history = [cost]
    lam = None
    converged = False
    it = 0
    for it in range(1, settings.max_iter + 1):
        J = problem.jacobian(p)
        g = J.T @ r
        if 2.0 * np.linalg.norm(g) <= settings.grad_tol:
            converged = True
            break
        H = J.T @ J
        if lam is None:
            lam = settings.initial_damping * max(float(np.diag(H).max()), 1e-12)
        while True:
            try:
                step = np.linalg.solve(H + lam * np.eye(len(H)), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = problem.retract(p, step)
            r_new = problem.residual(trial)
            c_new = float(r_new @ r_new)
            if c_new < cost:
                p, r, cost = trial, r_new, c_new
                lam = max(lam / 3.0, 1e-15)
                break
            lam *= 2.0
            if lam > 1e16:
                break
        history.append(cost)
        if lam > 1e16 or np.linalg.norm(step) <= settings.step_tol * (1.0 + _norm(p)):
            converged = 2.0 * np.linalg.norm(problem.gradient(p)) <= max(
                settings.grad_tol, 1e-8 * (1.0 + cost))
            break
    return LocalSolveResult(cost, problem.state(p), it, bool(converged), _init_record(init),
                            history, {"method": "lm", "damping": lam})


def _norm(p: _Point) -> float:
    return float(np.sqrt(np.sum(p.scales ** 2) + np.sum(p.pbars ** 2) + np.sum(p.distances ** 2)))


def am_solve(instance: ProblemInstance, correspondence, init: dict,
             settings: LocalSettings | None = None) -> LocalSolveResult:
    """Alternate linear least squares for ``(s, P, D)`` with Procrustes for ``R``."""
    settings = settings or LocalSettings()
    problem = FixedCorrespondenceProblem(instance, correspondence)
    p = _initial_point(problem, init)
    cost = problem.cost(p)
    history = [cost]
    converged = False
    info = {"method": "am"}
    rounds = 0
    for rounds in range(1, settings.max_rounds + 1):
        lin = problem.solve_linear(p.rotations)
        if lin is None:
            info["error"] = "singular least-squares block"
            break
        p = _Point(p.rotations, *lin)
        p = _Point(problem.solve_rotations(p), p.scales, p.pbars, p.distances)
        new = problem.cost(p)
        history.append(new)
        done = abs(cost - new) <= settings.cost_tol
        cost = new
        if done:
            converged = True
            break
    return LocalSolveResult(cost, problem.state(p), rounds, bool(converged), _init_record(init),
                            history, info)


def am_solve_anonymous(instance: ProblemInstance, init: dict,
                       settings: LocalSettings | None = None) -> LocalSolveResult:
    """Best ``am_solve`` result over every correspondence.

    ``init`` is indexed by trajectory, so the same starting poses are used for
    each permutation.
    """
    N = instance.N
    if N > MAX_ANONYMOUS_N:
        raise ValueError(f"enumeration over {N}! correspondences is not supported (N <= {MAX_ANONYMOUS_N})")
    best, count = None, 0
    for perm in itertools.permutations(range(N)):
        theta = np.zeros((N, N))
        theta[np.arange(N), perm] = 1.0
        res = am_solve(instance, theta, init, settings)
        count += 1
        if best is None or res.final_cost < best.final_cost:
            best = res
    best.info = dict(best.info, inner_solves=count, permutations=math.factorial(N))
    return best
