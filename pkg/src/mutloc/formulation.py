"""Loop-error coefficients, the quadratic cost and distance marginalization.

The full decision vector is ``x = [r, y, D]`` where ``r`` stacks one 36-vector
``r_XY = vec([s_Y, Pbar_Y] (x) R_Y)`` per (sequence X, trajectory Y) pair in
X-major order, ``y`` is the homogenizing scalar and ``D`` stacks the
camera-feature distances per sequence (X-major, then timestamp).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .geometry import GeometryError, Trajectory, vec

CORANK_REL_TOL = 1e-9
DDSINGULAR_REL_TOL = 1e-10


class DegenerateGeometryError(ValueError):
    """The distance block of the cost is singular.

    ``slots`` lists the offending ``(sequence, timestamp)`` pairs.
    """

    def __init__(self, message: str, slots: Sequence[tuple[int, int]] = ()):
        super().__init__(message)
        self.slots = list(slots)


def make_edges(timestamps: Sequence[int], strategy: str = "consecutive", k: int | None = None,
               seed: int = 0) -> list[tuple[int, int]]:
    """Edge set over the shared timestamps.

    ``consecutive`` pairs neighbours, ``all`` takes every pair and ``random-k``
    draws ``k`` distinct pairs (seeded) on top of a consecutive chain so that
    every timestamp is covered.
    """
    ts = list(timestamps)
    chain = list(zip(ts, ts[1:]))
    if strategy == "consecutive":
        return chain
    if strategy == "all":
        return list(itertools.combinations(ts, 2))
    if strategy in ("random-k", "random"):
        if k is None:
            raise ValueError("random-k edges need k")
        pairs = [p for p in itertools.combinations(ts, 2) if p not in set(chain)]
        rng = np.random.default_rng(seed)
        extra = max(0, min(k - len(chain), len(pairs)))
        pick = sorted(rng.choice(len(pairs), size=extra, replace=False)) if extra else []
        return sorted(chain + [pairs[i] for i in pick])
    raise ValueError(f"unknown edge strategy {strategy!r}")


@dataclass(frozen=True)
class ProblemInstance:
    """Observer trajectory, anonymous observed trajectories and bearings.

    All trajectories are in their robot's local frame and share timestamps.
    ``weights[X, e]`` is the confidence of edge ``e`` for bearing sequence ``X``.
    """

    observer: Trajectory
    observed: tuple
    bearings: tuple
    edges: tuple
    weights: np.ndarray = None
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        observed = tuple(self.observed)
        bearings = tuple(self.bearings)
        edges = tuple((int(a), int(b)) for a, b in self.edges)
        N = len(observed)
        if N < 1:
            raise ValueError("need at least one observed trajectory")
        if len(bearings) != N:
            raise ValueError(f"{len(bearings)} bearing sequences for {N} trajectories")
        J = self.observer.timestamps
        for k, traj in enumerate((self.observer,) + observed):
            if traj.timestamps != J:
                raise ValueError(f"trajectory {k} does not share the observer timestamps")
            if not traj.is_local(1e-9):
                raise ValueError(f"trajectory {k} is not expressed in its local frame")
        for b in bearings:
            if len(b) != len(J):
                raise ValueError(f"bearing sequence {b.sequence_index} does not cover every timestamp")
        Jset = set(J)
        for j1, j2 in edges:
            if j1 >= j2 or j1 not in Jset or j2 not in Jset:
                raise GeometryError(f"invalid edge ({j1}, {j2})")
        if self.weights is None:
            w = np.ones((N, len(edges)))
        else:
            w = np.array(self.weights, dtype=float)
            if w.ndim == 0:
                w = np.full((N, len(edges)), float(w))
        if w.shape != (N, len(edges)):
            raise ValueError(f"weights must have shape {(N, len(edges))}, got {w.shape}")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        w.setflags(write=False)
        object.__setattr__(self, "observed", observed)
        object.__setattr__(self, "bearings", bearings)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "weights", w)

    @property
    def N(self) -> int:
        return len(self.observed)

    @property
    def n(self) -> int:
        return len(self.observer)

    @property
    def timestamps(self) -> tuple:
        return self.observer.timestamps

    def edge_indices(self, edge) -> tuple[int, int]:
        return self.observer.index_of(edge[0]), self.observer.index_of(edge[1])


@dataclass(frozen=True)
class FullVariableLayout:
    N: int
    n: int

    @property
    def n_r(self) -> int:
        return 36 * self.N * self.N

    @property
    def dim(self) -> int:
        return self.n_r + 1 + self.n * self.N

    @property
    def y(self) -> int:
        return self.n_r

    def r(self, X: int, Y: int) -> slice:
        o = 36 * (self.N * X + Y)
        return slice(o, o + 36)

    def d(self, X: int, i: int) -> int:
        return self.n_r + 1 + self.n * X + i

    @property
    def d_slice(self) -> slice:
        return slice(self.n_r + 1, self.dim)

    @property
    def z_slice(self) -> slice:
        return slice(0, self.n_r + 1)


@dataclass
class State:
    """Candidate values for every unknown of the original problem.

    ``theta[X, Y]`` is 1 when sequence X belongs to trajectory Y; ``pbars`` are
    the inner biases in the observer's map units (the quantity that enters the
    loop error); ``distances[X, i]`` is the range for sequence X at sample i.
    """

    theta: np.ndarray
    scales: np.ndarray
    rotations: np.ndarray
    pbars: np.ndarray
    distances: np.ndarray | None = None

    @property
    def N(self) -> int:
        return len(self.scales)

    def lifted_params(self, Y: int) -> np.ndarray:
        return np.concatenate([[self.scales[Y]], self.pbars[Y]])

    def r_block(self, X: int, Y: int) -> np.ndarray:
        """``vec(theta_XY [s, Pbar]^T (x) R)`` as a 36-vector."""
        p = self.theta[X, Y] * self.lifted_params(Y)
        return vec(np.kron(p[None, :], self.rotations[Y]))


def stack_state(state: State, n: int | None = None) -> np.ndarray:
    N = state.N
    D = state.distances
    if n is None:
        n = 0 if D is None else D.shape[1]
    layout = FullVariableLayout(N, n)
    x = np.zeros(layout.dim)
    for X in range(N):
        for Y in range(N):
            x[layout.r(X, Y)] = state.r_block(X, Y)
    x[layout.y] = 1.0
    if n:
        x[layout.d_slice] = np.asarray(D, dtype=float).reshape(-1)
    return x


def _edge_terms(instance: ProblemInstance, X: int, edge):
    i1, i2 = instance.edge_indices(edge)
    A = instance.observer
    t_hat_a = A.translations[i2] - A.translations[i1]
    b = instance.bearings[X].bearings
    u1 = A.rotations[i1] @ b[i1]
    u2 = A.rotations[i2] @ b[i2]
    return i1, i2, t_hat_a, u1, u2


def loop_error(instance: ProblemInstance, X: int, state: State, edge) -> np.ndarray:
    """Residual of sequence ``X`` on ``edge`` written out term by term."""
    i1, i2, t_hat_a, u1, u2 = _edge_terms(instance, X, edge)
    D = state.distances
    e = u2 * D[X, i2] - u1 * D[X, i1] + t_hat_a
    for Y, traj in enumerate(instance.observed):
        th = state.theta[X, Y]
        if th == 0:
            continue
        R = state.rotations[Y]
        R_hat = traj.rotations[i2] - traj.rotations[i1]
        t_hat = traj.translations[i2] - traj.translations[i1]
        e = e - th * (R @ R_hat @ state.pbars[Y] + state.scales[Y] * R @ t_hat)
    return e


def _r_coefficient(traj: Trajectory, i1: int, i2: int) -> np.ndarray:
    t_hat = traj.translations[i2] - traj.translations[i1]
    R_hat = traj.rotations[i2] - traj.rotations[i1]
    a = np.concatenate([t_hat, vec(R_hat)])
    return np.kron(a[None, :], np.eye(3))


def _edge_columns(instance: ProblemInstance, layout: FullVariableLayout, X: int, edge):
    """Nonzero columns and values of the coefficient of one edge."""
    i1, i2, t_hat_a, u1, u2 = _edge_terms(instance, X, edge)
    N = instance.N
    cols = np.empty(36 * N + 3, dtype=np.int64)
    vals = np.empty((3, 36 * N + 3))
    for Y, traj in enumerate(instance.observed):
        s = layout.r(X, Y)
        cols[36 * Y:36 * Y + 36] = np.arange(s.start, s.stop)
        vals[:, 36 * Y:36 * Y + 36] = -_r_coefficient(traj, i1, i2)
    cols[-3:] = (layout.y, layout.d(X, i1), layout.d(X, i2))
    vals[:, -3] = t_hat_a
    vals[:, -2] = -u1
    vals[:, -1] = u2
    return cols, vals


def edge_coefficient(instance: ProblemInstance, X: int, edge) -> np.ndarray:
    """Dense 3 x dim matrix ``c`` with ``c @ x == loop_error`` for stacked ``x``."""
    layout = FullVariableLayout(instance.N, instance.n)
    cols, vals = _edge_columns(instance, layout, X, edge)
    c = np.zeros((3, layout.dim))
    np.add.at(c, (slice(None), cols), vals)
    return c


def residual_operator(instance: ProblemInstance) -> sp.csr_matrix:
    """Sparse stack of ``sqrt(w) c`` over all sequences and edges (X-major)."""
    layout = FullVariableLayout(instance.N, instance.n)
    rows, cols, vals = [], [], []
    row = 0
    for X in range(instance.N):
        for e, edge in enumerate(instance.edges):
            c_cols, c_vals = _edge_columns(instance, layout, X, edge)
            sw = np.sqrt(instance.weights[X, e])
            rows.append(np.repeat(np.arange(row, row + 3), len(c_cols)))
            cols.append(np.tile(c_cols, 3))
            vals.append(sw * c_vals.reshape(-1))
            row += 3
    if row == 0:
        return sp.csr_matrix((0, layout.dim))
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(row, layout.dim),
    )


def build_cost(instance: ProblemInstance) -> np.ndarray:
    """Dense symmetric PSD ``C`` with ``x^T C x = sum w |e|^2``."""
    A = residual_operator(instance)
    C = (A.T @ A).toarray()
    return 0.5 * (C + C.T)


def problem_cost(instance: ProblemInstance, state: State) -> float:
    A = residual_operator(instance)
    r = A @ stack_state(state, instance.n)
    return float(r @ r)


@dataclass
class CostMatrices:
    """Full cost, its Schur complement onto ``z = [r, y]`` and the distance map."""

    C: np.ndarray
    C_bar: np.ndarray
    layout: FullVariableLayout
    condition_number_CDD: float
    _dd_factors: list = field(repr=False, default_factory=list)
    _d_dbar: np.ndarray = field(repr=False, default=None)

    def recover_distances(self, z: np.ndarray) -> np.ndarray:
        """Minimizing distances for fixed ``z = [r, y]``, shape (N, n)."""
        z = np.asarray(z, dtype=float)
        rhs = self._d_dbar @ z
        n = self.layout.n
        out = np.empty((self.layout.N, n))
        for X, fac in enumerate(self._dd_factors):
            out[X] = -scipy.linalg.cho_solve(fac, rhs[X * n:(X + 1) * n])
        return out

    D_recovery = recover_distances


def marginalize(C: np.ndarray, layout: FullVariableLayout) -> CostMatrices:
    """Eliminate the distances through the Schur complement of ``C_DD``."""
    C = np.asarray(C, dtype=float)
    zs, ds = layout.z_slice, layout.d_slice
    C_zz = C[zs, zs]
    C_zd = C[zs, ds]
    C_dd = C[ds, ds]
    n, N = layout.n, layout.N
    if n == 0:
        return CostMatrices(C, C_zz.copy(), layout, 1.0, [], C_zd.T)
    # distances of different sequences never share an edge, so C_DD is block diagonal
    scale = max(float(np.abs(np.diag(C_dd)).max(initial=0.0)), 1e-300)
    factors, eig_min, eig_max = [], np.inf, 0.0
    bad = []
    for X in range(N):
        blk = C_dd[X * n:(X + 1) * n, X * n:(X + 1) * n]
        w, V = np.linalg.eigh(blk)
        eig_min = min(eig_min, w[0])
        eig_max = max(eig_max, w[-1])
        small = w <= DDSINGULAR_REL_TOL * max(w[-1], scale)
        if small.any():
            support = np.abs(V[:, small]).max(axis=1) > 1e-6
            bad.extend((X, layout_ts) for layout_ts in np.flatnonzero(support))
            continue
        factors.append(scipy.linalg.cho_factor(blk, lower=True))
    if bad:
        raise DegenerateGeometryError(
            f"distance block is singular; offending (sequence, sample) slots: {bad[:10]}"
            + (" ..." if len(bad) > 10 else ""),
            bad,
        )
    sol = np.vstack([
        scipy.linalg.cho_solve(f, C_zd[:, X * n:(X + 1) * n].T) for X, f in enumerate(factors)
    ])
    C_bar = C_zz - C_zd @ sol
    C_bar = 0.5 * (C_bar + C_bar.T)
    return CostMatrices(C, C_bar, layout, float(eig_max / eig_min), factors, C_zd.T.copy())


def sequence_constants(instance: ProblemInstance, cm: CostMatrices) -> np.ndarray:
    """Constant term of each bearing sequence's share of ``C_bar``.

    ``C_bar`` is a sum over sequences that only overlap in the ``y``-``y``
    entry; this splits that entry back into its per-sequence parts.
    """
    layout = cm.layout
    n, y = layout.n, layout.n_r
    A = residual_operator(instance).tocsc()
    col = A[:, layout.y].toarray().ravel()
    rows_per = 3 * len(instance.edges)
    out = np.empty(layout.N)
    for X in range(layout.N):
        a = col[X * rows_per:(X + 1) * rows_per]
        out[X] = a @ a
        if n:
            v = cm._d_dbar[X * n:(X + 1) * n, y]
            out[X] -= v @ scipy.linalg.cho_solve(cm._dd_factors[X], v)
    return out


def corank(M: np.ndarray, rel_tol: float = CORANK_REL_TOL):
    """Numerical (rank, corank, eigenvalues) of a symmetric matrix."""
    w = np.linalg.eigvalsh(0.5 * (M + M.T))
    top = np.abs(w).max(initial=0.0)
    k = int(np.sum(w > rel_tol * top)) if top > 0 else 0
    return k, len(w) - k, w


def check_corank_condition(N: int, independent_edge_count: int) -> bool:
    if N < 1:
        raise ValueError("N must be at least 1")
    return independent_edge_count >= 18 * N + 2


def count_independent_edges(instance: ProblemInstance, X: int = 0, tol: float = 1e-9) -> int:
    """Number of linearly independent edge coefficients (3-row blocks) of sequence X."""
    rows = [edge_coefficient(instance, X, e).reshape(-1) for e in instance.edges]
    if not rows:
        return 0
    s = np.linalg.svd(np.array(rows), compute_uv=False)
    return int(np.sum(s > tol * s[0]))
