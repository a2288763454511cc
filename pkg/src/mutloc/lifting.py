"""Lifted decision vector and the quadratic constraints of the QCQP.

``zbar = [r, y, ell, phi_theta, phi_h, phi_mu]`` with

* ``r_XY = vec(mu_XY (x) R_Y)`` where ``mu_XY = theta_XY [s_Y, Pbar_Y]``,
* ``ell_Y = vec([s_Y, Pbar_Y] (x) R_Y)``,
* ``phi_theta[X, Y] = theta_XY``, ``phi_h[Y] = [s_Y, Pbar_Y]``,
* ``phi_mu[X, Y] = theta_XY [s_Y, Pbar_Y]``.

Every affine relation is homogenized with ``y`` (valid since ``y^2 = 1``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .geometry import vec

TAGS = (
    "orth_col", "orth_row", "cross", "binary", "sum_row", "sum_col",
    "link_mu", "link_r", "homogenization", "ell_orth", "ell_cross",
    "coupling", "selection",
)
CYCLIC = ((0, 1, 2), (1, 2, 0), (2, 0, 1))


@dataclass(frozen=True)
class LiftedLayout:
    N: int

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be at least 1")

    @property
    def n_r(self) -> int:
        return 36 * self.N ** 2

    @property
    def y(self) -> int:
        return self.n_r

    @property
    def ell_offset(self) -> int:
        return self.n_r + 1

    @property
    def theta_offset(self) -> int:
        return self.ell_offset + 36 * self.N

    @property
    def h_offset(self) -> int:
        return self.theta_offset + self.N ** 2

    @property
    def mu_offset(self) -> int:
        return self.h_offset + 4 * self.N

    @property
    def d(self) -> int:
        return self.mu_offset + 4 * self.N ** 2

    @property
    def dz(self) -> int:
        return self.n_r + 1

    def segments(self) -> dict[str, slice]:
        return {
            "r": slice(0, self.n_r),
            "y": slice(self.y, self.y + 1),
            "ell": slice(self.ell_offset, self.theta_offset),
            "phi_theta": slice(self.theta_offset, self.h_offset),
            "phi_h": slice(self.h_offset, self.mu_offset),
            "phi_mu": slice(self.mu_offset, self.d),
        }

    def r(self, X: int, Y: int, k: int = 0) -> int:
        return 36 * (self.N * X + Y) + k

    def r_slice(self, X: int, Y: int) -> slice:
        o = self.r(X, Y)
        return slice(o, o + 36)

    def ell(self, Y: int, k: int = 0) -> int:
        return self.ell_offset + 36 * Y + k

    def theta(self, X: int, Y: int) -> int:
        return self.theta_offset + self.N * X + Y

    def h(self, Y: int, j: int) -> int:
        return self.h_offset + 4 * Y + j

    def mu(self, X: int, Y: int, j: int) -> int:
        return self.mu_offset + 4 * (self.N * X + Y) + j


def layout(N: int) -> LiftedLayout:
    return LiftedLayout(N)


@dataclass
class QuadraticConstraint:
    """``zbar^T Q zbar = g`` with ``Q`` held as its upper triangle.

    ``entries`` maps ``(i, j)`` with ``i <= j`` to the symmetric entry
    ``Q[i, j] = Q[j, i]``.
    """

    entries: dict
    g: float
    tag: str
    label: tuple = ()

    @property
    def nnz(self) -> int:
        return sum(1 if i == j else 2 for i, j in self.entries)

    def triplets(self):
        ij = np.array(list(self.entries.keys()), dtype=np.int64).reshape(-1, 2)
        v = np.array(list(self.entries.values()), dtype=float)
        return ij[:, 0], ij[:, 1], v

    def matrix(self, d: int) -> sp.csr_matrix:
        i, j, v = self.triplets()
        off = i != j
        rows = np.concatenate([i, j[off]])
        cols = np.concatenate([j, i[off]])
        vals = np.concatenate([v, v[off]])
        return sp.csr_matrix((vals, (rows, cols)), shape=(d, d))

    def evaluate(self, z: np.ndarray) -> float:
        """``zbar^T Q zbar``."""
        i, j, v = self.triplets()
        w = np.where(i == j, 1.0, 2.0)
        return float(np.sum(w * v * z[i] * z[j]))

    def trace(self, Z: np.ndarray) -> float:
        """``tr(Q Z)`` for a symmetric matrix ``Z``."""
        i, j, v = self.triplets()
        w = np.where(i == j, 1.0, 2.0)
        return float(np.sum(w * v * Z[i, j]))

    def residual(self, z: np.ndarray) -> float:
        return self.evaluate(z) - self.g


class _Poly:
    """Accumulates a quadratic form from products of lifted coordinates."""

    def __init__(self):
        self.q: dict = {}

    def add(self, a: int, b: int, coeff: float):
        if a == b:
            key, val = (a, a), coeff
        else:
            key, val = (min(a, b), max(a, b)), 0.5 * coeff
        self.q[key] = self.q.get(key, 0.0) + val
        return self

    def finish(self, g: float, tag: str, label=()) -> QuadraticConstraint:
        entries = {k: v for k, v in sorted(self.q.items()) if v != 0.0}
        return QuadraticConstraint(entries, float(g), tag, tuple(label))


def _block_index(col_of, row: int, col: int) -> int:
    """Index of entry (row, col) of a 3x3 block stored column-major from ``col_of``."""
    return col_of + 3 * col + row


def _so3_family(block_start: int, mu: int, tags, label, row_redundant: bool,
                cross_redundant: bool, out: list):
    """Orthogonality/handedness equations for ``M = mu R`` stored at ``block_start``."""
    col_tag, cross_tag = tags
    idx = lambda r, c: _block_index(block_start, r, c)  # noqa: E731
    for c1 in range(3):
        for c2 in range(c1, 3):
            p = _Poly()
            for r in range(3):
                p.add(idx(r, c1), idx(r, c2), 1.0)
            if c1 == c2:
                p.add(mu, mu, -1.0)
            out.append(p.finish(0.0, col_tag, label + ("col", c1, c2)))
    if row_redundant:
        for r1 in range(3):
            for r2 in range(r1, 3):
                p = _Poly()
                for c in range(3):
                    p.add(idx(r1, c), idx(r2, c), 1.0)
                if r1 == r2:
                    p.add(mu, mu, -1.0)
                out.append(p.finish(0.0, "orth_row", label + ("row", r1, r2)))
    if cross_redundant:
        for i, j, k in CYCLIC:
            for comp in range(3):
                # (a x b)_comp = a_{comp+1} b_{comp+2} - a_{comp+2} b_{comp+1}
                c1, c2 = (comp + 1) % 3, (comp + 2) % 3
                p = _Poly()
                p.add(idx(c1, i), idx(c2, j), 1.0)
                p.add(idx(c2, i), idx(c1, j), -1.0)
                p.add(mu, idx(comp, k), -1.0)
                out.append(p.finish(0.0, cross_tag, label + ("cross", i, j, comp)))


def _coupling_family(lay: LiftedLayout, X: int, Y: int, out: list):
    """Blocks ``mu_j R`` and ``mu_k R`` of one ``r_XY`` share the rotation.

    ``(mu_j R)^T (mu_k R) = mu_j mu_k I`` and ``(mu_j R)(mu_k R)^T = mu_j mu_k I``
    for every pair ``j < k``; one equation per matrix entry.
    """
    for j in range(4):
        for k in range(j + 1, 4):
            a = lambda r, c: _block_index(lay.r(X, Y, 9 * j), r, c)  # noqa: E731
            b = lambda r, c: _block_index(lay.r(X, Y, 9 * k), r, c)  # noqa: E731
            mj, mk = lay.mu(X, Y, j), lay.mu(X, Y, k)
            for side in ("col", "row"):
                for u in range(3):
                    for v in range(3):
                        p = _Poly()
                        for w in range(3):
                            if side == "col":
                                p.add(a(w, u), b(w, v), 1.0)
                            else:
                                p.add(a(u, w), b(v, w), 1.0)
                        if u == v:
                            p.add(mj, mk, -1.0)
                        out.append(p.finish(0.0, "coupling", ("XY", X, Y, side, j, k, u, v)))


def build_constraints(lay: LiftedLayout, row_redundant: bool = False,
                      cross_redundant: bool = False, ell_constraints: bool = False,
                      block_coupling: bool = False, selection: bool = False
                      ) -> list[QuadraticConstraint]:
    N = lay.N
    y = lay.y
    out: list[QuadraticConstraint] = []
    for X in range(N):
        for Y in range(N):
            for j in range(4):
                _so3_family(lay.r(X, Y, 9 * j), lay.mu(X, Y, j), ("orth_col", "cross"),
                            ("XY", X, Y, j), row_redundant, cross_redundant, out)
    for X in range(N):
        for Y in range(N):
            t = lay.theta(X, Y)
            out.append(_Poly().add(t, t, 1.0).add(y, t, -1.0).finish(0.0, "binary", (X, Y)))
    for X in range(N):
        p = _Poly()
        for Y in range(N):
            p.add(y, lay.theta(X, Y), 1.0)
        out.append(p.finish(1.0, "sum_row", (X,)))
    for Y in range(N):
        p = _Poly()
        for X in range(N):
            p.add(y, lay.theta(X, Y), 1.0)
        out.append(p.finish(1.0, "sum_col", (Y,)))
    for X in range(N):
        for Y in range(N):
            for j in range(4):
                p = _Poly().add(y, lay.mu(X, Y, j), 1.0).add(lay.theta(X, Y), lay.h(Y, j), -1.0)
                out.append(p.finish(0.0, "link_mu", (X, Y, j)))
    for X in range(N):
        for Y in range(N):
            for k in range(36):
                p = _Poly().add(y, lay.r(X, Y, k), 1.0).add(lay.theta(X, Y), lay.ell(Y, k), -1.0)
                out.append(p.finish(0.0, "link_r", (X, Y, k)))
    out.append(_Poly().add(y, y, 1.0).finish(1.0, "homogenization"))
    if ell_constraints:
        for Y in range(N):
            for j in range(4):
                _so3_family(lay.ell(Y, 9 * j), lay.h(Y, j), ("ell_orth", "ell_cross"),
                            ("ell", Y, j), False, True, out)
    if block_coupling:
        for X in range(N):
            for Y in range(N):
                _coupling_family(lay, X, Y, out)
    if selection:
        # theta_XY r_XY = r_XY: an unselected block is zero, a selected one is untouched
        for X in range(N):
            for Y in range(N):
                t = lay.theta(X, Y)
                for k in range(36):
                    p = _Poly().add(t, lay.r(X, Y, k), 1.0).add(y, lay.r(X, Y, k), -1.0)
                    out.append(p.finish(0.0, "selection", (X, Y, k)))
    return out


def is_permutation(theta: np.ndarray) -> bool:
    theta = np.asarray(theta)
    if theta.ndim != 2 or theta.shape[0] != theta.shape[1]:
        return False
    return bool(
        np.all((theta == 0) | (theta == 1))
        and np.all(theta.sum(axis=0) == 1)
        and np.all(theta.sum(axis=1) == 1)
    )


def lift_ground_truth(theta, scales, rotations, pbars) -> np.ndarray:
    """Feasible lifted point for a permutation and per-trajectory parameters."""
    theta = np.asarray(theta, dtype=float)
    if not is_permutation(theta):
        raise ValueError("theta must be a permutation matrix")
    N = theta.shape[0]
    lay = LiftedLayout(N)
    scales = np.asarray(scales, dtype=float).reshape(N)
    rotations = np.asarray(rotations, dtype=float).reshape(N, 3, 3)
    pbars = np.asarray(pbars, dtype=float).reshape(N, 3)
    z = np.zeros(lay.d)
    z[lay.y] = 1.0
    for Y in range(N):
        p = np.concatenate([[scales[Y]], pbars[Y]])
        ell = vec(np.kron(p[None, :], rotations[Y]))
        z[lay.ell(Y):lay.ell(Y) + 36] = ell
        z[lay.h(Y, 0):lay.h(Y, 0) + 4] = p
        for X in range(N):
            th = theta[X, Y]
            z[lay.r_slice(X, Y)] = th * ell
            z[lay.theta(X, Y)] = th
            z[lay.mu(X, Y, 0):lay.mu(X, Y, 0) + 4] = th * p
    return z


@dataclass
class QCQP:
    """``min zbar^T Q0 zbar`` subject to the quadratic equalities."""

    Q0: np.ndarray
    constraints: list
    layout: LiftedLayout
    variant: str = "D"

    @property
    def d(self) -> int:
        return self.layout.d

    def objective(self, z: np.ndarray) -> float:
        return float(z @ self.Q0 @ z)


def assemble_qcqp(C_bar: np.ndarray, constraints, lay: LiftedLayout, variant: str = "D",
                  sequence_constants=None) -> QCQP:
    """Embed the marginalized cost as the QCQP objective.

    By default ``Q0 = [[C_bar, 0], [0, 0]]``. With ``sequence_constants`` (the
    constant term of each bearing sequence's cost) the objective is rewritten
    per correspondence: for every ``(X, Y)`` the quadratic form over
    ``[r_XY, theta_XY]`` with ``C_bar``'s ``r_XY`` blocks and constant ``c_X``.
    Both forms agree on every point with a permutation ``theta`` (an unselected
    ``r_XY`` is zero and ``theta^2 = theta``), but the per-correspondence form
    carries no products between competing blocks and is PSD block by block.
    """
    C_bar = np.asarray(C_bar, dtype=float)
    if C_bar.shape != (lay.dz, lay.dz):
        raise ValueError(f"C_bar has shape {C_bar.shape}, expected {(lay.dz, lay.dz)}")
    C_bar = 0.5 * (C_bar + C_bar.T)
    Q0 = np.zeros((lay.d, lay.d))
    if sequence_constants is None:
        Q0[:lay.dz, :lay.dz] = C_bar
        return QCQP(Q0, list(constraints), lay, variant)
    c = np.asarray(sequence_constants, dtype=float).reshape(-1)
    if c.shape != (lay.N,):
        raise ValueError(f"need {lay.N} sequence constants, got {c.size}")
    for X in range(lay.N):
        for Y in range(lay.N):
            idx = np.r_[np.arange(lay.r(X, Y), lay.r(X, Y) + 36), lay.theta(X, Y)]
            src = np.r_[np.arange(lay.r(X, Y), lay.r(X, Y) + 36), lay.y]
            block = C_bar[np.ix_(src, src)].copy()
            block[-1, -1] = c[X]
            Q0[np.ix_(idx, idx)] += block
    return QCQP(Q0, list(constraints), lay, variant)


VARIANTS = {
    "d": dict(row_redundant=False, cross_redundant=False, ell_constraints=False,
              block_coupling=False, selection=False),
    "d+r": dict(row_redundant=True, cross_redundant=True, ell_constraints=False,
                block_coupling=True, selection=True),
    "extended": dict(row_redundant=True, cross_redundant=True, ell_constraints=True,
                     block_coupling=True, selection=True),
}


def variant_options(name: str) -> dict:
    try:
        return dict(VARIANTS[name.lower()])
    except KeyError:
        raise ValueError(f"unknown variant {name!r}; choose from {sorted(VARIANTS)}") from None


def uses_separable_objective(name: str) -> bool:
    """Variants with selection constraints take the per-correspondence objective."""
    return variant_options(name)["selection"]
