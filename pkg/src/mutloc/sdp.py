"""Shor relaxation of the lifted QCQP and its interior-point solve.

Primal::

    min tr(Q0 Z)   s.t.  tr(Q_i Z) = g_i,  Z >= 0

Dual::

    max g^T lam    s.t.  Q0 - sum_i lam_i Q_i >= 0

Two backends: SDPA (optional, fast) and cvxopt's ``conelp`` run on the dual
with a custom KKT solver.  For the latter each Newton system reduces to the
m x m matrix ``H_ij = tr(Q_i T Q_j T)``, assembled from the few nonzeros of
every ``Q_i`` instead of the d^2 x m constraint matrix.
"""

from __future__ import annotations

import contextlib
import io
import os
import sys
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .lifting import QCQP, QuadraticConstraint

MAX_DIMENSION = 600
# Residual tolerance below which double-precision Schur directions stall.
FEAS_FLOOR = 1e-8
STATUSES = ("optimal", "near_optimal", "infeasible", "numerical_failure")


@dataclass(frozen=True)
class PrimalSdp:
    """Data of the Shor relaxation; ``constraints`` are shared with the QCQP."""

    d: int
    Q0: sp.csr_matrix
    constraints: list
    N: int = 0
    variant: str = "D"

    @property
    def m(self) -> int:
        return len(self.constraints)

    @property
    def g(self) -> np.ndarray:
        return np.array([c.g for c in self.constraints], dtype=float)

    def objective(self, Z: np.ndarray) -> float:
        return float(self.Q0.multiply(Z).sum())

    def residuals(self, Z: np.ndarray) -> np.ndarray:
        return np.array([c.trace(Z) - c.g for c in self.constraints])

    def dual_matrix(self, lam) -> np.ndarray:
        """``Q0 - sum_i lam_i Q_i`` as a dense array."""
        S = self.Q0.toarray()
        a, b, q, ci = _entry_lists(self.constraints, full=False)
        np.add.at(S, (a, b), -q * np.asarray(lam)[ci])
        off = a != b
        np.add.at(S, (b[off], a[off]), -q[off] * np.asarray(lam)[ci[off]])
        return S


def relax(qcqp: QCQP) -> PrimalSdp:
    Q0 = sp.csr_matrix(np.asarray(qcqp.Q0, dtype=float))
    N = getattr(qcqp.layout, "N", 0)
    return PrimalSdp(qcqp.d, Q0, list(qcqp.constraints), N, qcqp.variant)


@dataclass(frozen=True)
class SolverSettings:
    eps_abs: float = 1e-9
    eps_rel: float = 1e-9
    max_iter: int = 200
    backend: str = "auto"
    presolve: bool = True
    regularized_steps: int = 10
    trace_weight: float = 1e-12
    normalize: bool = False
    refinement: int = 3
    verbose: bool = False


@dataclass
class SdpSolution:
    Z: np.ndarray
    f_primal: float
    f_dual: float
    multipliers: np.ndarray
    status: str
    solve_time: float
    iterations: int
    info: dict = field(default_factory=dict)

    @property
    def relative_gap(self) -> float:
        return abs(self.f_primal - self.f_dual) / (1.0 + abs(self.f_primal))


def _entry_lists(constraints, full: bool = True):
    """Flattened ``(row, col, value, constraint index)`` arrays.

    With ``full`` every off-diagonal entry appears twice so that
    ``Q_i = sum_e q_e e_a e_b^T`` holds literally.
    """
    rows, cols, vals, owner = [], [], [], []
    for k, c in enumerate(constraints):
        i, j, v = c.triplets()
        if full:
            off = i != j
            i, j, v = np.concatenate([i, j[off]]), np.concatenate([j, i[off]]), np.concatenate([v, v[off]])
        rows.append(i)
        cols.append(j)
        vals.append(v)
        owner.append(np.full(len(v), k, dtype=np.int64))
    if not rows:
        z = np.zeros(0, dtype=np.int64)
        return z, z, np.zeros(0), z
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), np.concatenate(owner)


def independent_constraints(sdp: PrimalSdp, rel_tol: float = 1e-10) -> np.ndarray:
    """Indices of a maximal linearly independent subset of the ``Q_i``.

    Pivoted QR on the Gram matrix ``tr(Q_i Q_j)``; symmetric products repeat
    scalar equations (e.g. row and column sums of a permutation), and
    interior-point Newton systems need full row rank.
    """
    m, d = sdp.m, sdp.d
    if m == 0:
        return np.zeros(0, dtype=np.int64)
    a, b, q, ci = _entry_lists(sdp.constraints)
    A = sp.csr_matrix((q, (ci, a * d + b)), shape=(m, d * d))
    norms = np.sqrt(np.asarray(A.multiply(A).sum(axis=1)).ravel())
    A = sp.diags(1.0 / norms) @ A
    gram = (A @ A.T).toarray()
    _, R, piv = sla.qr(gram, pivoting=True, mode="economic")
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > rel_tol * diag[0]))
    return np.sort(piv[:rank])


@numba.njit(cache=True)
def _schur_kernel(T, a, b, q, owner, start):
    """Upper triangle of ``H_ij = sum_{e in i, f in j} q_e q_f T[b_e, a_f] T[a_e, b_f]``."""
    m = start.shape[0] - 1
    E = q.shape[0]
    H = np.zeros((m, m))
    for i in range(m):
        for e in range(start[i], start[i + 1]):
            ae, be, qe = a[e], b[e], q[e]
            Tb = T[be]
            Ta = T[ae]
            for f in range(start[i], E):
                H[i, owner[f]] += qe * q[f] * Tb[a[f]] * Ta[b[f]]
    return H


class _StructuredKkt:
    """Operators of the dual SDP in cvxopt's conventions.

    Variables are the (rescaled) multipliers; the 's' block is stored as a full
    column-major d x d matrix of which cvxopt only reads the lower triangle.
    """

    def __init__(self, constraints, d: int):
        self.d = d
        self.m = len(constraints)
        self.a, self.b, self.q, self.ci = _entry_lists(constraints)
        self.start = np.searchsorted(self.ci, np.arange(self.m + 1)).astype(np.int64)

    def apply(self, x: np.ndarray) -> np.ndarray:
        M = np.zeros((self.d, self.d))
        np.add.at(M, (self.a, self.b), self.q * x[self.ci])
        return M

    def adjoint(self, M: np.ndarray) -> np.ndarray:
        return np.bincount(self.ci, weights=self.q * M[self.a, self.b], minlength=self.m)

    def schur(self, T: np.ndarray) -> np.ndarray:
        H = _schur_kernel(np.ascontiguousarray(T), self.a, self.b, self.q, self.ci, self.start)
        return np.triu(H) + np.triu(H, 1).T


class _SchurFactor:
    """Cholesky of the Schur matrix with a spectral fallback.

    Close to the optimum the Schur matrix loses definiteness numerically; its
    near-null directions are then dropped (pseudo-inverse), up to ``budget``
    times, after which the solve stops at the current iterate.
    """

    def __init__(self, H: np.ndarray, budget: list):
        self.chol = None
        try:
            self.chol = sla.cho_factor(H)
            return
        except np.linalg.LinAlgError:
            pass
        if budget[0] <= 0:
            # cvxopt stops on ArithmeticError and hands back the last iterate
            raise ArithmeticError("Schur complement is not positive definite")
        budget[0] -= 1
        w, V = np.linalg.eigh(H)
        cut = 1e-14 * max(float(w[-1]), 1e-300)
        inv = np.where(w > cut, 1.0 / np.where(w > cut, w, 1.0), 0.0)
        self.V, self.inv = V, inv

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self.chol is not None:
            return sla.cho_solve(self.chol, rhs)
        return self.V @ (self.inv * (self.V.T @ rhs))


class _Stagnation(Exception):
    pass


class _ProgressMonitor(io.StringIO):
    """Parses cvxopt's iteration log and tracks the most accurate iterate."""

    patience = 6

    def __init__(self, echo: bool):
        super().__init__()
        self.echo = echo
        self.best = np.inf
        self.best_iter = 0
        self.last_iter = 0
        self._buf = ""

    def write(self, text):
        if self.echo:
            sys.__stdout__.write(text)
        self._buf += text
        while "\n" in self._buf:
            line, self._buf = self._buf.split("\n", 1)
            self._line(line)
        return len(text)

    def _line(self, line: str):
        head, sep, rest = line.partition(":")
        if not sep or not head.strip().isdigit():
            return
        try:
            pcost, dcost, gap, pres, dres = (float(t) for t in rest.split()[:5])
        except ValueError:
            return
        k = int(head)
        self.last_iter = k
        merit = max(pres, dres, abs(gap) / (1.0 + abs(pcost)))
        if merit < self.best:
            self.best, self.best_iter = merit, k
        elif k - self.best_iter >= self.patience and merit > 10.0 * self.best:
            raise _Stagnation()


def _sym_from_lower(v, d: int) -> np.ndarray:
    M = np.array(v).reshape((d, d), order="F")
    L = np.tril(M)
    return L + np.tril(M, -1).T


def _solve_cvxopt(sdp: PrimalSdp, keep: np.ndarray, settings: SolverSettings):
    """Dual solve on cvxopt with the structured KKT system.

    Several auxiliary diagonal entries of ``Z`` appear in no constraint, so the
    optimal face is unbounded and the dual has no interior.  A tiny trace term
    ``trace_weight * tr(Z)`` (relative to ``||Q0||``) restores a strictly
    feasible dual; the reported objectives are computed without it.
    """
    from cvxopt import matrix, solvers

    d = sdp.d
    cons = [sdp.constraints[k] for k in keep]
    # Unit-norm rows and objective keep the stopping tolerances meaningful.
    cnorm = np.array([np.sqrt(np.sum(c.matrix(d).data ** 2)) for c in cons])
    scaled = [QuadraticConstraint({key: v / s for key, v in c.entries.items()}, c.g / s, c.tag, c.label)
              for c, s in zip(cons, cnorm)]
    Q0 = sdp.Q0.toarray()
    qscale = 1.0 if not settings.normalize else (float(np.linalg.norm(Q0)) or 1.0)
    kkt = _StructuredKkt(scaled, d)
    g = np.array([c.g for c in scaled])

    def G(x, y, alpha=1.0, beta=0.0, trans="N"):
        if trans == "N":
            M = kkt.apply(np.array(x).ravel())
            y[:] = matrix(alpha * M.reshape(-1, order="F") + beta * np.array(y).ravel())
        else:
            v = kkt.adjoint(_sym_from_lower(x, d))
            y[:] = matrix(alpha * v + beta * np.array(y).ravel())

    def A(x, y, alpha=1.0, beta=0.0, trans="N"):
        if trans == "T":
            y[:] = matrix(beta * np.array(y).ravel())

    budget = [settings.regularized_steps]

    def factor(W):
        rti = np.array(W["rti"][0])
        T = rti @ rti.T
        chol = _SchurFactor(kkt.schur(T), budget)

        def f(x, y, z):
            bz = _sym_from_lower(z, d)
            rhs = np.array(x).ravel() + kkt.adjoint(T @ bz @ T)
            ux = chol.solve(rhs)
            wz = rti.T @ (kkt.apply(ux) - bz) @ rti
            x[:] = matrix(ux)
            z[:] = matrix(wz.reshape(-1, order="F"))

        return f

    h = matrix((Q0 / qscale + settings.trace_weight * np.eye(d)).reshape(-1, order="F"))

    def run(maxiters, monitor):
        budget[0] = settings.regularized_steps
        opts = dict(abstol=settings.eps_abs, reltol=settings.eps_rel,
                    feastol=max(settings.eps_abs, FEAS_FLOOR), maxiters=maxiters,
                    show_progress=True, refinement=settings.refinement)
        with contextlib.redirect_stdout(monitor):
            return solvers.conelp(matrix(-g), G, h, {"l": 0, "q": [], "s": [d]}, A=A,
                                  b=matrix(0.0, (0, 1)), kktsolver=factor, options=opts)

    # Near the optimum the Newton directions lose accuracy and the iterates can
    # drift away again; the monitor spots this and the solve is replayed up to
    # the best iteration (the method is deterministic).
    monitor = _ProgressMonitor(settings.verbose)
    try:
        sol = run(settings.max_iter, monitor)
        replay = sol["status"] != "optimal" and monitor.best_iter < monitor.last_iter
    except _Stagnation:
        replay = True
    if replay:
        sol = run(max(monitor.best_iter, 1), _ProgressMonitor(False))
    if sol["z"] is None or sol["x"] is None:
        raise FloatingPointError(f"cvxopt returned no iterate ({sol['status']})")
    Z = _sym_from_lower(sol["z"], d)
    lam = np.zeros(sdp.m)
    lam[keep] = qscale * np.array(sol["x"]).ravel() / cnorm
    info = {k: sol.get(k) for k in ("gap", "relative gap", "primal infeasibility", "dual infeasibility")}
    info["trace_term"] = qscale * settings.trace_weight * float(np.trace(Z))
    info["replayed"] = bool(replay)
    return Z, lam, sol["status"], int(sol.get("iterations", 0) or 0), info


@contextlib.contextmanager
def _silenced_fds():
    """Mute C-level writes to stdout/stderr (SDPA prints diagnostics there)."""
    sys.stdout.flush()
    sys.stderr.flush()
    saved = [os.dup(1), os.dup(2)]
    null = os.open(os.devnull, os.O_WRONLY)
    try:
        os.dup2(null, 1)
        os.dup2(null, 2)
        with contextlib.redirect_stdout(io.StringIO()), contextlib.redirect_stderr(io.StringIO()):
            yield
    finally:
        sys.stdout.flush()
        sys.stderr.flush()
        os.dup2(saved[0], 1)
        os.dup2(saved[1], 2)
        for fd in saved + [null]:
            os.close(fd)


def sdpa_available() -> bool:
    try:
        import sdpap  # noqa: F401
    except ImportError:
        return False
    return True


def _solve_sdpap(sdp: PrimalSdp, keep: np.ndarray, settings: SolverSettings):
    """Primal solve with SDPA through its Python binding."""
    import sdpap

    d = sdp.d
    cons = [sdp.constraints[k] for k in keep]
    a, b, q, ci = _entry_lists(cons)
    A = sp.csc_matrix((q, (ci, a * d + b)), shape=(len(cons), d * d))
    c = sp.csc_matrix(sdp.Q0.toarray().reshape(1, -1))
    option = {"print": "no", "epsilonStar": settings.eps_rel, "epsilonDash": settings.eps_abs,
              "maxIteration": settings.max_iter}
    with warnings.catch_warnings(), _silenced_fds():
        warnings.simplefilter("ignore")
        x, y, sinfo, _, _ = sdpap.solve(A, np.array([cc.g for cc in cons]), c,
                                        sdpap.SymCone(s=(d,)), sdpap.SymCone(f=len(cons)), option)
    Z = np.asarray(x.todense() if sp.issparse(x) else x).reshape(d, d)
    Z = 0.5 * (Z + Z.T)
    lam = np.zeros(sdp.m)
    lam[keep] = np.asarray(y.todense() if sp.issparse(y) else y).ravel()
    phase = str(sinfo.get("phasevalue"))
    info = {"phase": phase}
    if "Infeas" in phase or phase in ("pINF_dFEAS", "pFEAS_dINF"):
        return Z, lam, "infeasible", 0, info
    return Z, lam, phase, int(sinfo.get("iteration", 0) or 0), info


_BACKENDS = {"cvxopt": _solve_cvxopt, "sdpa": _solve_sdpap}


def solution_checks(sdp: PrimalSdp, Z: np.ndarray, f_primal: float, f_dual: float) -> dict:
    """The acceptance invariants of an optimal solution."""
    w = np.linalg.eigvalsh(Z)
    scale = max(1.0, float(np.abs(w).max()))
    res = sdp.residuals(Z)
    g = sdp.g
    return {
        "psd": bool(w[0] >= -1e-7 * scale),
        "feasible": bool(np.all(np.abs(res) <= 1e-6 * np.maximum(1.0, np.abs(g)))),
        "weak_duality": bool(f_primal >= f_dual - 1e-6 * (1.0 + abs(f_primal))),
        "max_residual": float(np.abs(res).max()) if len(res) else 0.0,
        "min_eigenvalue": float(w[0]),
    }


def _run_backend(sdp: PrimalSdp, keep: np.ndarray, settings: SolverSettings,
                 name: str) -> SdpSolution:
    t0 = time.perf_counter()
    nan = np.full((sdp.d, sdp.d), np.nan)
    try:
        Z, lam, raw, iters, info = _BACKENDS[name](sdp, keep, settings)
    except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        return SdpSolution(nan, np.nan, np.nan, np.full(sdp.m, np.nan), "numerical_failure",
                           time.perf_counter() - t0, 0, {"error": repr(exc), "backend": name})
    elapsed = time.perf_counter() - t0
    f_primal = sdp.objective(Z)
    f_dual = float(sdp.g @ lam)
    info = dict(info, backend=name, backend_status=raw, dropped=int(sdp.m - len(keep)))
    if not np.all(np.isfinite(Z)) or not np.isfinite(f_dual):
        status = "numerical_failure"
    elif raw == "infeasible" or "infeasible" in str(raw):
        status = "infeasible"
    else:
        checks = solution_checks(sdp, Z, f_primal, f_dual)
        info.update(checks)
        gap = abs(f_primal - f_dual) / (1.0 + abs(f_primal))
        ok = checks["psd"] and checks["feasible"] and checks["weak_duality"]
        if ok and gap <= 1e-6:
            status = "optimal"
        elif ok or gap <= 1e-4:
            status = "near_optimal"
        else:
            status = "numerical_failure"
    return SdpSolution(Z, f_primal, f_dual, lam, status, elapsed, iters, info)


def _rank(sol: SdpSolution):
    order = {"optimal": 0, "near_optimal": 1, "infeasible": 2, "numerical_failure": 3}
    gap = sol.relative_gap if np.isfinite(sol.relative_gap) else np.inf
    return order[sol.status], gap


def solve(sdp: PrimalSdp, settings: SolverSettings | None = None) -> SdpSolution:
    """Solve the relaxation; failures come back as a status, never raise.

    ``backend="auto"`` runs SDPA first and keeps its answer only when SDPA
    itself reports primal-dual optimality; otherwise (and when SDPA is not
    installed) the cvxopt path decides.  SDPA is several times faster but
    stalls short of full accuracy when the primal has no interior point.
    """
    settings = settings or SolverSettings()
    if sdp.d > MAX_DIMENSION:
        raise ValueError(f"matrix side {sdp.d} exceeds the supported limit {MAX_DIMENSION}")
    if settings.backend not in _BACKENDS and settings.backend != "auto":
        raise ValueError(f"unknown backend {settings.backend!r}")
    t0 = time.perf_counter()
    keep = independent_constraints(sdp) if settings.presolve else np.arange(sdp.m)
    if settings.backend != "auto":
        return _run_backend(sdp, keep, settings, settings.backend)
    first = None
    if sdpa_available():
        first = _run_backend(sdp, keep, settings, "sdpa")
        if first.status == "optimal" and first.info.get("phase") == "pdOPT":
            return first
    second = _run_backend(sdp, keep, settings, "cvxopt")
    best = second if first is None or _rank(second) <= _rank(first) else first
    best.solve_time = time.perf_counter() - t0
    return best


@dataclass(frozen=True)
class DualCheck:
    psd: bool
    min_eigenvalue: float
    dual_objective: float


def dual_certificate_check(sdp: PrimalSdp, lam, tol: float = 1e-7) -> DualCheck:
    """Assemble ``Q(lam) = Q0 - sum lam_i Q_i`` and test it for PSD."""
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (sdp.m,):
        raise ValueError(f"expected {sdp.m} multipliers, got shape {lam.shape}")
    w = np.linalg.eigvalsh(sdp.dual_matrix(lam))
    scale = max(1.0, float(np.abs(w).max()))
    return DualCheck(bool(w[0] >= -tol * scale), float(w[0]), float(sdp.g @ lam))


# -- SDPA sparse format ------------------------------------------------------

_SDPA_HEADER = (
    "* SDPA sparse format, one block.\n"
    "* Written as: max tr(F0 Y) s.t. tr(Fi Y) = ci, Y psd, with F0 = -Q0, Fi = Qi, ci = gi.\n"
    "* The minimum of tr(Q0 Z) equals minus the optimum of the problem above.\n"
)


@dataclass
class SdpaProblem:
    m: int
    block_sizes: tuple
    c: np.ndarray
    entries: list = field(default_factory=list)

    def matrix(self, k: int) -> sp.csr_matrix:
        """F_k as a symmetric sparse matrix (first block)."""
        d = self.block_sizes[0]
        rows, cols, vals = [], [], []
        for mat, blk, i, j, v in self.entries:
            if mat == k and blk == 1:
                rows.append(i - 1)
                cols.append(j - 1)
                vals.append(v)
                if i != j:
                    rows.append(j - 1)
                    cols.append(i - 1)
                    vals.append(v)
        return sp.csr_matrix((vals, (rows, cols)), shape=(d, d))


def _sdpa_entries(sdp: PrimalSdp, constraints):
    Q0 = sp.triu(sdp.Q0).tocoo()
    order = np.lexsort((Q0.col, Q0.row))
    out = [(0, 1, int(Q0.row[k]) + 1, int(Q0.col[k]) + 1, -float(Q0.data[k]))
           for k in order if Q0.data[k] != 0.0]
    for k, c in enumerate(constraints, start=1):
        for (i, j), v in c.entries.items():
            out.append((k, 1, i + 1, j + 1, float(v)))
    return out


def export_sdpa(sdp: PrimalSdp, destination, independent_only: bool = False) -> str:
    """Write the relaxation in SDPA sparse form and return the text.

    ``independent_only`` drops linearly dependent constraints, which some
    external solvers reject.
    """
    cons = sdp.constraints
    if independent_only:
        cons = [cons[k] for k in independent_constraints(sdp)]
    lines = [_SDPA_HEADER.rstrip("\n"), str(len(cons)), "1", str(sdp.d),
             " ".join(repr(float(c.g)) for c in cons)]
    lines += [f"{a} {b} {i} {j} {v!r}" for a, b, i, j, v in _sdpa_entries(sdp, cons)]
    text = "\n".join(lines) + "\n"
    if destination is not None:
        Path(destination).write_text(text)
    return text


def read_sdpa(source) -> SdpaProblem:
    text = Path(source).read_text() if not isinstance(source, str) or "\n" not in source else source
    body = [ln.strip() for ln in text.splitlines()
            if ln.strip() and not ln.lstrip().startswith(("*", "\""))]
    m = int(body[0].split()[0])
    nblocks = int(body[1].split()[0])
    sizes = tuple(int(abs(int(float(t)))) for t in body[2].replace(",", " ").replace("{", " ")
                  .replace("}", " ").replace("(", " ").replace(")", " ").split()[:nblocks])
    c = np.array([float(t) for t in body[3].replace(",", " ").replace("{", " ").replace("}", " ").split()[:m]])
    entries = []
    for ln in body[4:]:
        p = ln.split()
        entries.append((int(p[0]), int(p[1]), int(p[2]), int(p[3]), float(p[4])))
    return SdpaProblem(m, sizes, c, entries)


def sdp_from_sdpa(prob: SdpaProblem, N: int = 0, variant: str = "D") -> PrimalSdp:
    """Inverse of :func:`export_sdpa` for one-block files."""
    d = prob.block_sizes[0]
    per = [dict() for _ in range(prob.m + 1)]
    for mat, blk, i, j, v in prob.entries:
        key = (min(i, j) - 1, max(i, j) - 1)
        per[mat][key] = per[mat].get(key, 0.0) + v
    Q0 = sp.csr_matrix(-prob.matrix(0).toarray())
    cons = [QuadraticConstraint(dict(sorted(per[k].items())), float(prob.c[k - 1]), "sdpa", (k,))
            for k in range(1, prob.m + 1)]
    return PrimalSdp(d, Q0, cons, N, variant)


def solve_sdpa_file(path, settings: SolverSettings | None = None) -> float:
    """Optimum of an exported file via the external SDPA solver, in our sign."""
    import sdpap

    settings = settings or SolverSettings()
    A, b, c, K, J = sdpap.importsdpa(str(path))
    option = {"print": "no", "epsilonStar": settings.eps_rel, "epsilonDash": settings.eps_abs,
              "maxIteration": settings.max_iter}
    with warnings.catch_warnings(), _silenced_fds():
        warnings.simplefilter("ignore")
        _, _, sinfo, _, _ = sdpap.solve(A, b, c, K, J, option)
    # importsdpa hands back the minimization form, which is our sign
    return float(sinfo["primalObj"])
