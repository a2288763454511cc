"""Rigid-body primitives and frame conventions.

A pose ``(R, t)`` maps a point from its child frame into its parent frame:
``p_parent = R @ p_child + t``.  Rotations are always stored as 3x3 matrices.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

ORTHO_TOL = 1e-9
UNIT_TOL = 1e-9


class GeometryError(ValueError):
    """Raised for invalid geometric input (empty lists, singular matrices)."""


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


def is_rotation(R: np.ndarray, tol: float = ORTHO_TOL) -> bool:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        return False
    return bool(np.linalg.norm(R.T @ R - np.eye(3)) <= tol and np.linalg.det(R) > 0)


@dataclass(frozen=True)
class Pose:
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = _frozen(self.rotation)
        t = _frozen(self.translation).reshape(3)
        if not is_rotation(R):
            raise GeometryError("pose rotation is not in SO(3)")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    def matrix(self) -> np.ndarray:
        """4x4 homogeneous form."""
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def apply(self, p) -> np.ndarray:
        return self.rotation @ np.asarray(p, dtype=float) + self.translation


def compose(a: Pose, b: Pose) -> Pose:
    return Pose(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)


def inverse(a: Pose) -> Pose:
    Rt = a.rotation.T
    return Pose(Rt, -Rt @ a.translation)


@dataclass(frozen=True)
class Trajectory:
    """Poses of one robot over a shared set of sample indices.

    ``rotations`` has shape (n, 3, 3) and ``translations`` shape (n, 3); both
    are read-only after construction.
    """

    robot_label: Hashable
    timestamps: tuple
    rotations: np.ndarray
    translations: np.ndarray

    def __post_init__(self):
        ts = tuple(int(j) for j in self.timestamps)
        R = np.array(self.rotations, dtype=float)
        t = np.array(self.translations, dtype=float)
        if len(ts) == 0:
            raise GeometryError("trajectory has no samples")
        if R.shape != (len(ts), 3, 3) or t.shape != (len(ts), 3):
            raise GeometryError(
                f"trajectory shape mismatch: {len(ts)} timestamps, rotations {R.shape}, "
                f"translations {t.shape}"
            )
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise GeometryError("timestamps must be strictly increasing")
        for i, Ri in enumerate(R):
            if not is_rotation(Ri, 1e-6):
                raise GeometryError(f"rotation at sample {i} is not in SO(3)")
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "rotations", R)
        object.__setattr__(self, "translations", t)

    def __len__(self) -> int:
        return len(self.timestamps)

    @property
    def poses(self) -> list[Pose]:
        return [Pose(R, t) for R, t in zip(self.rotations, self.translations)]

    def index_of(self, timestamp: int) -> int:
        try:
            return self.timestamps.index(int(timestamp))
        except ValueError:
            raise GeometryError(f"timestamp {timestamp} not in trajectory") from None

    def is_local(self, tol: float = 1e-12) -> bool:
        return bool(
            np.abs(self.rotations[0] - np.eye(3)).max() <= tol
            and np.abs(self.translations[0]).max() <= tol
        )


@dataclass(frozen=True)
class BearingSequence:
    """Unit bearings of one anonymous measurement sequence, one per timestamp."""

    sequence_index: int
    bearings: np.ndarray

    def __post_init__(self):
        b = np.array(self.bearings, dtype=float)
        if b.ndim != 2 or b.shape[1] != 3:
            raise GeometryError(f"bearings must have shape (n, 3), got {b.shape}")
        norms = np.linalg.norm(b, axis=1)
        bad = np.flatnonzero(np.abs(norms - 1.0) > UNIT_TOL)
        if bad.size:
            raise GeometryError(f"bearing {int(bad[0])} is not unit length (|b|={norms[bad[0]]})")
        b.setflags(write=False)
        object.__setattr__(self, "bearings", b)

    def __len__(self) -> int:
        return len(self.bearings)


def to_local_frame(global_poses: Sequence[Pose], robot_label: Hashable = None,
                   timestamps: Sequence[int] | None = None) -> Trajectory:
    """Re-express poses relative to the first one."""
    if len(global_poses) == 0:
        raise GeometryError("cannot build a local trajectory from an empty pose list")
    first_inv = inverse(global_poses[0])
    local = [compose(first_inv, p) for p in global_poses]
    local[0] = Pose.identity()
    if timestamps is None:
        timestamps = range(len(global_poses))
    return Trajectory(
        robot_label,
        tuple(timestamps),
        np.stack([p.rotation for p in local]),
        np.stack([p.translation for p in local]),
    )


def geodesic_distance(R1: np.ndarray, R2: np.ndarray) -> float:
    """Angle of the relative rotation ``R1^T R2`` in radians."""
    Q = np.asarray(R1).T @ np.asarray(R2)
    # atan2 keeps full precision near zero where arccos of the trace does not
    sin = 0.5 * np.linalg.norm([Q[2, 1] - Q[1, 2], Q[0, 2] - Q[2, 0], Q[1, 0] - Q[0, 1]])
    cos = (np.trace(Q) - 1.0) / 2.0
    return float(np.arctan2(sin, cos))


def project_to_so3(M: np.ndarray) -> np.ndarray:
    """Nearest rotation to ``M`` in Frobenius norm."""
    M = np.asarray(M, dtype=float)
    if M.shape != (3, 3) or not np.all(np.isfinite(M)):
        raise GeometryError("project_to_so3 expects a finite 3x3 matrix")
    U, S, Vt = np.linalg.svd(M)
    if S[-1] <= 1e-12 * max(S[0], 1e-300):
        raise GeometryError("cannot project a singular matrix onto SO(3)")
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))])
    return U @ D @ Vt


def hat(v) -> np.ndarray:
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def exp_so3(w) -> np.ndarray:
    """Rodrigues formula."""
    w = np.asarray(w, dtype=float)
    theta = np.linalg.norm(w)
    K = hat(w)
    if theta < 1e-8:
        return np.eye(3) + K + 0.5 * K @ K
    return (
        np.eye(3)
        + np.sin(theta) / theta * K
        + (1.0 - np.cos(theta)) / theta**2 * K @ K
    )


def axis_angle(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    return exp_so3(axis / np.linalg.norm(axis) * angle)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform rotation from a normalized Gaussian quaternion."""
    q = rng.standard_normal(4)
    w, x, y, z = q / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def vec(M: np.ndarray) -> np.ndarray:
    """Column-major vectorization."""
    return np.asarray(M).reshape(-1, order="F")


def unvec(v: np.ndarray, rows: int) -> np.ndarray:
    v = np.asarray(v)
    return v.reshape(rows, -1, order="F")
