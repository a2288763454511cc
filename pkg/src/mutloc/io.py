"""JSON instance files: schema-versioned, validated, bit-exact round trip."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .formulation import ProblemInstance
from .geometry import BearingSequence, GeometryError, Trajectory
from .simulation import GroundTruth

SCHEMA_VERSION = 1
ROTATION_TOL = 1e-6


class InstanceValidationError(ValueError):
    """Invalid instance file; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class InstanceFile:
    instance: ProblemInstance
    ground_truth: GroundTruth | None = None
    schema_version: int = SCHEMA_VERSION


def _traj_dict(traj: Trajectory) -> dict:
    return {
        "label": None if traj.robot_label is None else str(traj.robot_label),
        "timestamps": list(traj.timestamps),
        "rotations": [R.reshape(-1).tolist() for R in traj.rotations],
        "translations": traj.translations.tolist(),
    }


def to_dict(instance: ProblemInstance, truth: GroundTruth | None = None) -> dict:
    out = {
        "schema_version": SCHEMA_VERSION,
        "observer": _traj_dict(instance.observer),
        "observed": [_traj_dict(t) for t in instance.observed],
        "bearings": [{"sequence_index": int(b.sequence_index), "bearings": b.bearings.tolist()}
                     for b in instance.bearings],
        "edges": [list(e) for e in instance.edges],
        "weights": instance.weights.tolist(),
        "metadata": _jsonable(instance.metadata),
    }
    if truth is not None:
        out["ground_truth"] = {
            "permutation": truth.theta.tolist(),
            "scales": truth.scales.tolist(),
            "rotations": [R.reshape(-1).tolist() for R in truth.rotations],
            "inner_biases": truth.inner_biases.tolist(),
            "translations": truth.translations.tolist(),
            "distances": truth.distances.tolist(),
        }
    return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _array(data, path: str, shape: tuple) -> np.ndarray:
    try:
        a = np.array(data, dtype=float)
    except (TypeError, ValueError):
        raise InstanceValidationError(path, "not a numeric array") from None
    if a.shape != shape:
        raise InstanceValidationError(path, f"expected shape {shape}, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InstanceValidationError(path, "contains non-finite values")
    return a


def _field(d: dict, key: str, path: str):
    if not isinstance(d, dict) or key not in d:
        raise InstanceValidationError(f"{path}.{key}" if path else key, "missing field")
    return d[key]


def _rotations(data, path: str, n: int) -> np.ndarray:
    R = _array(data, path, (n, 9)).reshape(n, 3, 3)
    for i, Ri in enumerate(R):
        err = np.abs(Ri.T @ Ri - np.eye(3)).max()
        if err > ROTATION_TOL or np.linalg.det(Ri) <= 0:
            raise InstanceValidationError(f"{path}[{i}]", f"not a rotation (orthonormality error {err:.2e})")
    return R


def _traj(d: dict, path: str) -> Trajectory:
    ts = _field(d, "timestamps", path)
    if not isinstance(ts, list) or not all(isinstance(t, int) for t in ts):
        raise InstanceValidationError(f"{path}.timestamps", "must be a list of integers")
    n = len(ts)
    R = _rotations(_field(d, "rotations", path), f"{path}.rotations", n)
    t = _array(_field(d, "translations", path), f"{path}.translations", (n, 3))
    try:
        return Trajectory(d.get("label"), tuple(ts), R, t)
    except GeometryError as exc:
        raise InstanceValidationError(path, str(exc)) from None


def from_dict(d: dict) -> InstanceFile:
    version = _field(d, "schema_version", "")
    if version != SCHEMA_VERSION:
        raise InstanceValidationError("schema_version", f"unsupported version {version!r}")
    observer = _traj(_field(d, "observer", ""), "observer")
    observed_raw = _field(d, "observed", "")
    if not isinstance(observed_raw, list) or not observed_raw:
        raise InstanceValidationError("observed", "must be a non-empty list")
    observed = tuple(_traj(t, f"observed[{k}]") for k, t in enumerate(observed_raw))
    N, n = len(observed), len(observer)
    bearings = []
    for k, b in enumerate(_field(d, "bearings", "")):
        path = f"bearings[{k}]"
        arr = _array(_field(b, "bearings", path), f"{path}.bearings", (n, 3))
        try:
            bearings.append(BearingSequence(int(_field(b, "sequence_index", path)), arr))
        except GeometryError as exc:
            raise InstanceValidationError(f"{path}.bearings", str(exc)) from None
    edges = _field(d, "edges", "")
    if not isinstance(edges, list) or not all(isinstance(e, list) and len(e) == 2 for e in edges):
        raise InstanceValidationError("edges", "must be a list of [j1, j2] pairs")
    weights = d.get("weights")
    if weights is not None:
        weights = _array(weights, "weights", (N, len(edges)))
    try:
        instance = ProblemInstance(observer, observed, tuple(bearings),
                                   tuple(tuple(e) for e in edges), weights,
                                   metadata=d.get("metadata", {}))
    except (ValueError, GeometryError) as exc:
        raise InstanceValidationError("instance", str(exc)) from None
    truth = None
    if d.get("ground_truth") is not None:
        g = d["ground_truth"]
        p = "ground_truth"
        truth = GroundTruth(
            theta=_array(_field(g, "permutation", p), f"{p}.permutation", (N, N)),
            scales=_array(_field(g, "scales", p), f"{p}.scales", (N,)),
            rotations=_rotations(_field(g, "rotations", p), f"{p}.rotations", N),
            translations=_array(_field(g, "translations", p), f"{p}.translations", (N, 3)),
            inner_biases=_array(_field(g, "inner_biases", p), f"{p}.inner_biases", (N, 3)),
            distances=_array(_field(g, "distances", p), f"{p}.distances", (N, n)),
        )
    return InstanceFile(instance, truth, version)


def dumps(instance: ProblemInstance, truth: GroundTruth | None = None) -> str:
    return json.dumps(to_dict(instance, truth), indent=1)


def save(path, instance: ProblemInstance, truth: GroundTruth | None = None) -> None:
    Path(path).write_text(dumps(instance, truth) + "\n")


def loads(text: str) -> InstanceFile:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceValidationError("$", f"invalid JSON ({exc})") from None
    return from_dict(data)


def load(path) -> InstanceFile:
    return loads(Path(path).read_text())
