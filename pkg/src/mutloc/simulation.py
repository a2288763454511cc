"""Synthetic scenes: robots circling over a sinusoidal landscape.

Robot 0 is the observer; robots 1..N are observed.  Each observed robot has
a feature offset ``inner_biases[Y]`` (metres, body frame) and a monocular
scale ratio ``scales[Y]``; its shared local map has translations divided by
that ratio.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .formulation import ProblemInstance, State, make_edges
from .geometry import BearingSequence, GeometryError, Pose, Trajectory, axis_angle, to_local_frame


@dataclass(frozen=True)
class LandscapeTerm:
    amplitude: float
    freq_x: float
    freq_y: float
    phase: float

    def height(self, x, y):
        return self.amplitude * np.sin(self.freq_x * x + self.freq_y * y + self.phase)

    def gradient(self, x, y):
        c = self.amplitude * np.cos(self.freq_x * x + self.freq_y * y + self.phase)
        return c * self.freq_x, c * self.freq_y


@dataclass(frozen=True)
class SceneConfig:
    """Everything needed to regenerate a scene bit for bit.

    Per-robot arrays have ``N + 1`` rows (observer first); ``inner_biases`` and
    ``scales`` have ``N`` rows, one per observed robot.
    """

    N: int
    n: int
    centers: np.ndarray
    radii: np.ndarray
    angular_rates: np.ndarray
    phases: np.ndarray
    altitudes: np.ndarray
    landscape: tuple
    inner_biases: np.ndarray
    scales: np.ndarray
    sigma: float = 0.0
    seed: int = 0
    roll_amplitude: np.ndarray = None
    roll_rate: np.ndarray = None
    roll_jitter: float = 0.0
    bob_amplitude: np.ndarray = None
    bob_rate: np.ndarray = None

    def __post_init__(self):
        if self.N < 1 or self.n < 1:
            raise ValueError("need N >= 1 and n >= 1")
        if np.any(np.asarray(self.radii) <= 0):
            raise ValueError("radii must be positive")
        if np.any(np.asarray(self.scales) <= 0):
            raise ValueError("scale ratios must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")

    @classmethod
    def random(cls, N: int, n: int, sigma: float = 0.0, seed: int = 0,
               scale_range=(0.5, 2.0), bias_scale: float = 0.5, landscape_terms: int = 3,
               **overrides) -> "SceneConfig":
        """Draw a scene layout from ``seed``."""
        rng = np.random.default_rng([seed, 0])
        k = N + 1
        angle = rng.uniform(0, 2 * np.pi)
        ring = 4.0 + rng.uniform(0, 2.0, k)
        th = angle + 2 * np.pi * np.arange(k) / k + rng.uniform(-0.3, 0.3, k)
        fields = dict(
            N=N, n=n,
            centers=np.stack([ring * np.cos(th), ring * np.sin(th)], axis=1),
            radii=rng.uniform(1.0, 2.5, k),
            angular_rates=rng.choice([-1.0, 1.0], k) * rng.uniform(0.25, 0.5, k),
            phases=rng.uniform(0, 2 * np.pi, k),
            altitudes=rng.uniform(0.0, 2.0, k),
            landscape=tuple(
                LandscapeTerm(rng.uniform(0.3, 0.8), _signed(rng, 0.4, 1.2),
                              _signed(rng, 0.4, 1.2), rng.uniform(0, 2 * np.pi))
                for _ in range(landscape_terms)
            ),
            inner_biases=rng.uniform(-bias_scale, bias_scale, (N, 3)),
            scales=np.exp(rng.uniform(np.log(scale_range[0]), np.log(scale_range[1]), N)),
            sigma=float(sigma),
            seed=int(seed),
            roll_amplitude=rng.uniform(0.3, 0.8, k),
            roll_rate=rng.uniform(0.5, 1.0, k),
            roll_jitter=0.3,
            bob_amplitude=rng.uniform(0.5, 1.5, k),
            bob_rate=rng.uniform(0.3, 0.9, k),
        )
        fields.update(overrides)
        return cls(**fields)


def _signed(rng, lo, hi):
    return rng.choice([-1.0, 1.0]) * rng.uniform(lo, hi)


@dataclass
class Scene:
    config: SceneConfig
    observer: list
    observed: list


@dataclass
class GroundTruth:
    """True relative quantities; ``theta[X, Y]`` maps sequence X to robot Y."""

    theta: np.ndarray
    scales: np.ndarray
    rotations: np.ndarray
    translations: np.ndarray
    inner_biases: np.ndarray
    distances: np.ndarray

    def state(self) -> State:
        return State(self.theta.copy(), self.scales.copy(), self.rotations.copy(),
                     self.inner_biases.copy(), self.distances.copy())


def _height(config: SceneConfig, x, y):
    return sum(term.height(x, y) for term in config.landscape)


def _robot_track(config: SceneConfig, k: int):
    j = np.arange(config.n, dtype=float)
    cx, cy = config.centers[k]
    rad, w, ph = config.radii[k], config.angular_rates[k], config.phases[k]
    ang = w * j + ph
    x = cx + rad * np.cos(ang)
    y = cy + rad * np.sin(ang)
    bob_amp = 0.0 if config.bob_amplitude is None else config.bob_amplitude[k]
    bob_rate = 0.0 if config.bob_rate is None else config.bob_rate[k]
    z = config.altitudes[k] + _height(config, x, y) + bob_amp * np.sin(bob_rate * j + ph)
    dx, dy = -rad * w * np.sin(ang), rad * w * np.cos(ang)
    dz = bob_amp * bob_rate * np.cos(bob_rate * j + ph)
    for term in config.landscape:
        gx, gy = term.gradient(x, y)
        dz = dz + gx * dx + gy * dy
    pos = np.stack([x, y, z], axis=1)
    vel = np.stack([dx, dy, dz], axis=1)
    jitter_rng = np.random.default_rng([config.seed, 3, k])
    jitter = config.roll_jitter * jitter_rng.standard_normal(config.n)
    poses = []
    roll_amp = 0.0 if config.roll_amplitude is None else config.roll_amplitude[k]
    roll_rate = 0.0 if config.roll_rate is None else config.roll_rate[k]
    for i in range(config.n):
        fwd = vel[i] / np.linalg.norm(vel[i])
        left = np.cross([0.0, 0.0, 1.0], fwd)
        left /= np.linalg.norm(left)
        up = np.cross(fwd, left)
        R = np.stack([fwd, left, up], axis=1)
        roll = roll_amp * np.sin(roll_rate * i + ph) + jitter[i]
        R = R @ axis_angle([1.0, 0.0, 0.0], roll)
        poses.append(Pose(R, pos[i]))
    return poses


def generate_scene(config: SceneConfig) -> Scene:
    """Global trajectories of the observer and the N observed robots.

    Positions follow ``center + radius (cos, sin)`` plus the landscape height;
    the body x axis is the velocity direction, z is completed upward and a
    slow roll wobble about the forward axis is added.
    """
    tracks = [_robot_track(config, k) for k in range(config.N + 1)]
    return Scene(config, tracks[0], tracks[1:])


def synthesize_bearings(scene: Scene, config: SceneConfig | None = None):
    """Anonymous bearing sequences plus the hidden permutation.

    Returns ``(bearings, theta, distances)`` with ``theta[X, Y] = 1`` when
    sequence X observes robot Y and ``distances`` the noise-free ranges in
    sequence order.
    """
    config = scene.config if config is None else config
    N, n = config.N, config.n
    noise_rng = np.random.default_rng([config.seed, 1])
    perm_rng = np.random.default_rng([config.seed, 2])
    factors = 1.0 + config.sigma * noise_rng.standard_normal((N, n))
    raw = np.empty((N, n, 3))
    true_dist = np.empty((N, n))
    for Y, track in enumerate(scene.observed):
        for i, (pa, py) in enumerate(zip(scene.observer, track)):
            feat = py.rotation @ config.inner_biases[Y]
            v = pa.rotation.T @ (py.translation + factors[Y, i] * feat - pa.translation)
            v0 = pa.rotation.T @ (py.translation + feat - pa.translation)
            nv = np.linalg.norm(v)
            if nv < 1e-12:
                raise GeometryError(f"observer coincides with the feature of robot {Y} at sample {i}")
            raw[Y, i] = v / nv
            true_dist[Y, i] = np.linalg.norm(v0)
    perm = perm_rng.permutation(N)
    theta = np.zeros((N, N))
    theta[np.arange(N), perm] = 1.0
    bearings = [BearingSequence(X, raw[perm[X]]) for X in range(N)]
    return bearings, theta, true_dist[perm]


def make_instance(scene: Scene, bearings, theta: np.ndarray, distances: np.ndarray,
                  edge_strategy: str = "consecutive", k: int | None = None):
    """Local-frame problem instance and its ground truth."""
    config = scene.config
    ts = tuple(range(config.n))
    observer = to_local_frame(scene.observer, "A", ts)
    observed = []
    for Y, track in enumerate(scene.observed):
        loc = to_local_frame(track, f"Y{Y}", ts)
        observed.append(Trajectory(loc.robot_label, ts, loc.rotations,
                                   loc.translations / config.scales[Y]))
    edges = make_edges(ts, edge_strategy, k=k, seed=config.seed)
    instance = ProblemInstance(observer, tuple(observed), tuple(bearings), tuple(edges),
                               metadata={"bearings_normalized": True, "seed": config.seed,
                                         "sigma": config.sigma})
    A0 = scene.observer[0]
    rots, trans = [], []
    for track in scene.observed:
        rots.append(A0.rotation.T @ track[0].rotation)
        trans.append(A0.rotation.T @ (track[0].translation - A0.translation))
    truth = GroundTruth(
        theta=np.asarray(theta, dtype=float),
        scales=np.asarray(config.scales, dtype=float).copy(),
        rotations=np.array(rots),
        translations=np.array(trans),
        inner_biases=np.asarray(config.inner_biases, dtype=float).copy(),
        distances=np.asarray(distances, dtype=float),
    )
    return instance, truth


def simulate(N: int, n: int, sigma: float = 0.0, seed: int = 0, edge_strategy: str = "consecutive",
             k: int | None = None, **config_overrides):
    """One-call convenience: random config, scene, bearings and instance."""
    config = SceneConfig.random(N, n, sigma, seed, **config_overrides)
    scene = generate_scene(config)
    bearings, theta, dist = synthesize_bearings(scene)
    return make_instance(scene, bearings, theta, dist, edge_strategy, k)
