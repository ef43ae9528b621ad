"""Ground truth, measurement synthesis and training-data export."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import ConfigError, load_json
from .motion import CV, ManeuverMode, mode_step
from .training import TrajectoryDataset


@dataclass(frozen=True)
class Segment:
    start: float
    end: float
    mode: ManeuverMode


@dataclass
class ObjectSpec:
    initial_state: np.ndarray
    birth: float = 0.0
    death: float | None = None
    schedule: list[Segment] = field(default_factory=list)

    def mode_at(self, t: float) -> ManeuverMode:
        for seg in self.schedule:
            if seg.start <= t < seg.end:
                return seg.mode
        return CV


@dataclass
class ScenarioConfig:
    """Truth and sensor description of one scenario.

    ``area`` is ``(xmin, xmax, ymin, ymax)`` in meters. Scan ``k`` is taken
    at ``t = k * dt`` for ``k = 0 .. horizon - 1``.
    """

    name: str
    area: tuple[float, float, float, float]
    objects: list[ObjectSpec]
    dt: float = 1.0
    horizon: int = 100
    clutter_rate: float = 0.0
    p_detect: float = 0.95
    meas_noise: np.ndarray = field(default_factory=lambda: np.diag([10.0, 10.0]))
    seed: int = 0

    def __post_init__(self):
        self.area = tuple(float(a) for a in self.area)
        self.meas_noise = np.asarray(self.meas_noise, dtype=float)
        validate_scenario(self)

    @property
    def area_size(self) -> float:
        xmin, xmax, ymin, ymax = self.area
        return (xmax - xmin) * (ymax - ymin)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.horizon) * self.dt


def validate_scenario(cfg: ScenarioConfig) -> None:
    xmin, xmax, ymin, ymax = cfg.area
    if not (xmax > xmin and ymax > ymin):
        raise ConfigError(f"{cfg.name}: empty surveillance area {cfg.area}")
    if not cfg.dt > 0 or cfg.horizon < 1:
        raise ConfigError(f"{cfg.name}: dt must be positive and horizon >= 1")
    if not 0.0 <= cfg.p_detect <= 1.0 or cfg.clutter_rate < 0:
        raise ConfigError(f"{cfg.name}: p_detect must be in [0, 1] and clutter_rate >= 0")
    if cfg.meas_noise.shape != (2, 2) or np.linalg.eigvalsh(cfg.meas_noise).min() < 0:
        raise ConfigError(f"{cfg.name}: meas_noise must be a 2x2 PSD matrix")
    end_time = cfg.horizon * cfg.dt
    for i, obj in enumerate(cfg.objects):
        where = f"{cfg.name}: object {i}"
        x = obj.initial_state
        if x.shape != (4,):
            raise ConfigError(f"{where}: initial_state needs 4 entries")
        if not (xmin <= x[0] <= xmax and ymin <= x[1] <= ymax):
            raise ConfigError(f"{where}: initial position {x[:2].tolist()} outside the area")
        death = end_time if obj.death is None else obj.death
        if not death > obj.birth:
            raise ConfigError(f"{where}: death must come after birth")
        if obj.schedule:
            cursor = obj.birth
            for seg in obj.schedule:
                if seg.start != cursor or not seg.end > seg.start:
                    raise ConfigError(
                        f"{where}: schedule must tile [{obj.birth}, {death}) without gaps "
                        f"or overlaps (segment {seg.start}-{seg.end})")
                cursor = seg.end
            if cursor != death:
                raise ConfigError(f"{where}: schedule ends at {cursor}, object dies at {death}")


def scenario_from_dict(d: dict) -> ScenarioConfig:
    d = dict(d)
    known = {"name", "area", "objects", "dt", "horizon", "clutter_rate", "p_detect",
             "meas_noise", "seed"}
    unknown = sorted(set(d) - known)
    if unknown:
        raise ConfigError(f"scenario: unknown keys {unknown}")
    objects = []
    for i, od in enumerate(d.pop("objects", [])):
        od = dict(od)
        extra = sorted(set(od) - {"initial_state", "birth", "death", "schedule"})
        if extra:
            raise ConfigError(f"scenario object {i}: unknown keys {extra}")
        try:
            schedule = [
                Segment(float(s["start"]), float(s["end"]),
                        ManeuverMode.from_dict({k: v for k, v in s.items()
                                                if k not in ("start", "end")}))
                for s in od.get("schedule", [])
            ]
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"scenario object {i}: bad schedule ({exc})") from exc
        if "initial_state" not in od:
            raise ConfigError(f"scenario object {i}: missing initial_state")
        objects.append(ObjectSpec(
            initial_state=np.asarray(od["initial_state"], dtype=float),
            birth=float(od.get("birth", 0.0)),
            death=None if od.get("death") is None else float(od["death"]),
            schedule=schedule,
        ))
    try:
        return ScenarioConfig(objects=objects, **d)
    except TypeError as exc:
        raise ConfigError(f"scenario: {exc}") from exc


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    return {
        "name": cfg.name,
        "area": list(cfg.area),
        "dt": cfg.dt,
        "horizon": cfg.horizon,
        "clutter_rate": cfg.clutter_rate,
        "p_detect": cfg.p_detect,
        "meas_noise": cfg.meas_noise.tolist(),
        "seed": cfg.seed,
        "objects": [
            {
                "initial_state": o.initial_state.tolist(),
                "birth": o.birth,
                "death": o.death,
                "schedule": [{"start": s.start, "end": s.end, **s.mode.to_dict()}
                             for s in o.schedule],
            }
            for o in cfg.objects
        ],
    }


def load_scenario(path) -> ScenarioConfig:
    d = load_json(path)
    try:
        return scenario_from_dict(d)
    except (ConfigError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


# -- truth ------------------------------------------------------------------

@dataclass
class TruthSet:
    """Per-scan lists of ``(object_id, state)``."""

    times: np.ndarray
    objects: list[list[tuple[int, np.ndarray]]]

    def positions(self, k: int) -> np.ndarray:
        return np.array([s[:2] for _, s in self.objects[k]]).reshape(-1, 2)

    def __len__(self):
        return len(self.objects)


def generate_truth(cfg: ScenarioConfig) -> TruthSet:
    """Noise-free evolution of every object along its maneuver schedule."""
    per_scan: list[list[tuple[int, np.ndarray]]] = [[] for _ in range(cfg.horizon)]
    end_time = cfg.horizon * cfg.dt
    for oid, obj in enumerate(cfg.objects):
        death = end_time if obj.death is None else obj.death
        x = obj.initial_state.copy()
        t = obj.birth
        # first scan at or after birth
        k = int(np.ceil(obj.birth / cfg.dt - 1e-9))
        # advance from birth time to the first scan instant if birth is off-grid
        if k * cfg.dt > t:
            x = mode_step(x, obj.mode_at(t), k * cfg.dt - t)
            t = k * cfg.dt
        while k < cfg.horizon and t < death - 1e-9:
            per_scan[k].append((oid, x.copy()))
            x = mode_step(x, obj.mode_at(t), cfg.dt)
            k += 1
            t = k * cfg.dt
    return TruthSet(cfg.times, per_scan)


# -- measurements -----------------------------------------------------------

@dataclass
class Scan:
    t: float
    measurements: np.ndarray  # (M, 2) positions in meters

    def __post_init__(self):
        self.measurements = np.asarray(self.measurements, dtype=float).reshape(-1, 2)


def _psd_sqrt(R: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(R)
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def generate_measurements(truth: TruthSet, cfg: ScenarioConfig,
                          seed: int | None = None) -> list[Scan]:
    """Detections with probability ``p_detect`` plus Poisson-uniform clutter."""
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    root = _psd_sqrt(cfg.meas_noise)
    xmin, xmax, ymin, ymax = cfg.area
    scans = []
    for t, objs in zip(truth.times, truth.objects):
        zs = []
        for _, x in objs:
            if rng.random() < cfg.p_detect:
                zs.append(x[:2] + root @ rng.standard_normal(2))
        n_clutter = rng.poisson(cfg.clutter_rate)
        clutter = np.column_stack([rng.uniform(xmin, xmax, n_clutter),
                                   rng.uniform(ymin, ymax, n_clutter)])
        Z = np.vstack([np.array(zs).reshape(-1, 2), clutter])
        Z = Z[rng.permutation(len(Z))]
        scans.append(Scan(float(t), Z))
    return scans


# -- training data ----------------------------------------------------------

@dataclass
class MotionPrior:
    """Randomization ranges for training trajectories.

    Turn rates are magnitudes in deg/s; ``p_left`` is the probability that a
    ct segment turns counterclockwise. ``mode_weights`` orders cv, ca, ct.
    """

    area: tuple[float, float, float, float] = (-1500.0, 1500.0, -1250.0, 1250.0)
    speed: tuple[float, float] = (0.0, 40.0)
    turn_rate_deg: tuple[float, float] = (4.0, 12.0)
    p_left: float = 1.0
    accel: tuple[float, float] = (0.0, 2.0)
    segment_length: tuple[int, int] = (10, 30)
    mode_weights: tuple[float, float, float] = (0.25, 0.25, 0.5)
    max_speed: float = 80.0
    steps_per_trajectory: int = 60


def random_mode(rng: np.random.Generator, prior: MotionPrior) -> ManeuverMode:
    w = np.asarray(prior.mode_weights, dtype=float)
    kind = rng.choice(3, p=w / w.sum())
    if kind == 0:
        return CV
    if kind == 1:
        mag = rng.uniform(*prior.accel)
        ang = rng.uniform(0, 2 * np.pi)
        return ManeuverMode("ca", accel=(mag * np.cos(ang), mag * np.sin(ang)))
    omega = np.deg2rad(rng.uniform(*prior.turn_rate_deg))
    tag = "ct_left" if rng.random() < prior.p_left else "ct_right"
    return ManeuverMode(tag, turn_rate=max(omega, 1e-6))


def random_trajectory_pairs(rng: np.random.Generator, prior: MotionPrior, dt: float = 1.0):
    """One randomized trajectory as ``(states, next_states, modes)``."""
    xmin, xmax, ymin, ymax = prior.area
    speed = rng.uniform(*prior.speed)
    heading = rng.uniform(0, 2 * np.pi)
    x = np.array([rng.uniform(xmin, xmax), rng.uniform(ymin, ymax),
                  speed * np.cos(heading), speed * np.sin(heading)])
    xs, ys, modes = [], [], []
    remaining = 0
    mode = CV
    for _ in range(prior.steps_per_trajectory):
        if remaining == 0:
            mode = random_mode(rng, prior)
            remaining = int(rng.integers(prior.segment_length[0], prior.segment_length[1] + 1))
        x_next = mode_step(x, mode, dt)
        if np.hypot(x_next[2], x_next[3]) > prior.max_speed:
            # cap runaway acceleration by switching to cv for the rest of the segment
            mode = CV
            x_next = mode_step(x, mode, dt)
        xs.append(x)
        ys.append(x_next)
        modes.append(mode)
        x = x_next
        remaining -= 1
    return np.array(xs), np.array(ys), modes


def _sample_pairs(n: int, rng: np.random.Generator, prior: MotionPrior, dt: float):
    xs, ys, total = [], [], 0
    while total < n:
        a, b, _ = random_trajectory_pairs(rng, prior, dt)
        xs.append(a)
        ys.append(b)
        total += len(a)
    X, Y = np.vstack(xs), np.vstack(ys)
    idx = rng.permutation(len(X))[:n]
    return X[idx], Y[idx]


def export_training_set(n_train: int = 50_000, n_test: int = 3_000, seed: int = 0,
                        prior: MotionPrior | None = None, dt: float = 1.0):
    """Shuffled one-step pairs from randomized maneuvering trajectories.

    Train and test pairs come from different trajectories (independent RNG
    streams), so the splits are disjoint.
    """
    if n_train < 1 or n_test < 0:
        raise ValueError("n_train must be positive and n_test non-negative")
    prior = prior or MotionPrior()
    train_rng, test_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
    Xtr, Ytr = _sample_pairs(n_train, train_rng, prior, dt)
    Xte, Yte = _sample_pairs(n_test, test_rng, prior, dt) if n_test else (np.zeros((0, 4)),) * 2
    return TrajectoryDataset(Xtr, Ytr, "train"), TrajectoryDataset(Xte, Yte, "test")
