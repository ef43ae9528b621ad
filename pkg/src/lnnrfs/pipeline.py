"""Glue between scenarios, filters and metrics used by the CLI and scripts."""
from __future__ import annotations

import numpy as np

from .gm import LinearTransition, LnnTransition, MeasurementModel, TrackerConfig
from .ltc import LtcModel, as_transition
from .member import GmMemberFilter
from .metrics import GospaSeries, gospa_series
from .phd import GmPhdFilter
from .scenario import ScenarioConfig, Scan, TruthSet, generate_measurements, generate_truth

FILTERS = ("lnn-phd", "lnn-member", "cv-phd", "cv-member")


def make_filter(name: str, mm: MeasurementModel, cfg: TrackerConfig, model: LtcModel | None = None):
    """Instantiate one of :data:`FILTERS`; ``lnn-*`` filters need ``model``."""
    if name not in FILTERS:
        raise ValueError(f"unknown filter {name!r}; choose from {', '.join(FILTERS)}")
    motion, kind = name.split("-")
    if motion == "lnn":
        if model is None:
            raise ValueError(f"filter {name} needs a trained model")
        transition = LnnTransition(as_transition(model), cfg.jacobian_step)
    else:
        transition = LinearTransition.constant_velocity(cfg.dt)
    cls = GmPhdFilter if kind == "phd" else GmMemberFilter
    return cls(transition, mm, cfg)


def estimate_positions(estimates) -> list[np.ndarray]:
    return [np.array([e.state[:2] for e in est]).reshape(-1, 2) for est in estimates]


def run_filter(name: str, scans: list[Scan], mm: MeasurementModel, cfg: TrackerConfig,
               model: LtcModel | None = None):
    """Run a filter over a scan sequence; returns per-scan estimate lists."""
    return make_filter(name, mm, cfg, model).run(scans)


def run_trial(scenario: ScenarioConfig, filters, cfg: TrackerConfig, seed: int,
              model: LtcModel | None = None, c: float = 100.0, p: float = 1.0,
              truth: TruthSet | None = None):
    """One Monte-Carlo trial: fresh measurements from ``seed``, every filter on them.

    Returns ``({filter: GospaSeries}, {filter: estimates}, scans)``.
    """
    truth = truth if truth is not None else generate_truth(scenario)
    scans = generate_measurements(truth, scenario, seed=seed)
    mm = MeasurementModel.from_scenario(scenario)
    series: dict[str, GospaSeries] = {}
    estimates = {}
    truth_pos = [truth.positions(k) for k in range(len(truth))]
    for name in filters:
        est = run_filter(name, scans, mm, cfg, model)
        estimates[name] = est
        series[name] = gospa_series(truth_pos, estimate_positions(est), truth.times, c=c, p=p)
    return series, estimates, scans
