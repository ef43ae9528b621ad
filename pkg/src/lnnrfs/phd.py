"""Gaussian-mixture PHD recursion with a pluggable transition."""
from __future__ import annotations

import numpy as np

from .gm import (Estimate, GmIntensity, MeasurementModel, TrackerConfig, check_intensity,
                 extract_states, innovation, likelihoods, measurement_birth,
                 predict_gaussians, prune_merge_cap, updated_means)


def phd_predict(prior: GmIntensity, births: GmIntensity, transition,
                cfg: TrackerConfig) -> GmIntensity:
    """Survivors through ``transition`` scaled by p_S, followed by the births."""
    survivors = predict_gaussians(prior, transition, cfg.Q, cfg.p_survival)
    return GmIntensity.concat([survivors, births])


def phd_update(pred: GmIntensity, Z: np.ndarray, mm: MeasurementModel, cfg: TrackerConfig):
    """PHD measurement update.

    Returns ``(posterior, gated)`` where ``gated[j, m]`` marks the
    component/measurement pairs inside the gate. The posterior lists the
    missed-detection copies first, then the detection terms grouped by
    measurement.
    """
    Z = np.asarray(Z, dtype=float).reshape(-1, 2)
    missed = GmIntensity((1.0 - mm.p_detect) * pred.weights, pred.means, pred.covs,
                         pred.ages, pred.labels)
    if len(pred) == 0 or len(Z) == 0:
        return missed, np.zeros((len(pred), len(Z)), dtype=bool)
    inn = innovation(pred, mm)
    q, gated = likelihoods(inn, Z, cfg.gate_threshold)
    kappa = mm.clutter_intensity(Z)
    scaled = mm.p_detect * pred.weights[:, None] * q          # (J, M)
    denom = kappa + scaled.sum(axis=0)
    parts = [missed]
    for m in range(len(Z)):
        idx = np.nonzero(gated[:, m])[0]
        if len(idx) == 0 or not denom[m] > 0:
            continue
        parts.append(GmIntensity(
            scaled[idx, m] / denom[m],
            updated_means(pred, inn, Z[m], idx),
            inn.P_upd[idx],
            pred.ages[idx],
            pred.labels[idx],
        ))
    return GmIntensity.concat(parts), gated


class GmPhdFilter:
    """LNN-GM-PHD (with :class:`~lnnrfs.gm.LnnTransition`) or the fixed-model
    GM-PHD baseline (with :class:`~lnnrfs.gm.LinearTransition`).

    Each :meth:`step` runs prediction with measurement-driven births from
    previously unexplained measurements, the update, merge/prune/cap and
    state extraction.
    """

    def __init__(self, transition, mm: MeasurementModel, cfg: TrackerConfig):
        self.transition = transition
        self.mm = mm
        self.cfg = cfg
        self.intensity = GmIntensity()
        self.unmatched: list[tuple[np.ndarray, int]] = []   # (z, age in scans)
        self.next_label = 0
        self.diagnostics = {"births": 0, "scans": 0}

    def _births(self) -> GmIntensity:
        aged = [(z, a + 1) for z, a in self.unmatched if a + 1 <= self.cfg.max_unmatched_age]
        if not aged:
            self.unmatched = []
            return GmIntensity()
        births, spawned = measurement_birth(np.array([z for z, _ in aged]), self.cfg,
                                            self.intensity.means, self.next_label)
        self.next_label += len(births)
        self.diagnostics["births"] += len(births)
        self.unmatched = [e for e, s in zip(aged, spawned) if not s]
        return births

    def predict(self) -> GmIntensity:
        return phd_predict(self.intensity, self._births(), self.transition, self.cfg)

    def step(self, Z: np.ndarray) -> list[Estimate]:
        Z = np.asarray(Z, dtype=float).reshape(-1, 2)
        pred = self.predict()
        post, gated = phd_update(pred, Z, self.mm, self.cfg)
        self.intensity = prune_merge_cap(post, self.cfg)
        explained = gated.any(axis=0) if len(pred) else np.zeros(len(Z), dtype=bool)
        self.unmatched += [(z, 0) for z in Z[~explained]]
        self.diagnostics["scans"] += 1
        if self.cfg.debug:
            check_intensity(self.intensity, self.cfg)
        return extract_states(self.intensity, self.cfg)

    def run(self, scans) -> list[list[Estimate]]:
        return [self.step(s.measurements) for s in scans]
