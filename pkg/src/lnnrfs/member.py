"""Gaussian-mixture cardinality-balanced MeMBer filter.

Prediction scales existence by p_S and pushes each spatial component through
the transition. The update keeps a legacy (missed-detection) track per
prior track and creates one measurement-updated track per measurement.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gm import (Estimate, GmIntensity, MeasurementModel, TrackerConfig, check_intensity,
                 heaviest_first, innovation, likelihoods, measurement_birth, predict_gaussians,
                 prune_merge_cap, updated_means)

R_MAX = 1.0 - 1e-12


@dataclass
class BernoulliTrack:
    r: float
    density: GmIntensity   # weights sum to one
    label: int = -1
    age: int = 0

    def best_mean(self) -> np.ndarray:
        return self.density.means[int(np.argmax(self.density.weights))]


def births_to_tracks(births: GmIntensity) -> list[BernoulliTrack]:
    """Each birth component becomes a track with existence equal to its weight."""
    tracks = []
    for j in range(len(births)):
        d = births.subset([j])
        d.weights = np.ones(1)
        tracks.append(BernoulliTrack(float(births.weights[j]), d, int(births.labels[j]),
                                     int(births.ages[j])))
    return tracks


def member_predict(tracks: list[BernoulliTrack], births: list[BernoulliTrack], transition,
                   cfg: TrackerConfig) -> list[BernoulliTrack]:
    """Existence scaled by p_S; spatial densities predicted with unit survival."""
    out = []
    if tracks:
        comps, owner = _stack(tracks)
        pred = predict_gaussians(comps, transition, cfg.Q, 1.0)
        for i, tr in enumerate(tracks):
            density = pred.subset(owner == i)
            out.append(BernoulliTrack(cfg.p_survival * tr.r, density, tr.label, tr.age + 1))
    return out + list(births)


def _stack(tracks):
    owner = np.concatenate([np.full(len(t.density), i) for i, t in enumerate(tracks)])
    return GmIntensity.concat([t.density for t in tracks]), owner


def member_update(tracks: list[BernoulliTrack], Z: np.ndarray, mm: MeasurementModel,
                  cfg: TrackerConfig, diagnostics: dict | None = None):
    """Cardinality-balanced update.

    Returns ``(tracks, explained)``: the updated, pruned tracks and a mask of
    measurements that fell in the gate of at least one spatial component.
    """
    Z = np.asarray(Z, dtype=float).reshape(-1, 2)
    pD = mm.p_detect
    r = np.clip(np.array([t.r for t in tracks], dtype=float), 0.0, R_MAX)
    out = []
    for i, tr in enumerate(tracks):
        r_leg = r[i] * (1.0 - pD) / (1.0 - r[i] * pD)
        out.append(BernoulliTrack(float(r_leg), tr.density.copy(), tr.label, tr.age))

    explained = np.zeros(len(Z), dtype=bool)
    if tracks and len(Z):
        comps, owner = _stack(tracks)
        inn = innovation(comps, mm)
        q, gated = likelihoods(inn, Z, cfg.gate_threshold)
        explained = gated.any(axis=0)
        kappa = mm.clutter_intensity(Z)
        # rho[i, m] = pD * sum_j w_ij q_ij(z_m)
        contrib = pD * comps.weights[:, None] * q
        rho = np.zeros((len(tracks), len(Z)))
        np.add.at(rho, owner, contrib)
        one_minus = 1.0 - r * pD
        num = (r * (1.0 - r) / one_minus**2)[:, None] * rho
        den = (r / one_minus)[:, None] * rho
        comp_scale = (r / (1.0 - r))[owner]
        for m in range(len(Z)):
            total_den = kappa[m] + den[:, m].sum()
            idx = np.nonzero(gated[:, m])[0]
            if len(idx) == 0:
                continue
            w = comp_scale[idx] * contrib[idx, m]
            if not (total_den > 0 and np.isfinite(total_den)) or not w.sum() > 0:
                if diagnostics is not None:
                    diagnostics["skipped_measurements"] = diagnostics.get("skipped_measurements", 0) + 1
                continue
            r_u = min(1.0, num[:, m].sum() / total_den)
            lead = int(np.argmax(num[:, m]))
            density = GmIntensity(w / w.sum(), updated_means(comps, inn, Z[m], idx),
                                  inn.P_upd[idx], comps.ages[idx], comps.labels[idx])
            out.append(BernoulliTrack(float(r_u), density, tracks[lead].label, tracks[lead].age))

    return _maintain(out, cfg), explained


def _maintain(tracks: list[BernoulliTrack], cfg: TrackerConfig) -> list[BernoulliTrack]:
    kept = []
    for tr in tracks:
        if not tr.r >= cfg.prune_threshold:
            continue
        d = prune_merge_cap(tr.density, cfg)
        if len(d) == 0:
            continue
        d.weights = d.weights / d.weights.sum()
        kept.append(BernoulliTrack(min(max(tr.r, 0.0), 1.0), d, tr.label, tr.age))
    if len(kept) > cfg.max_components:
        order = heaviest_first(np.array([t.r for t in kept]))[:cfg.max_components]
        kept = [kept[i] for i in sorted(order)]
    return kept


def extract_tracks(tracks: list[BernoulliTrack], cfg: TrackerConfig) -> list[Estimate]:
    """Confirmed tracks with existence above threshold, at most one per label.

    Measurement-updated tracks inherit the label of the track that explains
    their measurement best, so tracks sharing a label are competing
    hypotheses for one object; the most probable one is reported.
    """
    best: dict[int, BernoulliTrack] = {}
    for t in tracks:
        if t.r > cfg.extract_threshold and t.age >= cfg.confirm_age:
            if t.label not in best or t.r > best[t.label].r:
                best[t.label] = t
    return [Estimate(t.label, t.best_mean().copy(), t.r) for t in best.values()]


class GmMemberFilter:
    """LNN-GM-MeMBer or fixed-model GM-MeMBer, depending on ``transition``."""

    def __init__(self, transition, mm: MeasurementModel, cfg: TrackerConfig):
        self.transition = transition
        self.mm = mm
        self.cfg = cfg
        self.tracks: list[BernoulliTrack] = []
        self.unmatched: list[tuple[np.ndarray, int]] = []
        self.next_label = 0
        self.diagnostics = {"births": 0, "scans": 0, "skipped_measurements": 0}

    def _births(self) -> list[BernoulliTrack]:
        aged = [(z, a + 1) for z, a in self.unmatched if a + 1 <= self.cfg.max_unmatched_age]
        if not aged:
            self.unmatched = []
            return []
        existing = (np.concatenate([t.density.means for t in self.tracks])
                    if self.tracks else None)
        births, spawned = measurement_birth(np.array([z for z, _ in aged]), self.cfg,
                                            existing, self.next_label)
        self.next_label += len(births)
        self.diagnostics["births"] += len(births)
        self.unmatched = [e for e, s in zip(aged, spawned) if not s]
        return births_to_tracks(births)

    def step(self, Z: np.ndarray) -> list[Estimate]:
        Z = np.asarray(Z, dtype=float).reshape(-1, 2)
        pred = member_predict(self.tracks, self._births(), self.transition, self.cfg)
        self.tracks, explained = member_update(pred, Z, self.mm, self.cfg, self.diagnostics)
        self.unmatched += [(z, 0) for z in Z[~explained]]
        self.diagnostics["scans"] += 1
        if self.cfg.debug:
            for t in self.tracks:
                check_intensity(t.density, self.cfg)
        return extract_tracks(self.tracks, self.cfg)

    def run(self, scans) -> list[list[Estimate]]:
        return [self.step(s.measurements) for s in scans]
