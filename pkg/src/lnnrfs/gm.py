"""Gaussian-mixture building blocks shared by the PHD and MeMBer filters.

Mixtures are stored column-wise (arrays of weights, means, covariances) so
prediction, gating and updates run vectorized over components.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import FilterError
from .ltc import numerical_jacobians
from .motion import cv_matrix

H_POS = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]])
JITTER = 1e-9


@dataclass
class GaussianComponent:
    weight: float
    mean: np.ndarray
    cov: np.ndarray
    age: int = 0
    label: int = -1


@dataclass
class GmIntensity:
    """Weighted Gaussian mixture: ``weights (J,)``, ``means (J, 4)``, ``covs (J, 4, 4)``."""

    weights: np.ndarray = field(default_factory=lambda: np.zeros(0))
    means: np.ndarray = field(default_factory=lambda: np.zeros((0, 4)))
    covs: np.ndarray = field(default_factory=lambda: np.zeros((0, 4, 4)))
    ages: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    labels: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        J = len(self.weights)
        self.means = np.asarray(self.means, dtype=float).reshape(J, 4)
        self.covs = np.asarray(self.covs, dtype=float).reshape(J, 4, 4)
        self.ages = np.asarray(self.ages, dtype=int).reshape(J)
        self.labels = np.asarray(self.labels, dtype=int).reshape(J)

    def __len__(self):
        return len(self.weights)

    @property
    def mass(self) -> float:
        return float(np.sum(self.weights))

    def subset(self, idx) -> "GmIntensity":
        return GmIntensity(self.weights[idx], self.means[idx], self.covs[idx],
                           self.ages[idx], self.labels[idx])

    def components(self) -> list[GaussianComponent]:
        return [GaussianComponent(float(w), m.copy(), P.copy(), int(a), int(l))
                for w, m, P, a, l in zip(self.weights, self.means, self.covs,
                                         self.ages, self.labels)]

    @classmethod
    def from_components(cls, comps) -> "GmIntensity":
        comps = list(comps)
        if not comps:
            return cls()
        return cls(
            [c.weight for c in comps],
            np.array([c.mean for c in comps]),
            np.array([c.cov for c in comps]),
            [c.age for c in comps],
            [c.label for c in comps],
        )

    @classmethod
    def concat(cls, parts) -> "GmIntensity":
        parts = [p for p in parts if len(p)]
        if not parts:
            return cls()
        return cls(
            np.concatenate([p.weights for p in parts]),
            np.concatenate([p.means for p in parts]),
            np.concatenate([p.covs for p in parts]),
            np.concatenate([p.ages for p in parts]),
            np.concatenate([p.labels for p in parts]),
        )

    def copy(self) -> "GmIntensity":
        return self.subset(slice(None))


def _as_cov(value, n: int) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 1:
        arr = np.diag(arr)
    if arr.shape != (n, n):
        raise ValueError(f"expected a length-{n} diagonal or {n}x{n} matrix")
    return arr


@dataclass
class TrackerConfig:
    """Filter parameters; defaults are the published simulation settings.

    ``process_noise`` and ``birth_cov`` accept a diagonal (list) or a full
    matrix; diagonal values are variances.
    """

    p_survival: float = 0.99
    process_noise: list = field(default_factory=lambda: [10.0, 10.0, 5.0, 5.0])
    birth_cov: list = field(default_factory=lambda: [40.0, 40.0, 40.0, 40.0])
    birth_weight: float = 0.3
    gate_threshold: float = 15.0
    birth_radius: float = 20.0
    prune_threshold: float = 1e-5
    merge_threshold: float = 4.0
    max_components: int = 500
    extract_threshold: float = 0.5
    confirm_age: int = 3
    max_unmatched_age: int = 2
    jacobian_step: float = 1e-3
    dt: float = 1.0
    debug: bool = False

    def __post_init__(self):
        if not 0.0 <= self.p_survival <= 1.0:
            raise ValueError("p_survival must be in [0, 1]")
        if not 0.0 < self.birth_weight <= 1.0:
            raise ValueError("birth_weight must be in (0, 1]")
        for name in ("gate_threshold", "birth_radius", "prune_threshold", "merge_threshold",
                     "extract_threshold", "jacobian_step", "dt"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_components < 1 or self.confirm_age < 0 or self.max_unmatched_age < 1:
            raise ValueError("max_components >= 1, confirm_age >= 0, max_unmatched_age >= 1")
        self.Q = _as_cov(self.process_noise, 4)
        self.Q_birth = _as_cov(self.birth_cov, 4)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class MeasurementModel:
    """Linear position sensor with Poisson clutter, uniform over ``area``."""

    R: np.ndarray = field(default_factory=lambda: np.diag([10.0, 10.0]))
    p_detect: float = 0.95
    clutter_rate: float = 0.0
    area: tuple[float, float, float, float] = (-1000.0, 1000.0, -1000.0, 1000.0)
    H: np.ndarray = field(default_factory=lambda: H_POS.copy())

    def __post_init__(self):
        self.R = np.asarray(self.R, dtype=float)
        if not 0.0 <= self.p_detect <= 1.0:
            raise ValueError("p_detect must be in [0, 1]")
        try:
            np.linalg.cholesky(self.R)
        except np.linalg.LinAlgError as exc:
            raise ValueError("R must be positive definite") from exc

    @classmethod
    def from_scenario(cls, cfg) -> "MeasurementModel":
        R = cfg.meas_noise
        if np.linalg.eigvalsh(R).min() <= 0:
            R = R + 1e-6 * np.eye(2)
        return cls(R=R, p_detect=cfg.p_detect, clutter_rate=cfg.clutter_rate, area=cfg.area)

    def clutter_intensity(self, Z: np.ndarray) -> np.ndarray:
        Z = np.asarray(Z, dtype=float).reshape(-1, 2)
        xmin, xmax, ymin, ymax = self.area
        inside = (Z[:, 0] >= xmin) & (Z[:, 0] <= xmax) & (Z[:, 1] >= ymin) & (Z[:, 1] <= ymax)
        return np.where(inside, self.clutter_rate / ((xmax - xmin) * (ymax - ymin)), 0.0)


# -- prediction -------------------------------------------------------------

def symmetrize(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + np.swapaxes(P, -1, -2))


def repair_covs(P: np.ndarray) -> np.ndarray:
    """Re-symmetrize; add jitter where the smallest eigenvalue is below 1e-9."""
    P = symmetrize(P)
    if len(P):
        bad = np.linalg.eigvalsh(P)[..., 0] < JITTER
        if bad.any():
            P = P.copy()
            P[bad] += JITTER * np.eye(P.shape[-1])
    return P


class LinearTransition:
    """Fixed linear motion ``x' = F x``; the conventional GM-PHD prediction."""

    def __init__(self, F: np.ndarray):
        self.F = np.asarray(F, dtype=float)

    @classmethod
    def constant_velocity(cls, dt: float = 1.0) -> "LinearTransition":
        return cls(cv_matrix(dt))

    def __call__(self, x):
        return np.asarray(x, dtype=float) @ self.F.T

    def predict(self, means, covs, Q):
        F = self.F
        return means @ F.T, repair_covs(F @ covs @ F.T + Q)


class LnnTransition:
    """Nonlinear map ``phi`` linearized by forward differences with step ``h``."""

    def __init__(self, phi: Callable[[np.ndarray], np.ndarray], h: float = 1e-3):
        self.phi = phi
        self.h = h

    def __call__(self, x):
        return self.phi(x)

    def predict(self, means, covs, Q):
        if len(means) == 0:
            return means.copy(), covs.copy()
        base = np.asarray(self.phi(means), dtype=float)
        J = numerical_jacobians(self.phi, means, self.h, base=base)
        return base, repair_covs(J @ covs @ np.swapaxes(J, 1, 2) + Q)


def predict_gaussians(gm: GmIntensity, transition, Q, p_survival: float) -> GmIntensity:
    means, covs = transition.predict(gm.means, gm.covs, Q)
    return GmIntensity(p_survival * gm.weights, means, covs, gm.ages + 1, gm.labels)


def lnn_predict_component(c: GaussianComponent, phi, h: float, Q, p_survival: float
                          ) -> GaussianComponent:
    """Predict one component through ``phi`` with a forward-difference Jacobian."""
    out = predict_gaussians(GmIntensity.from_components([c]), LnnTransition(phi, h),
                            np.asarray(Q, dtype=float), p_survival)
    return out.components()[0]


# -- measurement side -------------------------------------------------------

@dataclass
class Innovation:
    """Per-component quantities shared by every measurement of a scan."""

    z_pred: np.ndarray   # (J, 2)
    S: np.ndarray        # (J, 2, 2)
    S_inv: np.ndarray
    log_norm: np.ndarray  # (J,) log of the Gaussian normalizer
    K: np.ndarray        # (J, 4, 2)
    P_upd: np.ndarray    # (J, 4, 4)


def innovation(gm: GmIntensity, mm: MeasurementModel) -> Innovation:
    H = mm.H
    S = H @ gm.covs @ H.T + mm.R
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        bad = [j for j in range(len(S)) if np.linalg.eigvalsh(symmetrize(S[j]))[0] <= 0]
        raise FilterError(f"singular innovation covariance for component(s) {bad}") from None
    S_inv = np.linalg.inv(S)
    log_det = 2.0 * np.sum(np.log(np.diagonal(L, axis1=1, axis2=2)), axis=1)
    K = gm.covs @ H.T @ S_inv
    P_upd = symmetrize((np.eye(4) - K @ H) @ gm.covs)
    return Innovation(gm.means @ H.T, S, S_inv, -0.5 * (2 * np.log(2 * np.pi) + log_det), K, P_upd)


def mahalanobis2(inn: Innovation, Z: np.ndarray) -> np.ndarray:
    """Squared Mahalanobis distances ``(J, M)`` of measurements to predicted ones."""
    nu = Z[None, :, :] - inn.z_pred[:, None, :]
    return np.einsum("jmi,jik,jmk->jm", nu, inn.S_inv, nu)


def gate(gm: GmIntensity, Z: np.ndarray, mm: MeasurementModel, threshold: float) -> np.ndarray:
    """Boolean ``(J, M)``: True where the squared Mahalanobis distance is <= threshold."""
    Z = np.asarray(Z, dtype=float).reshape(-1, 2)
    if len(gm) == 0 or len(Z) == 0:
        return np.zeros((len(gm), len(Z)), dtype=bool)
    return mahalanobis2(innovation(gm, mm), Z) <= threshold


def likelihoods(inn: Innovation, Z: np.ndarray, threshold: float):
    """Gated likelihoods ``q (J, M)`` and the gating mask."""
    d2 = mahalanobis2(inn, Z)
    mask = d2 <= threshold
    q = np.where(mask, np.exp(inn.log_norm[:, None] - 0.5 * d2), 0.0)
    return q, mask


def updated_means(gm: GmIntensity, inn: Innovation, z: np.ndarray, idx) -> np.ndarray:
    nu = z - inn.z_pred[idx]
    return gm.means[idx] + np.einsum("jik,jk->ji", inn.K[idx], nu)


# -- birth, maintenance, extraction -----------------------------------------

def measurement_birth(unmatched: np.ndarray, cfg: TrackerConfig,
                      existing_means: np.ndarray | None = None,
                      first_label: int = 0) -> tuple[GmIntensity, np.ndarray]:
    """Birth components at measurement positions with zero velocity.

    Measurements within ``cfg.birth_radius`` of an existing component mean
    are suppressed. Returns the births and a boolean mask of which inputs
    produced one. Births start with age 1 and consecutive labels.
    """
    Z = np.asarray(unmatched, dtype=float).reshape(-1, 2)
    keep = np.ones(len(Z), dtype=bool)
    if existing_means is not None and len(existing_means) and len(Z):
        pos = np.asarray(existing_means)[:, :2]
        d = np.linalg.norm(Z[:, None, :] - pos[None, :, :], axis=2)
        keep = ~(d <= cfg.birth_radius).any(axis=1)
    Zb = Z[keep]
    n = len(Zb)
    means = np.zeros((n, 4))
    means[:, :2] = Zb
    births = GmIntensity(
        np.full(n, cfg.birth_weight), means, np.broadcast_to(cfg.Q_birth, (n, 4, 4)).copy(),
        np.ones(n, dtype=int), first_label + np.arange(n),
    )
    return births, keep


def heaviest_first(weights: np.ndarray) -> np.ndarray:
    """Indices by decreasing weight; weights equal to 12 decimals keep their order.

    Rounding-level differences (e.g. from a numerically linearized transition)
    must not reorder components that are tied in exact arithmetic.
    """
    return np.lexsort((np.arange(len(weights)), -np.round(weights, 12)))


def merge_components(gm: GmIntensity, threshold: float) -> GmIntensity:
    """Greedy heaviest-first moment-matching merge.

    Components whose squared Mahalanobis distance to the current heaviest,
    measured in the heaviest's covariance, is <= ``threshold`` are fused.
    The result keeps the heaviest's label and age.
    """
    J = len(gm)
    if J <= 1:
        return gm.copy()
    remaining = np.ones(J, dtype=bool)
    w_out, m_out, P_out, a_out, l_out = [], [], [], [], []
    order = heaviest_first(gm.weights)
    for j in order:
        if not remaining[j]:
            continue
        idx = np.nonzero(remaining)[0]
        diff = gm.means[idx] - gm.means[j]
        Pj_inv = np.linalg.inv(gm.covs[j])
        d2 = np.einsum("ni,ik,nk->n", diff, Pj_inv, diff)
        group = idx[d2 <= threshold]
        if j not in group:
            group = np.append(group, j)
        w = gm.weights[group]
        W = w.sum()
        if len(group) == 1:
            m, P = gm.means[j], gm.covs[j]
        else:
            m = w @ gm.means[group] / W
            dm = gm.means[group] - m
            P = (np.einsum("n,nik->ik", w, gm.covs[group])
                 + np.einsum("n,ni,nk->ik", w, dm, dm)) / W
            P = symmetrize(P)
        w_out.append(W)
        m_out.append(m)
        P_out.append(P)
        a_out.append(gm.ages[j])
        l_out.append(gm.labels[j])
        remaining[group] = False
    return GmIntensity(np.array(w_out), np.array(m_out), np.array(P_out),
                       np.array(a_out), np.array(l_out))


def prune_merge_cap(gm: GmIntensity, cfg: TrackerConfig) -> GmIntensity:
    """Drop weights below the prune threshold, merge, keep the heaviest J_max."""
    gm = gm.subset(gm.weights >= cfg.prune_threshold)
    gm = merge_components(gm, cfg.merge_threshold)
    if len(gm) > cfg.max_components:
        keep = np.sort(heaviest_first(gm.weights)[:cfg.max_components])
        gm = gm.subset(keep)
    return gm


@dataclass
class Estimate:
    label: int
    state: np.ndarray
    weight: float

    def to_dict(self) -> dict:
        x, y, vx, vy = (float(v) for v in self.state)
        return {"label": int(self.label), "x": x, "y": y, "vx": vx, "vy": vy,
                "w": float(self.weight)}


def extract_states(gm: GmIntensity, cfg: TrackerConfig) -> list[Estimate]:
    """One estimate per component with weight above threshold and confirmed age."""
    sel = (gm.weights > cfg.extract_threshold) & (gm.ages >= cfg.confirm_age)
    return [Estimate(int(l), m.copy(), float(w))
            for w, m, l in zip(gm.weights[sel], gm.means[sel], gm.labels[sel])]


def check_intensity(gm: GmIntensity, cfg: TrackerConfig) -> None:
    """Maintenance contract probe: count cap, prune floor, SPD covariances."""
    if len(gm) > cfg.max_components:
        raise FilterError(f"{len(gm)} components exceed J_max={cfg.max_components}")
    if len(gm) and gm.weights.min() < cfg.prune_threshold:
        raise FilterError(f"weight {gm.weights.min()} below prune threshold")
    if len(gm):
        if np.abs(gm.covs - np.swapaxes(gm.covs, 1, 2)).max() > 1e-9 * max(1.0, np.abs(gm.covs).max()):
            raise FilterError("asymmetric covariance")
        try:
            np.linalg.cholesky(gm.covs)
        except np.linalg.LinAlgError:
            raise FilterError("covariance failed the Cholesky probe") from None
