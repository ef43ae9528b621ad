"""Kinematic maneuver modes on the planar state ``[px, py, vx, vy]``.

Used for truth generation, training-data synthesis and the fixed-model
baseline filter.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MODE_TAGS = ("cv", "ca", "ct_left", "ct_right")


@dataclass(frozen=True)
class ManeuverMode:
    """One motion mode.

    ``turn_rate`` is a positive magnitude in rad/s, read only by the ct
    modes; ``ct_left`` turns counterclockwise. ``accel`` (m/s^2) is read
    only by ``ca``.
    """

    tag: str
    turn_rate: float = 0.0
    accel: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.tag not in MODE_TAGS:
            raise ValueError(f"unknown maneuver mode {self.tag!r}")
        if self.tag.startswith("ct") and not self.turn_rate > 0:
            raise ValueError(f"{self.tag} needs a positive turn rate, got {self.turn_rate}")

    @property
    def signed_turn_rate(self) -> float:
        if self.tag == "ct_left":
            return self.turn_rate
        if self.tag == "ct_right":
            return -self.turn_rate
        return 0.0

    @classmethod
    def from_dict(cls, d: dict) -> "ManeuverMode":
        d = dict(d)
        tag = d.pop("mode")
        turn_deg = d.pop("turn_rate_deg", None)
        accel = d.pop("accel", None)
        if d:
            raise ValueError(f"unknown maneuver keys: {sorted(d)}")
        return cls(
            tag=tag,
            turn_rate=0.0 if turn_deg is None else float(np.deg2rad(turn_deg)),
            accel=(0.0, 0.0) if accel is None else (float(accel[0]), float(accel[1])),
        )

    def to_dict(self) -> dict:
        d: dict = {"mode": self.tag}
        if self.tag.startswith("ct"):
            d["turn_rate_deg"] = float(np.rad2deg(self.turn_rate))
        if self.tag == "ca":
            d["accel"] = list(self.accel)
        return d


CV = ManeuverMode("cv")


def cv_matrix(dt: float) -> np.ndarray:
    F = np.eye(4)
    F[0, 2] = F[1, 3] = dt
    return F


def ct_matrix(omega: float, dt: float) -> np.ndarray:
    """Exact coordinated-turn transition for signed turn rate ``omega``."""
    wt = omega * dt
    s, c = np.sin(wt), np.cos(wt)
    a = s / omega
    b = (1.0 - c) / omega
    return np.array([
        [1.0, 0.0, a, -b],
        [0.0, 1.0, b, a],
        [0.0, 0.0, c, -s],
        [0.0, 0.0, s, c],
    ])


def mode_matrix(mode: ManeuverMode, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(F, u)`` with ``mode_step(x) == F @ x + u``.

    ``u`` is zero except for ``ca``, where it carries the exogenous
    acceleration.
    """
    if mode.tag == "cv":
        return cv_matrix(dt), np.zeros(4)
    if mode.tag == "ca":
        ax, ay = mode.accel
        u = np.array([0.5 * ax * dt**2, 0.5 * ay * dt**2, ax * dt, ay * dt])
        return cv_matrix(dt), u
    return ct_matrix(mode.signed_turn_rate, dt), np.zeros(4)


def mode_step(x: np.ndarray, mode: ManeuverMode, dt: float) -> np.ndarray:
    """Advance state(s) ``x`` (shape ``(4,)`` or ``(N, 4)``) by ``dt`` seconds."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 4:
        raise ValueError(f"state must have 4 entries, got shape {x.shape}")
    if not dt > 0:
        raise ValueError("dt must be positive")
    F, u = mode_matrix(mode, dt)
    return x @ F.T + u


def cv_step(x: np.ndarray, dt: float = 1.0) -> np.ndarray:
    return mode_step(x, CV, dt)
