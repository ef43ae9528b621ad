"""Particle form of the PHD prediction (the SMC update is not provided)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gm import GmIntensity


@dataclass
class ParticleSet:
    weights: np.ndarray   # (N,)
    states: np.ndarray    # (N, 4)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        self.states = np.asarray(self.states, dtype=float).reshape(len(self.weights), -1)
        if np.any(self.weights < 0) or not np.all(np.isfinite(self.weights)):
            raise ValueError("particle weights must be finite and non-negative")

    def __len__(self):
        return len(self.weights)

    @property
    def mass(self) -> float:
        return float(self.weights.sum())


def sample_births(births: GmIntensity, n: int, rng: np.random.Generator) -> ParticleSet:
    """``n`` equally weighted particles carrying the birth mass."""
    if n == 0 or len(births) == 0:
        return ParticleSet(np.zeros(0), np.zeros((0, 4)))
    probs = births.weights / births.weights.sum()
    which = rng.choice(len(births), size=n, p=probs)
    roots = np.linalg.cholesky(births.covs)
    states = births.means[which] + np.einsum("nij,nj->ni", roots[which], rng.standard_normal((n, 4)))
    return ParticleSet(np.full(n, births.mass / n), states)


def particle_predict(particles: ParticleSet, phi, Q, p_survival: float, n_birth: int = 0,
                     births: GmIntensity | None = None,
                     rng: np.random.Generator | None = None) -> ParticleSet:
    """Move every particle to ``phi(x) + v``, ``v ~ N(0, Q)``; scale weights by p_S.

    ``n_birth`` new particles are drawn from ``births`` and appended.
    """
    if len(particles) == 0 and n_birth == 0:
        raise ValueError("nothing to predict: empty particle set and no births")
    rng = rng if rng is not None else np.random.default_rng(0)
    Q = np.asarray(Q, dtype=float)
    moved = np.zeros((0, 4))
    if len(particles):
        moved = np.asarray(phi(particles.states), dtype=float)
        vals, vecs = np.linalg.eigh(Q)
        root = vecs * np.sqrt(np.clip(vals, 0.0, None))
        moved = moved + rng.standard_normal(moved.shape) @ root.T
    out = ParticleSet(p_survival * particles.weights, moved)
    if n_birth:
        born = sample_births(births if births is not None else GmIntensity(), n_birth, rng)
        out = ParticleSet(np.concatenate([out.weights, born.weights]),
                          np.vstack([out.states, born.states]))
    return out
