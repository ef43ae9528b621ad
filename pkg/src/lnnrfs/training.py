"""Training the LTC motion model: datasets, Adam, and the mini-batch loop."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ContractError, NumericalInstabilityError, TrainingDiverged
from .ltc import LtcModel, fit_normalization, init_model, loss_and_gradient, mse_loss, predict_state

log = logging.getLogger(__name__)


@dataclass
class TrajectoryDataset:
    """Consecutive-state pairs ``(x_k, x_{k+1})`` of one split."""

    states: np.ndarray
    next_states: np.ndarray
    split: str = "train"

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float).reshape(-1, 4)
        self.next_states = np.asarray(self.next_states, dtype=float).reshape(-1, 4)
        if self.states.shape != self.next_states.shape:
            raise ContractError("states and next_states differ in shape")

    def __len__(self):
        return self.states.shape[0]

    def pairs(self):
        return list(zip(self.states, self.next_states))


def save_datasets(path, *datasets: TrajectoryDataset) -> None:
    with open(path, "w") as fh:
        for ds in datasets:
            for x, y in zip(ds.states.tolist(), ds.next_states.tolist()):
                fh.write(json.dumps({"split": ds.split, "x": x, "x_next": y}) + "\n")


def load_datasets(path) -> dict[str, TrajectoryDataset]:
    rows: dict[str, tuple[list, list]] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                xs, ys = rows.setdefault(rec["split"], ([], []))
                if len(rec["x"]) != 4 or len(rec["x_next"]) != 4:
                    raise ValueError("state vectors must have 4 entries")
                xs.append(rec["x"])
                ys.append(rec["x_next"])
            except (ValueError, KeyError, TypeError) as exc:
                raise ContractError(f"{path}:{lineno}: bad dataset record ({exc})") from exc
    return {s: TrajectoryDataset(np.array(xs), np.array(ys), s) for s, (xs, ys) in rows.items()}


# -- Adam -------------------------------------------------------------------

@dataclass
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def zeros(cls, n: int, **kw) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), **kw)


def adam_update(params: np.ndarray, grads: np.ndarray, state: AdamState):
    """One bias-corrected Adam step; returns ``(new_params, new_state)``."""
    params = np.asarray(params, dtype=float)
    grads = np.asarray(grads, dtype=float)
    if not (params.shape == grads.shape == state.first_moment.shape):
        raise ContractError("params, grads and moments must have equal length")
    t = state.step_count + 1
    m = state.beta1 * state.first_moment + (1 - state.beta1) * grads
    v = state.beta2 * state.second_moment + (1 - state.beta2) * grads**2
    m_hat = m / (1 - state.beta1**t)
    v_hat = v / (1 - state.beta2**t)
    new = params - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return new, replace(state, first_moment=m, second_moment=v, step_count=t)


# -- training loop ----------------------------------------------------------

@dataclass
class TrainingConfig:
    epochs: int = 120
    batch_size: int = 512
    learning_rate: float = 1e-3
    seed: int = 0
    latent_dim: int = 32
    hidden_dim: int | None = None
    sub_steps: int = 6
    dt: float = 1.0
    residual: bool = True

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.sub_steps < 1 or self.latent_dim < 1:
            raise ValueError("epochs, batch_size, sub_steps and latent_dim must be >= 1")
        if not self.learning_rate > 0 or not self.dt > 0:
            raise ValueError("learning_rate and dt must be positive")


@dataclass
class TrainingHistory:
    initial_train_mse: float
    initial_test_mse: float | None
    train_mse: list = field(default_factory=list)
    test_mse: list = field(default_factory=list)

    def rows(self):
        for i, tr in enumerate(self.train_mse):
            te = self.test_mse[i] if self.test_mse else None
            yield i + 1, tr, te


def _eval(model, ds):
    return mse_loss(predict_state(ds.states, model), ds.next_states)


def train(dataset: TrajectoryDataset, config: TrainingConfig,
          test: TrajectoryDataset | None = None, model: LtcModel | None = None):
    """Shuffled mini-batch Adam on the one-step MSE.

    Returns ``(model, history)``. Deterministic for a given ``config.seed``.
    Raises :class:`TrainingDiverged` (carrying the last good model) if the
    loss turns non-finite.
    """
    if len(dataset) == 0:
        raise ContractError("empty training set")
    if model is None:
        model = init_model(config.latent_dim, 4, config.hidden_dim, config.sub_steps,
                           config.dt, seed=config.seed, residual=config.residual)
        model = fit_normalization(model, dataset.states, dataset.next_states)
    rng = np.random.default_rng(config.seed + 1)
    history = TrainingHistory(_eval(model, dataset), _eval(model, test) if test else None)
    state = AdamState.zeros(model.n_params, learning_rate=config.learning_rate)
    theta = model.theta.copy()
    n = len(dataset)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        last_good = model
        try:
            for start in range(0, n, config.batch_size):
                idx = order[start:start + config.batch_size]
                _, grad = loss_and_gradient(model, dataset.states[idx], dataset.next_states[idx])
                theta, state = adam_update(theta, grad, state)
                model = model.with_theta(theta)
            train_mse = _eval(model, dataset)
        except NumericalInstabilityError as exc:
            raise TrainingDiverged(f"epoch {epoch + 1}: {exc}", last_good, history) from exc
        if not np.isfinite(train_mse):
            raise TrainingDiverged(f"epoch {epoch + 1}: non-finite loss", last_good, history)
        history.train_mse.append(train_mse)
        if test is not None:
            history.test_mse.append(_eval(model, test))
        log.info("epoch %d train %.6g test %s", epoch + 1, train_mse,
                 history.test_mse[-1] if history.test_mse else "-")
    return model, history
