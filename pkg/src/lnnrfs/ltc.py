"""Liquid time-constant (LTC) cell used as a learned one-scan motion model.

The latent state obeys

    du/dt = [-eta + f(u, x)] * u + A * f(u, x)

and is integrated with the fused (semi-implicit) Euler step over ``sub_steps``
sub-intervals of one scan. The internal network is

    f(u, x) = tanh(W2 tanh(W1 [u; x] + b1) + b2) ** 2

which lies in [0, 1) and vanishes identically when its weights and biases are
zero. ``eta = softplus(eta_raw)`` stays positive for every parameter value.

``predict_state`` is memoryless: the latent state starts at zero on every
call, is driven by the (normalized) input state for one scan, and is then
projected back to state space.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import ContractError, CorruptModelError, NumericalInstabilityError

MODEL_FORMAT = "lnnrfs.ltc"
MODEL_VERSION = 1


def softplus(r):
    return np.logaddexp(0.0, r)


def softplus_inv(y):
    return np.log(np.expm1(y))


def _sigmoid(r):
    return 0.5 * (1.0 + np.tanh(0.5 * r))


def _param_shapes(latent_dim: int, input_dim: int, hidden_dim: int):
    D, n, H = latent_dim, input_dim, hidden_dim
    return [
        ("W1", (H, D + n)),
        ("b1", (H,)),
        ("W2", (D, H)),
        ("b2", (D,)),
        ("eta_raw", (D,)),
        ("A", (D,)),
        ("P", (n, D)),
        ("c", (n,)),
    ]


@dataclass(frozen=True, eq=False)
class LtcModel:
    """All learnable parameters of the cell plus the state projection.

    ``theta`` is the flat parameter vector; named views are available through
    :meth:`params`. ``x_mean``/``x_scale`` normalize the input state. The
    projection output ``y`` is mapped back as ``y * y_scale + y_mean``, and
    when ``residual`` is set the input state is added, so the network learns
    the one-scan increment.
    """

    latent_dim: int
    input_dim: int
    hidden_dim: int
    sub_steps: int
    dt: float
    theta: np.ndarray
    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: np.ndarray
    y_scale: np.ndarray
    residual: bool = True
    _views: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        for name in ("latent_dim", "input_dim", "hidden_dim", "sub_steps"):
            if int(getattr(self, name)) < 1:
                raise ContractError(f"{name} must be a positive integer")
        if not self.dt > 0:
            raise ContractError("dt must be positive")
        theta = np.array(self.theta, dtype=float)
        if theta.shape != (self.n_params,):
            raise ContractError(f"theta has shape {theta.shape}, expected ({self.n_params},)")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        for name in ("x_mean", "x_scale", "y_mean", "y_scale"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != (self.input_dim,):
                raise ContractError(f"{name} must have length {self.input_dim}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any(self.x_scale <= 0) or np.any(self.y_scale <= 0):
            raise ContractError("normalization scales must be positive")
        views, off = {}, 0
        for name, shape in _param_shapes(self.latent_dim, self.input_dim, self.hidden_dim):
            size = int(np.prod(shape))
            views[name] = theta[off:off + size].reshape(shape)
            off += size
        object.__setattr__(self, "_views", views)

    @property
    def n_params(self) -> int:
        return sum(int(np.prod(s)) for _, s in
                   _param_shapes(self.latent_dim, self.input_dim, self.hidden_dim))

    @property
    def dt_sub(self) -> float:
        return self.dt / self.sub_steps

    @property
    def eta(self) -> np.ndarray:
        return softplus(self._views["eta_raw"])

    def params(self) -> dict[str, np.ndarray]:
        return dict(self._views)

    def with_theta(self, theta: np.ndarray) -> "LtcModel":
        return replace(self, theta=theta, _views=None)

    def with_params(self, **updates) -> "LtcModel":
        """Copy with some named parameter blocks replaced."""
        theta = self.theta.copy()
        off = 0
        for name, shape in _param_shapes(self.latent_dim, self.input_dim, self.hidden_dim):
            size = int(np.prod(shape))
            if name in updates:
                theta[off:off + size] = np.broadcast_to(updates.pop(name), shape).ravel()
            off += size
        if updates:
            raise ContractError(f"unknown parameter blocks {sorted(updates)}")
        return self.with_theta(theta)


def init_model(
    latent_dim: int = 32,
    input_dim: int = 4,
    hidden_dim: int | None = None,
    sub_steps: int = 6,
    dt: float = 1.0,
    seed: int = 0,
    residual: bool = True,
) -> LtcModel:
    """Seeded initialization: weights uniform in +-1/sqrt(fan_in), eta = 1."""
    hidden_dim = latent_dim if hidden_dim is None else hidden_dim
    rng = np.random.default_rng(seed)
    fan_in = {"W1": latent_dim + input_dim, "b1": latent_dim + input_dim,
              "W2": hidden_dim, "b2": hidden_dim, "A": 1, "P": latent_dim, "c": latent_dim}
    chunks = []
    for name, shape in _param_shapes(latent_dim, input_dim, hidden_dim):
        if name == "eta_raw":
            chunks.append(np.full(shape, softplus_inv(1.0)).ravel())
        else:
            bound = 1.0 / np.sqrt(fan_in[name])
            chunks.append(rng.uniform(-bound, bound, size=shape).ravel())
    zeros, ones = np.zeros(input_dim), np.ones(input_dim)
    return LtcModel(latent_dim, input_dim, hidden_dim, sub_steps, dt,
                    np.concatenate(chunks), zeros, ones, zeros, ones, residual)


def fit_normalization(model: LtcModel, states: np.ndarray, next_states: np.ndarray) -> LtcModel:
    """Set input/target normalization from training pairs."""
    states = np.asarray(states, dtype=float)
    next_states = np.asarray(next_states, dtype=float)
    target = next_states - states if model.residual else next_states
    floor = 1e-6
    return replace(
        model,
        x_mean=states.mean(axis=0),
        x_scale=np.maximum(states.std(axis=0), floor),
        y_mean=target.mean(axis=0),
        y_scale=np.maximum(target.std(axis=0), floor),
        _views=None,
    )


# -- cell -------------------------------------------------------------------

def _check_dims(u, x, model):
    if u.shape[-1] != model.latent_dim:
        raise ContractError(f"latent vector has length {u.shape[-1]}, expected {model.latent_dim}")
    if x.shape[-1] != model.input_dim:
        raise ContractError(f"input vector has length {x.shape[-1]}, expected {model.input_dim}")


def _cell(u, x, p):
    a = np.concatenate([u, x], axis=-1)
    h = np.tanh(a @ p["W1"].T + p["b1"])
    t = np.tanh(h @ p["W2"].T + p["b2"])
    return t * t, (a, h, t)


def internal_f(u: np.ndarray, x: np.ndarray, model: LtcModel) -> np.ndarray:
    u, x = np.asarray(u, dtype=float), np.asarray(x, dtype=float)
    _check_dims(u, x, model)
    return _cell(u, x, model.params())[0]


def ltc_derivative(u: np.ndarray, x: np.ndarray, model: LtcModel) -> np.ndarray:
    """Right-hand side of the LTC ODE for latent ``u`` and cell input ``x``."""
    u, x = np.asarray(u, dtype=float), np.asarray(x, dtype=float)
    _check_dims(u, x, model)
    p = model.params()
    f, _ = _cell(u, x, p)
    return (-model.eta + f) * u + p["A"] * f


def _fused_step(u, x, p, eta, dt):
    f, cache = _cell(u, x, p)
    den = 1.0 + dt * (eta - f)
    u_new = (u + dt * p["A"] * f) / den
    return u_new, (f, den, cache)


def _raise_if_unstable(u_new):
    bad = ~np.isfinite(u_new)
    if bad.any():
        cells = sorted(set(np.nonzero(bad)[-1].tolist()))
        raise NumericalInstabilityError(f"non-finite latent state in cell(s) {cells}")


def ltc_step(u: np.ndarray, x: np.ndarray, model: LtcModel) -> np.ndarray:
    """One fused Euler step of length ``model.dt_sub``."""
    u, x = np.asarray(u, dtype=float), np.asarray(x, dtype=float)
    _check_dims(u, x, model)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        u_new, _ = _fused_step(u, x, model.params(), model.eta, model.dt_sub)
    _raise_if_unstable(u_new)
    return u_new


# -- one-scan transition map ------------------------------------------------

def _forward(x, model, keep=False):
    p = model.params()
    eta, dt = model.eta, model.dt_sub
    xn = (x - model.x_mean) / model.x_scale
    u = np.zeros(x.shape[:-1] + (model.latent_dim,))
    trace = []
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for _ in range(model.sub_steps):
            u_new, cache = _fused_step(u, xn, p, eta, dt)
            _raise_if_unstable(u_new)
            if keep:
                trace.append((u, u_new, cache))
            u = u_new
    y = u @ p["P"].T + p["c"]
    out = y * model.y_scale + model.y_mean
    if model.residual:
        out = out + x
    return out, u, trace


def predict_state(x: np.ndarray, model: LtcModel) -> np.ndarray:
    """Deterministic one-scan prediction for a state ``(n,)`` or batch ``(B, n)``."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.input_dim:
        raise ContractError(f"state has length {x.shape[-1]}, expected {model.input_dim}")
    return _forward(x, model)[0]


def as_transition(model: LtcModel) -> Callable[[np.ndarray], np.ndarray]:
    return lambda x: predict_state(x, model)


def numerical_jacobian(phi: Callable, m: np.ndarray, h: float) -> np.ndarray:
    """Forward-difference Jacobian of ``phi`` at ``m``; column l uses ``m + h e_l``."""
    return numerical_jacobians(phi, np.asarray(m, dtype=float)[None, :], h)[0]


def numerical_jacobians(phi: Callable, means: np.ndarray, h: float,
                        base: np.ndarray | None = None) -> np.ndarray:
    """Batched forward-difference Jacobians, shape ``(J, n, n)``.

    ``phi`` must accept a batch of states. All ``J * (n + 1)`` evaluations
    (or ``J * n`` when ``base = phi(means)`` is supplied) go through one call.
    """
    if not h > 0:
        raise ContractError("jacobian step h must be positive")
    means = np.asarray(means, dtype=float)
    J, n = means.shape
    shifted = means[:, None, :] + h * np.eye(n)[None, :, :]   # (J, l, n)
    if base is None:
        out = np.asarray(phi(np.concatenate([means, shifted.reshape(J * n, n)])))
        base, moved = out[:J], out[J:]
    else:
        moved = np.asarray(phi(shifted.reshape(J * n, n)))
    moved = moved.reshape(J, n, -1)
    # (phi(m + h e_l) - phi(m)) / h is column l
    return np.transpose((moved - base[:, None, :]) / h, (0, 2, 1))


# -- training objective -----------------------------------------------------

def mse_loss(pred: np.ndarray, truth: np.ndarray) -> float:
    """Batch mean of squared Euclidean errors."""
    pred, truth = np.atleast_2d(pred), np.atleast_2d(truth)
    if pred.shape != truth.shape:
        raise ContractError(f"shape mismatch {pred.shape} vs {truth.shape}")
    if pred.shape[0] == 0:
        raise ContractError("empty batch")
    return float(np.mean(np.sum((pred - truth) ** 2, axis=1)))


def loss_and_gradient(model: LtcModel, states: np.ndarray, targets: np.ndarray):
    """MSE of ``predict_state`` and its exact gradient w.r.t. ``model.theta``.

    Reverse mode through the unrolled fused-Euler steps.
    """
    x = np.atleast_2d(np.asarray(states, dtype=float))
    y_true = np.atleast_2d(np.asarray(targets, dtype=float))
    if x.shape != y_true.shape or x.shape[0] == 0:
        raise ContractError("need a non-empty batch of matching state pairs")
    B = x.shape[0]
    p = model.params()
    eta, dt = model.eta, model.dt_sub
    out, u_final, trace = _forward(x, model, keep=True)
    err = out - y_true
    loss = float(np.mean(np.sum(err**2, axis=1)))

    g = {name: np.zeros_like(v) for name, v in p.items()}
    g_y = (2.0 / B) * err * model.y_scale
    g["P"] = g_y.T @ u_final
    g["c"] = g_y.sum(axis=0)
    g_u = g_y @ p["P"]
    g_eta = np.zeros(model.latent_dim)
    D = model.latent_dim
    for u, u_new, (f, den, (a, h, t)) in reversed(trace):
        g_num = g_u / den
        g_den = -g_num * u_new
        g_f = dt * (g_num * p["A"] - g_den)
        g["A"] += dt * np.sum(g_num * f, axis=0)
        g_eta += dt * np.sum(g_den, axis=0)
        g_z2 = g_f * 2.0 * t * (1.0 - t * t)
        g["W2"] += g_z2.T @ h
        g["b2"] += g_z2.sum(axis=0)
        g_z1 = (g_z2 @ p["W2"]) * (1.0 - h * h)
        g["W1"] += g_z1.T @ a
        g["b1"] += g_z1.sum(axis=0)
        g_u = g_num + g_z1 @ p["W1"][:, :D]
    g["eta_raw"] = g_eta * _sigmoid(p["eta_raw"])

    grad = np.concatenate([g[name].ravel() for name, _ in
                           _param_shapes(model.latent_dim, model.input_dim, model.hidden_dim)])
    if not np.all(np.isfinite(grad)):
        raise NumericalInstabilityError("non-finite gradient entries")
    return loss, grad


def gradient(model: LtcModel, batch) -> np.ndarray:
    """Gradient of the batch MSE; ``batch`` is a sequence of ``(x_k, x_k1)`` pairs."""
    batch = list(batch)
    if not batch:
        raise ContractError("empty batch")
    xs = np.array([b[0] for b in batch], dtype=float)
    ys = np.array([b[1] for b in batch], dtype=float)
    return loss_and_gradient(model, xs, ys)[1]


# -- persistence ------------------------------------------------------------

def model_to_dict(model: LtcModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "latent_dim": model.latent_dim,
        "input_dim": model.input_dim,
        "hidden_dim": model.hidden_dim,
        "sub_steps": model.sub_steps,
        "dt": model.dt,
        "residual": model.residual,
        "normalization": {
            "x_mean": model.x_mean.tolist(),
            "x_scale": model.x_scale.tolist(),
            "y_mean": model.y_mean.tolist(),
            "y_scale": model.y_scale.tolist(),
        },
        "params": model.theta.tolist(),
    }


def model_from_dict(d: dict) -> LtcModel:
    if d.get("format") != MODEL_FORMAT:
        raise CorruptModelError(f"not an LTC model file (format={d.get('format')!r})")
    if d.get("version") != MODEL_VERSION:
        raise CorruptModelError(f"unsupported model version {d.get('version')!r}")
    try:
        norm = d["normalization"]
        model = LtcModel(
            latent_dim=int(d["latent_dim"]),
            input_dim=int(d["input_dim"]),
            hidden_dim=int(d["hidden_dim"]),
            sub_steps=int(d["sub_steps"]),
            dt=float(d["dt"]),
            theta=np.array(d["params"], dtype=float),
            x_mean=norm["x_mean"],
            x_scale=norm["x_scale"],
            y_mean=norm["y_mean"],
            y_scale=norm["y_scale"],
            residual=bool(d["residual"]),
        )
    except (KeyError, TypeError, ContractError) as exc:
        raise CorruptModelError(f"model file does not match its declared dims: {exc}") from exc
    return model


def save_model(model: LtcModel, path) -> None:
    text = json.dumps(model_to_dict(model), indent=1) + "\n"
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def load_model(path) -> LtcModel:
    with open(path) as fh:
        text = fh.read()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorruptModelError(f"{path}: corrupt model file ({exc})") from exc
    if not isinstance(d, dict):
        raise CorruptModelError(f"{path}: corrupt model file")
    return model_from_dict(d)
