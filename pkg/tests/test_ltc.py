import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lnnrfs.errors import ContractError, CorruptModelError
from lnnrfs.ltc import (gradient, init_model, internal_f, load_model, loss_and_gradient,
                        ltc_derivative, ltc_step, mse_loss, numerical_jacobian,
                        predict_state, save_model)
from lnnrfs.motion import cv_matrix


def zero_net(D=3, n=4, residual=False, **kw):
    m = init_model(D, n, seed=1, residual=residual, **kw)
    return m.with_theta(np.zeros(m.n_params)).with_params(eta_raw=np.log(np.e - 1))


def test_derivative_decay_only():
    m = zero_net().with_params(A=np.array([3.0, -2.0, 0.5]))
    du = ltc_derivative(np.ones(3), np.zeros(4), m)
    np.testing.assert_allclose(du, -np.ones(3), atol=1e-15)


def test_derivative_zero_latent():
    c = np.array([0.2, 0.5, 0.7])
    a = np.array([1.5, -0.5, 2.0])
    m = zero_net().with_params(b2=np.arctanh(np.sqrt(c)), A=a)
    np.testing.assert_allclose(internal_f(np.zeros(3), np.zeros(4), m), c, rtol=1e-12)
    np.testing.assert_allclose(ltc_derivative(np.zeros(3), np.zeros(4), m), a * c, rtol=1e-12)


def test_derivative_matches_scalar_loop():
    rng = np.random.default_rng(3)
    m = init_model(3, 4, seed=5)
    m = m.with_params(eta_raw=rng.normal(size=3))
    u, x = rng.normal(size=3), rng.normal(size=4)
    p = m.params()
    a = list(u) + list(x)
    du = []
    for i in range(3):
        h = [np.tanh(sum(p["W1"][k, j] * a[j] for j in range(7)) + p["b1"][k]) for k in range(3)]
        f = np.tanh(sum(p["W2"][i, k] * h[k] for k in range(3)) + p["b2"][i]) ** 2
        eta = np.log1p(np.exp(p["eta_raw"][i]))
        du.append((-eta + f) * u[i] + p["A"][i] * f)
    np.testing.assert_allclose(ltc_derivative(u, x, m), du, rtol=1e-12)


def test_step_decay_only():
    m = zero_net(sub_steps=10)   # dt_sub = 0.1
    u0 = np.array([1.0, -2.0, 4.0])
    np.testing.assert_allclose(ltc_step(u0, np.zeros(4), m), u0 / 1.1, rtol=1e-14)


def test_step_first_order_consistency():
    rng = np.random.default_rng(0)
    base = init_model(3, 4, seed=2)
    u, x = rng.normal(size=3), rng.normal(size=4)
    errs = []
    for dt in (1e-2, 1e-3):
        m = init_model(3, 4, seed=2, sub_steps=1, dt=dt)
        m = m.with_theta(base.theta)
        errs.append(np.linalg.norm(ltc_step(u, x, m) - u - dt * ltc_derivative(u, x, m)))
    # a tenfold smaller step shrinks the defect about a hundredfold
    assert 50 < errs[0] / errs[1] < 200


def test_long_rollout_stays_bounded():
    m = init_model(8, 4, seed=4, sub_steps=6)
    m = m.with_params(A=np.full(8, 5.0))
    u, x = np.zeros(8), np.array([1.0, -1.0, 0.5, 2.0])
    for _ in range(1000):
        u = ltc_step(u, x, m)
    assert np.all(np.isfinite(u)) and np.abs(u).max() < 10.0


def test_wrong_dims_rejected():
    m = init_model(3, 4)
    with pytest.raises(ContractError):
        ltc_step(np.zeros(2), np.zeros(4), m)
    with pytest.raises(ContractError):
        predict_state(np.zeros(3), m)


def test_predict_deterministic():
    m = init_model(8, 4, seed=9)
    x = np.array([100.0, -20.0, 5.0, 3.0])
    a, b = predict_state(x, m), predict_state(x, m)
    assert a.tobytes() == b.tobytes()


def test_zero_network_outputs_projection_bias():
    c = np.array([1.0, -2.0, 3.0, 0.5])
    m = zero_net(D=5).with_params(c=c)
    out = predict_state(np.array([50.0, 60.0, 1.0, 2.0]), m)
    np.testing.assert_array_equal(out, c)


def test_batched_prediction_matches_single():
    m = init_model(6, 4, seed=1)
    X = np.random.default_rng(1).normal(size=(5, 4))
    batch = predict_state(X, m)
    for i in range(5):
        np.testing.assert_allclose(batch[i], predict_state(X[i], m), rtol=1e-13)


@pytest.mark.parametrize("h", [1e-3, 1e-2, 0.5, 7.0])
def test_jacobian_exact_for_affine(h):
    F = cv_matrix(1.0)
    J = numerical_jacobian(lambda x: x @ F.T + 3.0, np.array([12.0, -4.0, 1.0, 2.0]), h)
    np.testing.assert_allclose(J, F, atol=1e-9)


def test_jacobian_square_map():
    J = numerical_jacobian(lambda x: x**2, np.array([1.0, 2.0, 3.0, 4.0]), 1e-3)
    # forward differences of x^2 give exactly 2m + h, so the error is h up to rounding
    np.testing.assert_allclose(np.diag(J), np.array([2, 4, 6, 8]) + 1e-3, atol=1e-9)
    assert np.abs(J - np.diag(np.diag(J))).max() == 0.0


def test_jacobian_rejects_bad_step():
    with pytest.raises(ContractError):
        numerical_jacobian(lambda x: x, np.zeros(4), 0.0)


def test_mse_values():
    a = np.random.default_rng(2).normal(size=(8, 4))
    assert mse_loss(a, a) == 0.0
    shift = a + np.array([1.0, 0, 0, 0])
    assert mse_loss(shift, a) == pytest.approx(1.0, abs=1e-12)
    b = np.random.default_rng(3).normal(size=(8, 4))
    loop = sum(sum((a[i, j] - b[i, j]) ** 2 for j in range(4)) for i in range(8)) / 8
    assert mse_loss(a, b) == pytest.approx(loop, rel=1e-13)


def test_mse_rejects_bad_batches():
    with pytest.raises(ContractError):
        mse_loss(np.zeros((0, 4)), np.zeros((0, 4)))
    with pytest.raises(ContractError):
        mse_loss(np.zeros((2, 4)), np.zeros((3, 4)))


def _fd_gradient(model, X, Y, step=1e-5):
    theta = model.theta
    g = np.zeros_like(theta)
    for i in range(len(theta)):
        e = np.zeros_like(theta)
        e[i] = step
        lp = mse_loss(predict_state(X, model.with_theta(theta + e)), Y)
        lm = mse_loss(predict_state(X, model.with_theta(theta - e)), Y)
        g[i] = (lp - lm) / (2 * step)
    return g


@pytest.mark.parametrize("residual", [True, False])
def test_gradient_matches_finite_differences(residual):
    rng = np.random.default_rng(11)
    m = init_model(4, 4, sub_steps=2, seed=3, residual=residual)
    m = m.with_params(eta_raw=rng.normal(size=4), A=rng.normal(size=4))
    X, Y = rng.normal(size=(4, 4)), rng.normal(size=(4, 4))
    _, g = loss_and_gradient(m, X, Y)
    fd = _fd_gradient(m, X, Y)
    rel = np.abs(g - fd) / np.maximum(np.abs(fd), 1e-6)
    assert rel.max() <= 1e-4


def test_gradient_zero_at_fit_for_projection_bias():
    m = init_model(4, 4, seed=0, sub_steps=2)
    X = np.random.default_rng(0).normal(size=(3, 4))
    Y = predict_state(X, m)
    _, g = loss_and_gradient(m, X, Y)
    n = m.n_params
    np.testing.assert_allclose(g[n - 4:], 0.0, atol=1e-14)


def test_gradient_of_pair_is_mean_of_singles():
    m = init_model(4, 4, seed=0, sub_steps=3)
    rng = np.random.default_rng(5)
    pairs = [(rng.normal(size=4), rng.normal(size=4)) for _ in range(2)]
    both = gradient(m, pairs)
    mean = 0.5 * (gradient(m, pairs[:1]) + gradient(m, pairs[1:]))
    np.testing.assert_allclose(both, mean, rtol=1e-12, atol=1e-15)


def test_save_load_roundtrip(tmp_path):
    m = init_model(6, 4, seed=7)
    save_model(m, tmp_path / "a.json")
    loaded = load_model(tmp_path / "a.json")
    save_model(loaded, tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    X = np.random.default_rng(0).normal(scale=50, size=(100, 4))
    np.testing.assert_array_equal(predict_state(X, m), predict_state(X, loaded))


def test_load_truncated_file(tmp_path):
    save_model(init_model(4, 4), tmp_path / "m.json")
    text = (tmp_path / "m.json").read_text()
    (tmp_path / "t.json").write_text(text[: len(text) // 2])
    with pytest.raises(CorruptModelError):
        load_model(tmp_path / "t.json")


def test_load_mismatched_dims(tmp_path):
    save_model(init_model(4, 4), tmp_path / "m.json")
    d = json.loads((tmp_path / "m.json").read_text())
    d["latent_dim"] = 5
    (tmp_path / "bad.json").write_text(json.dumps(d))
    with pytest.raises(CorruptModelError):
        load_model(tmp_path / "bad.json")
    d["latent_dim"], d["version"] = 4, 99
    (tmp_path / "ver.json").write_text(json.dumps(d))
    with pytest.raises(CorruptModelError):
        load_model(tmp_path / "ver.json")


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (3, 4), elements=st.floats(-2000, 2000)))
def test_prediction_finite_on_state_range(X):
    m = init_model(8, 4, seed=0)
    assert np.all(np.isfinite(predict_state(X, m)))


@settings(max_examples=25, deadline=None)
@given(arrays(np.float64, 3, elements=st.floats(-5, 5)), st.integers(1, 8))
def test_decay_only_step_is_contraction(u0, steps):
    m = zero_net(sub_steps=steps)
    u1 = ltc_step(u0, np.zeros(4), m)
    assert np.all(np.abs(u1) <= np.abs(u0))
