import numpy as np
import pytest

from lnnrfs.gm import GmIntensity, LinearTransition, MeasurementModel, TrackerConfig
from lnnrfs.member import (BernoulliTrack, GmMemberFilter, extract_tracks, member_predict,
                           member_update)
from lnnrfs.motion import cv_matrix

from test_gm import random_spd

CV = LinearTransition.constant_velocity()


def track(r, J=2, seed=0, label=0, age=3):
    rng = np.random.default_rng(seed)
    w = rng.uniform(0.2, 1.0, J)
    d = GmIntensity(w / w.sum(), rng.uniform(-100, 100, (J, 4)),
                    np.array([random_spd(rng) for _ in range(J)]), np.full(J, age), np.full(J, label))
    return BernoulliTrack(r, d, label, age)


def test_predict_existence_and_density():
    t = track(1.0, J=3)
    cfg = TrackerConfig()
    (p,) = member_predict([t], [], CV, cfg)
    assert p.r == pytest.approx(0.99) and p.age == t.age + 1
    assert p.density.weights.sum() == pytest.approx(1.0, abs=1e-9)
    F = cv_matrix(1.0)
    for j in range(3):
        np.testing.assert_allclose(p.density.means[j], F @ t.density.means[j])
        np.testing.assert_allclose(p.density.covs[j], F @ t.density.covs[j] @ F.T + cfg.Q)


def test_predict_appends_births():
    b = track(0.3, J=1, label=5, age=1)
    out = member_predict([track(0.8)], [b], CV, TrackerConfig())
    assert [t.label for t in out] == [0, 5] and out[1] is b


def test_empty_scan_legacy_update():
    cfg, mm = TrackerConfig(), MeasurementModel()
    tracks = [track(r, seed=i, label=i) for i, r in enumerate([0.2, 0.7, 0.95])]
    out, explained = member_update(tracks, np.zeros((0, 2)), mm, cfg)
    assert len(explained) == 0
    for t, o in zip(tracks, out):
        assert o.r == pytest.approx(t.r * 0.05 / (1 - t.r * 0.95), rel=1e-12)
        np.testing.assert_array_equal(np.sort(o.density.means, axis=0),
                                      np.sort(t.density.means, axis=0))


def test_zero_existence_is_pruned():
    out, _ = member_update([track(0.0)], np.array([[0.0, 0.0]]), MeasurementModel(), TrackerConfig())
    assert out == []


def test_single_detection_with_certain_detection():
    d = GmIntensity([1.0], [[5.0, 5.0, 1.0, 0.0]], [np.eye(4) * 10], [3], [2])
    mm = MeasurementModel(p_detect=1.0, clutter_rate=0.0)
    out, explained = member_update([BernoulliTrack(0.6, d, 2, 3)], np.array([[5.0, 5.0]]),
                                   mm, TrackerConfig())
    assert explained.tolist() == [True]
    # legacy track vanishes (r_L = 0) and the updated track is certain
    assert len(out) == 1 and out[0].r == pytest.approx(1.0, rel=1e-12)
    assert out[0].label == 2 and out[0].age == 3


def test_updated_existence_against_closed_form():
    d = GmIntensity([1.0], [[0.0, 0.0, 0.0, 0.0]], [np.eye(4) * 10], [3], [0])
    mm = MeasurementModel(R=np.eye(2) * 10, p_detect=0.9, clutter_rate=20.0,
                          area=(-500, 500, -500, 500))
    r, z = 0.7, np.array([[2.0, -1.0]])
    out, _ = member_update([BernoulliTrack(r, d, 0, 3)], z, mm, TrackerConfig())
    S = np.eye(2) * 20
    q = np.exp(-0.5 * z[0] @ np.linalg.solve(S, z[0])) / (2 * np.pi * np.sqrt(np.linalg.det(S)))
    rho, kappa = 0.9 * q, 20.0 / 1000**2
    r_u = (r * (1 - r) * rho / (1 - r * 0.9) ** 2) / (kappa + r * rho / (1 - r * 0.9))
    assert [t.r for t in out] == pytest.approx([r * 0.1 / (1 - r * 0.9), r_u], rel=1e-12)


def test_extraction_one_per_label():
    cfg = TrackerConfig()
    tracks = [track(0.6, label=1), track(0.9, label=1, seed=2), track(0.7, label=2, age=1),
              track(0.4, label=3)]
    est = extract_tracks(tracks, cfg)
    assert [(e.label, e.weight) for e in est] == [(1, 0.9)]


def test_filter_tracks_single_object():
    cfg = TrackerConfig(debug=True)
    mm = MeasurementModel(R=np.eye(2), p_detect=0.95, clutter_rate=1.0, area=(-500, 500, -500, 500))
    f = GmMemberFilter(CV, mm, cfg)
    x = np.array([0.0, 0.0, 10.0, 5.0])
    for _ in range(12):
        est = f.step(x[:2][None])
        x = x + [10.0, 5.0, 0.0, 0.0]
    assert len(est) == 1
    np.testing.assert_allclose(est[0].state[:2], x[:2] - [10, 5], atol=1.0)
