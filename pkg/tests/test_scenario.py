import hashlib
import json

import numpy as np
import pytest

from lnnrfs.cli import default_config_path
from lnnrfs.errors import ConfigError
from lnnrfs.motion import CV, ManeuverMode, mode_step
from lnnrfs.scenario import (MotionPrior, ObjectSpec, ScenarioConfig, Segment,
                             export_training_set, generate_measurements, generate_truth,
                             load_scenario, random_trajectory_pairs, scenario_from_dict,
                             scenario_to_dict)
from lnnrfs.training import save_datasets


@pytest.fixture(scope="module")
def scenario2():
    return load_scenario(default_config_path("scenario2.json"))


def test_scenario2_layout(scenario2):
    truth = generate_truth(scenario2)
    assert len(truth) == 100
    assert scenario2.clutter_rate == 20 and scenario2.p_detect == 0.95
    assert all(len(objs) == 6 for objs in truth.objects)


def test_scenario2_object4_after_cv(scenario2):
    truth = generate_truth(scenario2)
    np.testing.assert_array_equal(scenario2.objects[3].initial_state, [0, 0, 10, 10])
    oid, state = truth.objects[20][3]
    np.testing.assert_allclose(state[:2], [200.0, 200.0], atol=1e-9)


def test_scenario1_births_and_deaths():
    cfg = load_scenario(default_config_path("scenario1.json"))
    truth = generate_truth(cfg)
    counts = [len(o) for o in truth.objects]
    assert cfg.clutter_rate == 40
    assert min(counts) < max(counts)
    xmin, xmax, ymin, ymax = cfg.area
    for k in range(len(truth)):
        P = truth.positions(k)
        assert np.all((P[:, 0] >= xmin) & (P[:, 0] <= xmax) & (P[:, 1] >= ymin) & (P[:, 1] <= ymax))


def _single(schedule, horizon=40, **kw):
    obj = ObjectSpec(np.array([0.0, 0.0, 10.0, 0.0]), schedule=schedule)
    return ScenarioConfig("t", (-1e4, 1e4, -1e4, 1e4), [obj], horizon=horizon, **kw)


def test_full_turn_returns_velocity():
    turn = ManeuverMode("ct_left", np.deg2rad(10.0))
    cfg = _single([Segment(0, 36, turn), Segment(36, 40, CV)])
    truth = generate_truth(cfg)
    np.testing.assert_allclose(truth.objects[36][0][1][2:], [10.0, 0.0], atol=1e-9)
    np.testing.assert_allclose(truth.objects[36][0][1][:2], [0.0, 0.0], atol=1e-9)


def test_noise_free_measurements_equal_truth(scenario2):
    cfg = ScenarioConfig(scenario2.name, scenario2.area, scenario2.objects, p_detect=1.0,
                         clutter_rate=0.0, meas_noise=np.zeros((2, 2)))
    truth = generate_truth(cfg)
    for k, scan in enumerate(generate_measurements(truth, cfg, seed=3)):
        got = scan.measurements[np.lexsort(scan.measurements.T)]
        want = truth.positions(k)[np.lexsort(truth.positions(k).T)]
        np.testing.assert_array_equal(got, want)


def test_clutter_count_statistics():
    cfg = _single([Segment(0, 1000, CV)], horizon=1000, clutter_rate=40.0, p_detect=0.0)
    scans = generate_measurements(generate_truth(cfg), cfg, seed=1)
    mean = np.mean([len(s.measurements) for s in scans])
    assert abs(mean - 40) <= 3 * np.sqrt(40) / np.sqrt(1000)


def test_detection_frequency(scenario2):
    truth = generate_truth(scenario2)
    cfg = ScenarioConfig(scenario2.name, scenario2.area, scenario2.objects, clutter_rate=0.0,
                         meas_noise=np.zeros((2, 2)))
    hits = trials = 0
    for seed in range(5):
        for k, scan in enumerate(generate_measurements(truth, cfg, seed=seed)):
            hits += len(scan.measurements)
            trials += len(truth.objects[k])
    sigma = np.sqrt(0.95 * 0.05 / trials)
    assert abs(hits / trials - 0.95) <= 3 * sigma


def test_measurements_deterministic(scenario2):
    truth = generate_truth(scenario2)
    a = generate_measurements(truth, scenario2, seed=9)
    b = generate_measurements(truth, scenario2, seed=9)
    assert all(x.measurements.tobytes() == y.measurements.tobytes() for x, y in zip(a, b))


def test_scenario_dict_roundtrip(scenario2):
    again = scenario_from_dict(json.loads(json.dumps(scenario_to_dict(scenario2))))
    assert scenario_to_dict(again) == scenario_to_dict(scenario2)


@pytest.mark.parametrize("patch, msg", [
    ({"area": [0, 0, 0, 1]}, "empty surveillance area"),
    ({"p_detect": 1.5}, "p_detect"),
    ({"colour": "red"}, "unknown keys"),
])
def test_invalid_scenarios(scenario2, patch, msg):
    d = scenario_to_dict(scenario2)
    d.update(patch)
    with pytest.raises(ConfigError, match=msg):
        scenario_from_dict(d)


def test_schedule_gap_rejected(scenario2):
    d = scenario_to_dict(scenario2)
    d["objects"][0]["schedule"][1]["start"] = 21.0
    with pytest.raises(ConfigError, match="tile"):
        scenario_from_dict(d)


def test_load_reports_file(tmp_path, scenario2):
    d = scenario_to_dict(scenario2)
    d["objects"][0]["initial_state"] = [5000.0, 0.0, 0.0, 0.0]
    (tmp_path / "s.json").write_text(json.dumps(d))
    with pytest.raises(ConfigError, match=r"s\.json: .*outside the area"):
        load_scenario(tmp_path / "s.json")


def test_training_pairs_are_exact_transitions():
    rng = np.random.default_rng(0)
    xs, ys, modes = random_trajectory_pairs(rng, MotionPrior())
    for x, y, m in zip(xs, ys, modes):
        assert np.linalg.norm(y - mode_step(x, m, 1.0)) == 0.0


def test_export_sizes_and_determinism(tmp_path):
    tr, te = export_training_set(400, 50, seed=3)
    assert (len(tr), len(te)) == (400, 50)
    save_datasets(tmp_path / "a.jsonl", *export_training_set(400, 50, seed=3))
    save_datasets(tmp_path / "b.jsonl", tr, te)
    h = lambda p: hashlib.sha256(p.read_bytes()).hexdigest()
    assert h(tmp_path / "a.jsonl") == h(tmp_path / "b.jsonl")
    assert export_training_set.__defaults__[:2] == (50_000, 3_000)
