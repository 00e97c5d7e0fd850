import json

import numpy as np
import pytest

import fsb


@pytest.fixture(scope="module")
def models():
    return fsb.Models(7)


def test_rest_pose_skins_to_rest_vertices(models):
    pose = np.zeros(fsb.POSE_DIM, dtype=np.float32)
    for name in ("mhr", "smpl"):
        np.testing.assert_array_equal(models.skin(name, pose), models.rest_vertices(name))
    assert models.faces("smpl").shape[1] == 3


def test_bridge_is_linear(models):
    rng = np.random.default_rng(0)
    n = models.rest_vertices("mhr").shape[0]
    a, b = rng.standard_normal((n, 3), dtype=np.float32), rng.standard_normal((n, 3), dtype=np.float32)
    mixed = models.bridge(2.0 * a - 0.5 * b)
    np.testing.assert_allclose(mixed, 2.0 * models.bridge(a) - 0.5 * models.bridge(b), atol=1e-5)


def test_fit_recovers_a_sampled_pose(models):
    source = models.skin("mhr", fsb.sample_pose(1000))
    r = models.fit(source)
    assert r["pose"].shape == (fsb.POSE_DIM,)
    assert r["vertex_error"] <= 2e-2
    # recompute the error from the returned parameters
    got = models.skin("smpl", r["pose"])
    err = np.linalg.norm(got - models.bridge(source), axis=1).mean()
    assert err == pytest.approx(r["vertex_error"], rel=1e-4)


def test_fast_and_serial_encoder_calls():
    fast = fsb.run(mode="fast")
    serial = fsb.run(mode="serial")
    assert fast["encoder_calls"] == 1 and fast["encoder_batch"] == [3]
    assert serial["encoder_calls"] == 3 and serial["encoder_batch"] == [1, 1, 1]
    assert fast["merged"].shape == (fsb.POSE_DIM,)
    assert fast["latency"]["frames"] == 1


def test_run_accepts_dicts_and_is_deterministic():
    scene = json.loads(fsb.random_scene(4))
    a = fsb.run({"pipeline": {"body_layers": [0, 1]}}, scene=scene)
    b = fsb.run(json.dumps({"pipeline": {"body_layers": [0, 1]}}), scene=json.dumps(scene))
    np.testing.assert_array_equal(a["merged"], b["merged"])
    assert a["body_intermediate_predictions"] == 2


def test_default_config_round_trips():
    cfg = json.loads(fsb.default_config())
    assert cfg["fit"]["steps"] == 300
    fsb.run(cfg)


def test_errors_map_to_python_exceptions(models):
    with pytest.raises(fsb.ConfigError, match="turbo"):
        fsb.run({"pipeline": {"turbo": True}})
    with pytest.raises(fsb.ConfigError):
        fsb.run(mode="sideways")
    with pytest.raises(fsb.ShapeError):
        models.skin("smpl", np.zeros(5, dtype=np.float32))
    assert issubclass(fsb.ConfigError, fsb.Error)


def test_bench_speeds_up():
    r = fsb.bench(frames=5, warmup=1, scenes=2)
    assert r["rows"][0][0] == "baseline"
    assert r["speedup"] > 1.0
