import json

import numpy as np
import pytest

import hypoips


def small_config(design=None, **extra):
    d = {"n_particles": 4, "n_obs": 50, "horizon": 0.5, "fine_step": 0.001}
    d.update(design or {})
    cfg = {
        "model": "ilangevin1d",
        "theta_true": [2.0, 1.5, 2.0, 0.5],
        "design": d,
        "seed": 11,
        "adam": {"step_size": 0.01, "iterations": 50},
    }
    cfg.update(extra)
    return cfg


def test_builtin_models_present():
    ids = hypoips.model_ids()
    for name in ("ifhn", "ilangevin1d", "mfou"):
        assert name in ids
    info = hypoips.model_info("ilangevin1d")
    assert len(info["param_names"]) == 4
    assert info["smooth_dim"] == 1 and info["rough_dim"] == 1


def test_simulate_shape_and_determinism():
    cfg = small_config()
    a = hypoips.simulate(cfg)
    b = hypoips.simulate(cfg)
    assert a.shape == (51, 4, 2)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, hypoips.simulate(cfg, replicate=1))


def test_contrast_and_estimate():
    cfg = small_config()
    data = hypoips.simulate(cfg)
    at_truth = hypoips.contrast(cfg, data, cfg["theta_true"], "LG", "complete")
    assert np.isfinite(at_truth)
    res = hypoips.estimate(cfg, data, "LG", "complete")
    assert len(res["theta"]) == 4
    assert res["final_contrast"] <= at_truth + 1e-9


def test_partial_contrast_finite():
    cfg = small_config({"observed_coords": [0]})
    data = hypoips.simulate(cfg)
    assert data.shape == (51, 4, 1)
    assert np.isfinite(hypoips.contrast(cfg, data, cfg["theta_true"], "LG", "partial"))


def test_langevin_noise_precision():
    cfg = small_config({"n_particles": 2, "n_obs": 3000, "horizon": 30.0, "fine_step": 0.01}, mc_replicas=1)
    p = hypoips.precision(cfg)
    # unit-variance rough noise, sigma = 0.5: 4 T / sigma^2 per scalar, halved for Euler
    assert p["gamma_beta"][0, 0] == pytest.approx(480.0, rel=1e-12)
    assert p["gamma_beta_em"][0, 0] == pytest.approx(240.0, rel=1e-12)


def test_bad_config_raises():
    with pytest.raises(hypoips.ConfigError):
        hypoips.resolve_config(small_config(model="nope"))
    with pytest.raises(ValueError):
        hypoips.simulate(small_config({"n_particles": 0}))


def test_run_experiment(tmp_path):
    cfg = small_config(replicates=2, methods=["LG", "EM"])
    out = hypoips.run("experiment", cfg, tmp_path)
    assert out == {"attempted": 4, "failed": 0}
    assert (tmp_path / "estimates.csv").exists()
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary
