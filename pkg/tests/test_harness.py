import csv
import json

import numpy as np
import pytest

from slowform.harness import (CSV_COLUMNS, ExperimentConfig, default_slow_data, fit_linear,
                              fit_rate, run_experiment)
from slowform.spectral import ConfigurationError


def test_fit_exact_power_law():
    fit = fit_rate([(1, 1), (10, 100), (100, 10000)])
    assert fit.slope == pytest.approx(2.0, abs=1e-12)
    assert fit.r2 == pytest.approx(1.0, abs=1e-12)


def test_fit_constant_data():
    fit = fit_rate([(1, 5.0), (2, 5.0), (4, 5.0)])
    assert fit.slope == pytest.approx(0.0, abs=1e-12)


def test_fit_noisy_power_law():
    rng = np.random.default_rng(7)
    x = np.logspace(-3, 0, 8)
    y = 3 * x ** 0.75 * (1 + 0.01 * rng.standard_normal(8))
    fit = fit_rate(list(zip(x, y)))
    assert 0.7 <= fit.slope <= 0.8
    assert 0.0 <= fit.r2 <= 1.0


def test_fit_exponential_rate():
    t = np.linspace(0, 1, 6)
    fit = fit_rate(list(zip(t, 2 * np.exp(-4 * t))), log_log=False)
    assert fit.slope == pytest.approx(-4.0, abs=1e-12)


def test_fit_linear():
    fit = fit_linear([(1, 3), (2, 5), (3, 7)])
    assert (fit.slope, fit.intercept) == pytest.approx((2.0, 1.0))


def test_fit_needs_three_points():
    with pytest.raises(ConfigurationError):
        fit_rate([(1, 1), (2, 2)])


def test_fit_rejects_nonpositive_values():
    with pytest.raises(ValueError):
        fit_rate([(1, 1), (2, 0), (3, 3)])


@pytest.mark.parametrize("data", [
    {"kind": "teleport"},
    {"kind": "rate_flow", "eps": [1e-3, 1e-2, 1e-1]},
    {"kind": "rate_flow", "eps": [1e-1, -1e-2, -1e-3]},
    {"kind": "rate_flow", "eps": [1e-1, 1e-2]},
    {"kind": "rate_manifold", "zeta": [0.1, 0.05]},
    {"kind": "attraction"},
    {"kind": "bounds", "options": {"samples": 0}},
    {"kind": "invariance", "zeta": [0.1], "coupling_c": 1.5},
    {"kind": "bounds", "colour": "red"},
    {"kind": "bounds", "options": {"lemmas": ["9.9"]}},
])
def test_config_validation(data):
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_json(data)


def test_config_round_trip(tmp_path):
    cfg = ExperimentConfig(kind="layer_decay", model="stommel", eps=[0.1, 0.05, 0.025])
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_json()))
    assert ExperimentConfig.load(path) == cfg


def test_slow_data_is_seeded_and_scaled(fhn):
    a = default_slow_data(fhn, 3)
    assert np.array_equal(a, default_slow_data(fhn, 3))
    assert not np.array_equal(a, default_slow_data(fhn, 4))
    assert float(fhn.y_norm(a)) == pytest.approx(0.004, rel=1e-12)


def small_layer_decay(tmp_path, name="run"):
    return ExperimentConfig(kind="layer_decay", model="fhn", eps=[0.1, 0.05, 0.025],
                            integrator={"h": 2e-3, "T": 0.1, "scheme": "ETD2",
                                        "store_every": 5},
                            out_dir=str(tmp_path / name))


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_csv_embeds_constants(tmp_path):
    res = run_experiment(small_layer_decay(tmp_path))
    rows = read_rows(res.csv_path)
    assert tuple(rows[0]) == CSV_COLUMNS
    assert rows
    for row in rows:
        assert row["omega_f"] and row["omega_g"]
        assert row["kind"] == "layer_decay" and row["model"] == "fhn"
    summary = json.loads(res.summary_path.read_text())
    assert summary["system"]["consts"]["omega_f"] == pytest.approx(float(rows[0]["omega_f"]))


def test_manifold_csv_embeds_splitting(tmp_path):
    cfg = ExperimentConfig(kind="rate_manifold", model="stommel", K=128,
                           zeta=[5e-4, 2.5e-4, 1.25e-4], out_dir=str(tmp_path / "m"))
    rows = read_rows(run_experiment(cfg).csv_path)
    for row in rows:
        for col in ("N_S", "N_F", "eta", "gap_margin"):
            assert row[col] != ""
        assert float(row["gap_margin"]) > 0


def test_determinism(tmp_path):
    a = run_experiment(small_layer_decay(tmp_path, "a")).csv_path.read_bytes()
    b = run_experiment(small_layer_decay(tmp_path, "b")).csv_path.read_bytes()
    assert a == b


def test_thread_pool_keeps_row_order(tmp_path, monkeypatch):
    serial = run_experiment(small_layer_decay(tmp_path, "s")).csv_path.read_bytes()
    monkeypatch.setenv("SLOWFORM_THREADS", "3")
    pooled = run_experiment(small_layer_decay(tmp_path, "p")).csv_path.read_bytes()
    assert serial == pooled


def test_bounds_experiment(tmp_path):
    cfg = ExperimentConfig(kind="bounds", options={"samples": 200, "lemmas": ["2.2", "basic"]},
                           out_dir=str(tmp_path / "b"))
    res = run_experiment(cfg)
    assert set(res.summary) == {"2.2", "basic"}
    assert all(r["status"] == "ok" for r in res.rows)


def test_failed_sub_runs_become_rows(tmp_path):
    cfg = ExperimentConfig(kind="rate_manifold", model="stommel", zeta=[0.1, 0.05, 0.02],
                           out_dir=str(tmp_path / "f"))
    res = run_experiment(cfg)
    assert all(r["status"].startswith("failed") for r in res.rows)
    assert res.summary["band"] is None
