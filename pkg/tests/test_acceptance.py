"""One pass/fail check per acceptance criterion, at the stated tolerances."""

import time

import numpy as np
import pytest

from slowform import bounds
from slowform.cli import load_preset
from slowform.flows import IntegratorConfig, integrate_full, solve_critical_manifold
from slowform.harness import ExperimentConfig, default_slow_data, run_experiment
from slowform.manifold import lyapunov_perron_solve
from slowform.models import build_model, mb_critical_closed_form, mb_fast_state_from_closed_form
from slowform.operators import apply_semigroup, laplacian_operator
from slowform.spectral import (PolynomialMap, SpectralField, Term, evaluate_nonlinearity,
                               random_smooth_field, wavenumbers)
from slowform.splitting import compute_splitting, gap_condition_margin


def preset_run(name, tmp_path, **overrides):
    data = load_preset(name)
    data.update(overrides)
    data["out_dir"] = str(tmp_path / name)
    return run_experiment(ExperimentConfig.from_json(data))


def test_criterion_01_maxwell_bloch_critical_manifold_oracle():
    system = build_model("maxwell_bloch")
    assert system.params["sigma"] == 0.05
    start = time.perf_counter()
    worst = 0.0
    for seed in range(20):
        v = system.slow_state(default_slow_data(system, seed), "slow")
        sol = solve_critical_manifold(system, v)
        u1, u2 = mb_critical_closed_form(system.v_field(v), system.params["sigma"])
        worst = max(worst, float(system.x_norm(sol.u.coeffs - mb_fast_state_from_closed_form(
            u1, u2))))
    assert worst < 1e-10
    assert time.perf_counter() - start < 5.0


def test_criterion_02_stommel_trivial_critical_manifold():
    system = build_model("stommel")
    start = time.perf_counter()
    one = np.zeros(2 * system.K + 1)
    one[system.K] = 1.0
    for seed in range(10):
        v = system.slow_state(default_slow_data(system, seed), "slow")
        u = solve_critical_manifold(system, v).u.coeffs[0]
        assert np.max(np.abs(u - one)) < 1e-12
    assert time.perf_counter() - start < 1.0


def test_criterion_03_linear_invariant_graph_oracle():
    system = build_model("linear", K=0)
    p = system.params
    start = time.perf_counter()
    checked = 0
    for zeta in (0.2, 0.1, 0.05):
        sp = system.splitting(zeta)
        for eps in (0.05, 0.02, 0.01):
            margin = gap_condition_margin(eps, sp, system.consts, system.setting, system.L_f,
                                          system.L_g, system.splitting_M_B())
            assert margin > 0
            chart = lyapunov_perron_solve(system, sp, eps, zeta, np.array([[0.3 + 0j]]),
                                          tol=1e-12, grid_step=1e-4)
            expected = p["c"] * 0.3 / (eps * p["lambda_B"] - p["lambda_A"])
            assert abs(chart.h_X.coeffs[0, 0] - expected) < 1e-9
            assert all(r <= 1 - margin for r in chart.report.contraction_ratios)
            checked += 1
    assert checked == 9
    assert time.perf_counter() - start < 10.0


@pytest.mark.slow
def test_criterion_04_flow_approximation_rate_fhn(tmp_path):
    fit = preset_run("rate_flow_fhn", tmp_path).summary["fit"]
    assert 0.85 <= fit["slope"] <= 1.15


@pytest.mark.slow
def test_criterion_04_flow_approximation_rate_stommel(tmp_path):
    fit = preset_run("rate_flow_stommel", tmp_path).summary["fit"]
    assert fit["slope"] >= 0.6


def test_criterion_05_initial_layer_decay(tmp_path):
    res = preset_run("layer_decay_stommel", tmp_path)
    assert res.summary["rate_vs_inverse_eps"]["r2"] > 0.95
    assert res.summary["max_bound_excess"] <= 1e-10


@pytest.mark.slow
def test_criterion_06_manifold_distance_band(tmp_path):
    res = preset_run("rate_manifold_stommel", tmp_path).summary
    assert not res["failed_levels"]
    assert res["monotone_nonincreasing"]
    assert res["band"] <= 3.0


@pytest.mark.slow
@pytest.mark.parametrize("model", ["stommel", "fhn", "maxwell_bloch"])
def test_criterion_07_attraction(tmp_path, model):
    res = preset_run(f"attraction_{model}", tmp_path).summary
    assert res["identifiable"] and not res["out_of_chart"]
    assert res["rate"] > 0
    assert res["r2"] > 0.99


@pytest.mark.slow
@pytest.mark.parametrize("model", ["stommel", "fhn", "maxwell_bloch"])
def test_criterion_07_invariance(tmp_path, model):
    data = load_preset(f"invariance_{model}")
    assert data["integrator"]["T"] == 1.0
    res = preset_run(f"invariance_{model}", tmp_path).summary
    assert not res["out_of_chart"]
    assert res["within_contract"]


def test_criterion_08_bound_suites():
    start = time.perf_counter()
    for lemma in bounds.GAMMA_LEMMAS:
        assert bounds.verify_gamma_lemma(lemma, samples=10_000, seed=42).max_violation <= 1e-8
    for kind in bounds.GRONWALL_KINDS:
        assert bounds.gronwall_suite(kind, samples=10_000, seed=42).max_violation <= 1e-8
    honest, corrupted, _ = bounds.corrupted_constant_selftest()
    assert honest.max_violation <= 1e-8
    assert corrupted.max_violation > 1e-8
    assert time.perf_counter() - start < 60.0


def test_criterion_09_numerical_kernels():
    K = 16
    rng = np.random.default_rng(9)
    f = SpectralField(rng.standard_normal(2 * K + 1) + 0j, K, (False,))
    out = apply_semigroup(laplacian_operator(0.25), 0.37, f).coeffs[0]
    exact = np.exp((-wavenumbers(K) ** 2 - 0.25) * 0.37) * f.coeffs[0]
    assert np.max(np.abs(out - exact)) < 1e-13

    g = random_smooth_field(rng, K, 1, decay=1.0)
    cube = evaluate_nonlinearity(PolynomialMap(1, 1, (Term(0, 1.0, ((0, 3),)),)), [g])
    a = g.coeffs[0]
    direct = np.convolve(np.convolve(a, a), a)[2 * K:4 * K + 1]
    assert np.max(np.abs(cube.coeffs[0] - direct)) < 1e-12

    fhn = build_model("fhn")
    v0 = random_smooth_field(np.random.default_rng(3), 32, 1, k_max=4).coeffs * 2e-3
    u0 = solve_critical_manifold(fhn, v0).u.coeffs + 1e-3
    for scheme, low, high in (("expEuler", 1.7, 2.3), ("ETD2", 3.4, 4.6)):
        recs = [integrate_full(fhn, 1e-2, u0, v0,
                               IntegratorConfig(h, 0.1, scheme, round(0.1 / h)))
                for h in (1e-3, 5e-4, 2.5e-4)]
        d = [float(fhn.x_norm(a.u[-1] - b.u[-1]) + fhn.y_norm(a.v[-1] - b.v[-1]))
             for a, b in zip(recs, recs[1:])]
        assert low <= d[0] / d[1] <= high

    sp = compute_splitting(0.1, -0.9, "stommel")
    assert (sp.k0, sp.N_S, sp.N_F, sp.eta) == (3, 5.0, 0.0, -6.5)
    sp = compute_splitting(0.05, -0.9, "stommel")
    assert (sp.k0, sp.N_S, sp.N_F) == (4, 9.0, 2.0)


def test_criterion_10_determinism(tmp_path):
    a = preset_run("layer_decay_stommel", tmp_path / "a").csv_path.read_bytes()
    b = preset_run("layer_decay_stommel", tmp_path / "b").csv_path.read_bytes()
    assert a == b
