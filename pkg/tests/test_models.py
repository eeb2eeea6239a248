import dataclasses

import numpy as np
import pytest

from slowform.flows import IntegratorConfig, integrate_full, solve_critical_manifold
from slowform.models import (LIPSCHITZ_SAFETY, InputBlock, LipschitzRegion, NormSpec,
                             ScaleSetting, build_model, estimate_lipschitz,
                             mb_critical_closed_form, mb_fast_state_from_closed_form,
                             mb_fast_matrix)
from slowform.spectral import (ConfigurationError, PolynomialMap, SpectralField, Term,
                               random_smooth_field)


def test_stommel_defaults_build(stommel):
    assert stommel.consts.omega_f < 0
    assert stommel.setting.delta_Y == 0.75 and stommel.setting.s == 0.3
    assert stommel.L_f * stommel.a_inverse_norm < 1


def test_fhn_spectral_bound(fhn):
    assert fhn.A.spectral_bound == pytest.approx(-0.25, abs=1e-15)


def test_maxwell_bloch_decoupled_fast_matrix(maxwell_bloch):
    p = dict(maxwell_bloch.params)
    eig = np.linalg.eigvals(mb_fast_matrix(p))
    assert np.allclose(np.sort(eig.real), [-1, -1, -1], atol=1e-14)
    assert np.allclose(eig.imag, 0, atol=1e-14)
    assert p["K_decay"] == pytest.approx(1.0, abs=1e-14)


def test_unknown_model_and_forced_exponents():
    with pytest.raises(ConfigurationError):
        build_model("lorenz")
    with pytest.raises(ConfigurationError):
        build_model("fhn", setting=ScaleSetting(gamma_X=0.5, delta_X=0.5), K=8)
    with pytest.raises(ConfigurationError):
        build_model("fhn", params={"bogus": 1.0}, K=8)


@pytest.mark.parametrize("name", ["stommel", "fhn", "maxwell_bloch", "linear"])
def test_origin_is_fixed(name, request):
    system = request.getfixturevalue(name)
    u, v = system.zeros_u(), system.zeros_v()
    assert np.max(np.abs(system.f_array(u, v))) == 0.0
    assert np.max(np.abs(system.g_array(u, v))) == 0.0


def test_mb_closed_form_zero_input():
    u1, u2 = mb_critical_closed_form(SpectralField(np.zeros(9), 4, (False,)), 0.05)
    assert np.max(np.abs(u1.coeffs)) == 0.0
    expect = np.zeros(9)
    expect[4] = 2.0
    assert np.max(np.abs(u2.coeffs[0] - expect)) < 1e-15


def test_mb_closed_form_unit_product():
    sigma = 0.05
    c = np.zeros(9, dtype=complex)
    c[4] = 1.0 / sigma
    u1, u2 = mb_critical_closed_form(SpectralField(c, 4, (False,)), sigma)
    assert u1.coeffs[0, 4] == pytest.approx(1.0, abs=1e-14)
    assert u2.coeffs[0, 4] == pytest.approx(1.0, abs=1e-14)
    assert np.max(np.abs(np.delete(u1.coeffs[0], 4))) < 1e-15


def test_mb_closed_form_depends_on_product_only():
    rng = np.random.default_rng(2)
    c = rng.standard_normal(17) + 1j * rng.standard_normal(17)
    v = SpectralField(c, 8, (False,))
    a1, a2 = mb_critical_closed_form(v, 0.05)
    b1, b2 = mb_critical_closed_form(v * 2.0, 0.025)
    assert np.max(np.abs(a1.coeffs - b1.coeffs)) < 1e-14
    assert np.max(np.abs(a2.coeffs - b2.coeffs)) < 1e-14


def test_mb_fixed_point_matches_closed_form(maxwell_bloch):
    rng = np.random.default_rng(7)
    base = random_smooth_field(rng, 32, 2, k_max=4).coeffs.copy()
    base *= 0.3 / np.max(np.abs(base))
    v = maxwell_bloch.slow_state(base, "slow")
    sol = solve_critical_manifold(maxwell_bloch, v)
    u1, u2 = mb_critical_closed_form(maxwell_bloch.v_field(v), maxwell_bloch.params["sigma"])
    exact = mb_fast_state_from_closed_form(u1, u2)
    assert float(maxwell_bloch.x_norm(sol.u.coeffs - exact)) < 1e-10


def identity_region(K, scale=1.0):
    center = np.zeros((1, 2 * K + 1), dtype=complex)
    return LipschitzRegion(center, (InputBlock((0,), NormSpec("hs", 0.0), scale),),
                           NormSpec("hs", 0.0))


def test_lipschitz_of_linear_map():
    spec = PolynomialMap(1, 1, (Term(0, 2.0, ((0, 1),)),), output_real=(True,))
    est = estimate_lipschitz(spec, identity_region(4), samples=200)
    assert 2.0 * (1 - 1e-9) <= est <= 2.0 * LIPSCHITZ_SAFETY * (1 + 1e-9)


def test_lipschitz_of_zero_map():
    assert estimate_lipschitz(PolynomialMap(1, 1, ()), identity_region(4), samples=200) == 0.0


def test_lipschitz_rejects_few_samples():
    spec = PolynomialMap(1, 1, (Term(0, 2.0, ((0, 1),)),))
    with pytest.raises(ConfigurationError):
        estimate_lipschitz(spec, identity_region(4), samples=10)


def test_fhn_fast_lipschitz_below_decay(fhn):
    assert estimate_lipschitz(fhn.f_spec, fhn.regions["f"], samples=500) < fhn.params["a"]
    assert fhn.L_f < fhn.params["a"]


def test_stommel_critical_manifold_is_one(stommel):
    rng = np.random.default_rng(0)
    base = random_smooth_field(rng, 32, 1).coeffs.copy()
    sol = solve_critical_manifold(stommel, stommel.slow_state(base, "slow"))
    one = np.zeros(65)
    one[32] = 1.0
    assert np.max(np.abs(sol.u.coeffs[0] - one)) < 1e-12
    assert sol.residual < 1e-12


def uncut(spec: PolynomialMap) -> PolynomialMap:
    terms = tuple(dataclasses.replace(t, cutoffs=()) for t in spec.terms)
    return dataclasses.replace(spec, terms=terms, cutoffs=())


@pytest.mark.parametrize("name", ["stommel", "fhn", "maxwell_bloch"])
def test_cutoffs_are_transparent_inside_region(name, request):
    system = request.getfixturevalue(name)
    rng = np.random.default_rng(5)
    v = system.slow_state(random_smooth_field(rng, system.K, system.nv, k_max=3).coeffs * 1e-3,
                          "full", eps=1e-4)
    u = solve_critical_manifold(system, v).u.coeffs
    assert system.inside_cutoffs(u, v)
    z = system.joint(u, v)
    for spec in (system.f_spec, system.g_spec):
        if any(set(c.inputs) <= spec.constant_inputs for c in spec.cutoffs):
            continue
        assert np.array_equal(spec.evaluate_array(z), uncut(spec).evaluate_array(z))


def test_fhn_rescaling_consistency(fhn):
    a = fhn.params["a"]
    chi_terms = fhn.f_spec.terms[:2]
    original_f = dataclasses.replace(fhn.f_spec, terms=chi_terms + (Term(0, -1.0, ((1, 1),)),))
    original_g = dataclasses.replace(fhn.g_spec, terms=(Term(0, 1.0, ((0, 1),)),))
    original = dataclasses.replace(fhn, f_spec=original_f, g_spec=original_g)
    rng = np.random.default_rng(9)
    w0 = random_smooth_field(rng, 32, 1, k_max=3).coeffs * 1e-3
    u0 = random_smooth_field(rng, 32, 1, k_max=3).coeffs * 1e-3
    cfg = IntegratorConfig(1e-3, 0.2, "ETD2", 50)
    orig = integrate_full(original, 0.01, u0, w0, cfg)
    resc = integrate_full(fhn, 0.01, u0, (2 / a) * w0, cfg)
    assert np.max(np.abs(orig.u - resc.u)) < 1e-13
    assert np.max(np.abs(orig.v - (a / 2) * resc.v)) < 1e-13
