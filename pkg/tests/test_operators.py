import math

import mpmath
import numpy as np
import pytest

from slowform.operators import (BackwardFlowError, DivergentSupError, SingularOperatorError,
                                apply_resolvent_inverse, apply_semigroup, diagonal_operator,
                                estimate_scale_constant, laplacian_operator, phi_function,
                                shift_operator)
from slowform.spectral import SpectralField, wavenumbers


def mode_field(K, k, val=1.0, real=False):
    c = np.zeros(2 * K + 1, dtype=complex)
    c[k + K] = val
    if real:
        c[-k + K] = np.conj(val)
    return SpectralField(c, K, (real,))


def test_heat_semigroup_factor():
    A = laplacian_operator(1.0)
    out = apply_semigroup(A, 0.5, mode_field(4, 2))
    assert out.coeffs[0, 6] == pytest.approx(math.exp(-2.5), abs=1e-15)
    assert math.exp(-2.5) == pytest.approx(0.0820850, abs=1e-7)


def test_semigroup_at_zero_is_identity():
    rng = np.random.default_rng(0)
    f = SpectralField(rng.standard_normal(9) + 0j, 4, (False,))
    assert np.array_equal(apply_semigroup(laplacian_operator(1.0), 0.0, f).coeffs, f.coeffs)


def test_shift_group_full_rotation():
    B = shift_operator(0.0)
    K = 6
    rng = np.random.default_rng(1)
    c = rng.standard_normal(2 * K + 1) + 1j * rng.standard_normal(2 * K + 1)
    f = SpectralField(c, K, (False,))
    out = apply_semigroup(B, 2 * math.pi, f)
    assert np.max(np.abs(out.coeffs - f.coeffs)) < 1e-13
    back = apply_semigroup(B, -1.0, apply_semigroup(B, 1.0, f))
    assert np.max(np.abs(back.coeffs - f.coeffs)) < 1e-13


def test_backward_heat_flow_is_refused():
    with pytest.raises(BackwardFlowError):
        apply_semigroup(laplacian_operator(1.0), -0.1, mode_field(2, 1))


def test_resolvent_inverse_examples():
    A = laplacian_operator(1.0)
    one = mode_field(3, 0, 1.0, real=True)
    assert apply_resolvent_inverse(A, one).coeffs[0, 3] == pytest.approx(-1.0)
    sin = SpectralField(mode_field(3, 1, -0.5j).coeffs + mode_field(3, -1, 0.5j).coeffs,
                        3, (True,))
    out = apply_resolvent_inverse(A, sin)
    assert np.max(np.abs(out.coeffs + sin.coeffs / 2)) < 1e-15
    lap = laplacian_operator(0.0)
    e2 = mode_field(4, 2)
    out = apply_resolvent_inverse(lap, e2, ("high", 2))
    assert out.coeffs[0, 6] == pytest.approx(-0.25)


def test_singular_inverse_is_reported():
    with pytest.raises(SingularOperatorError):
        apply_resolvent_inverse(laplacian_operator(0.0), mode_field(2, 0))


def test_phi_values():
    assert phi_function(1, 0.0) == 1.0
    assert phi_function(1, 1.0) == pytest.approx(math.e - 1, rel=1e-15)
    assert phi_function(0, 0.3) == pytest.approx(math.exp(0.3))
    with pytest.raises(ValueError):
        phi_function(3, 1.0)


def test_phi2_small_argument_against_extended_precision():
    z = -1e-8
    mpmath.mp.dps = 50
    zz = mpmath.mpf(z)
    exact = float((mpmath.exp(zz) - 1 - zz) / zz ** 2)
    assert abs(phi_function(2, z).real - exact) / exact < 1e-14
    assert exact == pytest.approx(0.5, rel=1e-8)


def test_phi_branches_agree_at_switch():
    for n in (1, 2):
        for z in (0.0999999, 0.1000001, -0.0999999j, -0.1000001j):
            mpmath.mp.dps = 40
            zz = mpmath.mpc(z)
            exact = (mpmath.exp(zz) - 1) / zz if n == 1 else (mpmath.exp(zz) - 1 - zz) / zz ** 2
            assert abs(phi_function(n, z) - complex(exact)) < 1e-15


def test_scale_constant_examples():
    A = laplacian_operator(1.0)
    assert estimate_scale_constant(A, 1, 1, -1.0, safety=1.0) == pytest.approx(1.0)
    ident = diagonal_operator((0.0,), rate=(1.0,))
    assert estimate_scale_constant(ident, 0.5, 0.5, -1.0, safety=1.0) == pytest.approx(1.0)


def test_scale_constant_grid_refinement():
    A = laplacian_operator(1.0)
    coarse = estimate_scale_constant(A, 0.25, 1.0, -0.9, n_t=200, safety=1.0)
    fine = estimate_scale_constant(A, 0.25, 1.0, -0.9, n_t=400, safety=1.0)
    assert np.isfinite(coarse)
    assert abs(fine - coarse) / fine < 0.01


def test_scale_constant_divergent():
    with pytest.raises(DivergentSupError):
        estimate_scale_constant(laplacian_operator(1.0), 0.0, 0.5, -1.0)


def test_heat_semigroup_matches_analytic_per_mode():
    K = 16
    A = laplacian_operator(0.25)
    rng = np.random.default_rng(4)
    c = rng.standard_normal(2 * K + 1) + 0j
    f = SpectralField(c, K, (False,))
    t = 0.37
    out = apply_semigroup(A, t, f).coeffs[0]
    k = wavenumbers(K)
    expect = c * np.exp(-(k ** 2 + 0.25) * t)
    assert np.max(np.abs(out - expect) / np.maximum(np.abs(expect), 1e-300)) < 1e-13
