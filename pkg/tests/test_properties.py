import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from slowform.bounds import lower_incomplete_gamma
from slowform.operators import (apply_semigroup, constant_matrix_operator, laplacian_operator,
                                shift_operator)
from slowform.spectral import (PolynomialMap, Term, evaluate_nonlinearity, hs_norm,
                               project_modes, random_smooth_field)
from slowform.splitting import compute_splitting

seeds = st.integers(0, 2 ** 32 - 1)
small_K = st.integers(1, 16)


def field(seed, K, ncomp=1, real=True):
    rng = np.random.default_rng(seed)
    return random_smooth_field(rng, K, ncomp, decay=1.0, real_flags=(real,) * ncomp)


def is_hermitian(c):
    return np.allclose(c, np.conj(c[..., ::-1]), rtol=0, atol=1e-14)


@given(seeds, small_K)
def test_parseval(seed, K):
    f = field(seed, K)
    values = f.to_physical(4 * K + 4)
    assert abs(hs_norm(f, 0) ** 2 - np.mean(np.abs(values) ** 2)) < 1e-12


@given(seeds, st.integers(1, 20), st.data())
def test_projections_split_the_identity(seed, K, data):
    f = field(seed, K, 2)
    t = data.draw(st.integers(0, K))
    low, high = project_modes(f, t, "low"), project_modes(f, t, "high")
    assert np.array_equal(low.coeffs + high.coeffs, f.coeffs)
    assert np.array_equal(project_modes(low, t, "low").coeffs, low.coeffs)
    assert np.array_equal(project_modes(high, t, "high").coeffs, high.coeffs)


@given(seeds, small_K)
@settings(deadline=None)
def test_cubic_matches_direct_convolution(seed, K):
    f = field(seed, K, real=False)
    cube = PolynomialMap(1, 1, (Term(0, 1.0, ((0, 3),)),))
    out = evaluate_nonlinearity(cube, [f]).coeffs[0]
    a = f.coeffs[0]
    # the exact cube keeps every intermediate mode and truncates only at the end
    full = np.convolve(np.convolve(a, a), a)[2 * K:4 * K + 1]
    assert np.max(np.abs(out - full)) < 1e-12


@given(seeds, small_K)
@settings(deadline=None)
def test_operations_keep_hermitian_symmetry(seed, K):
    f = field(seed, K)
    assert is_hermitian(f.coeffs)
    poly = PolynomialMap(1, 1, (Term(0, 1.0, ((0, 3),)), Term(0, -0.5, ((0, 2),))))
    assert is_hermitian(evaluate_nonlinearity(poly, [f]).coeffs)
    assert is_hermitian(apply_semigroup(laplacian_operator(1.0), 0.3, f).coeffs)


def operators():
    mat = np.array([[-1.0, 0.5], [-0.5, -2.0]])
    return st.sampled_from([(laplacian_operator(0.25), 1), (shift_operator(1.0), 1),
                            (constant_matrix_operator(mat), 2)])


@given(seeds, operators(), st.floats(0, 2), st.floats(0, 2))
def test_semigroup_property(seed, op_m, t, s):
    op, m = op_m
    f = field(seed, 8, m, real=False)
    once = apply_semigroup(op, t + s, f).coeffs
    twice = apply_semigroup(op, t, apply_semigroup(op, s, f)).coeffs
    assert np.max(np.abs(once - twice)) < 1e-12


@given(seeds, st.floats(0.1, 3), st.integers(0, 8))
def test_resolvent_inverts_the_symbol(seed, shift, k_min):
    op = laplacian_operator(shift)
    c = field(seed, 8, real=False).coeffs
    keep = np.abs(np.arange(-8, 9)) >= k_min
    back = op.inverse_array(op.apply_array(c), k_min)
    assert np.max(np.abs((back - c) * keep)) < 1e-13 * max(1.0, np.max(np.abs(c)))


@given(seeds, st.floats(0, 1), st.integers(0, 12))
def test_projection_commutes_with_semigroup(seed, t, k):
    op = laplacian_operator(0.5)
    f = field(seed, 12)
    a = project_modes(apply_semigroup(op, t, f), k, "low").coeffs
    b = apply_semigroup(op, t, project_modes(f, k, "low")).coeffs
    assert np.array_equal(a, b)


@given(st.floats(0.05, 1.0), st.floats(0, 50), st.floats(0, 50))
@settings(deadline=None)
def test_incomplete_gamma_monotone_and_bounded(gamma, t1, t2):
    lo, hi = sorted((t1, t2))
    g_lo, g_hi = lower_incomplete_gamma(gamma, lo), lower_incomplete_gamma(gamma, hi)
    assert g_lo <= g_hi * (1 + 1e-12)
    assert g_hi <= math.gamma(gamma) * (1 + 1e-12)


@given(st.floats(1e-3, 1.0), st.floats(-2.0, -0.05))
def test_splitting_per_mode_bounds(zeta, omega_A):
    q = -omega_A / zeta
    if q < 1:
        return
    sp = compute_splitting(zeta, omega_A, "stommel")
    k0 = sp.k0
    assert -k0 ** 2 <= -q + sp.N_F + 1e-9 * q
    assert (k0 - 1) ** 2 <= q - sp.N_S + 1e-9 * q
    assert sp.gap >= 2 * math.sqrt(q) - 3 - 1e-9
    if q >= k0 ** 2:
        assert math.isclose(sp.gap, 2 * k0 - 1, rel_tol=1e-12, abs_tol=1e-9)
    assert -q + sp.N_F < sp.eta < -q + sp.N_S


@given(st.floats(1e-3, 1.0), st.floats(-2.0, -0.05), st.floats(0, 50))
def test_splitting_decay_rates_pointwise_in_time(zeta, omega_A, t):
    if -omega_A / zeta < 1:
        return
    sp = compute_splitting(zeta, omega_A, "fhn")
    rate = omega_A / zeta
    slack = 1e-12 * (1 + abs(rate)) * t
    # compared as exponents: the factors themselves overflow for small zeta
    for k in range(sp.k0, sp.k0 + 5):
        assert -k * k * t <= (sp.N_F + rate) * t + slack
    for k in range(sp.k0):
        assert k * k * t <= -(sp.N_S + rate) * t + slack
