import math

import mpmath
import numpy as np
import pytest
from scipy import special

from slowform import bounds
from slowform.bounds import (HypothesisError, Kernel, corrupted_constant_selftest, lemma_2_2,
                             lower_incomplete_gamma, omega_constants, sample_gronwall_cases,
                             solve_volterra, verify_gamma_lemma, verify_gronwall)
from slowform.models import ScaleSetting
from slowform.operators import SemigroupConstants


def test_incomplete_gamma_closed_forms():
    assert lower_incomplete_gamma(1.0, 1.0) == pytest.approx(1 - math.exp(-1), abs=1e-14)
    assert lower_incomplete_gamma(0.5, 1e6) == pytest.approx(math.sqrt(math.pi), abs=1e-12)
    assert lower_incomplete_gamma(0.5, 0.0) == 0.0


def test_incomplete_gamma_against_independent_quadrature():
    mpmath.mp.dps = 30
    oracle = float(mpmath.quad(lambda r: mpmath.e ** (-r) * r ** (-0.5), [0, 1]))
    assert oracle == pytest.approx(1.493648266, abs=1e-9)
    assert lower_incomplete_gamma(0.5, 1.0) == pytest.approx(oracle, abs=1e-12)
    assert oracle == pytest.approx(math.sqrt(math.pi) * math.erf(1.0), abs=1e-14)


def test_incomplete_gamma_rejects_bad_exponent():
    with pytest.raises(ValueError):
        lower_incomplete_gamma(1.5, 1.0)


def test_lemma_2_2_boundary_case():
    lhs, rhs = lemma_2_2(1.0, -2.0, 0.1, 1.0)
    assert lhs == pytest.approx((1 - math.exp(-20)) / 2, abs=1e-13)
    assert rhs == pytest.approx(0.5)
    assert lhs <= rhs
    lhs0, rhs0 = lemma_2_2(0.7, -2.0, 0.1, 0.0)
    assert lhs0 == 0.0 and rhs0 >= 0.0


@pytest.mark.parametrize("lemma_id", bounds.GAMMA_LEMMAS)
def test_gamma_lemmas_hold_on_random_grid(lemma_id):
    rep = verify_gamma_lemma(lemma_id, samples=300, seed=5)
    assert rep.samples_checked == 300
    assert rep.max_violation <= 1e-10


def test_gamma_lemma_rejects_bad_tuples():
    rep = verify_gamma_lemma("2.2", params=[(1.0, -2.0, 0.1, 1.0), (2.0, -1.0, 0.1, 1.0)])
    assert rep.samples_checked == 1 and rep.rejected == 1
    with pytest.raises(HypothesisError):
        verify_gamma_lemma("2.3", params=[(0.5, -1.0, -2.0, 0.1, 1.0)])
    with pytest.raises(ValueError):
        verify_gamma_lemma("9.9")


def test_gronwall_basic_zero_kernel():
    t = np.linspace(0, 2, 101)
    c = 1.0 + t
    v = 0.9 * c
    rep = verify_gronwall("basic", v, c, {"u": np.zeros_like(t)}, T=2.0)
    assert rep.max_violation <= 0.0


def test_gronwall_rejects_hypothesis_violation():
    t = np.linspace(0, 1, 51)
    c = np.ones_like(t)
    with pytest.raises(HypothesisError):
        verify_gronwall("basic", 2 * c, c, {"u": np.zeros_like(t)}, T=1.0)


def test_specific_equality_case_and_corrupted_constant():
    good, bad, achieved = corrupted_constant_selftest()
    assert achieved < 1e-10
    assert good.max_violation < 0.0
    assert bad.max_violation > 0.0


def test_volterra_oracle_against_closed_form():
    # v = 1 + int_0^t v ds has the solution e^t
    t, v, achieved = solve_volterra(lambda s: np.ones_like(s), [Kernel(1.0, 0.0, 1.0)], 1.0)
    assert achieved < 1e-10
    assert np.max(np.abs(v - np.exp(t))) < 1e-9


def test_volterra_oracle_weakly_singular():
    # v = 1 + int (t-s)^{-1/2}/Gamma(1/2) v ds is solved by the Mittag-Leffler E_{1/2}(t^{1/2})
    # the sqrt(t) start limits piecewise-linear accuracy; the reported
    # agreement must still bound the true error
    t, v, achieved = solve_volterra(lambda s: np.ones_like(s),
                                    [Kernel(1 / special.gamma(0.5), 0.0, 0.5)], 1.0, tol=1e-8)
    exact = np.exp(t) * special.erfc(-np.sqrt(t))
    err = np.max(np.abs(v - exact))
    assert err < 1e-4
    assert err <= 2 * achieved


@pytest.mark.parametrize("kind", bounds.GRONWALL_KINDS)
def test_gronwall_random_cases_hold(kind):
    v, c, cp, h, params = sample_gronwall_cases(kind, 100, seed=11)
    hyp, viol = bounds._gronwall_batch(kind, v, c, h, params, cp)
    assert np.all(hyp)
    assert np.max(viol) <= 1e-8


def test_omega_constants_examples():
    consts = SemigroupConstants(1.0, 1.0, -1.0, 1.0, 1.0, -1.0, -1.0, 0.0)
    half = ScaleSetting(gamma_X=0.5, delta_X=0.5, delta_Y=1.0)
    wf, _ = omega_constants(half, consts, 0.1, 0.0)
    assert wf == pytest.approx(-0.92, abs=1e-14)
    one = ScaleSetting(gamma_X=1.0, delta_Y=1.0)
    wf1, _ = omega_constants(one, consts, 0.1, 0.0, margin=1e-3)
    assert wf1 == pytest.approx(-0.899, abs=1e-14)
    wf0, _ = omega_constants(half, consts, 1e-12, 0.0)
    assert wf0 == pytest.approx(-1.0, abs=1e-12)
