import math

import pytest

from slowform.models import ScaleSetting
from slowform.operators import SemigroupConstants
from slowform.splitting import (InadmissibleParametersError, compute_splitting,
                                gap_condition_margin, max_epsilon_for_zeta)


def consts(C_A=1.0, omega_A=-1.0):
    return SemigroupConstants(1.0, C_A, omega_A, 1.0, 1.0, 0.0, omega_A, 0.0)


def test_worked_example_zeta_tenth():
    sp = compute_splitting(0.1, -0.9, "stommel")
    assert (sp.k0, sp.N_S, sp.N_F, sp.eta) == (3, 5.0, 0.0, -6.5)


def test_worked_example_zeta_twentieth():
    sp = compute_splitting(0.05, -0.9, "stommel")
    assert (sp.k0, sp.N_S, sp.N_F) == (4, 9.0, 2.0)
    assert sp.gap == 7.0 == 2 * 4 - 1


def test_tie_is_right_closed():
    assert compute_splitting(0.1, -0.9, "fhn").k0 == 3
    assert compute_splitting(1.0, -9.0, "fhn").k0 == 3


def test_group_model_is_trivial():
    sp = compute_splitting(0.1, -0.9, "maxwell_bloch", kappa=1.0)
    assert sp.trivial and sp.N_F == 0.0 and sp.N_S == pytest.approx(8.0)
    assert sp.slow_mask(4).all()


def test_inadmissible_inputs():
    with pytest.raises(InadmissibleParametersError):
        compute_splitting(2.0, -0.9, "stommel")
    with pytest.raises(InadmissibleParametersError):
        compute_splitting(0.1, 0.5, "stommel")
    with pytest.raises(InadmissibleParametersError):
        compute_splitting(-0.1, -0.9, "stommel")


def test_masks_partition_modes():
    sp = compute_splitting(0.05, -0.9, "stommel")
    assert (sp.slow_mask(8) ^ sp.fast_mask(8)).all()


def test_margin_without_nonlinearity():
    sp = compute_splitting(0.05, -0.9, "stommel")
    assert gap_condition_margin(1e-3, sp, consts(omega_A=-0.9), ScaleSetting(), 0.0, 0.0) == 1.0


def test_margin_monotone_in_lipschitz_constants():
    sp = compute_splitting(0.05, -0.9, "stommel")
    c = consts(omega_A=-0.9)
    s = ScaleSetting(gamma_X=0.5, delta_X=0.5, delta_Y=0.75)
    m = [gap_condition_margin(1e-3, sp, c, s, L, L) for L in (0.3, 0.2, 0.1)]
    assert m[0] < m[1] < m[2]


def test_stommel_default_margin_positive_at_zeta_002(stommel):
    sp = stommel.splitting(0.02)
    margin = gap_condition_margin(1e-4, sp, stommel.consts, stommel.setting, stommel.L_f,
                                  stommel.L_g, stommel.splitting_M_B())
    assert margin > 0


def test_stommel_margin_grows_when_zeta_halves(stommel):
    vals = [gap_condition_margin(1e-4, stommel.splitting(z), stommel.consts, stommel.setting,
                                 stommel.L_f, stommel.L_g, stommel.splitting_M_B())
            for z in (0.02, 0.01, 0.005)]
    assert vals[0] < vals[1] < vals[2]


def test_max_epsilon_examples():
    s = ScaleSetting(gamma_X=0.5, delta_X=0.5)
    assert max_epsilon_for_zeta(0.2, consts(), s, 0.0) == pytest.approx(0.1)
    val = max_epsilon_for_zeta(1.0, consts(C_A=1.0), s, 0.1)
    assert val == pytest.approx(0.5 * (1 - 0.01 * math.pi), rel=1e-14)
    assert val == pytest.approx(0.4843, abs=1e-4)
    assert max_epsilon_for_zeta(0.2, consts(), s, 0.1) < max_epsilon_for_zeta(0.4, consts(), s, 0.1)
    with pytest.raises(InadmissibleParametersError):
        max_epsilon_for_zeta(0.2, consts(), s, 0.1, c=1.5)
