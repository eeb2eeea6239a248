"""Splitting of the slow space into fast-decaying and slow Fourier modes."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import special

from .spectral import ConfigurationError, wavenumbers

DIFFUSIVE_MODELS = ("stommel", "fhn")
# slow operators without a Fourier threshold: every mode is slow
GROUP_MODELS = ("maxwell_bloch", "linear")
# -omega_A/zeta within this relative distance of an integer is snapped to it,
# so ties computed in floating point land on the right-closed side
_TIE_RTOL = 1e-12


class InadmissibleParametersError(ValueError):
    pass


@dataclass(frozen=True)
class ModeSplitting:
    """Y = Y_F + Y_S with decay constants N_F < N_S and Lyapunov-Perron weight eta.

    Slow modes are |k| <= k0 - 1, fast modes |k| >= k0.  A trivial splitting
    has Y_F = {0}: every mode is slow.
    """

    zeta: float
    k0: int
    N_F: float
    N_S: float
    eta: float
    trivial: bool
    omega_A: float
    slow_shift: float = 0.0

    @property
    def gap(self) -> float:
        return self.N_S - self.N_F

    def slow_mask(self, K: int) -> np.ndarray:
        if self.trivial:
            return np.ones(2 * K + 1, dtype=bool)
        return np.abs(wavenumbers(K)) < self.k0

    def fast_mask(self, K: int) -> np.ndarray:
        return ~self.slow_mask(K)

    def project_slow(self, coeffs: np.ndarray) -> np.ndarray:
        K = (coeffs.shape[-1] - 1) // 2
        return coeffs * self.slow_mask(K)

    def project_fast(self, coeffs: np.ndarray) -> np.ndarray:
        K = (coeffs.shape[-1] - 1) // 2
        return coeffs * self.fast_mask(K)

    def to_json(self) -> dict:
        return asdict(self)


def _threshold_mode(q: float) -> int:
    """Largest k0 with k0^2 <= q (right-closed at exact squares)."""
    k0 = int(math.floor(math.sqrt(q)))
    while k0 * k0 > q:
        k0 -= 1
    while (k0 + 1) ** 2 <= q:
        k0 += 1
    return k0


def compute_splitting(zeta: float, omega_A: float, model: str,
                      slow_shift: float = 0.0, kappa: float = 0.0) -> ModeSplitting:
    """Fourier-threshold splitting for diffusive slow operators, trivial for groups.

    ``slow_shift`` is c in B = Delta - c: the low modes then grow backward at
    rate k^2 + c, which lowers N_S by c.  ``kappa`` is the damping of the
    group-generated slow operator.
    """
    if not zeta > 0:
        raise InadmissibleParametersError("zeta must be positive")
    if not omega_A < 0:
        raise InadmissibleParametersError("omega_A must be negative")
    q = -omega_A / zeta
    if abs(q - round(q)) <= _TIE_RTOL * q:
        q = float(round(q))
    if model in GROUP_MODELS:
        N_S = q - kappa
        if N_S <= 0:
            raise InadmissibleParametersError(
                f"zeta={zeta} too large: N_S = -omega_A/zeta - kappa = {N_S} <= 0")
        eta = -q + N_S / 2.0
        return ModeSplitting(zeta, 0, 0.0, N_S, eta, True, omega_A, 0.0)
    if model not in DIFFUSIVE_MODELS:
        raise ConfigurationError(f"unknown model {model!r}")
    k0 = _threshold_mode(q)
    if k0 < 1:
        raise InadmissibleParametersError(
            f"zeta={zeta} too large: -omega_A/zeta = {q} < 1 gives no slow/fast threshold")
    N_S = q - (k0 - 1) ** 2 - slow_shift
    N_F = max(q - k0 ** 2, 0.0)
    if not N_S > N_F:
        raise InadmissibleParametersError(
            f"slow shift {slow_shift} closes the gap: N_S={N_S} <= N_F={N_F}")
    eta = -q + (N_S + N_F) / 2.0
    return ModeSplitting(zeta, k0, N_F, N_S, eta, False, omega_A, slow_shift)


def gap_condition_terms(eps: float, splitting: ModeSplitting, consts, setting,
                        L_f: float, L_g: float, M_B: float | None = None):
    """The three contraction contributions of the Lyapunov-Perron operator."""
    if not eps > 0:
        raise InadmissibleParametersError("eps must be positive")
    gamma, delta = setting.gamma_X, setting.delta_Y
    zeta, N_S, N_F = splitting.zeta, splitting.N_S, splitting.N_F
    M_B = consts.M_B if M_B is None else M_B
    fast_den = 2.0 * (eps / zeta - 1.0) * consts.omega_A + eps * (N_S + N_F)
    gap = N_S - N_F
    if fast_den <= 0 or gap <= 0:
        raise InadmissibleParametersError(
            f"non-positive denominator (fast {fast_den}, gap {gap}) at eps={eps}, zeta={zeta}")
    t_fast = 2.0 ** gamma * L_f * consts.C_A * special.gamma(gamma) / fast_den ** gamma
    t_slow = 2.0 ** delta * L_g * consts.C_B * special.gamma(delta) / gap ** delta
    t_split = 2.0 * zeta ** (delta - 1.0) * L_g * M_B * special.gamma(delta) / gap
    return t_fast, t_slow, t_split


def gap_condition_margin(eps: float, splitting: ModeSplitting, consts, setting,
                         L_f: float, L_g: float, M_B: float | None = None) -> float:
    """1 minus the contraction bound; positive means the fixed-point map contracts."""
    return 1.0 - sum(gap_condition_terms(eps, splitting, consts, setting, L_f, L_g, M_B))


def max_epsilon_for_zeta(zeta: float, consts, setting, L_f: float, c: float = 0.5) -> float:
    """c zeta ((L_f C_A Gamma(gamma_X))^{1/gamma_X} + omega_A)/omega_A."""
    if not 0 < c < 1:
        raise InadmissibleParametersError("c must lie in (0, 1)")
    gamma = setting.gamma_X
    x = (L_f * consts.C_A * special.gamma(gamma)) ** (1.0 / gamma)
    return c * zeta * (x + consts.omega_A) / consts.omega_A
