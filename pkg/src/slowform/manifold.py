"""Lyapunov-Perron construction of the slow-manifold chart and the measurements
built on it: distance to the critical manifold, invariance, attraction and
finite-difference derivatives.

A chart value h(v0) is the time-0 fast part (u, v_F) of the unique backward
trajectory z = (u, v_F, v_S) on [-T, 0] solving

    u(t)   = eps^-1 int_{-inf}^t e^{(t-s)A/eps} f(u, v) ds
    v_F(t) =        int_{-inf}^t e^{(t-s)B}   pr_F g(u, v) ds
    v_S(t) = e^{tB} v0 - int_t^0 e^{(t-s)B}   pr_S g(u, v) ds

with v = v_F + v_S.  Integrals use product integration: the integrand is
linear on each grid interval and the exponential weights are exact.  The
tail before -T is filled with the integrand frozen at -T.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .flows import (IntegratorConfig, TrajectoryRecord, critical_fast_array, integrate_full)
from .models import FastSlowSystem
from .operators import Propagator
from .spectral import ConfigurationError, SpectralField
from .splitting import ModeSplitting, gap_condition_margin

BACKWARD_AMPLIFICATION_LIMIT = 1e12
MACHINE_EPS = np.finfo(float).eps


class GapConditionError(ValueError):
    pass


class FixedPointError(RuntimeError):
    pass


@dataclass
class FixedPointReport:
    iterations: int
    contraction_ratios: list
    final_residual: float
    eta_used: float
    T_back: float
    grid_step: float
    gap_margin: float

    def to_json(self) -> dict:
        return {"iterations": self.iterations,
                "contraction_ratios": [float(r) for r in self.contraction_ratios],
                "final_residual": self.final_residual, "eta_used": self.eta_used,
                "T_back": self.T_back, "grid_step": self.grid_step,
                "gap_margin": self.gap_margin}


@dataclass
class BackwardPath:
    times: np.ndarray
    u: np.ndarray
    v_F: np.ndarray
    v_S: np.ndarray


@dataclass
class SlowManifoldChart:
    eps: float
    zeta: float
    splitting: ModeSplitting
    v0: SpectralField
    h_X: SpectralField
    h_F: SpectralField
    backward_path: BackwardPath = field(repr=False)
    report: FixedPointReport

    def to_json(self) -> dict:
        return {"eps": self.eps, "zeta": self.zeta, "splitting": self.splitting.to_json(),
                "v0": self.v0.to_json(), "h_X": self.h_X.to_json(), "h_F": self.h_F.to_json(),
                "report": self.report.to_json()}


def backward_horizon(eps: float, splitting: ModeSplitting, omega_A: float, tol: float,
                     margin: float) -> float:
    """Smallest T with exp(-|omega_A/eps - eta| T) < tol * margin, capped."""
    rate = abs(omega_A / eps - splitting.eta)
    T = math.log(1.0 / (tol * margin)) / rate
    return min(T, 50.0 * eps / abs(omega_A) + 5.0)


def default_grid_step(eps: float, zeta: float) -> float:
    return min(eps / 4.0, zeta / 4.0, 1e-2)


def _weighted_norm(system: FastSlowSystem, times: np.ndarray, eta: float, du, dvF, dvS):
    w = np.exp(-eta * times)
    return float(np.max(w * (system.x_norm(du) + system.y_norm(dvF) + system.y_norm(dvS))))


class _LPOperator:
    """Discrete Lyapunov-Perron operator on a fixed grid."""

    def __init__(self, system: FastSlowSystem, splitting: ModeSplitting, eps: float,
                 v0: np.ndarray, T: float, h: float):
        self.system = system
        self.eps = eps
        K = system.K
        n = max(int(math.ceil(T / h - 1e-9)), 1)
        self.h = h = T / n
        self.n = n
        self.times = -T + h * np.arange(n + 1)
        self.times[-1] = 0.0
        self.slow = splitting.slow_mask(K)
        self.fast = ~self.slow
        self.has_fast = bool(np.any(self.fast))
        self.PA = Propagator(system.A, h, K, scale=1.0 / eps)
        self.PF = Propagator(system.B, h, K, mode_mask=self.fast) if self.has_fast else None
        self.PS = Propagator(system.B, -h, K, mode_mask=self.slow)
        self.wA = (self.PA.combined(1.0, 1, -1.0, 2), self.PA.weights[2])
        if self.has_fast:
            self.wF = (self.PF.combined(1.0, 1, -1.0, 2), self.PF.weights[2])
        self.wS = (self.PS.weights[2], self.PS.combined(1.0, 1, -1.0, 2))
        B = system.B
        if not B.is_diagonal:
            raise ConfigurationError("the slow operator must be Fourier-diagonal")
        sym = B.diagonal_symbols(K)
        growth = np.exp(self.times[:, None, None] * sym[None])
        amp = float(np.max(np.abs(growth[0]) * self.slow))
        if amp > BACKWARD_AMPLIFICATION_LIMIT:
            raise FixedPointError(
                f"backward slow flow amplifies by {amp:.3e} over T={T}; reduce T_back")
        self.slow_free = (v0 * self.slow)[None] * growth * self.slow
        self.v_const = list(system.v_constant)
        self.v0 = v0

    def _fix_dummies(self, vS):
        if self.v_const:
            vS[:, self.v_const] = self.v0[self.v_const]
        return vS

    def apply(self, u, vF, vS):
        sysm, h, eps = self.system, self.h, self.eps
        v = vF + vS
        F = sysm.f_array(u, v)
        G = sysm.g_array(u, v)
        n = self.n
        u_new = np.empty_like(u)
        u_new[0] = -sysm.A.inverse_array(F[0])
        wa0, wa1 = self.wA
        for j in range(n):
            u_new[j + 1] = (self.PA.apply(0, u_new[j])
                            + (h / eps) * (self.PA.apply_weights(wa0, F[j])
                                           + self.PA.apply_weights(wa1, F[j + 1])))
        vF_new = np.zeros_like(vF)
        if self.has_fast:
            GF = G * self.fast
            vF_new[0] = self._fast_tail(GF[0])
            wf0, wf1 = self.wF
            for j in range(n):
                vF_new[j + 1] = (self.PF.apply(0, vF_new[j])
                                 + h * (wf0 * GF[j] + wf1 * GF[j + 1]))
            if self.v_const:
                # constant components carry no fast modes; their rows are neutral otherwise
                vF_new[:, self.v_const] = 0.0
        GS = G * self.slow
        J = np.zeros_like(vS)
        ws0, ws1 = self.wS
        for j in range(n - 1, -1, -1):
            J[j] = self.PS.apply(0, J[j + 1]) + h * (ws0 * GS[j] + ws1 * GS[j + 1])
        vS_new = self._fix_dummies(self.slow_free - J)
        return u_new, vF_new, vS_new

    def _fast_tail(self, g: np.ndarray) -> np.ndarray:
        sym = self.system.B.diagonal_symbols(self.system.K)
        safe = np.where(self.fast, sym, 1.0)
        return np.where(self.fast, -g / safe, 0.0)


def _check_slow_anchor(v0: np.ndarray, splitting: ModeSplitting, K: int) -> None:
    leak = np.max(np.abs(v0 * splitting.fast_mask(K))) if np.any(splitting.fast_mask(K)) else 0
    if leak > 1e-14 * max(1.0, float(np.max(np.abs(v0)))):
        raise ConfigurationError("anchor v0 must lie in the slow modes")


def lyapunov_perron_solve(system: FastSlowSystem, splitting: ModeSplitting, eps: float,
                          zeta: float, v0, T_back: float | None = None,
                          grid_step: float | None = None, tol: float = 1e-10,
                          max_iter: int = 100, initial: BackwardPath | None = None,
                          M_B: float | None = None) -> SlowManifoldChart:
    """Fixed point of the discrete Lyapunov-Perron operator anchored at v0."""
    if abs(splitting.zeta - zeta) > 1e-15 * zeta:
        raise ConfigurationError("splitting was built for a different zeta")
    M_B = system.splitting_M_B() if M_B is None else M_B
    margin = gap_condition_margin(eps, splitting, system.consts, system.setting,
                                  system.L_f, system.L_g, M_B)
    if not margin > 0:
        raise GapConditionError(f"gap condition fails: margin {margin:.4f} at eps={eps}, "
                                f"zeta={zeta}")
    K = system.K
    v0 = np.array(v0.coeffs if isinstance(v0, SpectralField) else v0, dtype=complex)
    _check_slow_anchor(v0, splitting, K)
    T = backward_horizon(eps, splitting, system.consts.omega_A, tol, margin) \
        if T_back is None else T_back
    h = default_grid_step(eps, zeta) if grid_step is None else grid_step
    op = _LPOperator(system, splitting, eps, v0, T, h)
    eta = splitting.eta
    if initial is not None and initial.u.shape[0] == op.n + 1:
        u, vF, vS = initial.u.copy(), initial.v_F.copy(), initial.v_S.copy()
    else:
        vS = op._fix_dummies(op.slow_free.copy())
        vF = np.zeros_like(vS)
        u, *_ = critical_fast_array(system, vS)
    ratios = []
    prev = None
    for it in range(1, max_iter + 1):
        u_n, vF_n, vS_n = op.apply(u, vF, vS)
        diff = _weighted_norm(system, op.times, eta, u_n - u, vF_n - vF, vS_n - vS)
        if prev is not None and prev > 0:
            ratios.append(diff / prev)
        prev = diff
        u, vF, vS = u_n, vF_n, vS_n
        if diff < tol:
            report = FixedPointReport(it, ratios, diff, eta, T, op.h, margin)
            path = BackwardPath(op.times, u, vF, vS)
            return SlowManifoldChart(eps, zeta, splitting, system.v_field(v0),
                                     system.u_field(u[-1]), system.v_field(vF[-1]),
                                     path, report)
    raise FixedPointError(f"Lyapunov-Perron iteration did not converge in {max_iter} steps "
                          f"(last difference {prev:.3e})")


def chart_distance_to_critical(system: FastSlowSystem, chart: SlowManifoldChart,
                               tol: float = 1e-12) -> float:
    """|h_X - h0(v0)|_{X_1} + |h_F|_{Y_1}."""
    u0, *_ = critical_fast_array(system, chart.v0.coeffs, tol)
    return float(system.x_norm(chart.h_X.coeffs - u0) + system.y_norm(chart.h_F.coeffs))


# ---------------------------------------------------------------------------
# measurements along forward trajectories


@dataclass
class ChartDeviation:
    times: np.ndarray
    deviations: np.ndarray
    out_of_chart: bool


def deviation_from_chart(system: FastSlowSystem, splitting: ModeSplitting, eps: float,
                         zeta: float, record: TrajectoryRecord, tol: float = 1e-10,
                         grid_step: float | None = None) -> ChartDeviation:
    """|u - h_X(pr_S v)|_{X_1} + |pr_F v - h_F(pr_S v)|_{Y_1} at each stored time,
    re-solving the chart with warm start from the previous sample."""
    devs = []
    path = None
    outside = False
    for u, v in zip(record.u, record.v):
        vS = splitting.project_slow(v)
        vF = splitting.project_fast(v)
        chart = lyapunov_perron_solve(system, splitting, eps, zeta, vS, tol=tol,
                                      grid_step=grid_step, initial=path)
        path = chart.backward_path
        devs.append(float(system.x_norm(u - chart.h_X.coeffs)
                          + system.y_norm(vF - chart.h_F.coeffs)))
        outside = outside or not system.inside_cutoffs(u, v)
    return ChartDeviation(record.times, np.array(devs), outside)


@dataclass
class InvarianceResult:
    deviation: float
    bound: float
    integrator_error: float
    tol: float
    out_of_chart: bool
    times: np.ndarray
    deviations: np.ndarray

    def __float__(self) -> float:
        return self.deviation

    @property
    def within_contract(self) -> bool:
        return self.deviation <= self.bound


def _trajectory_difference(system, a: TrajectoryRecord, b: TrajectoryRecord) -> float:
    n = min(len(a), len(b))
    return float(max(system.x_norm(a.u[i] - b.u[i]) + system.y_norm(a.v[i] - b.v[i])
                     for i in range(n)))


def verify_invariance(system: FastSlowSystem, chart: SlowManifoldChart, T_fwd: float,
                      cfg: IntegratorConfig, tol: float | None = None) -> InvarianceResult:
    """Integrate the full flow from a chart point and measure the distance to the chart.

    The integrator error is estimated by step halving; the contract is
    deviation <= 10 (tol + integrator error).
    """
    if not T_fwd > 0:
        raise ConfigurationError("T_fwd must be positive")
    tol = 1e-10 if tol is None else tol
    cfg = IntegratorConfig(cfg.h, T_fwd, cfg.scheme, cfg.store_every)
    v_start = chart.v0.coeffs + chart.h_F.coeffs
    rec = integrate_full(system, chart.eps, chart.h_X.coeffs, v_start, cfg)
    half = integrate_full(system, chart.eps, chart.h_X.coeffs, v_start, cfg.halved())
    err = _trajectory_difference(system, rec, half)
    dev = deviation_from_chart(system, chart.splitting, chart.eps, chart.zeta, rec, tol,
                               chart.report.grid_step)
    worst = float(np.max(dev.deviations))
    return InvarianceResult(worst, 10.0 * (tol + err), err, tol, dev.out_of_chart,
                            dev.times, dev.deviations)


@dataclass
class AttractionResult:
    rate: float
    fit_r2: float
    identifiable: bool
    times: np.ndarray
    phi: np.ndarray
    out_of_chart: bool

    def __iter__(self):
        return iter((self.rate, self.fit_r2))


def measure_attraction(system: FastSlowSystem, splitting: ModeSplitting, eps: float,
                       zeta: float, u0, v0F, v0S, T: float, cfg: IntegratorConfig,
                       tol: float = 1e-10) -> AttractionResult:
    """Fit the exponential decay of phi(t), the distance of the full flow to the chart."""
    from .harness import fit_rate

    arr = lambda x: np.asarray(x.coeffs if isinstance(x, SpectralField) else x, dtype=complex)
    v_start = arr(v0F) + arr(v0S)
    cfg = IntegratorConfig(cfg.h, T, cfg.scheme, cfg.store_every)
    rec = integrate_full(system, eps, arr(u0), v_start, cfg)
    dev = deviation_from_chart(system, splitting, eps, zeta, rec, tol)
    phi = dev.deviations
    start = int(math.floor(0.1 * len(phi)))
    window_t, window_phi = dev.times[start:], phi[start:]
    floor = 1e2 * MACHINE_EPS
    if len(window_phi) < 3 or np.any(window_phi <= floor):
        return AttractionResult(float("nan"), float("nan"), False, dev.times, phi,
                                dev.out_of_chart)
    fit = fit_rate(list(zip(window_t, window_phi)), log_log=False)
    return AttractionResult(-fit.slope, fit.r2, True, dev.times, phi, dev.out_of_chart)


@dataclass
class ChartJacobian:
    d_h_X: SpectralField
    d_h_F: SpectralField
    delta: float


def _chart_at(system, splitting, eps, zeta, v, tol, grid_step):
    c = lyapunov_perron_solve(system, splitting, eps, zeta, v, tol=tol, grid_step=grid_step)
    return c.h_X.coeffs, c.h_F.coeffs


def chart_jacobian_fd(system: FastSlowSystem, splitting: ModeSplitting, eps: float,
                      zeta: float, v0, direction, delta: float, tol: float = 1e-12,
                      grid_step: float | None = None) -> ChartJacobian:
    """Central difference (h(v0 + delta d) - h(v0 - delta d)) / (2 delta)."""
    v0 = np.asarray(v0.coeffs if isinstance(v0, SpectralField) else v0, dtype=complex)
    d = np.asarray(direction.coeffs if isinstance(direction, SpectralField) else direction,
                   dtype=complex)
    K = system.K
    _check_slow_anchor(d, splitting, K)
    norm = float(system.y_norm(d))
    if abs(norm - 1.0) > 1e-9:
        raise ConfigurationError(f"direction must have unit Y_1 norm, got {norm}")
    if system.v_constant and np.any(np.abs(d[list(system.v_constant)]) > 0):
        raise ConfigurationError("direction must not move the constant components")
    xp, fp = _chart_at(system, splitting, eps, zeta, v0 + delta * d, tol, grid_step)
    xm, fm = _chart_at(system, splitting, eps, zeta, v0 - delta * d, tol, grid_step)
    return ChartJacobian(system.u_field((xp - xm) / (2 * delta)),
                         system.v_field((fp - fm) / (2 * delta)), delta)


def richardson_ratio(system: FastSlowSystem, splitting: ModeSplitting, eps: float, zeta: float,
                     v0, direction, delta: float, tol: float = 1e-12,
                     grid_step: float | None = None) -> float:
    """|D(delta) - D(delta/2)| / |D(delta/2) - D(delta/4)|; about 4 for an O(delta^2) error."""
    ds = [chart_jacobian_fd(system, splitting, eps, zeta, v0, direction, delta / 2 ** i, tol,
                            grid_step) for i in range(3)]

    def gap(a, b):
        return float(system.x_norm(a.d_h_X.coeffs - b.d_h_X.coeffs)
                     + system.y_norm(a.d_h_F.coeffs - b.d_h_F.coeffs))

    return gap(ds[0], ds[1]) / gap(ds[1], ds[2])
