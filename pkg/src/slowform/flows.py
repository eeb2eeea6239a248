"""Exponential integrators for the full, slow, extended-slow and reduced flows,
and the fixed-point solver for the critical manifold u = h0(v)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .models import FastSlowSystem
from .operators import Propagator
from .spectral import ConfigurationError, InvalidFieldError, SpectralField, hs_norm_array, \
    c1_norm_array
from .splitting import ModeSplitting

BLOWUP_NORM = 1e8
SCHEMES = ("expEuler", "ETD2")


class BlowUpError(RuntimeError):
    pass


class NonConvergenceError(RuntimeError):
    pass


class ContractionError(ValueError):
    pass


@dataclass(frozen=True)
class IntegratorConfig:
    h: float
    T: float
    scheme: str = "expEuler"
    store_every: int = 1

    def __post_init__(self):
        if not self.h > 0:
            raise ConfigurationError("step h must be positive")
        if not self.T >= self.h * (1 - 1e-12):
            raise ConfigurationError("horizon T must be at least one step")
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"scheme must be one of {SCHEMES}")
        if self.store_every < 1:
            raise ConfigurationError("store_every must be a positive integer")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.h))

    def halved(self) -> "IntegratorConfig":
        return IntegratorConfig(self.h / 2, self.T, self.scheme, 2 * self.store_every)

    def to_json(self) -> dict:
        return {"h": self.h, "T": self.T, "scheme": self.scheme, "store_every": self.store_every}


@dataclass
class TrajectoryRecord:
    """Stored samples of a flow; u and v have shape (n_samples, ncomp, 2K+1)."""

    times: np.ndarray
    u: np.ndarray
    v: np.ndarray
    x_norms: np.ndarray
    y_norms: np.ndarray
    meta: dict = field(default_factory=dict)
    u_critical: np.ndarray | None = None

    def __post_init__(self):
        if len(self.times) != len(self.u) or len(self.times) != len(self.v):
            raise ConfigurationError("state count must equal time count")
        if np.any(np.diff(self.times) <= 0):
            raise ConfigurationError("times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)

    def state(self, i: int, system: FastSlowSystem) -> tuple[SpectralField, SpectralField]:
        return system.u_field(self.u[i]), system.v_field(self.v[i])

    @property
    def states(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return list(zip(self.u, self.v))


class CriticalSolution(NamedTuple):
    u: SpectralField
    iterations: int
    residual: float
    ratio: float


def _x_residual_norm(system: FastSlowSystem, r: np.ndarray) -> np.ndarray:
    if system.setting.norm_kind == "c1":
        return c1_norm_array(r, system.u_groups)
    return hs_norm_array(r, system.setting.x_order(0.0))


def critical_fast_array(system: FastSlowSystem, v: np.ndarray, tol: float = 1e-11,
                        max_iter: int = 200, u_init: np.ndarray | None = None):
    """Iterate u <- -A^{-1} f(u, v); v may carry leading batch axes.

    Returns (u, iterations, residual, last contraction ratio); residual and
    ratio are maxima over the batch.
    """
    if not system.L_f * system.a_inverse_norm < 1:
        raise ContractionError(
            f"L_f |A^-1| = {system.L_f * system.a_inverse_norm} >= 1: no contraction")
    shape = v.shape[:-2] + (system.nu, v.shape[-1])
    u = np.zeros(shape, dtype=complex) if u_init is None else np.array(u_init, dtype=complex)
    prev_step = None
    ratio = 0.0
    for it in range(1, max_iter + 1):
        u_new = -system.A.inverse_array(system.f_array(u, v))
        step = float(np.max(system.x_norm(u_new - u)))
        if prev_step is not None and prev_step > 0:
            ratio = step / prev_step
        prev_step = step
        u = u_new
        if step <= tol:
            resid = system.A.apply_array(u) + system.f_array(u, v)
            residual = float(np.max(_x_residual_norm(system, resid)))
            if residual < tol:
                return u, it, residual, ratio
    raise NonConvergenceError(
        f"critical-manifold iteration did not converge in {max_iter} steps "
        f"(last step {prev_step:.3e}, ratio {ratio:.3f})")


def solve_critical_manifold(system: FastSlowSystem, v: SpectralField | np.ndarray,
                            tol: float = 1e-11, max_iter: int = 200,
                            u_init=None) -> CriticalSolution:
    """Fixed point u = h0(v) of u <- -A^{-1} f(u, v)."""
    arr = v.coeffs if isinstance(v, SpectralField) else np.asarray(v, dtype=complex)
    init = u_init.coeffs if isinstance(u_init, SpectralField) else u_init
    u, it, res, ratio = critical_fast_array(system, arr, tol, max_iter, init)
    return CriticalSolution(system.u_field(u), it, res, ratio)


# ---------------------------------------------------------------------------
# time stepping


def _as_coeffs(x, K: int, ncomp: int) -> np.ndarray:
    arr = x.coeffs if isinstance(x, SpectralField) else np.asarray(x, dtype=complex)
    arr = np.atleast_2d(arr)
    if arr.shape != (ncomp, 2 * K + 1):
        raise ConfigurationError(
            f"initial field has shape {arr.shape}, expected {(ncomp, 2 * K + 1)}")
    if not np.all(np.isfinite(arr)):
        raise InvalidFieldError("initial field is not finite")
    return np.array(arr, dtype=complex)


def _guard(system: FastSlowSystem, step: int, u: np.ndarray, v: np.ndarray):
    xn, yn = float(system.x_norm(u)), float(system.y_norm(v))
    if not (np.isfinite(xn) and np.isfinite(yn)) or max(xn, yn) > BLOWUP_NORM:
        raise BlowUpError(f"state norm {max(xn, yn):.3e} at step {step}")
    return xn, yn


def _restore_dummies(system: FastSlowSystem, v: np.ndarray, v0: np.ndarray) -> np.ndarray:
    if system.v_constant:
        idx = list(system.v_constant)
        v[idx] = v0[idx]
    return v


class _Recorder:
    def __init__(self, system, cfg: IntegratorConfig, meta: dict):
        self.system = system
        self.cfg = cfg
        self.meta = meta
        self.t, self.u, self.v, self.x, self.y = [], [], [], [], []

    def push(self, step: int, t: float, u: np.ndarray, v: np.ndarray, force=False):
        xn, yn = _guard(self.system, step, u, v)
        if step % self.cfg.store_every == 0 or force:
            if self.t and abs(self.t[-1] - t) < 1e-15:
                return
            self.t.append(t)
            self.u.append(u.copy())
            self.v.append(v.copy())
            self.x.append(xn)
            self.y.append(yn)

    def record(self) -> TrajectoryRecord:
        return TrajectoryRecord(np.array(self.t), np.array(self.u), np.array(self.v),
                                np.array(self.x), np.array(self.y), dict(self.meta))


def integrate_full(system: FastSlowSystem, eps: float, u0, v0,
                   cfg: IntegratorConfig) -> TrajectoryRecord:
    """eps u' = A u + f, v' = B v + g by exponential Euler or ETD2 (Cox-Matthews RK)."""
    if not eps > 0:
        raise ConfigurationError("eps must be positive")
    K = system.K
    u = _as_coeffs(u0, K, system.nu)
    v = _as_coeffs(v0, K, system.nv)
    v_start = v.copy()
    h = cfg.h
    PA = Propagator(system.A, h, K, scale=1.0 / eps)
    PB = Propagator(system.B, h, K)
    rec = _Recorder(system, cfg, {"flow": "full", "eps": eps, "h": h, "model": system.model_id,
                                  "scheme": cfg.scheme})
    rec.push(0, 0.0, u, v)
    n = cfg.n_steps
    for step in range(1, n + 1):
        fu, gv = system.f_array(u, v), system.g_array(u, v)
        ua = PA.apply(0, u) + (h / eps) * PA.apply(1, fu)
        va = PB.apply(0, v) + h * PB.apply(1, gv)
        if cfg.scheme == "ETD2":
            _restore_dummies(system, va, v_start)
            fa, ga = system.f_array(ua, va), system.g_array(ua, va)
            ua = ua + (h / eps) * PA.apply(2, fa - fu)
            va = va + h * PB.apply(2, ga - gv)
        u, v = ua, _restore_dummies(system, va, v_start)
        rec.push(step, step * h, u, v, force=step == n)
    return rec.record()


def _slow_path(system: FastSlowSystem, v0, cfg: IntegratorConfig, tol: float,
               project: ModeSplitting | None = None):
    """Every step of v' = B v + [pr_S] g(h0(v), v); returns times, u, v arrays."""
    K = system.K
    v = _as_coeffs(v0, K, system.nv)
    mask = project.slow_mask(K) if project is not None else None
    if mask is not None:
        v = v * mask
    v_start = v.copy()
    h = cfg.h
    PB = Propagator(system.B, h, K)
    n = cfg.n_steps
    us, vs = [], []
    u, *_ = critical_fast_array(system, v, tol)
    us.append(u)
    vs.append(v.copy())
    for step in range(1, n + 1):
        gv = system.g_array(u, v)
        if mask is not None:
            gv = gv * mask
        va = PB.apply(0, v) + h * PB.apply(1, gv)
        if cfg.scheme == "ETD2":
            _restore_dummies(system, va, v_start)
            ua, *_ = critical_fast_array(system, va, tol, u_init=u)
            ga = system.g_array(ua, va)
            if mask is not None:
                ga = ga * mask
            va = va + h * PB.apply(2, ga - gv)
        v = _restore_dummies(system, va, v_start)
        if mask is not None:
            v = v * mask
        u, *_ = critical_fast_array(system, v, tol, u_init=u)
        _guard(system, step, u, v)
        us.append(u)
        vs.append(v.copy())
    return np.arange(n + 1) * h, np.array(us), np.array(vs)


def _subsample(system, cfg, times, us, vs, meta) -> TrajectoryRecord:
    n = len(times) - 1
    idx = list(range(0, n + 1, cfg.store_every))
    if idx[-1] != n:
        idx.append(n)
    x = np.array([float(system.x_norm(us[i])) for i in idx])
    y = np.array([float(system.y_norm(vs[i])) for i in idx])
    return TrajectoryRecord(times[idx], us[idx], vs[idx], x, y, meta)


def integrate_slow(system: FastSlowSystem, v0, cfg: IntegratorConfig,
                   tol: float = 1e-11) -> TrajectoryRecord:
    """Slow subsystem v' = B v + g(h0(v), v) with u = h0(v) at every step."""
    times, us, vs = _slow_path(system, v0, cfg, tol)
    meta = {"flow": "slow", "h": cfg.h, "model": system.model_id, "scheme": cfg.scheme}
    return _subsample(system, cfg, times, us, vs, meta)


def integrate_reduced(system: FastSlowSystem, splitting: ModeSplitting, v0,
                      cfg: IntegratorConfig, tol: float = 1e-11) -> TrajectoryRecord:
    """Slow subsystem restricted to the slow modes; fast modes of v stay zero."""
    times, us, vs = _slow_path(system, v0, cfg, tol, project=splitting)
    meta = {"flow": "reduced", "h": cfg.h, "model": system.model_id, "scheme": cfg.scheme,
            "zeta": splitting.zeta, "k0": splitting.k0}
    return _subsample(system, cfg, times, us, vs, meta)


def drift_along_path(system: FastSlowSystem, us: np.ndarray, vs: np.ndarray,
                     h: float) -> np.ndarray:
    """d/dt of A^{-1} f(h0(v0(t)), v0(t)) by central differences, one-sided at the ends."""
    q = system.A.inverse_array(system.f_array(us, vs))
    if len(q) < 2:
        return np.zeros_like(q)
    d = np.empty_like(q)
    d[1:-1] = (q[2:] - q[:-2]) / (2 * h)
    d[0] = (q[1] - q[0]) / h
    d[-1] = (q[-1] - q[-2]) / h
    if len(q) >= 3:
        d[0] = (-3 * q[0] + 4 * q[1] - q[2]) / (2 * h)
        d[-1] = (3 * q[-1] - 4 * q[-2] + q[-3]) / (2 * h)
    return d


def integrate_extended(system: FastSlowSystem, eps: float, u0, v0, cfg: IntegratorConfig,
                       tol: float = 1e-11, slow_path=None) -> TrajectoryRecord:
    """eps u' = A u + f(u, v0(t)) - eps d/dt A^{-1} f(h0(v0(t)), v0(t)) along the slow path.

    The slow component is the slow-subsystem path itself (shared computation).
    """
    if not eps > 0:
        raise ConfigurationError("eps must be positive")
    times, us, vs = slow_path if slow_path is not None else _slow_path(system, v0, cfg, tol)
    K = system.K
    u = _as_coeffs(u0, K, system.nu)
    h = cfg.h
    drift = drift_along_path(system, us, vs, h)
    PA = Propagator(system.A, h, K, scale=1.0 / eps)
    out = [u.copy()]
    n = len(times) - 1
    for step in range(1, n + 1):
        N0 = system.f_array(u, vs[step - 1]) - eps * drift[step - 1]
        ua = PA.apply(0, u) + (h / eps) * PA.apply(1, N0)
        if cfg.scheme == "ETD2":
            Na = system.f_array(ua, vs[step]) - eps * drift[step]
            ua = ua + (h / eps) * PA.apply(2, Na - N0)
        u = ua
        _guard(system, step, u, vs[step])
        out.append(u.copy())
    meta = {"flow": "extended", "eps": eps, "h": h, "model": system.model_id,
            "scheme": cfg.scheme}
    rec = _subsample(system, cfg, times, np.array(out), vs, meta)
    rec.u_critical = _subsample(system, cfg, times, us, vs, meta).u
    return rec


def slow_path(system: FastSlowSystem, v0, cfg: IntegratorConfig, tol: float = 1e-11):
    """Every-step slow path (times, h0 values, v values), reusable across flows."""
    return _slow_path(system, v0, cfg, tol)
