"""Executable checks of the incomplete-gamma estimates and Gronwall-type
inequalities used to bound mild solutions, plus the rate constants
omega_f and omega_g.

Left-hand sides are computed by direct adaptive quadrature (QUADPACK with
algebraic endpoint weights for the weakly singular kernels); right-hand
sides come from the closed-form bounds.  The Gronwall checks use an
independent product-integration Volterra solver as oracle.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, signal, special

QUAD_TOL = 1e-12
DECAY_WINDOW = 60.0  # e^{-60} ~ 1e-26 neglected beyond this many decay lengths

GAMMA_LEMMAS = ("2.2", "2.3", "2.4", "cor2.5", "2.6")
GRONWALL_KINDS = ("basic", "specific", "sum")


class HypothesisError(ValueError):
    """A parameter tuple or sampled input violates a lemma's hypotheses."""


@dataclass
class BoundCheckReport:
    lemma_id: str
    samples_checked: int
    max_violation: float
    worst_case: tuple
    rejected: int = 0
    rejection_reasons: list[str] = field(default_factory=list)
    elapsed_s: float = 0.0

    @property
    def passed(self) -> bool:
        return self.max_violation <= 0.0

    def to_json(self) -> dict:
        return {
            "lemma_id": self.lemma_id,
            "samples_checked": self.samples_checked,
            "max_violation": float(self.max_violation),
            "worst_case": [float(x) for x in self.worst_case],
            "rejected": self.rejected,
            "rejection_reasons": self.rejection_reasons[:20],
            "elapsed_s": round(self.elapsed_s, 6),
        }


# ---------------------------------------------------------------------------
# incomplete gamma


def lower_incomplete_gamma(gamma: float, t: float) -> float:
    """int_0^t e^{-r} r^{gamma-1} dr for gamma in (0, 1].

    The substitution r = w^{1/gamma} removes the endpoint singularity:
    the integral becomes (1/gamma) int_0^{t^gamma} exp(-w^{1/gamma}) dw.
    """
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma={gamma} outside (0, 1]")
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return 0.0
    upper = min(t, 800.0) ** gamma
    inv = 1.0 / gamma
    # split where the integrand has decayed so QUADPACK sees the bulk
    knee = min(upper, 40.0 ** gamma)
    with warnings.catch_warnings():
        # the requested accuracy is at roundoff level; QUADPACK says so when it gets there
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, _ = integrate.quad(lambda w: math.exp(-w ** inv), 0.0, knee,
                                epsabs=1e-14, epsrel=1e-14, limit=200)
        if upper > knee:
            tail, _ = integrate.quad(lambda w: math.exp(-w ** inv), knee, upper,
                                     epsabs=1e-15, epsrel=1e-14, limit=200)
            val += tail
    return val * inv


# ---------------------------------------------------------------------------
# gamma lemmas: each returns (lhs, rhs)


def _quad_alg(fn, a, b, alpha, beta):
    """int_a^b fn(x) (x-a)^alpha (b-x)^beta dx."""
    if b <= a:
        return 0.0
    val, _ = integrate.quad(fn, a, b, weight="alg", wvar=(alpha, beta),
                            epsabs=QUAD_TOL * 1e-2, epsrel=QUAD_TOL, limit=200)
    return val


def _power_exp_integral(gamma, rate, eps, upper):
    """int_0^upper e^{rate*s/eps} eps^{-gamma} s^{gamma-1} ds with rate < 0."""
    cut = min(upper, DECAY_WINDOW * eps / abs(rate))
    return _quad_alg(lambda s: math.exp(rate * s / eps) * eps ** (-gamma),
                     0.0, cut, gamma - 1.0, 0.0)


def lemma_2_2(gamma, omega, eps, t):
    lhs = _power_exp_integral(gamma, omega, eps, t)
    rhs = min(t ** gamma / (gamma * eps ** gamma), special.gamma(gamma) / abs(omega) ** gamma)
    return lhs, rhs


def lemma_2_3(gamma, omega, omega_t, eps, t):
    if t == 0:
        lhs = 0.0
    else:
        cut = min(t, DECAY_WINDOW * eps / (omega_t - omega))
        lhs = _quad_alg(lambda s: math.exp((omega_t * (t - s) + omega * s) / eps) * eps ** (-gamma),
                        0.0, cut, gamma - 1.0, 0.0)
    rhs = math.exp(gamma) / (gamma ** (1.0 - gamma) * abs(omega_t) ** gamma)
    return lhs, rhs


def _inner_gamma(gamma, omega, eps, s):
    """int_0^s e^{omega r/eps} eps^{-gamma} r^{gamma-1} dr in closed form."""
    return special.gamma(gamma) * special.gammainc(gamma, abs(omega) * s / eps) / abs(omega) ** gamma


def _lemma_2_4_lhs(gamma, omega, omega_t, eps, t):
    if t == 0:
        return 0.0
    cut = min(t, DECAY_WINDOW * eps / abs(omega_t))
    scale = abs(omega) / eps

    def integrand(tau):
        return scale * math.exp(omega_t * tau / eps) * _inner_gamma(gamma, omega, eps, t - tau)

    pts = [p for p in (t - eps / abs(omega),) if 0.0 < p < cut]
    val, _ = integrate.quad(integrand, 0.0, cut, epsabs=QUAD_TOL * 1e-2, epsrel=QUAD_TOL,
                            limit=200, points=pts or None)
    return val


def lemma_2_4(gamma, omega, omega_t, eps, t):
    lhs = _lemma_2_4_lhs(gamma, omega, omega_t, eps, t)
    rhs = special.gamma(gamma) * abs(omega) ** (1.0 - gamma) / abs(omega_t)
    return lhs, rhs


def corollary_2_5(gamma, omega, omega_t, eps, t):
    lhs = lemma_2_3(gamma, omega, omega_t, eps, t)[0] + _lemma_2_4_lhs(gamma, omega, omega_t, eps, t)
    rhs = ((math.exp(gamma) / gamma ** (1.0 - gamma)
            + special.gamma(gamma) * abs(omega / omega_t) ** (1.0 - gamma))
           / abs(omega_t) ** gamma)
    return lhs, rhs


def lemma_2_6(gamma, omega, t):
    lhs = _quad_alg(lambda s: math.exp(omega * s), 0.0, t, 0.0, gamma - 1.0)
    rhs = (math.exp(1.0 + omega * t) + gamma) / (gamma * abs(omega) ** gamma)
    return lhs, rhs


_LEMMA_FUNCS: dict[str, Callable] = {
    "2.2": lemma_2_2, "2.3": lemma_2_3, "2.4": lemma_2_4,
    "cor2.5": corollary_2_5, "2.6": lemma_2_6,
}

_LEMMA_PARAMS = {
    "2.2": ("gamma", "omega", "eps", "t"),
    "2.3": ("gamma", "omega", "omega_tilde", "eps", "t"),
    "2.4": ("gamma", "omega", "omega_tilde", "eps", "t"),
    "cor2.5": ("gamma", "omega", "omega_tilde", "eps", "t"),
    "2.6": ("gamma", "omega", "t"),
}


def _check_gamma_hypotheses(lemma_id: str, tup: tuple) -> str | None:
    names = _LEMMA_PARAMS[lemma_id]
    if len(tup) != len(names):
        return f"expected {len(names)} parameters {names}, got {len(tup)}"
    p = dict(zip(names, tup))
    if not all(np.isfinite(v) for v in tup):
        return "non-finite parameter"
    if not 0.0 < p["gamma"] <= 1.0:
        return f"gamma={p['gamma']} outside (0, 1]"
    if p["t"] < 0:
        return f"t={p['t']} < 0"
    if "eps" in p and not p["eps"] > 0:
        return f"eps={p['eps']} <= 0"
    if not p["omega"] < 0:
        return f"omega={p['omega']} >= 0"
    if "omega_tilde" in p and not p["omega"] < p["omega_tilde"] < 0:
        return "requires omega < omega_tilde < 0"
    return None


def sample_gamma_tuples(lemma_id: str, samples: int, seed: int = 42,
                        gamma_range=(0.1, 1.0), omega_range=(-10.0, -0.1),
                        eps_range=(1e-3, 1.0), t_range=(0.0, 10.0)) -> list[tuple]:
    """Seeded random parameter tuples satisfying the lemma's hypotheses.

    eps is sampled log-uniformly; omega_tilde is a uniform fraction in
    [0.01, 0.99] of omega.
    """
    rng = np.random.default_rng(seed)
    g = rng.uniform(*gamma_range, samples)
    w = rng.uniform(*omega_range, samples)
    e = np.exp(rng.uniform(np.log(eps_range[0]), np.log(eps_range[1]), samples))
    t = rng.uniform(*t_range, samples)
    frac = rng.uniform(0.01, 0.99, samples)
    if lemma_id == "2.2":
        return list(zip(g, w, e, t))
    if lemma_id in ("2.3", "2.4", "cor2.5"):
        return list(zip(g, w, w * frac, e, t))
    if lemma_id == "2.6":
        return list(zip(g, w, t))
    raise ValueError(f"unknown lemma {lemma_id!r}")


def verify_gamma_lemma(lemma_id: str, params: Sequence[tuple] | None = None,
                       samples: int = 10_000, seed: int = 42) -> BoundCheckReport:
    """max(LHS - RHS) over a parameter grid (random seeded grid by default)."""
    if lemma_id not in _LEMMA_FUNCS:
        raise ValueError(f"unknown lemma {lemma_id!r}; choose from {GAMMA_LEMMAS}")
    if params is None:
        if samples <= 0:
            raise ValueError("samples must be positive")
        params = sample_gamma_tuples(lemma_id, samples, seed)
    fn = _LEMMA_FUNCS[lemma_id]
    start = time.perf_counter()
    worst, worst_tuple, checked = -math.inf, (), 0
    reasons: list[str] = []
    for tup in params:
        tup = tuple(float(x) for x in tup)
        why = _check_gamma_hypotheses(lemma_id, tup)
        if why is not None:
            reasons.append(why)
            continue
        lhs, rhs = fn(*tup)
        checked += 1
        if lhs - rhs > worst:
            worst, worst_tuple = lhs - rhs, tup
    if checked == 0:
        raise HypothesisError(f"no admissible tuples: {reasons[:3]}")
    return BoundCheckReport(lemma_id, checked, float(worst), worst_tuple, len(reasons),
                            reasons, time.perf_counter() - start)


# ---------------------------------------------------------------------------
# product-integration Volterra solver (oracle)

_GL_X, _GL_W = np.polynomial.legendre.leggauss(12)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


@dataclass(frozen=True)
class Kernel:
    """coef * exp(rate * tau) * tau^(power - 1); entries may be per-sample arrays."""

    coef: object
    rate: object
    power: object

    def arrays(self, S: int):
        out = [np.broadcast_to(np.asarray(a, dtype=float).reshape(-1), (S,))
               if np.size(a) > 1 else np.full(S, float(np.asarray(a).reshape(-1)[0]))
               for a in (self.coef, self.rate, self.power)]
        return out

    @property
    def smooth(self) -> bool:
        return bool(np.all(np.asarray(self.power) == 1.0))


def product_integration_weights(kernel: Kernel, h, n: int, S: int = 1):
    """Lag weights (alpha, beta), each of shape (S, n).

    Lag interval m = [m h, (m+1) h] contributes alpha_m to the older and
    beta_m to the newer endpoint value of a piecewise-linear integrand.
    Intervals m >= 1 use Gauss-Legendre; m = 0 uses Gauss-Jacobi with the
    x^(power-1) weight, so the endpoint singularity is integrated exactly.
    """
    h = np.broadcast_to(np.asarray(h, dtype=float).reshape(-1), (S,))
    coef, rate, power = kernel.arrays(S)
    alpha = np.empty((S, n))
    beta = np.empty((S, n))
    if n > 1:
        m = np.arange(1, n)[None, :, None]
        x = _GL_X[None, None, :]
        r = (m + x) * h[:, None, None]
        k = np.exp(rate[:, None, None] * r) * r ** (power[:, None, None] - 1.0)
        alpha[:, 1:] = h[:, None] * np.sum(_GL_W * x * k, axis=-1)
        beta[:, 1:] = h[:, None] * np.sum(_GL_W * (1.0 - x) * k, axis=-1)
    cache: dict[float, tuple] = {}
    for s in range(S):
        pw = float(power[s])
        if pw not in cache:
            cache[pw] = special.roots_sh_jacobi(12, pw, pw)
        xj, wj = cache[pw]
        e = np.exp(rate[s] * h[s] * xj)
        hp = h[s] ** pw
        alpha[s, 0] = hp * np.sum(wj * xj * e)
        beta[s, 0] = hp * np.sum(wj * (1.0 - xj) * e)
    return coef[:, None] * alpha, coef[:, None] * beta


def _combine_weights(kernels: Sequence[Kernel], h, n: int, S: int):
    wa = np.zeros((S, n))
    wb = np.zeros((S, n))
    for ker in kernels:
        a, b = product_integration_weights(ker, h, n, S)
        wa += a
        wb += b
    return wa, wb


def _history(wa, wb, v, n):
    """Contribution of the values at steps 0..n-1 to the integral at step n."""
    G = wb[:, 1:n] + wa[:, 0:n - 1]
    past = v[:, n - 1:0:-1]
    return np.sum(G * past, axis=1) + wa[:, n - 1] * v[:, 0]


def _smooth_weights(kernel: Kernel, h, S: int):
    """Per-step decay and endpoint weights of a kernel coef*exp(rate*tau)."""
    from .operators import phi_function

    coef, rate, _ = kernel.arrays(S)
    h = np.broadcast_to(np.asarray(h, dtype=float).reshape(-1), (S,))
    z = rate * h
    p1 = np.real(phi_function(1, z))
    p2 = np.real(phi_function(2, z))
    return np.exp(z), coef * h * (p1 - p2), coef * h * p2


def apply_volterra_operator(kernels: Sequence[Kernel], h, v: np.ndarray) -> np.ndarray:
    """I(t_n) = int_0^{t_n} K(t_n - s) v(s) ds for piecewise-linear v; rows are samples."""
    v = np.atleast_2d(np.asarray(v, dtype=float))
    S, n1 = v.shape
    n = n1 - 1
    if len(kernels) == 1 and kernels[0].smooth:
        decay, w_old, w_new = _smooth_weights(kernels[0], h, S)
        out = np.empty_like(v)
        for s in range(S):
            y = signal.lfilter([w_new[s], w_old[s]], [1.0, -decay[s]], v[s])
            out[s] = y - decay[s] ** np.arange(n1) * w_new[s] * v[s, 0]
        return out
    wa, wb = _combine_weights(kernels, h, max(n, 1), S)
    out = np.zeros_like(v)
    for j in range(1, n + 1):
        out[:, j] = wb[:, 0] * v[:, j] + _history(wa, wb, v, j)
    return out


def solve_volterra_grid(c: np.ndarray, kernels: Sequence[Kernel], h) -> np.ndarray:
    """Solve v = c + sum_k int K_k(t-s) v(s) ds on a uniform grid (rows are samples)."""
    c = np.atleast_2d(np.asarray(c, dtype=float))
    S, n1 = c.shape
    n = n1 - 1
    if len(kernels) == 1 and kernels[0].smooth:
        decay, w_old, w_new = _smooth_weights(kernels[0], h, S)
        v = np.empty_like(c)
        for s in range(S):
            f = np.empty(n1)
            f[0] = c[s, 0]
            f[1:] = (c[s, 1:] - decay[s] * c[s, :-1]) / (1.0 - w_new[s])
            r = (decay[s] + w_old[s]) / (1.0 - w_new[s])
            v[s] = signal.lfilter([1.0], [1.0, -r], f)
        return v
    wa, wb = _combine_weights(kernels, h, max(n, 1), S)
    v = np.zeros_like(c)
    v[:, 0] = c[:, 0]
    diag = 1.0 - wb[:, 0]
    for j in range(1, n + 1):
        v[:, j] = (c[:, j] + _history(wa, wb, v, j)) / diag
    return v


def solve_volterra(c_fn: Callable[[np.ndarray], np.ndarray], kernels: Sequence[Kernel],
                   T: float, tol: float = 1e-10, n0: int = 64, n_max: int = 1 << 20,
                   n_max_weakly_singular: int = 4096) -> tuple[np.ndarray, np.ndarray, float]:
    """Step-halving product integration until successive answers agree to
    ``tol`` (relative to max(1, |v|) at the coarse nodes).

    A single kernel's exponential factor is conjugated out first, so the
    interpolated integrand is e^{-rate t} v(t).  Returns (t, v, achieved).
    """
    shift = 0.0
    if len(kernels) == 1 and np.size(kernels[0].rate) == 1:
        shift = float(np.asarray(kernels[0].rate).reshape(-1)[0])
        kernels = [Kernel(kernels[0].coef, 0.0, kernels[0].power)]
    smooth = len(kernels) == 1 and kernels[0].smooth
    cap = n_max if smooth else min(n_max, n_max_weakly_singular)

    def solve(n):
        t = np.linspace(0.0, T, n + 1)
        w = solve_volterra_grid(np.exp(-shift * t) * c_fn(t), kernels, T / n)[0]
        return t, np.exp(shift * t) * w

    n = n0
    t_prev, v_prev = solve(n)
    achieved = math.inf
    while 2 * n <= cap:
        t_new, v_new = solve(2 * n)
        scale = np.maximum(1.0, np.abs(v_new[::2]))
        achieved = float(np.max(np.abs(v_new[::2] - v_prev) / scale))
        n, t_prev, v_prev = 2 * n, t_new, v_new
        if achieved < tol:
            break
    return t_prev, v_prev, achieved


# ---------------------------------------------------------------------------
# Gronwall verifiers

HYPOTHESIS_RTOL = 1e-9


def _cumtrapz(y: np.ndarray, h) -> np.ndarray:
    h = np.asarray(h, dtype=float).reshape(-1, 1)
    out = np.zeros_like(y)
    out[:, 1:] = np.cumsum(0.5 * (y[:, 1:] + y[:, :-1]), axis=1) * h
    return out


def _relative_excess(lhs: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """max over the grid of (lhs - rhs)/max(1, |rhs|), per row."""
    return np.max((lhs - rhs) / np.maximum(1.0, np.abs(rhs)), axis=1)


def _within(lhs, rhs):
    return np.all(lhs <= rhs + HYPOTHESIS_RTOL * np.maximum(1.0, np.abs(rhs)), axis=1)


def _nondecreasing(y):
    return np.all(np.diff(y, axis=1) >= -HYPOTHESIS_RTOL * np.maximum(1.0, np.abs(y[:, 1:])), axis=1)


def _derivative(c: np.ndarray, h) -> np.ndarray:
    h = np.broadcast_to(np.asarray(h, dtype=float).reshape(-1), (c.shape[0],))
    return np.stack([np.gradient(row, float(hh), edge_order=2) for row, hh in zip(c, h)])


def specific_growth_constant(x, N, gamma, p):
    """x_tilde = x + p N^{1/gamma} (p'/gamma)^{(1-gamma)/gamma}, p' = p/(p-1)."""
    pc = p / (p - 1.0)
    return x + p * N ** (1.0 / gamma) * (pc / gamma) ** ((1.0 - gamma) / gamma)


def sum_constants(x, y, eps, N, M, gamma, delta, mu):
    """(q, y_tilde) with q = N Gamma(gamma)/(eps y - x)^gamma."""
    q = N * special.gamma(gamma) / (eps * y - x) ** gamma
    y_t = y + M ** (1.0 / delta) * (delta * mu) ** ((delta - 1.0) / delta) / (1.0 - mu - q)
    return q, y_t


def _exp_convolution(rate, g, h, t):
    """int_0^t e^{rate (t-s)} g(s) ds, integrating e^{-rate s} g(s) piecewise linearly."""
    inner = apply_volterra_operator([Kernel(1.0, 0.0, 1.0)], h, np.exp(-rate[:, None] * t) * g)
    return np.exp(rate[:, None] * t) * inner


def _col(params, key):
    return np.asarray(params[key], dtype=float).reshape(-1)


def _gronwall_batch(kind: str, v: np.ndarray, c: np.ndarray, h, params: dict,
                    c_prime: np.ndarray | None = None):
    """(hypothesis mask, relative violation) per row.

    Kernels with an exponential factor are integrated after conjugating the
    integrand by that exponential, as in the lemmas' proofs.
    """
    S, n1 = v.shape
    hh = np.broadcast_to(np.asarray(h, dtype=float).reshape(-1), (S,))
    t = np.arange(n1)[None, :] * hh[:, None]
    cp = _derivative(c, hh) if c_prime is None else c_prime
    if kind == "basic":
        u = np.atleast_2d(params["u"])
        integral = _cumtrapz(u * v, hh)
        hyp_ok = _within(v, c + integral)
        U = _cumtrapz(u, hh)
        rhs = c[:, :1] * np.exp(U) + np.exp(U) * _cumtrapz(cp * np.exp(-U), hh)
        return hyp_ok, _relative_excess(v, rhs)
    if kind == "specific":
        x, eps, N, gamma = (_col(params, k) for k in ("x", "eps", "N", "gamma"))
        p = float(params.get("p", 2.0))
        a = x / eps
        w = np.exp(-a[:, None] * t) * v
        integral = np.exp(a[:, None] * t) * apply_volterra_operator(
            [Kernel(N * eps ** (-gamma), 0.0, gamma)], hh, w)
        hyp_ok = _within(v, c + integral) & _nondecreasing(np.exp(-a[:, None] * t) * c)
        x_t = params.get("x_tilde")
        x_t = specific_growth_constant(x, N, gamma, p) if x_t is None else np.broadcast_to(
            np.asarray(x_t, dtype=float).reshape(-1), (S,))
        conv = _exp_convolution(x_t / eps, cp - a[:, None] * c, hh, t)
        rhs = p * c[:, :1] * np.exp((x_t / eps)[:, None] * t) + p * conv
        return hyp_ok, _relative_excess(v, rhs)
    if kind == "sum":
        x, y, eps, N, M, gamma, delta, mu = (
            _col(params, k) for k in ("x", "y", "eps", "N", "M", "gamma", "delta", "mu"))
        gap = eps * y - x
        q = np.where(gap > 0, N * special.gamma(gamma) / np.where(gap > 0, gap, 1.0) ** gamma, np.inf)
        hyp_ok = (q > 0) & (q < 1) & (mu > 0) & (mu < 1 - q)
        w = np.exp(-y[:, None] * t) * v
        kers = [Kernel(N * eps ** (-gamma), x / eps - y, gamma), Kernel(M, 0.0, delta)]
        integral = np.exp(y[:, None] * t) * apply_volterra_operator(kers, hh, w)
        hyp_ok &= _within(v, c + integral) & _nondecreasing(np.exp(-y[:, None] * t) * c)
        qs = np.where(hyp_ok, q, 0.5)
        mus = np.where(hyp_ok, mu, 0.25)
        y_t = params.get("y_tilde")
        if y_t is None:
            y_t = y + M ** (1.0 / delta) * (delta * mus) ** ((delta - 1.0) / delta) / (1.0 - mus - qs)
        y_t = np.broadcast_to(np.asarray(y_t, dtype=float).reshape(-1), (S,))
        conv = _exp_convolution(y_t, cp - y[:, None] * c, hh, t)
        rhs = (c[:, :1] * np.exp(y_t[:, None] * t) + conv) / (1.0 - mus - qs)[:, None]
        return hyp_ok, _relative_excess(v, rhs)
    raise ValueError(f"unknown Gronwall kind {kind!r}; choose from {GRONWALL_KINDS}")


def verify_gronwall(kind: str, v: np.ndarray, c: np.ndarray, params: dict,
                    h: float | None = None, T: float | None = None,
                    c_prime: np.ndarray | None = None) -> BoundCheckReport:
    """Check the conclusion of a Gronwall lemma for sampled v, c on a uniform grid.

    ``params`` holds the lemma constants: for 'basic' the sampled kernel
    ``u``; for 'specific' x, eps, N, gamma and optionally p and an override
    ``x_tilde``; for 'sum' x, y, eps, N, M, gamma, delta, mu and optionally
    ``y_tilde``.  Violations are relative: (v - bound)/max(1, |bound|).
    Inputs failing the hypothesis check raise :class:`HypothesisError`.
    """
    v2 = np.atleast_2d(np.asarray(v, dtype=float))
    c2 = np.atleast_2d(np.asarray(c, dtype=float))
    if v2.shape != c2.shape or v2.shape[1] < 3:
        raise ValueError("v and c must be sampled on the same grid of >= 3 points")
    if h is None:
        if T is None:
            raise ValueError("give the grid step h or the horizon T")
        h = T / (v2.shape[1] - 1)
    cp = None if c_prime is None else np.atleast_2d(np.asarray(c_prime, dtype=float))
    hyp_ok, viol = _gronwall_batch(kind, v2, c2, h, params, cp)
    if not np.all(hyp_ok):
        raise HypothesisError(f"{kind}: sampled input violates the lemma's hypotheses")
    worst = int(np.argmax(viol))
    return BoundCheckReport(f"gronwall-{kind}", v2.shape[0], float(viol[worst]), (float(worst),))


def sample_gronwall_cases(kind: str, samples: int, seed: int = 42, n: int = 160):
    """Seeded hypothesis-satisfying (v, c) pairs.

    c is chosen so the monotonicity hypothesis holds, the equality case
    v_eq = c + K[v_eq] is solved with the product-integration oracle, and
    v = theta v_eq with theta in [0.5, 0.99] satisfies the hypothesis with
    slack (1 - theta) c.  Growth exponents are capped so every row stays
    within exp(30).  Returns (v, c, c', h, params).
    """
    rng = np.random.default_rng(seed)
    T = rng.uniform(0.1, 10.0, samples)
    h = T / n
    t = np.linspace(0.0, 1.0, n + 1)[None, :] * T[:, None]
    theta = rng.uniform(0.5, 0.99, samples)[:, None]
    c0 = np.exp(rng.uniform(np.log(0.1), np.log(10.0), samples))[:, None]
    b = (rng.uniform(0.0, 2.0, samples) / T)[:, None]
    if kind == "basic":
        a0 = (rng.uniform(0.0, 10.0, samples) / T)[:, None]
        a1 = rng.uniform(-1.0, 1.0, samples)[:, None]
        w = rng.uniform(0.0, 3.0, samples)[:, None]
        u = a0 * (1.0 + a1 * np.sin(w * t))
        amp = rng.uniform(0.0, 0.5, samples)[:, None]
        c = c0 * (1.0 + b * t + amp * np.sin(w * t))
        cp = c0 * (b + amp * w * np.cos(w * t))
        # trapezoid equality solve, same rule as the verifier's quadrature
        v_eq = np.zeros_like(c)
        v_eq[:, 0] = c[:, 0]
        acc = 0.5 * h * u[:, 0] * v_eq[:, 0]
        for j in range(1, n + 1):
            v_eq[:, j] = (c[:, j] + acc) / (1.0 - 0.5 * h * u[:, j])
            acc = acc + h * u[:, j] * v_eq[:, j]
        return theta * v_eq, c, cp, h, {"u": u}
    eps = np.exp(rng.uniform(np.log(1e-3), np.log(1.0), samples))
    gamma = rng.uniform(0.1, 1.0, samples)
    if kind == "specific":
        x = eps * rng.uniform(-20.0, 20.0, samples) / T
        # N chosen so the bound's extra exponent (x_tilde - x) T/eps lies in [0.1, 30]
        extra = rng.uniform(0.1, 30.0, samples) * eps / T
        N = (extra / (2.0 * (2.0 / gamma) ** ((1.0 - gamma) / gamma))) ** gamma
        a = (x / eps)[:, None]
        c = c0 * np.exp(a * t) * (1.0 + b * t)
        cp = c0 * np.exp(a * t) * (a * (1.0 + b * t) + b)
        w_eq = solve_volterra_grid(c0 * (1.0 + b * t), [Kernel(N * eps ** (-gamma), 0.0, gamma)], h)
        params = {"x": x, "eps": eps, "N": N, "gamma": gamma, "p": 2.0}
        return theta * np.exp(a * t) * w_eq, c, cp, h, params
    if kind == "sum":
        delta = rng.uniform(0.1, 1.0, samples)
        y = rng.uniform(-10.0, 10.0, samples) / T
        gap = eps * rng.uniform(0.5, 20.0, samples) / T  # eps*y - x
        x = eps * y - gap
        q = rng.uniform(0.05, 0.9, samples)
        N = q * gap ** gamma / special.gamma(gamma)
        mu = (1.0 - q) * rng.uniform(0.1, 0.9, samples)
        lam = rng.uniform(0.1, 15.0, samples) / T  # y_tilde - y
        M = (lam * (1.0 - mu - q)) ** delta * (delta * mu) ** (1.0 - delta)
        yc = y[:, None]
        c = c0 * np.exp(yc * t) * (1.0 + b * t)
        cp = c0 * np.exp(yc * t) * (yc * (1.0 + b * t) + b)
        kers = [Kernel(N * eps ** (-gamma), x / eps - y, gamma), Kernel(M, 0.0, delta)]
        w_eq = solve_volterra_grid(c0 * (1.0 + b * t), kers, h)
        params = {"x": x, "y": y, "eps": eps, "N": N, "M": M, "gamma": gamma,
                  "delta": delta, "mu": mu}
        return theta * np.exp(yc * t) * w_eq, c, cp, h, params
    raise ValueError(f"unknown Gronwall kind {kind!r}")


def gronwall_suite(kind: str, samples: int = 10_000, seed: int = 42, n: int = 160,
                   chunk: int = 2000) -> BoundCheckReport:
    """Random hypothesis-satisfying cases through the verifier, in chunks."""
    if samples <= 0:
        raise ValueError("samples must be positive")
    start = time.perf_counter()
    worst, worst_case, checked, rejected = -math.inf, (), 0, 0
    n_chunks = (samples + chunk - 1) // chunk
    done = 0
    for ss in np.random.SeedSequence(seed).spawn(n_chunks):
        size = min(chunk, samples - done)
        sub_seed = int(ss.generate_state(1)[0])
        v, c, cp, h, params = sample_gronwall_cases(kind, size, sub_seed, n)
        hyp_ok, viol = _gronwall_batch(kind, v, c, h, params, cp)
        rejected += int(np.sum(~hyp_ok))
        checked += int(np.sum(hyp_ok))
        viol = np.where(hyp_ok, viol, -np.inf)
        i = int(np.argmax(viol))
        if viol[i] > worst:
            worst, worst_case = float(viol[i]), (float(sub_seed), float(i))
        done += size
    return BoundCheckReport(f"gronwall-{kind}", checked, worst, worst_case, rejected, [],
                            time.perf_counter() - start)


def corrupted_constant_selftest(x: float = 10.0, N: float = 0.5, eps: float = 1.0,
                                T: float = 3.0, reduction: float = 0.1,
                                tol: float = 1e-10):
    """Equality case of the specific Gronwall lemma with gamma = 1 and p = 2:
    c = exp(x t/eps) and v solves v = c + N int e^{x(t-s)/eps}/eps v ds.

    Returns (report with the true constant, report with x_tilde reduced by
    ``reduction`` |x_tilde|, oracle agreement achieved).
    """
    gamma, p = 1.0, 2.0
    ker = Kernel(N / eps, x / eps, 1.0)
    t, v, achieved = solve_volterra(lambda s: np.exp(x * s / eps), [ker], T, tol=tol)
    c = np.exp(x * t / eps)
    h = T / (t.size - 1)
    params = {"x": x, "eps": eps, "N": N, "gamma": gamma, "p": p}
    good = verify_gronwall("specific", v, c, params, h=h, c_prime=(x / eps) * c)
    x_t = specific_growth_constant(x, N, gamma, p)
    bad = verify_gronwall("specific", v, c, dict(params, x_tilde=x_t - reduction * abs(x_t)),
                          h=h, c_prime=(x / eps) * c)
    return good, bad, achieved


# ---------------------------------------------------------------------------
# rate constants


def growth_exponent(omega: float, C: float, L: float, exponent: float,
                    margin: float = 1e-3) -> float:
    """omega + (2 C L)^{1/e} (1/e)^{(1-e)/e} for e < 1, omega + C L + margin for e = 1."""
    if exponent >= 1.0:
        return omega + C * L + margin
    return omega + (2.0 * C * L) ** (1.0 / exponent) * (1.0 / exponent) ** ((1.0 - exponent) / exponent)


def omega_constants(setting, consts, L_f: float, L_g: float,
                    margin: float = 1e-3) -> tuple[float, float]:
    """(omega_f, omega_g) from the semigroup constants and Lipschitz bounds."""
    omega_f = growth_exponent(consts.omega_A, consts.C_A, L_f, setting.gamma_X, margin)
    omega_g = growth_exponent(consts.omega_B, consts.C_B, L_g, setting.delta_Y, margin)
    return omega_f, omega_g
