"""Fourier block-multiplier operators, their semigroups and phi-functions.

An operator acts on a coefficient array of shape (..., m, 2K+1) mode by
mode: the m-vector of mode k is multiplied by the matrix M(k).  Diagonal
operators store one complex symbol per component and mode, which keeps
every semigroup, inverse and phi-function evaluation elementwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import expm

from .spectral import ConfigurationError, SpectralField, wavenumbers

SPECTRAL_BOUND_MODES = 256


class BackwardFlowError(ValueError):
    """Negative time requested for an operator that only generates a semigroup."""


class SingularOperatorError(ValueError):
    """Block multiplier not invertible on the requested mode set."""


class DivergentSupError(ValueError):
    """Scale constant requested with an exponent the semigroup does not admit."""


# ---------------------------------------------------------------------------
# phi functions

_TAYLOR_TERMS = 18
_TAYLOR_RADIUS = 0.1


def phi_function(n: int, z):
    """phi_0 = e^z, phi_1 = (e^z-1)/z, phi_2 = (e^z-1-z)/z^2, elementwise."""
    if n not in (0, 1, 2):
        raise ValueError("phi_function is defined for n in {0, 1, 2}")
    z_arr = np.asarray(z, dtype=complex)
    if n == 0:
        out = np.exp(z_arr)
    else:
        small = np.abs(z_arr) < _TAYLOR_RADIUS
        zs = np.where(small, z_arr, 0.0)
        taylor = np.zeros_like(z_arr)
        for j in reversed(range(_TAYLOR_TERMS)):
            taylor = taylor * zs + 1.0 / math.factorial(j + n)
        zb = np.where(small, 1.0, z_arr)
        em1 = np.expm1(zb)
        direct = em1 / zb if n == 1 else (em1 - zb) / (zb * zb)
        out = np.where(small, taylor, direct)
    if np.ndim(z) == 0:
        return complex(out)
    return out


def phi_matrices(Z: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(e^Z, phi_1(Z), phi_2(Z)) for a batch of square matrices via one
    exponential of the augmented block matrix [[Z, I, 0], [0, 0, I], [0, 0, 0]]."""
    Z = np.asarray(Z, dtype=complex)
    m = Z.shape[-1]
    big = np.zeros(Z.shape[:-2] + (3 * m, 3 * m), dtype=complex)
    eye = np.eye(m)
    big[..., :m, :m] = Z
    big[..., :m, m:2 * m] = eye
    big[..., m:2 * m, 2 * m:] = eye
    E = expm(big)
    return E[..., :m, :m], E[..., :m, m:2 * m], E[..., :m, 2 * m:]


# ---------------------------------------------------------------------------
# operators


@dataclass(frozen=True)
class BlockMultiplierOperator:
    """Per-mode m x m multiplier M(k).

    Diagonal operators are described by per-component coefficients so that
    the symbol of component i is  -diffusion_i k^2 - i speed_i k - rate_i.
    Non-diagonal operators carry a ``matrix_fn`` mapping a wavenumber array
    of length n to an array of shape (n, m, m).
    """

    m: int
    symbol_kind: str
    params: dict = field(default_factory=dict)
    matrix_fn: Callable[[np.ndarray], np.ndarray] | None = None
    diffusion: tuple[float, ...] | None = None
    speed: tuple[float, ...] | None = None
    rate: tuple[float, ...] | None = None
    group: bool = False
    spectral_bound: float = field(init=False, default=float("nan"))

    def __post_init__(self):
        if self.matrix_fn is None:
            for name in ("diffusion", "speed", "rate"):
                vals = getattr(self, name)
                if vals is None or len(vals) != self.m:
                    raise ConfigurationError(f"diagonal operator needs {self.m} {name} values")
            if any(d < 0 for d in self.diffusion):
                raise ConfigurationError("negative diffusion does not generate a semigroup")
        k = wavenumbers(SPECTRAL_BOUND_MODES)
        if self.is_diagonal:
            bound = float(np.max(self.diagonal_symbols_for(k).real))
        else:
            bound = float(np.max(np.linalg.eigvals(self.matrix_fn(k)).real))
        if not np.isfinite(bound):
            raise ConfigurationError("spectral bound is not finite")
        object.__setattr__(self, "spectral_bound", bound)

    @property
    def is_diagonal(self) -> bool:
        return self.matrix_fn is None

    def diagonal_symbols_for(self, k: np.ndarray) -> np.ndarray:
        """Symbols of shape (m, len(k))."""
        k = np.asarray(k, dtype=float)
        d = np.asarray(self.diffusion, dtype=float)[:, None]
        s = np.asarray(self.speed, dtype=float)[:, None]
        r = np.asarray(self.rate, dtype=float)[:, None]
        return -d * k ** 2 - 1j * s * k - r + 0j

    def diagonal_symbols(self, K: int) -> np.ndarray:
        return self.diagonal_symbols_for(wavenumbers(K))

    def matrices(self, K: int) -> np.ndarray:
        """Full per-mode matrices, shape (2K+1, m, m)."""
        k = wavenumbers(K)
        if self.is_diagonal:
            sym = self.diagonal_symbols_for(k)
            out = np.zeros((len(k), self.m, self.m), dtype=complex)
            idx = np.arange(self.m)
            out[:, idx, idx] = sym.T
            return out
        return np.asarray(self.matrix_fn(k), dtype=complex)

    def mode_eigenvalues(self, K: int) -> np.ndarray:
        """Largest real part of the eigenvalues per mode, shape (2K+1,)."""
        if self.is_diagonal:
            return np.max(self.diagonal_symbols(K).real, axis=0)
        return np.max(np.linalg.eigvals(self.matrices(K)).real, axis=-1)

    def apply_array(self, coeffs: np.ndarray) -> np.ndarray:
        K = (coeffs.shape[-1] - 1) // 2
        if self.is_diagonal:
            return coeffs * self.diagonal_symbols(K)
        return np.einsum("kij,...jk->...ik", self.matrices(K), coeffs)

    def apply(self, field_: SpectralField) -> SpectralField:
        return field_.with_coeffs(self.apply_array(field_.coeffs))

    def exp_array(self, t: float, coeffs: np.ndarray) -> np.ndarray:
        K = (coeffs.shape[-1] - 1) // 2
        if self.is_diagonal:
            return coeffs * np.exp(t * self.diagonal_symbols(K))
        E = expm(t * self.matrices(K))
        return np.einsum("kij,...jk->...ik", E, coeffs)

    def inverse_array(self, coeffs: np.ndarray, k_min: int = 0) -> np.ndarray:
        """Multiply modes |k| >= k_min by M(k)^{-1}; zero the others."""
        K = (coeffs.shape[-1] - 1) // 2
        k = wavenumbers(K)
        keep = np.abs(k) >= k_min
        if self.is_diagonal:
            sym = self.diagonal_symbols(K)
            bad = keep & np.any(np.abs(sym) == 0.0, axis=0)
            if np.any(bad):
                raise SingularOperatorError(
                    f"operator is singular at mode k={int(k[np.argmax(bad)])}")
            inv = np.where(keep, 1.0 / np.where(keep, sym, 1.0), 0.0)
            return coeffs * inv
        mats = self.matrices(K)
        dets = np.abs(np.linalg.det(mats))
        bad = keep & (dets == 0.0)
        if np.any(bad):
            raise SingularOperatorError(
                f"operator is singular at mode k={int(k[np.argmax(bad)])}")
        safe = np.where(keep[:, None, None], mats, np.eye(self.m)[None])
        inv = np.linalg.inv(safe) * keep[:, None, None]
        return np.einsum("kij,...jk->...ik", inv, coeffs)

    def to_json(self) -> dict:
        out = {"symbol_kind": self.symbol_kind, "m": self.m, "group": self.group}
        if self.is_diagonal:
            out.update(diffusion=list(self.diffusion), speed=list(self.speed),
                       rate=list(self.rate))
        out["params"] = {k: (v.tolist() if isinstance(v, np.ndarray) else v)
                         for k, v in self.params.items()}
        return out


def diagonal_operator(diffusion: Sequence[float], speed: Sequence[float] | None = None,
                      rate: Sequence[float] | None = None) -> BlockMultiplierOperator:
    """Diagonal symbol -D k^2 - i s k - r per component."""
    m = len(diffusion)
    speed = tuple(speed) if speed is not None else (0.0,) * m
    rate = tuple(rate) if rate is not None else (0.0,) * m
    diffusive = any(d > 0 for d in diffusion)
    advective = any(s != 0 for s in speed)
    if diffusive and not advective:
        kind = "diagonal-laplacian"
    elif advective and not diffusive:
        kind = "shift"
    elif not diffusive and not advective:
        kind = "diagonal-laplacian"
    else:
        kind = "composite"
    return BlockMultiplierOperator(
        m=m, symbol_kind=kind, diffusion=tuple(float(d) for d in diffusion),
        speed=tuple(float(s) for s in speed), rate=tuple(float(r) for r in rate),
        group=not diffusive)


def laplacian_operator(shift: float = 0.0, ncomp: int = 1) -> BlockMultiplierOperator:
    """Delta - shift on each component."""
    return diagonal_operator((1.0,) * ncomp, rate=(shift,) * ncomp)


def shift_operator(kappa: float = 0.0, speed: float = 1.0,
                   ncomp: int = 1) -> BlockMultiplierOperator:
    """-speed d/dx - kappa on each component (generates a group)."""
    return diagonal_operator((0.0,) * ncomp, speed=(speed,) * ncomp, rate=(kappa,) * ncomp)


def constant_matrix_operator(matrix: np.ndarray) -> BlockMultiplierOperator:
    mat = np.array(matrix, dtype=complex)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ConfigurationError("constant-matrix operator needs a square matrix")
    frozen = mat.copy()
    frozen.setflags(write=False)

    def fn(k, _mat=frozen):
        return np.broadcast_to(_mat, (len(k),) + _mat.shape)

    return BlockMultiplierOperator(m=mat.shape[0], symbol_kind="constant-matrix",
                                   params={"matrix": [[[z.real, z.imag] for z in row]
                                                      for row in frozen]},
                                   matrix_fn=fn, group=True)


def apply_semigroup(op: BlockMultiplierOperator, t: float,
                    field_: SpectralField) -> SpectralField:
    """exp(t M(k)) applied mode by mode."""
    if t < 0 and not op.group:
        raise BackwardFlowError(
            f"operator of kind {op.symbol_kind} does not generate a group; t={t} < 0")
    if field_.ncomp != op.m:
        raise ConfigurationError("field component count differs from operator size")
    return field_.with_coeffs(op.exp_array(t, field_.coeffs))


def apply_resolvent_inverse(op: BlockMultiplierOperator, field_: SpectralField,
                            mode_set: str | tuple = "all") -> SpectralField:
    """M(k)^{-1} on 'all' modes or on ('high', k0), i.e. |k| >= k0."""
    if mode_set == "all":
        k_min = 0
    elif isinstance(mode_set, tuple) and mode_set[0] == "high":
        k_min = int(mode_set[1])
    else:
        raise ConfigurationError(f"unknown mode set {mode_set!r}")
    return field_.with_coeffs(op.inverse_array(field_.coeffs, k_min))


# ---------------------------------------------------------------------------
# cached exponential-integrator weights


class Propagator:
    """e^{Z}, phi_1(Z), phi_2(Z) for Z = h * scale * M(k), cached per mode.

    ``h`` may be negative; callers are responsible for only doing so on
    mode sets where the backward flow is well defined.
    """

    def __init__(self, op: BlockMultiplierOperator, h: float, K: int, scale: float = 1.0,
                 mode_mask: np.ndarray | None = None):
        self.op = op
        self.h = h
        self.K = K
        self.diagonal = op.is_diagonal
        if self.diagonal:
            Z = h * scale * op.diagonal_symbols(K)
            if mode_mask is not None:
                Z = np.where(mode_mask, Z, 0.0)
            self.weights = [phi_function(n, Z) for n in (0, 1, 2)]
        else:
            Z = h * scale * op.matrices(K)
            self.weights = list(phi_matrices(Z))
        if mode_mask is not None:
            self.weights = [self._mask(w, mode_mask) for w in self.weights]

    def _mask(self, w, mask):
        if self.diagonal:
            return w * mask
        return w * mask[:, None, None]

    def apply(self, n: int, coeffs: np.ndarray) -> np.ndarray:
        w = self.weights[n]
        if self.diagonal:
            return coeffs * w
        return np.einsum("kij,...jk->...ik", w, coeffs)

    def combined(self, a: float, n1: int, b: float, n2: int) -> np.ndarray:
        """Weights a*phi_n1 + b*phi_n2 (same layout as the stored weights)."""
        return a * self.weights[n1] + b * self.weights[n2]

    def apply_weights(self, w: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
        if self.diagonal:
            return coeffs * w
        return np.einsum("kij,...jk->...ik", w, coeffs)


# ---------------------------------------------------------------------------
# semigroup constants


@dataclass(frozen=True)
class SemigroupConstants:
    M_A: float
    C_A: float
    omega_A: float
    M_B: float
    C_B: float
    omega_B: float
    omega_f: float
    omega_g: float
    p: float = 2.0

    def __post_init__(self):
        if not self.omega_A < 0:
            raise ConfigurationError("omega_A must be negative")

    def to_json(self) -> dict:
        return {k: float(getattr(self, k)) for k in
                ("M_A", "C_A", "omega_A", "M_B", "C_B", "omega_B", "omega_f", "omega_g", "p")}


def _group_induced_norms(E: np.ndarray, groups: Sequence[Sequence[int]],
                         n_angles: int = 256) -> np.ndarray:
    """Induced norm of matrices E (..., m, m) for the norm sum_g |x_g|_2.

    The unit ball is the convex hull of unit vectors supported on a single
    group, so the sup is taken over those; unit circles of two-component
    groups are sampled at ``n_angles`` angles.
    """
    best = np.zeros(E.shape[:-2])
    for g in groups:
        g = list(g)
        if len(g) == 1:
            dirs = np.array([[1.0]])
        elif len(g) == 2:
            th = np.linspace(0, 2 * np.pi, n_angles, endpoint=False)
            dirs = np.stack([np.cos(th), np.sin(th)], axis=1)
        else:
            raise ConfigurationError("groups of more than two components are not supported")
        cols = E[..., :, g]
        images = np.einsum("...ij,dj->...di", cols, dirs)
        val = sum(np.linalg.norm(images[..., list(h)], axis=-1) for h in groups)
        best = np.maximum(best, np.max(val, axis=-1))
    return best


def estimate_scale_constant(op: BlockMultiplierOperator, alpha_from: float, alpha_to: float,
                            omega: float, K: int = 32, n_t: int = 200,
                            t_range: tuple[float, float] = (1e-6, 50.0),
                            safety: float = 1.1,
                            groups: Sequence[Sequence[int]] | None = None,
                            sobolev: bool = True,
                            support: np.ndarray | None = None) -> float:
    """sup_{t,k} t^d e^{-omega t} (1+k^2)^d ||exp(t M(k))||, d = alpha_to - alpha_from,
    times ``safety``.

    The sup runs over a log-spaced t-grid plus the per-mode maximiser
    t* = d/(omega - lambda_k).  With ``sobolev=False`` (C^1-type scales where
    every level carries the same norm) the mode weight is dropped.  For
    diagonal operators ``support`` (shape (m, 2K+1)) restricts the sup to the
    component/mode pairs a state can occupy, e.g. mode 0 of constant components.
    """
    d = alpha_to - alpha_from
    if d < 0:
        raise ConfigurationError("alpha_to must be >= alpha_from")
    bound = op.spectral_bound
    if omega < bound - 1e-14 or (d > 0 and omega <= bound):
        raise DivergentSupError(
            f"omega={omega} does not exceed the spectral bound {bound} "
            f"(exponent difference {d})")
    lam = op.mode_eigenvalues(K)
    t = np.logspace(np.log10(t_range[0]), np.log10(t_range[1]), n_t)
    k = wavenumbers(K)
    weight = (1.0 + k.astype(float) ** 2) ** d if sobolev else np.ones_like(k, dtype=float)
    best = 0.0
    if op.is_diagonal:
        sym = op.diagonal_symbols(K)
        keep = np.ones(sym.shape, dtype=bool) if support is None else np.asarray(support, bool)
        tt = t[:, None]
        # combined exponents stay non-positive on the support, so nothing overflows
        rate = np.where(keep, sym.real - omega, -np.inf)
        vals = tt ** d * weight[None, :] * np.max(np.exp(tt[..., None] * rate[None]), axis=1)
        best = float(np.max(vals))
        if d > 0:
            gap = omega - lam
            ok = gap > 0
            ts = np.where(ok, d / np.where(ok, gap, 1.0), 1.0)
            star = ts ** d * weight * np.max(np.exp(ts[None, :] * rate), axis=0)
            best = max(best, float(np.max(np.where(ok, star, 0.0))))
        return safety * best
    mats = op.matrices(K)
    tgrid = list(t)
    if d > 0:
        for lk in lam:
            if omega > lk:
                tgrid.append(d / (omega - lk))
    tgrid = np.array(sorted(tgrid))
    E = expm(tgrid[:, None, None, None] * mats[None])
    if groups is None:
        norms = np.linalg.norm(E, ord=2, axis=(-2, -1))
    else:
        norms = _group_induced_norms(E, groups)
    vals = tgrid[:, None] ** d * np.exp(-omega * tgrid[:, None]) * weight[None, :] * norms
    return safety * float(np.max(vals))
