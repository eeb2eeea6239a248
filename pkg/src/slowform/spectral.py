"""Fourier fields on the 1-D torus, Sobolev and C^1 norms, mode projections
and exactly dealiased polynomial nonlinearities.

Coefficients are stored for modes k = -K..K in increasing order, so mode k
sits at index k + K.  The physical convention is

    u(x_j) = sum_k c_k exp(i k x_j),    x_j = 2 pi j / N.

Most routines come in two flavours: one acting on :class:`SpectralField`
snapshots and an ``*_array`` variant acting on raw coefficient arrays of
shape ``(..., ncomp, 2K+1)``.  The array variants are what the integrators
use; the field variants are the public, value-semantic interface.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

HERMITIAN_TOL = 1e-13


class InvalidFieldError(ValueError):
    """Raised for non-finite or malformed coefficient data."""


class ConfigurationError(ValueError):
    """Raised for inconsistent numerical configuration."""


def wavenumbers(K: int) -> np.ndarray:
    return np.arange(-K, K + 1)


def hermitian_part(coeffs: np.ndarray) -> np.ndarray:
    """Project coefficients onto real-valued signals: (c_k + conj(c_{-k}))/2."""
    return 0.5 * (coeffs + np.conj(coeffs[..., ::-1]))


def enforce_reality(coeffs: np.ndarray, real_flags: Sequence[bool]) -> np.ndarray:
    out = np.array(coeffs, dtype=complex, copy=True)
    for i, flag in enumerate(real_flags):
        if flag:
            out[..., i, :] = hermitian_part(out[..., i, :])
    return out


@dataclass(frozen=True)
class SpectralField:
    """Multi-component Fourier coefficient vector with value semantics."""

    coeffs: np.ndarray
    K: int
    real_flags: tuple[bool, ...]

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.ndim == 1:
            c = c[None, :]
        if c.ndim != 2 or c.shape[1] != 2 * self.K + 1:
            raise InvalidFieldError(
                f"coefficient array of shape {c.shape} does not match K={self.K}")
        flags = tuple(bool(f) for f in self.real_flags)
        if len(flags) != c.shape[0]:
            raise InvalidFieldError("one reality flag per component is required")
        if not np.all(np.isfinite(c)):
            raise InvalidFieldError("field has non-finite coefficients")
        c = enforce_reality(c, flags)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "real_flags", flags)

    @property
    def ncomp(self) -> int:
        return self.coeffs.shape[0]

    def mode(self, k: int) -> np.ndarray:
        return self.coeffs[:, k + self.K]

    def with_coeffs(self, coeffs: np.ndarray) -> "SpectralField":
        return SpectralField(coeffs, self.K, self.real_flags)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _check_compatible(self, other)
        return self.with_coeffs(self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _check_compatible(self, other)
        return self.with_coeffs(self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "SpectralField":
        return self.with_coeffs(self.coeffs * scalar)

    __rmul__ = __mul__

    def resized(self, K_new: int) -> "SpectralField":
        """Zero-pad or truncate to a different mode count."""
        out = np.zeros((self.ncomp, 2 * K_new + 1), dtype=complex)
        m = min(self.K, K_new)
        out[:, K_new - m:K_new + m + 1] = self.coeffs[:, self.K - m:self.K + m + 1]
        return SpectralField(out, K_new, self.real_flags)

    def to_physical(self, n_points: int | None = None) -> np.ndarray:
        n = n_points or (2 * self.K + 1)
        vals = to_physical_array(self.coeffs, self.K, n)
        return np.where(np.array(self.real_flags)[:, None], vals.real, vals)

    def to_json(self) -> dict:
        k = wavenumbers(self.K)
        comps = [[[int(kk), float(c.real), float(c.imag)] for kk, c in zip(k, row)]
                 for row in self.coeffs]
        return {"K": self.K, "reality": list(self.real_flags), "components": comps}

    @classmethod
    def from_json(cls, data: dict | str) -> "SpectralField":
        if isinstance(data, str):
            data = json.loads(data)
        K = int(data["K"])
        comps = data["components"]
        coeffs = np.zeros((len(comps), 2 * K + 1), dtype=complex)
        for i, triples in enumerate(comps):
            for k, re, im in triples:
                if abs(int(k)) > K:
                    raise InvalidFieldError(f"mode {k} exceeds K={K}")
                coeffs[i, int(k) + K] = complex(re, im)
        return cls(coeffs, K, tuple(data["reality"]))

    @classmethod
    def zeros(cls, ncomp: int, K: int, real_flags: Sequence[bool] | None = None):
        flags = tuple(real_flags) if real_flags is not None else (True,) * ncomp
        return cls(np.zeros((ncomp, 2 * K + 1), dtype=complex), K, flags)

    @classmethod
    def from_physical(cls, values: np.ndarray, K: int,
                      real_flags: Sequence[bool] | None = None) -> "SpectralField":
        values = np.atleast_2d(values)
        flags = tuple(real_flags) if real_flags is not None else (True,) * values.shape[0]
        return cls(from_physical_array(values, K), K, flags)


def _check_compatible(a: SpectralField, b: SpectralField) -> None:
    if a.K != b.K or a.ncomp != b.ncomp:
        raise InvalidFieldError("fields differ in K or component count")


def _as_array(field_or_array) -> tuple[np.ndarray, int]:
    if isinstance(field_or_array, SpectralField):
        return field_or_array.coeffs, field_or_array.K
    arr = np.asarray(field_or_array)
    return arr, (arr.shape[-1] - 1) // 2


# ---------------------------------------------------------------------------
# transforms


def to_physical_array(coeffs: np.ndarray, K: int, n_points: int) -> np.ndarray:
    """Evaluate the Fourier series on the uniform grid of ``n_points`` nodes."""
    if n_points < 2 * K + 1:
        raise ConfigurationError(f"grid of {n_points} points cannot carry K={K}")
    shape = coeffs.shape[:-1] + (n_points,)
    buf = np.zeros(shape, dtype=complex)
    idx = np.mod(wavenumbers(K), n_points)
    buf[..., idx] = coeffs
    return np.fft.ifft(buf, axis=-1) * n_points


def from_physical_array(values: np.ndarray, K: int) -> np.ndarray:
    """Fourier coefficients for modes -K..K of grid values (grid size >= 2K+1)."""
    n = values.shape[-1]
    if n < 2 * K + 1:
        raise ConfigurationError(f"grid of {n} points cannot resolve K={K}")
    spec = np.fft.fft(values, axis=-1) / n
    return spec[..., np.mod(wavenumbers(K), n)]


def derivative_array(coeffs: np.ndarray, K: int) -> np.ndarray:
    return coeffs * (1j * wavenumbers(K))


def oversampled_grid_size(K: int) -> int:
    return 4 * (2 * K + 1)


# ---------------------------------------------------------------------------
# norms


def _check_finite(arr: np.ndarray) -> None:
    if not np.all(np.isfinite(arr)):
        raise InvalidFieldError("field has non-finite coefficients")


def hs_norm_array(coeffs: np.ndarray, order: float) -> np.ndarray:
    """Sobolev norm over the trailing (component, mode) axes."""
    if not np.isfinite(order):
        raise ConfigurationError("Sobolev order must be finite")
    K = (coeffs.shape[-1] - 1) // 2
    w = (1.0 + wavenumbers(K).astype(float) ** 2) ** order
    return np.sqrt(np.sum(w * np.abs(coeffs) ** 2, axis=(-1, -2)))


def hs_norm(field: SpectralField | np.ndarray, order: float) -> float:
    """(sum_k (1+k^2)^order |c_k|^2)^(1/2), summed over components."""
    arr, _ = _as_array(field)
    _check_finite(arr)
    if arr.ndim == 1:
        arr = arr[None, :]
    return float(hs_norm_array(arr, order))


def _group_modulus(values: np.ndarray, group: Sequence[int]) -> np.ndarray:
    return np.sqrt(np.sum(np.abs(values[..., list(group), :]) ** 2, axis=-2))


def c1_norm_array(coeffs: np.ndarray, groups: Sequence[Sequence[int]] | None = None,
                  include_derivative: bool = True) -> np.ndarray:
    """C^1 norm on the 4x oversampled grid.

    Each group of components is treated as one vector-valued function (for
    example real and imaginary part of a complex field); the norm is the sum
    over groups of sup|u| + sup|u'| with the pointwise Euclidean modulus.
    Without ``groups`` every component is its own group.
    """
    K = (coeffs.shape[-1] - 1) // 2
    ncomp = coeffs.shape[-2]
    if groups is None:
        groups = [(i,) for i in range(ncomp)]
    n = oversampled_grid_size(K)
    vals = to_physical_array(coeffs, K, n)
    total = 0.0
    for g in groups:
        total = total + np.max(_group_modulus(vals, g), axis=-1)
    if include_derivative:
        dvals = to_physical_array(derivative_array(coeffs, K), K, n)
        for g in groups:
            total = total + np.max(_group_modulus(dvals, g), axis=-1)
    return total


def c1_norm(field: SpectralField | np.ndarray,
            groups: Sequence[Sequence[int]] | None = None) -> float:
    """sup|u| + sup|u'| evaluated on a 4x oversampled collocation grid."""
    arr, _ = _as_array(field)
    _check_finite(arr)
    if arr.ndim == 1:
        arr = arr[None, :]
    return float(c1_norm_array(arr, groups))


def sup_norm(field: SpectralField | np.ndarray,
             groups: Sequence[Sequence[int]] | None = None) -> float:
    arr, _ = _as_array(field)
    _check_finite(arr)
    if arr.ndim == 1:
        arr = arr[None, :]
    return float(c1_norm_array(arr, groups, include_derivative=False))


# ---------------------------------------------------------------------------
# projections


def low_mode_mask(K: int, k_threshold: int) -> np.ndarray:
    return np.abs(wavenumbers(K)) < k_threshold


def project_modes_array(coeffs: np.ndarray, k_threshold: int, keep: str) -> np.ndarray:
    K = (coeffs.shape[-1] - 1) // 2
    if not 0 <= k_threshold <= K:
        raise ConfigurationError(f"threshold {k_threshold} outside [0, {K}]")
    mask = low_mode_mask(K, k_threshold)
    if keep == "low":
        return coeffs * mask
    if keep == "high":
        return coeffs * ~mask
    raise ConfigurationError(f"keep must be 'low' or 'high', got {keep!r}")


def project_modes(field: SpectralField, k_threshold: int, keep: str) -> SpectralField:
    """keep='low' zeroes |k| >= threshold; keep='high' zeroes |k| < threshold."""
    return field.with_coeffs(project_modes_array(field.coeffs, k_threshold, keep))


# ---------------------------------------------------------------------------
# smooth norm cutoffs


def smoothstep(x: np.ndarray, order: int = 5) -> np.ndarray:
    """Monotone step from 0 to 1 on [0, 1]; cubic (C^1) or quintic (C^2)."""
    x = np.clip(x, 0.0, 1.0)
    if order == 3:
        return x * x * (3.0 - 2.0 * x)
    if order == 5:
        return x ** 3 * (x * (6.0 * x - 15.0) + 10.0)
    raise ConfigurationError("smoothstep order must be 3 or 5")


SMOOTHSTEP_PEAK_SLOPE = {3: 1.5, 5: 1.875}


@dataclass(frozen=True)
class Cutoff:
    """Scalar factor 1 - smoothstep((r - radius)/(outer - radius)) of a norm r.

    ``norm`` is 'hs' (Sobolev of given order), 'c1' (with optional component
    groups) or 'abs' (modulus of a constant component).  ``inputs`` lists the
    input components the norm is taken over; shifts of the owning map apply.
    """

    inputs: tuple[int, ...]
    norm: str
    radius: float
    outer: float
    order: float = 0.0
    groups: tuple[tuple[int, ...], ...] | None = None
    profile: int = 5

    def __post_init__(self):
        if not self.outer > self.radius >= 0:
            raise ConfigurationError("cutoff needs 0 <= radius < outer radius")
        if self.norm not in ("hs", "c1", "abs"):
            raise ConfigurationError(f"unknown cutoff norm {self.norm!r}")

    @property
    def max_slope(self) -> float:
        """Bound on |d chi / d r|."""
        return SMOOTHSTEP_PEAK_SLOPE[self.profile] / (self.outer - self.radius)

    def measure(self, coeffs: np.ndarray) -> np.ndarray:
        """Norm of the selected inputs; ``coeffs`` has shape (..., n_in, nk)."""
        sub = coeffs[..., list(self.inputs), :]
        if self.norm == "hs":
            return hs_norm_array(sub, self.order)
        if self.norm == "c1":
            return c1_norm_array(sub, self.groups)
        K = (coeffs.shape[-1] - 1) // 2
        return np.sqrt(np.sum(np.abs(sub[..., K]) ** 2, axis=-1))

    def value(self, r: np.ndarray) -> np.ndarray:
        return 1.0 - smoothstep((r - self.radius) / (self.outer - self.radius), self.profile)


@dataclass(frozen=True)
class Term:
    """coeff * prod(input_i ** p_i) * prod(cutoff_j ** q_j), added to ``output``."""

    output: int
    coeff: float
    factors: tuple[tuple[int, int], ...] = ()
    cutoffs: tuple[tuple[int, int], ...] = ()
    param: int | None = None


@dataclass(frozen=True)
class PolynomialMap:
    """Polynomial nonlinearity with norm-dependent cutoff factors.

    Inputs are the concatenated components of the argument fields.  Inputs
    listed in ``constant_inputs`` only carry mode 0 (dummy variables) and do
    not count toward the dealiasing degree.  ``shifts`` subtracts a constant
    from an input before the terms and the cutoff norms see it.
    """

    n_inputs: int
    n_outputs: int
    terms: tuple[Term, ...]
    cutoffs: tuple[Cutoff, ...] = ()
    constant_inputs: frozenset[int] = field(default_factory=frozenset)
    shifts: tuple[complex, ...] | None = None
    output_real: tuple[bool, ...] | None = None

    def __post_init__(self):
        for t in self.terms:
            if not 0 <= t.output < self.n_outputs:
                raise ConfigurationError(f"term output {t.output} out of range")
            for i, p in t.factors:
                if not 0 <= i < self.n_inputs or p < 1:
                    raise ConfigurationError(f"bad factor ({i}, {p})")
            for j, q in t.cutoffs:
                if not 0 <= j < len(self.cutoffs) or q < 1:
                    raise ConfigurationError(f"bad cutoff reference ({j}, {q})")
        if self.shifts is not None and len(self.shifts) != self.n_inputs:
            raise ConfigurationError("one shift per input is required")

    @property
    def degree(self) -> int:
        """Largest total power over non-constant inputs."""
        best = 0
        for t in self.terms:
            best = max(best, sum(p for i, p in t.factors if i not in self.constant_inputs))
        return best

    def grid_size(self, K: int) -> int:
        return (max(self.degree, 1) + 1) * K + 2

    def is_zero(self) -> bool:
        return len(self.terms) == 0

    def shifted(self, coeffs: np.ndarray) -> np.ndarray:
        if self.shifts is None or not any(self.shifts):
            return coeffs
        K = (coeffs.shape[-1] - 1) // 2
        out = np.array(coeffs, dtype=complex, copy=True)
        out[..., :, K] -= np.asarray(self.shifts, dtype=complex)
        return out

    def cutoff_values(self, coeffs: np.ndarray) -> list[np.ndarray]:
        """Cutoff factors, one array of shape coeffs.shape[:-2] per cutoff."""
        c = self.shifted(coeffs)
        return [cut.value(cut.measure(c)) for cut in self.cutoffs]

    def evaluate_array(self, coeffs: np.ndarray, params: Sequence[float] = (),
                       n_points: int | None = None) -> np.ndarray:
        if coeffs.shape[-2] != self.n_inputs:
            raise ConfigurationError(
                f"map expects {self.n_inputs} input components, got {coeffs.shape[-2]}")
        K = (coeffs.shape[-1] - 1) // 2
        batch = coeffs.shape[:-2]
        out_shape = batch + (self.n_outputs, 2 * K + 1)
        if self.is_zero():
            return np.zeros(out_shape, dtype=complex)
        need = self.grid_size(K)
        n = need if n_points is None else n_points
        if n < need:
            raise ConfigurationError(
                f"grid of {n} points too small for degree {self.degree} at K={K} "
                f"(need {need})")
        shifted = self.shifted(coeffs)
        cuts = [cut.value(cut.measure(shifted)) for cut in self.cutoffs]
        phys = to_physical_array(shifted, K, n)
        acc = np.zeros(batch + (self.n_outputs, n), dtype=complex)
        for t in self.terms:
            val = np.full(batch + (n,), t.coeff, dtype=complex)
            if t.param is not None:
                val = val * params[t.param]
            for i, p in t.factors:
                val = val * phys[..., i, :] ** p
            for j, q in t.cutoffs:
                val = val * (cuts[j] ** q)[..., None]
            acc[..., t.output, :] += val
        result = from_physical_array(acc, K)
        if self.output_real is not None:
            result = enforce_reality(result, self.output_real)
        return result


def evaluate_nonlinearity(spec: PolynomialMap, fields: Sequence[SpectralField],
                          params: Sequence[float] = ()) -> SpectralField:
    """Evaluate ``spec`` on the concatenated components of ``fields``."""
    Ks = {f.K for f in fields}
    if len(Ks) != 1:
        raise ConfigurationError("all argument fields must share K")
    K = Ks.pop()
    coeffs = np.concatenate([f.coeffs for f in fields], axis=0)
    out = spec.evaluate_array(coeffs, params)
    flags = spec.output_real or tuple(
        all(flag for f in fields for flag in f.real_flags) for _ in range(spec.n_outputs))
    return SpectralField(out, K, flags)


def direct_convolution(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Coefficients of the product of two truncated series, truncated to K."""
    K = (a.shape[-1] - 1) // 2
    full = np.convolve(a, b)
    return full[K:3 * K + 1]


def random_smooth_field(rng: np.random.Generator, K: int, ncomp: int = 1,
                        decay: float = 2.0, scale: float = 1.0,
                        k_max: int | None = None,
                        real_flags: Iterable[bool] | None = None) -> SpectralField:
    """Real random field with coefficients ~ scale * (1+|k|)^-decay."""
    k = wavenumbers(K)
    amp = scale * (1.0 + np.abs(k)) ** (-decay)
    if k_max is not None:
        amp = amp * (np.abs(k) <= k_max)
    c = (rng.standard_normal((ncomp, 2 * K + 1))
         + 1j * rng.standard_normal((ncomp, 2 * K + 1))) * amp
    flags = tuple(real_flags) if real_flags is not None else (True,) * ncomp
    return SpectralField(c, K, flags)
