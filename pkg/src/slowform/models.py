"""The three fast-slow systems on the 1-D torus, a scalar linear test system,
Lipschitz estimation and the closed-form Maxwell-Bloch critical manifold.

Every system is wired as  eps u' = A u + f(u, v),  v' = B v + g(u, v)  with
u and v stored as multi-component real Fourier fields.  Constant auxiliary
slow components ("dummies") carry the affine terms so that f(0,0) = g(0,0) = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import bounds
from .operators import (BlockMultiplierOperator, SemigroupConstants, constant_matrix_operator,
                        diagonal_operator, estimate_scale_constant, laplacian_operator)
from .spectral import (ConfigurationError, Cutoff, PolynomialMap, SpectralField, Term,
                       c1_norm_array, from_physical_array, hs_norm_array, to_physical_array,
                       wavenumbers)
from .splitting import ModeSplitting, compute_splitting

MODEL_IDS = ("stommel", "fhn", "maxwell_bloch", "linear")
LIPSCHITZ_SAFETY = 1.5


@dataclass(frozen=True)
class ScaleSetting:
    """Exponents of the Sobolev ladders X_a = H^{s+2a}, Y_a = H^{s+2(1-delta_Y)+2a}."""

    s: float = 0.0
    gamma_X: float = 1.0
    delta_X: float = 1.0
    delta_Y: float = 1.0
    norm_kind: str = "sobolev"

    def __post_init__(self):
        if self.norm_kind not in ("sobolev", "c1"):
            raise ConfigurationError(f"unknown norm kind {self.norm_kind!r}")
        if self.s < 0:
            raise ConfigurationError("s must be nonnegative")
        for name in ("gamma_X", "delta_Y"):
            val = getattr(self, name)
            if not 0 < val <= 1:
                raise ConfigurationError(f"{name} must lie in (0, 1]")
        if not 1 - self.gamma_X - 1e-15 <= self.delta_X <= 1:
            raise ConfigurationError("delta_X must lie in [1 - gamma_X, 1]")

    def x_order(self, alpha: float) -> float:
        """Order passed to hs_norm for X_alpha."""
        return self.s / 2 + alpha

    def y_order(self, alpha: float) -> float:
        return self.s / 2 + (1 - self.delta_Y) + alpha

    def to_json(self) -> dict:
        return {"s": self.s, "gamma_X": self.gamma_X, "delta_X": self.delta_X,
                "delta_Y": self.delta_Y, "norm_kind": self.norm_kind}


# ---------------------------------------------------------------------------
# Lipschitz estimation


@dataclass(frozen=True)
class NormSpec:
    """Sobolev norm of a given order, or a C^1 / sup norm with component groups."""

    kind: str = "hs"
    order: float = 0.0
    groups: tuple[tuple[int, ...], ...] | None = None

    def __call__(self, coeffs: np.ndarray) -> np.ndarray:
        if self.kind == "hs":
            return hs_norm_array(coeffs, self.order)
        if self.kind == "c1":
            return c1_norm_array(coeffs, self.groups)
        if self.kind == "sup":
            return c1_norm_array(coeffs, self.groups, include_derivative=False)
        raise ConfigurationError(f"unknown norm kind {self.kind!r}")


@dataclass(frozen=True)
class InputBlock:
    """Inputs perturbed together, measured in one norm, within ``radius`` of the center."""

    inputs: tuple[int, ...]
    norm: NormSpec
    radius: float


@dataclass(frozen=True)
class LipschitzRegion:
    """Sampling region: center point plus perturbable blocks; other inputs stay fixed.

    The distance between two points is the sum of the block norms.
    """

    center: np.ndarray
    blocks: tuple[InputBlock, ...]
    out_norm: NormSpec
    constant_inputs: frozenset[int] = frozenset()
    decay: float = 2.0


def _random_real_coeffs(rng, batch: int, ncomp: int, K: int, decay: float,
                        constant: Sequence[bool]) -> np.ndarray:
    k = wavenumbers(K)
    amp = (1.0 + np.abs(k)) ** (-decay)
    c = (rng.standard_normal((batch, ncomp, 2 * K + 1))
         + 1j * rng.standard_normal((batch, ncomp, 2 * K + 1))) * amp
    c = 0.5 * (c + np.conj(c[..., ::-1]))
    for i, flag in enumerate(constant):
        if flag:
            c[:, i, :] = 0.0
            c[:, i, K] = rng.standard_normal(batch)
    return c


def _scaled_to(block: InputBlock, pert: np.ndarray, target: np.ndarray) -> np.ndarray:
    norms = block.norm(pert)
    norms = np.where(norms > 0, norms, 1.0)
    return pert * (target / norms)[:, None, None]


def estimate_lipschitz(spec: PolynomialMap, region: LipschitzRegion, samples: int = 2000,
                       seed: int = 0, params: Sequence[float] = ()) -> float:
    """Largest sampled ratio |F(p1) - F(p2)| / |p1 - p2|, times 1.5.

    p1 is uniform in norm-radius around the center; p2 - p1 has a log-uniform
    size between 1e-4 and 1 times the block radius and perturbs a random
    nonempty subset of the blocks.
    """
    if samples < 100:
        raise ConfigurationError("at least 100 samples are required")
    if not region.blocks or all(b.radius <= 0 for b in region.blocks):
        raise ConfigurationError("degenerate region: no block with positive radius")
    if spec.is_zero():
        return 0.0
    rng = np.random.default_rng(seed)
    center = np.asarray(region.center, dtype=complex)
    K = (center.shape[-1] - 1) // 2
    p1 = np.broadcast_to(center, (samples,) + center.shape).copy()
    p2 = p1.copy()
    dist = np.zeros(samples)
    n_blocks = len(region.blocks)
    active = rng.random((samples, n_blocks)) < 0.5
    active[np.arange(samples), rng.integers(0, n_blocks, samples)] = True
    for b, block in enumerate(region.blocks):
        idx = list(block.inputs)
        const = [i in region.constant_inputs for i in idx]
        base = _random_real_coeffs(rng, samples, len(idx), K, region.decay, const)
        base = _scaled_to(block, base, block.radius * rng.random(samples))
        step = _random_real_coeffs(rng, samples, len(idx), K, region.decay, const)
        size = block.radius * 10.0 ** rng.uniform(-4, 0, samples) * active[:, b]
        step = _scaled_to(block, step, size)
        p1[:, idx, :] += base
        p2[:, idx, :] += base + step
        dist += block.norm(step)
    d1 = spec.evaluate_array(p1, params)
    d2 = spec.evaluate_array(p2, params)
    num = region.out_norm(d1 - d2)
    ratio = np.where(dist > 0, num / np.where(dist > 0, dist, 1.0), 0.0)
    return LIPSCHITZ_SAFETY * float(np.max(ratio))


def _split_linear(spec: PolynomialMap) -> tuple[list[Term], PolynomialMap]:
    """Terms of degree one in a single non-constant input without cutoffs, and the rest."""
    linear, rest = [], []
    for t in spec.terms:
        free = [(i, p) for i, p in t.factors if i not in spec.constant_inputs]
        fixed = [i for i, _ in t.factors if i in spec.constant_inputs]
        if (len(free) == 1 and free[0][1] == 1 and not fixed and not t.cutoffs
                and t.param is None and not (spec.shifts and spec.shifts[free[0][0]])):
            linear.append(t)
        else:
            rest.append(t)
    remainder = PolynomialMap(spec.n_inputs, spec.n_outputs, tuple(rest), spec.cutoffs,
                              spec.constant_inputs, spec.shifts, spec.output_real)
    return linear, remainder


def linear_part_norm(terms: Sequence[Term], n_outputs: int, region: LipschitzRegion,
                     K: int) -> float:
    """Exact operator norm of a constant-coefficient linear map between the region norms.

    With the sum-of-block-norms distance the norm is the largest block norm.
    For Sobolev norms each mode is scaled by the weight ratio; for C^1-type
    norms the pointwise matrix acts on values and derivatives alike.
    """
    if not terms:
        return 0.0
    C = np.zeros((n_outputs, region.center.shape[0]))
    for t in terms:
        C[t.output, t.factors[0][0]] += t.coeff
    out = region.out_norm
    k2 = wavenumbers(K).astype(float) ** 2
    best = 0.0
    for block in region.blocks:
        cols = C[:, list(block.inputs)]
        if not np.any(cols):
            continue
        if out.kind == "hs" and block.norm.kind == "hs":
            ratio = np.max((1.0 + k2) ** ((out.order - block.norm.order) / 2))
            val = np.linalg.norm(cols, 2) * ratio
        else:
            out_groups = out.groups or tuple((i,) for i in range(n_outputs))
            val = sum(np.linalg.norm(cols[list(g), :], 2) for g in out_groups)
        best = max(best, float(val))
    return best


def lipschitz_constant(spec: PolynomialMap, region: LipschitzRegion, K: int,
                       samples: int = 2000, seed: int = 0) -> float:
    """Exact norm of the linear part plus the sampled estimate of the remainder."""
    linear, remainder = _split_linear(spec)
    return (linear_part_norm(linear, spec.n_outputs, region, K)
            + estimate_lipschitz(remainder, region, samples, seed))


# ---------------------------------------------------------------------------
# systems


@dataclass(frozen=True)
class FastSlowSystem:
    """eps u' = A u + f(u, v),  v' = B v + g(u, v) with constants and norms."""

    model_id: str
    A: BlockMultiplierOperator
    B: BlockMultiplierOperator
    f_spec: PolynomialMap
    g_spec: PolynomialMap
    L_f: float
    L_g: float
    setting: ScaleSetting
    consts: SemigroupConstants
    params: dict
    K: int
    u_names: tuple[str, ...]
    v_names: tuple[str, ...]
    v_constant: tuple[int, ...] = ()
    u_groups: tuple[tuple[int, ...], ...] | None = None
    v_groups: tuple[tuple[int, ...], ...] | None = None
    slow_shift: float = 0.0
    kappa: float = 0.0
    a_inverse_norm: float = 1.0
    regions: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def nu(self) -> int:
        return self.A.m

    @property
    def nv(self) -> int:
        return self.B.m

    @property
    def u_real(self) -> tuple[bool, ...]:
        return (True,) * self.nu

    @property
    def v_real(self) -> tuple[bool, ...]:
        return (True,) * self.nv

    def joint(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        return np.concatenate([u, v], axis=-2)

    def f_array(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        return self.f_spec.evaluate_array(self.joint(u, v))

    def g_array(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        return self.g_spec.evaluate_array(self.joint(u, v))

    def x_norm(self, u: np.ndarray, alpha: float = 1.0) -> np.ndarray:
        if self.setting.norm_kind == "c1":
            return c1_norm_array(u, self.u_groups)
        return hs_norm_array(u, self.setting.x_order(alpha))

    def y_norm(self, v: np.ndarray, alpha: float = 1.0) -> np.ndarray:
        if self.setting.norm_kind == "c1":
            return c1_norm_array(v, self.v_groups, include_derivative=alpha > 0)
        return hs_norm_array(v, self.setting.y_order(alpha))

    def u_field(self, coeffs: np.ndarray) -> SpectralField:
        return SpectralField(coeffs, self.K, self.u_real)

    def v_field(self, coeffs: np.ndarray) -> SpectralField:
        return SpectralField(coeffs, self.K, self.v_real)

    def zeros_u(self) -> np.ndarray:
        return np.zeros((self.nu, 2 * self.K + 1), dtype=complex)

    def zeros_v(self) -> np.ndarray:
        return np.zeros((self.nv, 2 * self.K + 1), dtype=complex)

    def splitting(self, zeta: float) -> ModeSplitting:
        return compute_splitting(zeta, self.consts.omega_A, self.model_id,
                                 slow_shift=self.slow_shift, kappa=self.kappa)

    def splitting_M_B(self) -> float:
        """Bound on the slow semigroup restricted to a mode block: 1 for diagonal B."""
        return 1.0 if self.B.is_diagonal else self.consts.M_B

    def dummy_values(self, variant: str = "full", eps: float | None = None) -> dict[int, float]:
        """Values of the constant slow components ('full' or 'slow' subsystem variant)."""
        p = self.params
        if self.model_id == "stommel":
            z1 = 0.0 if variant == "slow" or eps is None else math.sqrt(eps)
            return {1: z1, 2: p["M"], 3: p["mu"]}
        if self.model_id == "maxwell_bloch":
            return {2: p["gamma_par"] * (p["lambda"] + 1.0) / p["sigma"]}
        return {}

    def slow_state(self, pde_part: np.ndarray, variant: str = "full",
                   eps: float | None = None) -> np.ndarray:
        """Assemble v from the non-constant components plus dummies."""
        pde_part = np.atleast_2d(np.asarray(pde_part, dtype=complex))
        v = self.zeros_v()
        free = [i for i in range(self.nv) if i not in self.v_constant]
        v[free] = pde_part[:len(free)]
        for i, val in self.dummy_values(variant, eps).items():
            v[i, :] = 0.0
            v[i, self.K] = val
        return v

    def with_dummies(self, v: np.ndarray, variant: str = "full",
                     eps: float | None = None) -> np.ndarray:
        out = np.array(v, dtype=complex, copy=True)
        for i, val in self.dummy_values(variant, eps).items():
            out[..., i, :] = 0.0
            out[..., i, self.K] = val
        return out

    def inside_cutoffs(self, u: np.ndarray, v: np.ndarray) -> bool:
        """True when every cutoff acting on field inputs equals 1 (the cut and
        uncut systems agree there).  Cutoffs of constant components are part
        of the model, not of the region."""
        z = self.joint(u, v)
        for spec in (self.f_spec, self.g_spec):
            for cut in spec.cutoffs:
                if set(cut.inputs) <= spec.constant_inputs:
                    continue
                if np.any(cut.value(cut.measure(spec.shifted(z))) < 1.0):
                    return False
        return True

    def summary(self) -> dict:
        return {"model": self.model_id, "K": self.K, "L_f": self.L_f, "L_g": self.L_g,
                "setting": self.setting.to_json(), "consts": self.consts.to_json(),
                "params": {k: (v if not isinstance(v, complex) else [v.real, v.imag])
                           for k, v in self.params.items()}}


# ---------------------------------------------------------------------------
# defaults

STOMMEL_DEFAULTS = {"mu": 1.0, "eta_st": 1.0, "M": 25.0, "sigma": 0.05, "R": 10.0,
                    "omega_A": -0.9, "omega_B": 0.1, "s": 0.3, "delta_Y": 0.75,
                    "region_u": 0.1, "region_w": 0.1}
FHN_DEFAULTS = {"a": 0.25, "gamma_fhn": 0.5, "sigma": 0.05, "R": None,
                "omega_A_factor": 0.95}
MB_DEFAULTS = {"gamma_par": 1.0, "kappa": 1.0, "delta": 0.0, "lambda": 1.0,
               "sigma": 0.05, "R": 10.0, "Ktilde": 10.0, "w0": 0.0,
               "omega_A_factor": 0.9}
LINEAR_DEFAULTS = {"lambda_A": -1.0, "lambda_B": -0.5, "c": 0.2, "omega_B_margin": 0.0}


def _merged(defaults: dict, params: dict | None) -> dict:
    p = dict(defaults)
    if params:
        unknown = set(params) - set(defaults) - {"mu", "K_decay"}
        if unknown:
            raise ConfigurationError(f"unknown parameters {sorted(unknown)}")
        p.update(params)
    return p


def _semigroup_constants(A, B, setting: ScaleSetting, omega_A: float, omega_B: float,
                         K: int, L_f: float, L_g: float, u_groups=None, v_groups=None,
                         safety: float = 1.1, v_constant=()) -> SemigroupConstants:
    sob = setting.norm_kind == "sobolev"
    kw = dict(K=K, safety=safety, sobolev=sob)
    v_support = None
    if v_constant and B.is_diagonal:
        v_support = np.ones((B.m, 2 * K + 1), dtype=bool)
        v_support[list(v_constant)] = wavenumbers(K) == 0
    M_A = estimate_scale_constant(A, 0.0, 0.0, omega_A, groups=u_groups, **kw)
    C_A = max(estimate_scale_constant(A, setting.gamma_X, 1.0, omega_A, groups=u_groups, **kw),
              estimate_scale_constant(A, setting.delta_X, 1.0, omega_A, groups=u_groups, **kw))
    M_B = estimate_scale_constant(B, 0.0, 0.0, omega_B, groups=v_groups, support=v_support,
                                  **kw)
    C_B = estimate_scale_constant(B, setting.delta_Y, 1.0, omega_B, groups=v_groups,
                                  support=v_support, **kw)
    partial = SemigroupConstants(M_A, C_A, omega_A, M_B, C_B, omega_B, 0.0, 0.0)
    omega_f, omega_g = bounds.omega_constants(setting, partial, L_f, L_g)
    return SemigroupConstants(M_A, C_A, omega_A, M_B, C_B, omega_B, omega_f, omega_g)


def _a_inverse_norm(A: BlockMultiplierOperator, setting: ScaleSetting, K: int,
                    groups=None) -> float:
    """Norm of A^{-1} from X_0 to X_1 (Sobolev) or on X (C^1 scales)."""
    if A.is_diagonal:
        sym = np.abs(A.diagonal_symbols(K))
        if setting.norm_kind == "sobolev":
            w = 1.0 + wavenumbers(K).astype(float) ** 2
            return float(np.max(w / np.min(sym, axis=0)))
        return float(np.max(1.0 / np.min(sym, axis=0)))
    inv = np.linalg.inv(A.matrices(0)[0])
    if groups is None:
        return float(np.linalg.norm(inv, 2))
    from .operators import _group_induced_norms
    return float(_group_induced_norms(inv[None], groups)[0])


def _check_origin(f_spec: PolynomialMap, g_spec: PolynomialMap, n_in: int, K: int) -> None:
    zero = np.zeros((n_in, 2 * K + 1), dtype=complex)
    if np.max(np.abs(f_spec.evaluate_array(zero))) > 1e-14 or \
            np.max(np.abs(g_spec.evaluate_array(zero))) > 1e-14:
        raise ConfigurationError("nonlinearities must vanish at the origin")


def _finish(model_id, A, B, f_spec, g_spec, setting, params, K, u_names, v_names,
            v_constant, f_region, g_region, omega_A, omega_B, samples, seed,
            u_groups=None, v_groups=None, slow_shift=0.0, kappa=0.0, safety=1.1,
            lipschitz_override=None) -> FastSlowSystem:
    n_in = A.m + B.m
    _check_origin(f_spec, g_spec, n_in, K)
    if lipschitz_override is not None:
        L_f, L_g = lipschitz_override
    else:
        L_f = lipschitz_constant(f_spec, f_region, K, samples, seed)
        L_g = lipschitz_constant(g_spec, g_region, K, samples, seed + 1)
    consts = _semigroup_constants(A, B, setting, omega_A, omega_B, K, L_f, L_g,
                                  u_groups, v_groups, safety, v_constant)
    if not consts.omega_f < 0:
        raise ConfigurationError(
            f"weak normal hyperbolicity fails: omega_f = {consts.omega_f} >= 0")
    a_inv = _a_inverse_norm(A, setting, K, u_groups)
    if not L_f * a_inv < 1:
        raise ConfigurationError(
            f"critical-manifold contraction fails: L_f |A^-1| = {L_f * a_inv} >= 1")
    return FastSlowSystem(model_id, A, B, f_spec, g_spec, float(L_f), float(L_g), setting,
                          consts, params, K, u_names, v_names, tuple(v_constant), u_groups,
                          v_groups, slow_shift, kappa, a_inv,
                          {"f": f_region, "g": g_region})


def _build_stommel(p: dict, setting: ScaleSetting | None, K: int, samples: int,
                   seed: int, safety: float) -> FastSlowSystem:
    setting = setting or ScaleSetting(s=p["s"], gamma_X=1 - p["delta_Y"], delta_X=1.0,
                                      delta_Y=p["delta_Y"])
    d = setting.delta_Y
    if not 0.5 < d < 1:
        raise ConfigurationError("Stommel needs delta_Y in (1/2, 1)")
    if not 2 * setting.s + 4 * (1 - d) > 1:
        raise ConfigurationError("Stommel needs 2 s + 4 (1 - delta_Y) > 1")
    if abs(setting.gamma_X - (1 - d)) > 1e-12 or setting.delta_X != 1.0:
        raise ConfigurationError("Stommel exponents are gamma_X = 1 - delta_Y, delta_X = 1")
    mu, eta, M, sigma, R = p["mu"], p["eta_st"], p["M"], p["sigma"], p["R"]
    if not (mu > 0 and eta > 0 and sigma > 0 and R > 0):
        raise ConfigurationError("Stommel parameters mu, eta_st, sigma, R must be positive")
    A = laplacian_operator(1.0)
    B = diagonal_operator((1.0, 0.0, 0.0, 0.0), rate=(0.0, 1.0, 1.0, 1.0))
    # inputs: 0 u | 1 w, 2 z1, 3 z2, 4 z3
    x1 = setting.x_order(1.0)
    chi1 = Cutoff((1,), "hs", R, 2 * R, order=setting.y_order(0.0))
    chi2 = Cutoff((0,), "hs", R, 2 * R, order=x1)
    chi3 = Cutoff((1,), "hs", R, 2 * R, order=setting.y_order(1.0))
    psi = Cutoff((2,), "abs", sigma, 2 * sigma)
    e2 = eta ** 2
    cuts = (chi1, chi2, chi3, psi)
    f_terms = (
        Term(0, 1.0 / M, ((3, 1),)),
        Term(0, -1.0, ((2, 2), (0, 1)), ((3, 1), (1, 1))),
        Term(0, -e2, ((2, 2), (0, 3)), ((3, 1), (1, 3))),
        Term(0, e2, ((2, 2), (0, 1), (1, 2)), ((3, 1), (1, 1), (0, 2))),
    )
    g_terms = (
        Term(0, 1.0, ((4, 1),)),
        Term(0, -1.0, ((1, 1),), ((2, 1),)),
        Term(0, -e2, ((0, 2), (1, 1)), ((2, 1), (1, 2))),
        Term(0, e2, ((1, 3),), ((2, 3),)),
        Term(1, 1.0, ((2, 1),)),
        Term(2, 1.0, ((3, 1),)),
        Term(3, 1.0, ((4, 1),)),
    )
    consts_in = frozenset({2, 3, 4})
    f_spec = PolynomialMap(5, 1, f_terms, cuts, consts_in, output_real=(True,))
    g_spec = PolynomialMap(5, 4, g_terms, cuts, consts_in, output_real=(True,) * 4)
    center = np.zeros((5, 2 * K + 1), dtype=complex)
    center[0, K] = 1.0
    center[2, K], center[3, K], center[4, K] = sigma, M, mu
    blocks = (InputBlock((0,), NormSpec("hs", x1), p["region_u"]),
              InputBlock((1,), NormSpec("hs", setting.y_order(1.0)), p["region_w"]))
    f_region = LipschitzRegion(center, blocks, NormSpec("hs", setting.x_order(setting.gamma_X)),
                               consts_in)
    g_region = LipschitzRegion(center, blocks, NormSpec("hs", setting.y_order(d)), consts_in)
    system = _finish("stommel", A, B, f_spec, g_spec, setting, p, K, ("u",),
                     ("w", "z1", "z2", "z3"), (1, 2, 3), f_region, g_region,
                     p["omega_A"], p["omega_B"], samples, seed, safety=safety)
    if not M > 8 * system.consts.C_A:
        raise ConfigurationError(f"M = {M} must exceed 8 C_A = {8 * system.consts.C_A}")
    return system


def _build_fhn(p: dict, setting: ScaleSetting | None, K: int, samples: int, seed: int,
               safety: float) -> FastSlowSystem:
    forced = ScaleSetting(s=0.0, gamma_X=1.0, delta_X=1.0, delta_Y=1.0)
    if setting is not None and (setting.gamma_X, setting.delta_X, setting.delta_Y) != (1, 1, 1):
        raise ConfigurationError("FHN exponents are gamma_X = delta_X = delta_Y = 1")
    setting = setting or forced
    a, gam, sigma = p["a"], p["gamma_fhn"], p["sigma"]
    if not 0 < a < 0.5:
        raise ConfigurationError("FHN needs a in (0, 1/2)")
    if not (gam > 0 and sigma > 0):
        raise ConfigurationError("FHN needs gamma_fhn > 0 and sigma > 0")
    R = p["R"] if p["R"] is not None else sigma ** 2
    p = dict(p, R=R)
    A = laplacian_operator(a)
    B = laplacian_operator(gam)
    x1 = setting.x_order(1.0)
    chi = Cutoff((0,), "hs", R, 2 * sigma, order=x1)
    f_terms = (Term(0, -1.0, ((0, 3),), ((0, 3),)),
               Term(0, 1.0 + a, ((0, 2),), ((0, 2),)),
               Term(0, -a / 2.0, ((1, 1),)))
    g_terms = (Term(0, 2.0 / a, ((0, 1),)),)
    f_spec = PolynomialMap(2, 1, f_terms, (chi,), output_real=(True,))
    g_spec = PolynomialMap(2, 1, g_terms, (), output_real=(True,))
    center = np.zeros((2, 2 * K + 1), dtype=complex)
    blocks = (InputBlock((0,), NormSpec("hs", x1), R),
              InputBlock((1,), NormSpec("hs", setting.y_order(1.0)), 2 * R))
    f_region = LipschitzRegion(center, blocks, NormSpec("hs", setting.x_order(1.0)))
    g_region = LipschitzRegion(center, blocks, NormSpec("hs", setting.y_order(1.0)))
    return _finish("fhn", A, B, f_spec, g_spec, setting, p, K, ("u",), ("v",), (),
                   f_region, g_region, -p["omega_A_factor"] * a, -gam, samples, seed,
                   slow_shift=gam, safety=safety)


def mb_fast_matrix(p: dict) -> np.ndarray:
    """Constant fast matrix on (Re u1, Im u1, u2) for the frozen anchor w0."""
    w0 = complex(p["w0"])
    mu, dl, gp = p["mu"], p["delta"], p["gamma_par"]
    return np.array([[-1.0, dl, mu * w0.real],
                     [-dl, -1.0, mu * w0.imag],
                     [-mu * w0.real, -mu * w0.imag, -gp]])


def _build_maxwell_bloch(p: dict, setting: ScaleSetting | None, K: int, samples: int,
                         seed: int, safety: float) -> FastSlowSystem:
    forced = ScaleSetting(s=0.0, gamma_X=1.0, delta_X=0.0, delta_Y=1.0, norm_kind="c1")
    if setting is not None and setting != forced:
        raise ConfigurationError("Maxwell-Bloch uses gamma_X = delta_Y = 1, delta_X = 0, C^1 norms")
    setting = forced
    lam, gp, kappa, sigma, R = p["lambda"], p["gamma_par"], p["kappa"], p["sigma"], p["R"]
    if not (lam > 0 and gp > 0 and kappa > 0 and sigma > 0 and R > 0 and p["Ktilde"] > 0):
        raise ConfigurationError("Maxwell-Bloch parameters must be positive")
    mu = math.sqrt(lam * gp)
    if "mu" in p and p["mu"] is not None and abs(p["mu"] - mu) > 1e-12 * mu:
        raise ConfigurationError("mu must equal sqrt(lambda * gamma_par)")
    p = dict(p, mu=mu, w0=complex(p["w0"]))
    mat = mb_fast_matrix(p)
    A = constant_matrix_operator(mat)
    K_decay = -float(np.max(np.linalg.eigvals(mat).real))
    if not K_decay > 0:
        raise ConfigurationError("fast matrix is not stable at this anchor")
    p["K_decay"] = K_decay
    B = diagonal_operator((0.0, 0.0, 0.0), speed=(1.0, 1.0, 0.0), rate=(kappa, kappa, 0.0))
    # inputs: 0 Re u1, 1 Im u1, 2 u2 | 3 Re y, 4 Im y, 5 y2 ; y shifted by w0/sigma
    w0 = p["w0"]
    shifts = (0, 0, 0, w0.real / sigma, w0.imag / sigma, 0)
    r2 = K_decay / (2 * p["Ktilde"] * mu * sigma)
    chi1_u2 = Cutoff((2,), "c1", 2 * R, 2 * R + 2)
    chi1_u1 = Cutoff((0, 1), "c1", 2 * R, 2 * R + 2, groups=((0, 1),))
    chi2 = Cutoff((3, 4), "c1", r2, 2 * r2, groups=((0, 1),), profile=3)
    sm = sigma * mu
    f_terms = (Term(0, sm, ((3, 1), (2, 1)), ((0, 1), (2, 1))),
               Term(1, sm, ((4, 1), (2, 1)), ((0, 1), (2, 1))),
               Term(2, sigma, ((5, 1),)),
               Term(2, -sm, ((3, 1), (0, 1)), ((1, 1), (2, 1))),
               Term(2, -sm, ((4, 1), (1, 1)), ((1, 1), (2, 1))))
    gk = kappa / sm
    g_terms = (Term(0, gk, ((0, 1),)), Term(1, gk, ((1, 1),)))
    const = frozenset({5})
    cuts = (chi1_u2, chi1_u1, chi2)
    f_spec = PolynomialMap(6, 3, f_terms, cuts, const, shifts, (True,) * 3)
    g_spec = PolynomialMap(6, 3, g_terms, cuts, const, shifts, (True,) * 3)
    u_groups = ((0, 1), (2,))
    v_groups = ((0, 1), (2,))
    # center: the critical point over the constant anchor
    y2 = gp * (lam + 1) / sigma
    den = 1 + p["delta"] ** 2 + lam * abs(w0) ** 2
    u1c = mu * complex(1, -p["delta"]) * (lam + 1) * w0 / den
    u2c = (1 + p["delta"] ** 2) * (lam + 1) / den
    center = np.zeros((6, 2 * K + 1), dtype=complex)
    center[:, K] = (u1c.real, u1c.imag, u2c, w0.real / sigma, w0.imag / sigma, y2)
    blocks = (InputBlock((0, 1, 2), NormSpec("c1", groups=u_groups), 0.5),
              InputBlock((3, 4), NormSpec("c1", groups=((0, 1),)), r2))
    f_region = LipschitzRegion(center, blocks, NormSpec("c1", groups=u_groups), const)
    g_region = LipschitzRegion(center, blocks, NormSpec("c1", groups=v_groups), const)
    return _finish("maxwell_bloch", A, B, f_spec, g_spec, setting, p, K,
                   ("re_u1", "im_u1", "u2"), ("re_y", "im_y", "y2"), (2,), f_region, g_region,
                   -p["omega_A_factor"] * K_decay, 0.0, samples, seed, u_groups, v_groups,
                   kappa=kappa, safety=safety)


def _build_linear(p: dict, setting: ScaleSetting | None, K: int, samples: int, seed: int,
                  safety: float) -> FastSlowSystem:
    """eps u' = lambda_A u + c v,  v' = lambda_B v  (mode-independent symbols)."""
    setting = setting or ScaleSetting()
    lA, lB, c = p["lambda_A"], p["lambda_B"], p["c"]
    if not lA < 0:
        raise ConfigurationError("lambda_A must be negative")
    A = diagonal_operator((0.0,), rate=(-lA,))
    B = diagonal_operator((0.0,), rate=(-lB,))
    f_terms = (Term(0, c, ((1, 1),)),) if c != 0 else ()
    f_spec = PolynomialMap(2, 1, f_terms, output_real=(True,))
    g_spec = PolynomialMap(2, 1, (), output_real=(True,))
    center = np.zeros((2, 2 * K + 1), dtype=complex)
    blocks = (InputBlock((0,), NormSpec("hs", setting.x_order(1.0)), 1.0),
              InputBlock((1,), NormSpec("hs", setting.y_order(1.0)), 1.0))
    f_region = LipschitzRegion(center, blocks, NormSpec("hs", setting.x_order(setting.gamma_X)))
    g_region = LipschitzRegion(center, blocks, NormSpec("hs", setting.y_order(1.0)))
    L_f = abs(c) * 1.0
    return _finish("linear", A, B, f_spec, g_spec, setting, p, K, ("u",), ("v",), (),
                   f_region, g_region, lA, lB + p["omega_B_margin"], samples, seed,
                   kappa=-lB, safety=safety, lipschitz_override=(L_f, 0.0))


_BUILDERS = {"stommel": (_build_stommel, STOMMEL_DEFAULTS),
             "fhn": (_build_fhn, FHN_DEFAULTS),
             "maxwell_bloch": (_build_maxwell_bloch, MB_DEFAULTS),
             "linear": (_build_linear, LINEAR_DEFAULTS)}


def build_model(model_id: str, params: dict | None = None, setting: ScaleSetting | None = None,
                K: int | None = None, anchor: complex | None = None, samples: int = 2000,
                seed: int = 0, safety: float = 1.1) -> FastSlowSystem:
    """Wire one of the models with its operators, cutoffs and constants.

    ``anchor`` is the Maxwell-Bloch frozen coupling value w0 (default 0).
    K defaults to 32 modes, and to the single mode k = 0 for the linear test system.
    """
    if model_id not in _BUILDERS:
        raise ConfigurationError(f"unknown model {model_id!r}; choose from {MODEL_IDS}")
    if K is None:
        K = 0 if model_id == "linear" else 32
    if K < 0:
        raise ConfigurationError("K must be nonnegative")
    builder, defaults = _BUILDERS[model_id]
    p = _merged(defaults, params)
    if anchor is not None:
        if model_id != "maxwell_bloch":
            raise ConfigurationError("an anchor is only used by the Maxwell-Bloch model")
        p["w0"] = anchor
    return builder(p, setting, K, samples, seed, safety)


# ---------------------------------------------------------------------------
# closed-form Maxwell-Bloch critical manifold


def _complex_slow_values(v0, n: int) -> np.ndarray:
    """Physical values of the complex slow field from a 1-component complex or
    a (Re, Im[, dummy]) real field."""
    coeffs = v0.coeffs if isinstance(v0, SpectralField) else np.atleast_2d(v0)
    K = (coeffs.shape[-1] - 1) // 2
    if coeffs.shape[0] == 1:
        return to_physical_array(coeffs[0], K, n)
    return to_physical_array(coeffs[0] + 1j * coeffs[1], K, n)


def mb_critical_closed_form(v0, sigma: float, params: dict | None = None,
                            n_points: int | None = None) -> tuple[SpectralField, SpectralField]:
    """u1 = mu(1-i delta)(lambda+1) sigma v0 / D,  u2 = (1+delta^2)(lambda+1) / D,
    D = 1 + delta^2 + sigma^2 lambda |v0|^2, evaluated on a fine grid."""
    p = _merged(MB_DEFAULTS, params)
    lam, dl = p["lambda"], p["delta"]
    mu = math.sqrt(lam * p["gamma_par"])
    coeffs = v0.coeffs if isinstance(v0, SpectralField) else np.atleast_2d(v0)
    K = (coeffs.shape[-1] - 1) // 2
    n = n_points or 8 * (2 * K + 1)
    w = sigma * _complex_slow_values(v0, n)
    den = 1.0 + dl ** 2 + lam * np.abs(w) ** 2
    u1 = mu * complex(1.0, -dl) * (lam + 1.0) * w / den
    u2 = (1.0 + dl ** 2) * (lam + 1.0) / den
    return (SpectralField(from_physical_array(u1, K)[None], K, (False,)),
            SpectralField(from_physical_array(u2.astype(complex), K)[None], K, (True,)))


def mb_fast_state_from_closed_form(u1: SpectralField, u2: SpectralField) -> np.ndarray:
    """(Re u1, Im u1, u2) real-component coefficients from the complex form."""
    c = u1.coeffs[0]
    re = 0.5 * (c + np.conj(c[::-1]))
    im = (c - np.conj(c[::-1])) / 2j
    return np.stack([re, im, u2.coeffs[0]])
