"""Experiment configs, rate fitting and CSV/JSON report emission."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from . import bounds
from .flows import (BlowUpError, ContractionError, IntegratorConfig, NonConvergenceError,
                    integrate_extended, integrate_full, slow_path)
from .manifold import (FixedPointError, GapConditionError, chart_distance_to_critical,
                       lyapunov_perron_solve, measure_attraction, verify_invariance)
from .models import FastSlowSystem, build_model
from .spectral import ConfigurationError, random_smooth_field
from .splitting import InadmissibleParametersError, gap_condition_margin, max_epsilon_for_zeta

CSV_SCHEMA = "slowform-csv-1"
CSV_COLUMNS = ("schema", "kind", "model", "eps", "zeta", "t", "x_norm", "y_norm", "error_x",
               "error_y", "error_total", "bound", "omega_f", "omega_g", "N_S", "N_F", "eta",
               "gap_margin", "status")
# sub-run failures become rows with a reason; everything else propagates
RUN_FAILURES = (BlowUpError, NonConvergenceError, ContractionError, GapConditionError,
                FixedPointError, InadmissibleParametersError)
KINDS = ("rate_flow", "rate_manifold", "attraction", "invariance", "bounds", "layer_decay")


@dataclass(frozen=True)
class RateFit:
    points: tuple
    slope: float
    intercept: float
    r2: float

    def to_json(self) -> dict:
        return {"points": [list(map(float, p)) for p in self.points], "slope": self.slope,
                "intercept": self.intercept, "r2": self.r2}


def fit_rate(points, log_log: bool = True) -> RateFit:
    """Least-squares line through the points, in log-log coordinates if requested."""
    pts = [(float(x), float(y)) for x, y in points]
    if len(pts) < 3:
        raise ConfigurationError("a rate fit needs at least 3 points")
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    if log_log:
        if np.any(x <= 0) or np.any(y <= 0):
            raise ValueError("log-log fit needs positive coordinates")
        x, y = np.log(x), np.log(y)
    elif np.any(y <= 0):
        raise ValueError("exponential-rate fit needs positive values")
    else:
        y = np.log(y)
    res = stats.linregress(x, y)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        r2 = 1.0
    else:
        ss_res = float(np.sum((y - (res.intercept + res.slope * x)) ** 2))
        r2 = min(max(1.0 - ss_res / ss_tot, 0.0), 1.0)
    return RateFit(tuple(pts), float(res.slope), float(res.intercept), r2)


def fit_linear(points) -> RateFit:
    """Plain least-squares line y = a x + b (no logarithms)."""
    pts = [(float(x), float(y)) for x, y in points]
    if len(pts) < 3:
        raise ConfigurationError("a fit needs at least 3 points")
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    res = stats.linregress(x, y)
    return RateFit(tuple(pts), float(res.slope), float(res.intercept), float(res.rvalue ** 2))


@dataclass
class ExperimentConfig:
    kind: str
    model: str = "fhn"
    params: dict = field(default_factory=dict)
    K: int | None = None
    eps: list = field(default_factory=list)
    zeta: list = field(default_factory=list)
    coupling_c: float = 0.5
    integrator: dict = field(default_factory=lambda: {"h": 1e-3, "T": 0.5})
    seed: int = 0
    out_dir: str = "out"
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown experiment kind {self.kind!r}")
        for name in ("eps", "zeta"):
            vals = list(getattr(self, name))
            if any(not v > 0 for v in vals):
                raise ConfigurationError(f"{name} values must be positive")
            if vals != sorted(vals, reverse=True):
                raise ConfigurationError(f"{name} values must be sorted descending")
        if self.kind == "bounds" and int(self.options.get("samples", 10000)) <= 0:
            raise ConfigurationError("bounds experiments need a positive sample count")
        known = set(bounds.GAMMA_LEMMAS) | set(bounds.GRONWALL_KINDS)
        unknown = set(self.options.get("lemmas", ())) - known
        if self.kind == "bounds" and unknown:
            raise ConfigurationError(f"unknown lemmas {sorted(unknown)}; choose from "
                                     f"{sorted(known)}")
        if self.kind in ("rate_flow", "layer_decay") and len(self.eps) < 3:
            raise ConfigurationError(f"{self.kind} needs at least 3 eps values")
        if self.kind == "rate_manifold" and len(self.zeta) < 3:
            raise ConfigurationError("rate_manifold needs at least 3 zeta values")
        if self.kind in ("attraction", "invariance") and not self.zeta:
            raise ConfigurationError(f"{self.kind} needs a zeta value")
        if not 0 < self.coupling_c < 1:
            raise ConfigurationError("coupling_c must lie in (0, 1)")

    @classmethod
    def from_json(cls, data: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))

    def integrator_config(self) -> IntegratorConfig:
        return IntegratorConfig(**self.integrator)

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class ExperimentResult:
    csv_path: Path
    summary_path: Path
    summary: dict
    rows: list


# ---------------------------------------------------------------------------
# initial data


def default_slow_data(system: FastSlowSystem, seed: int, amplitude: float | None = None,
                      k_max: int = 4, decay: float = 2.0) -> np.ndarray:
    """Seeded smooth slow field (non-constant components), scaled in the Y_1 norm."""
    rng = np.random.default_rng(seed)
    n_free = system.nv - len(system.v_constant)
    base = random_smooth_field(rng, system.K, n_free, decay=decay, scale=1.0,
                               k_max=min(k_max, system.K)).coeffs.copy()
    base[..., system.K] = base[..., system.K].real
    defaults = {"stommel": 0.5, "fhn": 0.004, "maxwell_bloch": 0.3, "linear": 1.0}
    amp = defaults[system.model_id] if amplitude is None else amplitude
    full = system.slow_state(base, variant="slow")
    free = [i for i in range(system.nv) if i not in system.v_constant]
    probe = np.zeros_like(full)
    probe[free] = full[free]
    norm = float(system.y_norm(probe))
    return base * (amp / norm) if norm > 0 else base


def _state_for(system, base, eps, variant="full"):
    return system.slow_state(base, variant=variant, eps=eps)


def slow_anchor(system: FastSlowSystem, splitting, eps: float, seed: int = 0,
                amplitude: float | None = None, k_max: int = 4) -> np.ndarray:
    """Slow-mode part of the seeded slow data, the anchor used by the chart experiments."""
    base = default_slow_data(system, seed, amplitude, k_max)
    return splitting.project_slow(_state_for(system, base, eps))


def _failure(exc: Exception) -> str:
    return f"failed: {type(exc).__name__}: {exc}"


def _constants_row(system, splitting=None, eps=None):
    row = {"omega_f": system.consts.omega_f, "omega_g": system.consts.omega_g}
    if splitting is not None:
        row.update(N_S=splitting.N_S, N_F=splitting.N_F, eta=splitting.eta)
        if eps is not None:
            row["gap_margin"] = gap_condition_margin(
                eps, splitting, system.consts, system.setting, system.L_f, system.L_g,
                system.splitting_M_B())
    return row


# ---------------------------------------------------------------------------
# experiment kinds


def _rate_flow(cfg: ExperimentConfig, system: FastSlowSystem):
    icfg = cfg.integrator_config()
    base = default_slow_data(system, cfg.seed, cfg.options.get("amplitude"),
                             cfg.options.get("k_max", 4))
    exclude_layer = bool(cfg.options.get("exclude_layer", False))
    rows, points, notes = [], [], {}
    # errors are taken over the field components; the constant components
    # differ only by the known dummy offset, reported separately
    free = np.ones((system.nv, 1))
    free[list(system.v_constant)] = 0.0
    dummy_ref = None
    if system.model_id == "stommel":
        v_ref = _state_for(system, base, None, "slow")
        dummy_ref = slow_path(system, v_ref, icfg)

    def run(eps):
        try:
            return run_one(eps)
        except RUN_FAILURES as exc:
            return [{"eps": eps, "status": _failure(exc)}], None

    def run_one(eps):
        v0 = _state_for(system, base, eps)
        sp = slow_path(system, v0, icfg)
        u0 = sp[1][0]
        full = integrate_full(system, eps, u0, v0, icfg)
        idx = np.arange(0, len(sp[0]), icfg.store_every)
        if idx[-1] != len(sp[0]) - 1:
            idx = np.append(idx, len(sp[0]) - 1)
        out, trunc = [], None
        t_min = 5 * eps / abs(system.consts.omega_f) if exclude_layer else -1.0
        for k, i in enumerate(idx):
            u, v = full.u[k], full.v[k]
            if trunc is None and not system.inside_cutoffs(u, v):
                trunc = float(full.times[k])
            ex = float(system.x_norm(u - sp[1][i]))
            ey = float(system.y_norm(free * (v - sp[2][i])))
            if dummy_ref is not None:
                ex += float(system.x_norm(sp[1][i] - dummy_ref[1][i]))
                ey += float(system.y_norm(free * (sp[2][i] - dummy_ref[2][i])))
            status = "ok" if trunc is None else "out_of_region"
            if full.times[k] < t_min:
                status = "layer_excluded"
            out.append({"eps": eps, "t": float(full.times[k]), "x_norm": full.x_norms[k],
                        "y_norm": full.y_norms[k], "error_x": ex, "error_y": ey,
                        "error_total": ex + ey, "status": status})
        return out, trunc

    results = _pool_map(run, cfg.eps)
    for eps, (out, trunc) in zip(cfg.eps, results):
        for r in out:
            r.update(_constants_row(system))
        rows.extend(out)
        valid = [r["error_total"] for r in out if r["status"] == "ok"]
        if valid:
            points.append((eps, max(valid)))
        notes[str(eps)] = {"truncation_time": trunc, "usable_samples": len(valid),
                           "dummy_offset": math.sqrt(eps) if dummy_ref is not None else 0.0}
    fit = fit_rate(points, log_log=True).to_json() if len(points) >= 3 else None
    return rows, {"fit": fit, "runs": notes,
                  "layer_excluded_before": "5 eps/|omega_f|" if exclude_layer else None}


def _layer_decay(cfg: ExperimentConfig, system: FastSlowSystem):
    icfg = cfg.integrator_config()
    base = default_slow_data(system, cfg.seed, cfg.options.get("amplitude"),
                             cfg.options.get("k_max", 4))
    offset_amp = float(cfg.options.get("offset", 0.1))
    v0 = _state_for(system, base, None, "slow")
    path = slow_path(system, v0, icfg)
    offset = system.zeros_u()
    offset[:, system.K] = offset_amp
    u0 = path[1][0] + offset
    d0 = float(system.x_norm(offset))
    M_A, omega_f = system.consts.M_A, system.consts.omega_f
    floor = float(cfg.options.get("floor", 1e-12))
    rows, rate_points, worst = [], [], 0.0
    per_eps = {}
    for eps in cfg.eps:
        rec = integrate_extended(system, eps, u0, v0, icfg, slow_path=path)
        phis = []
        for k, t in enumerate(rec.times):
            phi = float(system.x_norm(rec.u[k] - rec.u_critical[k]))
            bound = 2 * M_A * math.exp(omega_f * t / eps) * d0
            worst = max(worst, phi - bound)
            phis.append((float(t), phi))
            rows.append({"eps": eps, "t": float(t), "x_norm": rec.x_norms[k],
                         "y_norm": rec.y_norms[k], "error_x": phi, "error_total": phi,
                         "bound": bound, "status": "ok", **_constants_row(system)})
        usable = [(t, p) for t, p in phis if p > floor]
        fit = fit_rate(usable, log_log=False)
        per_eps[str(eps)] = {"rate": -fit.slope, "r2": fit.r2, "samples": len(usable)}
        rate_points.append((1.0 / eps, -fit.slope))
    lin = fit_linear(rate_points)
    return rows, {"rate_vs_inverse_eps": lin.to_json(), "per_eps": per_eps,
                  "max_bound_excess": worst, "predicted_rate_factor": -omega_f}


def _rate_manifold(cfg: ExperimentConfig, system: FastSlowSystem):
    base = default_slow_data(system, cfg.seed, cfg.options.get("amplitude"),
                             cfg.options.get("k_max", 4))
    tol = float(cfg.options.get("tol", 1e-10))
    delta = system.setting.delta_Y

    def run(zeta):
        try:
            return run_one(zeta)
        except RUN_FAILURES as exc:
            return {"zeta": zeta, "t": 0.0, "status": _failure(exc)}, None

    def run_one(zeta):
        sp = system.splitting(zeta)
        eps = cfg.coupling_c * max_epsilon_for_zeta(zeta, system.consts, system.setting,
                                                    system.L_f)
        v0 = sp.project_slow(_state_for(system, base, eps))
        chart = lyapunov_perron_solve(system, sp, eps, zeta, v0, tol=tol)
        dist = chart_distance_to_critical(system, chart)
        scale = eps + (sp.N_S - sp.N_F) ** (-delta)
        row = {"eps": eps, "zeta": zeta, "t": 0.0, "error_total": dist, "bound": scale,
               "status": "ok", **_constants_row(system, sp, eps)}
        return row, chart.report.to_json()

    results = _pool_map(run, cfg.zeta)
    rows = [r for r, _ in results]
    ok = [r for r in rows if r["status"] == "ok"]
    ratios = [r["error_total"] / r["bound"] for r in ok]
    dists = [r["error_total"] for r in ok]
    return rows, {"normalized": ratios, "failed_levels": len(rows) - len(ok),
                  "band": max(ratios) / min(ratios) if ratios else None,
                  "monotone_nonincreasing": all(b <= a for a, b in zip(dists, dists[1:])),
                  "reports": [rep for _, rep in results]}


def _attraction(cfg: ExperimentConfig, system: FastSlowSystem):
    icfg = cfg.integrator_config()
    base = default_slow_data(system, cfg.seed, cfg.options.get("amplitude"),
                             cfg.options.get("k_max", 4))
    zeta = cfg.zeta[0]
    sp = system.splitting(zeta)
    eps = cfg.eps[0] if cfg.eps else cfg.coupling_c * max_epsilon_for_zeta(
        zeta, system.consts, system.setting, system.L_f)
    tol = float(cfg.options.get("tol", 1e-10))
    v0 = sp.project_slow(_state_for(system, base, eps))
    chart = lyapunov_perron_solve(system, sp, eps, zeta, v0, tol=tol)
    pert = system.zeros_u()
    pert[:, system.K] = float(cfg.options.get("perturbation", 1e-2 * max(
        1.0, float(system.x_norm(chart.h_X.coeffs)))))
    res = measure_attraction(system, sp, eps, zeta, chart.h_X.coeffs + pert, chart.h_F.coeffs,
                             v0, icfg.T, icfg, tol)
    rows = [{"eps": eps, "zeta": zeta, "t": float(t), "error_total": float(p),
             "status": "ok" if not res.out_of_chart else "out_of_chart",
             **_constants_row(system, sp, eps)} for t, p in zip(res.times, res.phi)]
    return rows, {"rate": res.rate, "r2": res.fit_r2, "identifiable": res.identifiable,
                  "out_of_chart": res.out_of_chart, "eps": eps, "zeta": zeta}


def _invariance(cfg: ExperimentConfig, system: FastSlowSystem):
    icfg = cfg.integrator_config()
    base = default_slow_data(system, cfg.seed, cfg.options.get("amplitude"),
                             cfg.options.get("k_max", 4))
    zeta = cfg.zeta[0]
    sp = system.splitting(zeta)
    eps = cfg.eps[0] if cfg.eps else cfg.coupling_c * max_epsilon_for_zeta(
        zeta, system.consts, system.setting, system.L_f)
    tol = float(cfg.options.get("tol", 1e-10))
    v0 = sp.project_slow(_state_for(system, base, eps))
    chart = lyapunov_perron_solve(system, sp, eps, zeta, v0, tol=tol)
    res = verify_invariance(system, chart, icfg.T, icfg, tol)
    rows = [{"eps": eps, "zeta": zeta, "t": float(t), "error_total": float(d),
             "bound": res.bound, "status": "ok" if not res.out_of_chart else "out_of_chart",
             **_constants_row(system, sp, eps)} for t, d in zip(res.times, res.deviations)]
    return rows, {"deviation": res.deviation, "bound": res.bound,
                  "integrator_error": res.integrator_error,
                  "within_contract": res.within_contract, "out_of_chart": res.out_of_chart}


def _bounds(cfg: ExperimentConfig, system):
    samples = int(cfg.options.get("samples", 10000))
    lemmas = cfg.options.get("lemmas", list(bounds.GAMMA_LEMMAS) + list(bounds.GRONWALL_KINDS))
    rows, summary = [], {}
    for lid in lemmas:
        if lid in bounds.GRONWALL_KINDS:
            rep = bounds.gronwall_suite(lid, samples=samples, seed=cfg.seed)
        else:
            rep = bounds.verify_gamma_lemma(lid, samples=samples, seed=cfg.seed)
        data = rep.to_json()
        data.pop("elapsed_s", None)
        summary[lid] = data
        rows.append({"t": 0.0, "error_total": rep.max_violation,
                     "status": "ok" if rep.max_violation <= 1e-8 else "violation"})
    return rows, summary


_RUNNERS = {"rate_flow": _rate_flow, "layer_decay": _layer_decay,
            "rate_manifold": _rate_manifold, "attraction": _attraction,
            "invariance": _invariance, "bounds": _bounds}


def _pool_map(fn, items):
    """Run independent rows in a thread pool; results keep input order."""
    workers = max(1, int(os.environ.get("SLOWFORM_THREADS", "1")))
    if workers == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _fmt(val) -> str:
    if val is None:
        return ""
    if isinstance(val, (float, np.floating)):
        return format(float(val), ".17g")
    return str(val)


def rows_to_csv(rows: list, cfg: ExperimentConfig) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in rows:
        full = {"schema": CSV_SCHEMA, "kind": cfg.kind, "model": cfg.model, **r}
        writer.writerow([_fmt(full.get(c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def run_experiment(cfg: ExperimentConfig, system: FastSlowSystem | None = None
                   ) -> ExperimentResult:
    """Run one sweep; write <out_dir>/<kind>.csv and <kind>_summary.json."""
    if system is None and cfg.kind != "bounds":
        system = build_model(cfg.model, cfg.params or None, K=cfg.K)
    rows, summary = _RUNNERS[cfg.kind](cfg, system)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{cfg.kind}.csv"
    csv_path.write_text(rows_to_csv(rows, cfg), encoding="utf-8")
    full_summary = {"schema": CSV_SCHEMA, "config": cfg.to_json(), "results": summary}
    if system is not None:
        full_summary["system"] = system.summary()
    summary_path = out / f"{cfg.kind}_summary.json"
    summary_path.write_text(json.dumps(_jsonable(full_summary), indent=2, sort_keys=True),
                            encoding="utf-8")
    return ExperimentResult(csv_path, summary_path, _jsonable(summary), rows)
