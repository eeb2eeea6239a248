"""Command-line entry point: slowform <command> --config path.json [--out dir]."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import bounds
from .flows import (IntegratorConfig, integrate_extended, integrate_full, integrate_reduced,
                    integrate_slow, solve_critical_manifold)
from .harness import (RUN_FAILURES, ExperimentConfig, _jsonable, default_slow_data,
                      run_experiment)
from .manifold import chart_distance_to_critical, lyapunov_perron_solve
from .models import (FastSlowSystem, build_model, mb_critical_closed_form,
                     mb_fast_state_from_closed_form)
from .spectral import ConfigurationError, SpectralField
from .splitting import (InadmissibleParametersError, compute_splitting, gap_condition_margin,
                        max_epsilon_for_zeta)

EXIT_CONFIG = 2
EXIT_RUN = 1
FLOWS = ("full", "slow", "extended", "reduced")


def preset_names() -> list[str]:
    root = resources.files("slowform") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_preset(name: str) -> dict:
    path = resources.files("slowform") / "presets" / f"{name}.json"
    if not path.is_file():
        raise ConfigurationError(f"unknown preset {name!r}; choose from {preset_names()}")
    return json.loads(path.read_text(encoding="utf-8"))


def load_config(path: str | None) -> dict:
    """A JSON file, or a shipped preset when the argument names one."""
    if path is None:
        return {}
    p = Path(path)
    if p.is_file():
        with open(p, encoding="utf-8") as fh:
            data = json.load(fh)
    else:
        data = load_preset(path)
    if not isinstance(data, dict):
        raise ConfigurationError("a config must be a JSON object")
    return data


def system_from_config(cfg: dict) -> FastSlowSystem:
    """Model id plus optional params and K; "preset" names a shipped model preset."""
    base = load_preset(cfg["preset"]) if "preset" in cfg else {}
    model = cfg.get("model", base.get("model"))
    if model is None:
        raise ConfigurationError("config needs a model")
    params = {**base.get("params", {}), **cfg.get("params", {})}
    K = cfg.get("K", base.get("K"))
    return build_model(model, params or None, K=K)


def slow_data_from_config(system: FastSlowSystem, spec: dict | None) -> np.ndarray:
    """Field components of the slow state: a file holding a SpectralField, or a
    seeded smooth field {seed, amplitude, k_max}."""
    spec = spec or {}
    if "file" in spec:
        field = SpectralField.from_json(Path(spec["file"]).read_text(encoding="utf-8"))
        n_free = system.nv - len(system.v_constant)
        if field.K != system.K or field.coeffs.shape[0] != n_free:
            raise ConfigurationError(
                f"initial data needs {n_free} components with K={system.K}")
        return field.coeffs.copy()
    return default_slow_data(system, int(spec.get("seed", 0)), spec.get("amplitude"),
                             int(spec.get("k_max", 4)))


def _field_json(system: FastSlowSystem, coeffs: np.ndarray, slow: bool) -> dict:
    f = system.v_field(coeffs) if slow else system.u_field(coeffs)
    return f.to_json()


def _emit(data: dict, out: str | None, name: str) -> None:
    text = json.dumps(_jsonable(data), indent=2, sort_keys=True)
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        (Path(out) / name).write_text(text, encoding="utf-8")
    print(text)


# ---------------------------------------------------------------------------
# commands


def cmd_critical(args) -> int:
    cfg = load_config(args.config)
    system = system_from_config(cfg)
    base = slow_data_from_config(system, cfg.get("v0"))
    v = system.slow_state(base, variant="slow")
    sol = solve_critical_manifold(system, v, tol=float(cfg.get("tol", 1e-11)))
    result = {"model": system.model_id, "v0": _field_json(system, v, True),
              "h0": sol.u.to_json(), "iterations": sol.iterations, "residual": sol.residual,
              "contraction_ratio": sol.ratio}
    if system.model_id == "maxwell_bloch":
        sigma = system.params["sigma"]
        u1, u2 = mb_critical_closed_form(system.v_field(v), sigma, system.params)
        exact = mb_fast_state_from_closed_form(u1, u2)
        result["closed_form_difference"] = float(system.x_norm(sol.u.coeffs - exact))
    _emit(result, args.out, "critical.json")
    return 0


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    system = system_from_config(cfg)
    flow = cfg.get("flow", "full")
    if flow not in FLOWS:
        raise ConfigurationError(f"flow must be one of {FLOWS}")
    icfg = IntegratorConfig(**cfg.get("integrator", {"h": 1e-3, "T": 0.5}))
    init = cfg.get("initial", {})
    eps = cfg.get("eps")
    if flow in ("full", "extended") and not (eps and eps > 0):
        raise ConfigurationError(f"the {flow} flow needs a positive eps")
    base = slow_data_from_config(system, init)
    v0 = system.slow_state(base, variant="full" if flow in ("full", "extended") else "slow",
                           eps=eps)
    u0 = solve_critical_manifold(system, v0).u.coeffs.copy()
    u0[:, system.K] += float(init.get("offset", 0.0))
    if flow == "full":
        rec = integrate_full(system, eps, u0, v0, icfg)
    elif flow == "extended":
        rec = integrate_extended(system, eps, u0, v0, icfg)
    elif flow == "slow":
        rec = integrate_slow(system, v0, icfg)
    else:
        if "zeta" not in cfg:
            raise ConfigurationError("the reduced flow needs zeta")
        sp = system.splitting(float(cfg["zeta"]))
        rec = integrate_reduced(system, sp, sp.project_slow(v0), icfg)
    out = Path(args.out or cfg.get("out_dir", "out"))
    out.mkdir(parents=True, exist_ok=True)
    with open(out / f"simulate_{flow}.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("t", "x_norm", "y_norm"))
        for t, x, y in zip(rec.times, rec.x_norms, rec.y_norms):
            w.writerow([format(float(t), ".17g"), format(float(x), ".17g"),
                        format(float(y), ".17g")])
    if cfg.get("snapshots"):
        snaps = [{"t": float(t), "u": _field_json(system, u, False),
                  "v": _field_json(system, v, True)}
                 for t, u, v in zip(rec.times, rec.u, rec.v)]
        (out / f"simulate_{flow}_snapshots.json").write_text(
            json.dumps(_jsonable(snaps), sort_keys=True), encoding="utf-8")
    print(json.dumps(_jsonable({"csv": str(out / f"simulate_{flow}.csv"), "meta": rec.meta,
                                "samples": len(rec)}), sort_keys=True))
    return 0


def cmd_manifold(args) -> int:
    cfg = load_config(args.config)
    system = system_from_config(cfg)
    if "zeta" not in cfg:
        raise ConfigurationError("manifold needs zeta")
    zeta = float(cfg["zeta"])
    sp = system.splitting(zeta)
    eps = cfg.get("eps") or float(cfg.get("coupling_c", 0.5)) * max_epsilon_for_zeta(
        zeta, system.consts, system.setting, system.L_f)
    base = slow_data_from_config(system, cfg.get("v0"))
    v0 = sp.project_slow(system.slow_state(base, variant="full", eps=eps))
    chart = lyapunov_perron_solve(system, sp, eps, zeta, v0, tol=float(cfg.get("tol", 1e-10)))
    result = chart.to_json()
    result["distance_to_critical"] = chart_distance_to_critical(system, chart)
    _emit(result, args.out, "manifold.json")
    return 0


def _experiment(args, kind: str | None) -> int:
    data = load_config(args.config)
    if kind is not None:
        if data.get("kind", kind) != kind:
            raise ConfigurationError(f"this command runs {kind} experiments")
        data["kind"] = kind
    if args.out:
        data["out_dir"] = args.out
    res = run_experiment(ExperimentConfig.from_json(data))
    print(json.dumps({"csv": str(res.csv_path), "summary": str(res.summary_path),
                      "results": res.summary}, indent=2, sort_keys=True))
    return 0


def cmd_rates(args) -> int:
    return _experiment(args, None)


def cmd_attract(args) -> int:
    return _experiment(args, "attraction")


def cmd_bounds(args) -> int:
    cfg = load_config(args.config)
    opts = cfg.get("options", {})
    samples = args.samples if args.samples is not None else int(opts.get("samples", 10000))
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 42))
    if samples <= 0:
        raise ConfigurationError("samples must be positive")
    lemmas = [args.lemma] if args.lemma else list(bounds.GAMMA_LEMMAS) + list(
        bounds.GRONWALL_KINDS)
    reports = {}
    for lid in lemmas:
        if lid in bounds.GRONWALL_KINDS:
            rep = bounds.gronwall_suite(lid, samples=samples, seed=seed)
        elif lid in bounds.GAMMA_LEMMAS:
            rep = bounds.verify_gamma_lemma(lid, samples=samples, seed=seed)
        else:
            raise ConfigurationError(
                f"unknown lemma {lid!r}; choose from {bounds.GAMMA_LEMMAS + bounds.GRONWALL_KINDS}")
        reports[lid] = rep.to_json()
    _emit(reports[lemmas[0]] if args.lemma else reports, args.out, "bounds.json")
    return 0


def cmd_split(args) -> int:
    cfg = load_config(args.config)
    model = args.model or cfg.get("model")
    zeta = args.zeta if args.zeta is not None else cfg.get("zeta")
    if model is None or zeta is None:
        raise ConfigurationError("split needs --model and --zeta")
    system = system_from_config({**cfg, "model": model})
    omega_A = args.omega_a if args.omega_a is not None else system.consts.omega_A
    sp = compute_splitting(float(zeta), float(omega_A), model, system.slow_shift,
                           system.kappa)
    # the gap margin uses the model's constants with the requested omega_A
    consts = replace(system.consts, omega_A=float(omega_A))
    eps = args.eps or float(cfg.get("coupling_c", 0.5)) * max_epsilon_for_zeta(
        float(zeta), consts, system.setting, system.L_f)
    try:
        margin = gap_condition_margin(eps, sp, consts, system.setting, system.L_f,
                                      system.L_g, system.splitting_M_B())
    except InadmissibleParametersError as exc:
        margin = None
        print(f"gap margin undefined: {exc}", file=sys.stderr)
    _emit({"splitting": sp.to_json(), "eps": eps, "gap_margin": margin}, args.out,
          "split.json")
    return 0


COMMANDS = {"critical": cmd_critical, "simulate": cmd_simulate, "manifold": cmd_manifold,
            "rates": cmd_rates, "attract": cmd_attract, "bounds": cmd_bounds,
            "split": cmd_split}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slowform",
                                     description="Slow manifolds of fast-slow PDE systems.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file or shipped preset name")
        p.add_argument("--out", help="output directory")
        if name == "bounds":
            p.add_argument("--lemma")
            p.add_argument("--samples", type=int)
            p.add_argument("--seed", type=int)
        if name == "split":
            p.add_argument("--zeta", type=float)
            p.add_argument("--omega-a", dest="omega_a", type=float)
            p.add_argument("--model")
            p.add_argument("--eps", type=float)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigurationError, InadmissibleParametersError, KeyError, TypeError,
            json.JSONDecodeError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RUN_FAILURES as exc:
        print(f"run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUN


if __name__ == "__main__":
    sys.exit(main())
