"""Command-line experiment runner.

Every subcommand reads an optional YAML config, applies flag overrides,
validates everything before computing, writes its outputs atomically into
``--out`` and prints a JSON run manifest (config echo, version, wall time,
sha256 of each output) on standard output.

Exit codes: 0 success, 2 validation failure, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import copy
import dataclasses
import hashlib
import json
import math
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .asymptotics import tail_constant_log_s, tail_constant_v
from .clusters import (
    ClusterConfig, cluster_durations, expected_cluster_count, expected_cluster_duration,
    poisson_limit_experiment, run_decomposition_batches,
)
from .errors import AlphaHestonError, BlowUpError, DivergenceError, DomainError, ValidationError
from .levy import feller_check
from .measure import EsscherParams, risk_premiums, to_physical
from .params import ModelParams, SimGrid, model_violations
from .pricing import Side, Underlying, default_k_grid, smile_from_sample, terminal_sample, wing_regression
from .riccati import FreqTriple, solve_riccati
from .sde import mc_terminal, simulate_joint_path
from .streams import PATHS, stream

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3

DEFAULTS = {
    "model": dataclasses.asdict(ModelParams()),
    "grid": {"t_end": 14.0, "n_steps": 14000, "small_jump_cutoff": 1e-3, "relative_cutoff": 0.1},
    "seed": 20240601,
    "simulate": {"joint": True},
    "smile": {"maturity": 1.0, "underlying": "asset", "n_paths": 100000, "dt": 0.004,
              "k_min": None, "k_max": None, "n_strikes": 25, "n_tail_points": 6},
    "tails": {"t": 1.0, "n_paths": 200000, "dt": 0.004,
              "u_v": [1.0, 2.0, 3.0, 4.0, 5.0, 6.0], "u_log_s": [1.5, 2.0, 3.0]},
    "clusters": {"t": 14.0, "dt": 0.01, "y": [0.25, 0.5, 1.0, 1.5, 2.0], "alpha": [1.2, 1.5, 1.8],
                 "n_reps": 0, "n_durations": 0, "duration_dt": 0.001},
    "riccati": {"T": 1.0, "xi": [[[0.0, 1.0], [0.0, 0.0], [0.0, 0.0]],
                                 [[0.0, 0.0], [-2.0, 0.0], [0.0, 0.0]]]},
    "measure": {"eta": 0.0, "eta_bar": 0.0, "theta": 0.0},
    "poisson_limit": {"n": 100, "c": 1.0, "t": 1.0, "n_reps": 1000, "dt": 0.01},
}

EXPERIMENTS = ("simulate", "smile", "tails", "clusters", "riccati", "measure", "poisson-limit")


# ---------------------------------------------------------------------------
# config


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in (over or {}).items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def load_config(path: str | None) -> dict:
    if path is None:
        return copy.deepcopy(DEFAULTS)
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ValidationError(["config: top level must be a mapping"])
    return _merge(DEFAULTS, data)


def validate(config: dict) -> tuple[list[str], list[str]]:
    """All violated preconditions plus non-fatal warnings."""
    errors, warnings = [], []
    model = config.get("model", {})
    unknown = set(model) - set(DEFAULTS["model"])
    errors += [f"model.{k}: unknown parameter" for k in sorted(unknown)]
    m = {k: model.get(k, v) for k, v in DEFAULTS["model"].items()}
    errors += [f"model.{e}" for e in model_violations(**m)]
    grid = config.get("grid", {})
    try:
        SimGrid(**grid)
    except (TypeError, DomainError) as exc:
        errors.append(f"grid: {exc}")
    seed = config.get("seed")
    if not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
        errors.append("seed: must be an integer in [0, 2^64)")
    if not errors:
        if not feller_check(m["a"], m["b"], m["sigma"], m["sigma_N"], m["alpha"]):
            warnings.append("Feller condition 2ab >= sigma^2 fails: 0 is attainable")
        if m["a"] * grid.get("t_end", 1) / grid.get("n_steps", 1) >= 1:
            errors.append("grid: a * dt must be below 1")
    sm = config.get("smile", {})
    if sm.get("underlying") not in ("asset", "variance"):
        errors.append("smile.underlying: must be 'asset' or 'variance'")
    for sec, keys in {"smile": ("maturity", "dt"), "tails": ("t", "dt"),
                      "clusters": ("t", "dt"), "poisson_limit": ("t", "c", "dt")}.items():
        for k in keys:
            v = config.get(sec, {}).get(k)
            if not isinstance(v, (int, float)) or not v > 0:
                errors.append(f"{sec}.{k}: must be positive")
    for a in config.get("clusters", {}).get("alpha", []):
        if not 1 < a < 2:
            errors.append(f"clusters.alpha: {a} must lie in (1, 2)")
    for y in config.get("clusters", {}).get("y", []):
        if not y > grid.get("small_jump_cutoff", 1e-3):
            errors.append(f"clusters.y: {y} must exceed the small-jump cutoff")
    if config.get("measure", {}).get("theta", 0) < 0:
        errors.append("measure.theta: must be nonnegative")
    return errors, warnings


# ---------------------------------------------------------------------------
# output helpers


def _atomic_write(path: Path, text: str) -> str:
    data = text.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return hashlib.sha256(data).hexdigest()


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serialisable: {type(obj)}")


def _csv(header, rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(x) for x in row))
    return "\r\n".join(lines) + "\r\n"


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


# ---------------------------------------------------------------------------
# experiments


def _model(cfg) -> ModelParams:
    return ModelParams(**cfg["model"])


def _grid(cfg) -> SimGrid:
    return SimGrid(**cfg["grid"])


def run_simulate(cfg, threads):
    p, g = _model(cfg), _grid(cfg)
    jp = simulate_joint_path(p, g, stream(cfg["seed"], PATHS, 0))
    out = {"path.csv": jp.to_csv() if cfg["simulate"]["joint"] else jp.vpath.to_csv(),
           "jumps.csv": jp.vpath.ledger_csv()}
    return out


def run_smile(cfg, threads):
    p, s = _model(cfg), cfg["smile"]
    T = float(s["maturity"])
    g = SimGrid.with_dt(T, s["dt"], small_jump_cutoff=cfg["grid"]["small_jump_cutoff"],
                        relative_cutoff=cfg["grid"]["relative_cutoff"])
    sample = terminal_sample(p, T, int(s["n_paths"]), cfg["seed"], g=g, threads=threads)
    und = Underlying(s["underlying"])
    if und is Underlying.ASSET:
        x = sample["logS"]
    else:
        x = np.log(np.maximum(sample["V"], 1e-300))
    center, sd = float(np.median(x)), float(np.std(x))
    if s["k_min"] is not None and s["k_max"] is not None:
        grid = list(np.linspace(s["k_min"], s["k_max"], int(s["n_strikes"])))
    else:
        grid = default_k_grid(center, sd, int(s["n_strikes"]))
    curve = smile_from_sample(sample, p, T, grid, und)
    summary = {"maturity": T, "underlying": und.value, "forward": curve.forward,
               "n_points": len(curve.points), "excluded": curve.excluded}
    for side in Side:
        try:
            slope, se = wing_regression(curve, side, int(s["n_tail_points"]), return_se=True)
            summary[f"{side.value}_wing_slope"] = {"slope": slope, "se": se}
        except DomainError as exc:
            summary[f"{side.value}_wing_slope"] = {"error": str(exc)}
    return {"smile.csv": curve.to_csv(), "smile_summary.json": _json(summary)}


def _tail_rows(x, us, const, alpha):
    n = x.size
    rows = []
    for u in us:
        pr = float(np.mean(x > u))
        rows.append((u, const * u ** (-alpha), pr, math.sqrt(pr * (1 - pr) / n)))
    return rows


def run_tails(cfg, threads):
    p, s = _model(cfg), cfg["tails"]
    t = float(s["t"])
    g = SimGrid.with_dt(t, s["dt"], small_jump_cutoff=cfg["grid"]["small_jump_cutoff"],
                        relative_cutoff=cfg["grid"]["relative_cutoff"])
    o = mc_terminal(p, g, int(s["n_paths"]), cfg["seed"], threads=threads, joint=True)
    header = ["u", "asymptotic", "mc", "mc_se"]
    kv = tail_constant_v(t, p.V0, p)
    ks = tail_constant_log_s(t, p.V0, p)
    return {"tails_v.csv": _csv(header, _tail_rows(o["V"], s["u_v"], kv, p.alpha)),
            "tails_log_s.csv": _csv(header, _tail_rows(-o["logS"], s["u_log_s"], ks, p.alpha))}


def run_clusters(cfg, threads):
    p, s = _model(cfg), cfg["clusters"]
    out = {}
    table, counts, durations = [], [], []
    grid = SimGrid.with_dt(s["t"], s["dt"], small_jump_cutoff=cfg["grid"]["small_jump_cutoff"],
                           relative_cutoff=cfg["grid"]["relative_cutoff"])
    dgrid = SimGrid.with_dt(1.0, s["duration_dt"], small_jump_cutoff=cfg["grid"]["small_jump_cutoff"],
                            relative_cutoff=cfg["grid"]["relative_cutoff"])
    for i, al in enumerate(s["alpha"]):
        q = p.with_(alpha=al)
        for j, y in enumerate(s["y"]):
            c = ClusterConfig.make(y, q.sigma_N, grid)
            row = [al, y, expected_cluster_count(s["t"], q, c), expected_cluster_duration(q, c)]
            if s["n_reps"]:
                o = run_decomposition_batches(q, c, int(s["n_reps"]), cfg["seed"] + 1000 * i + j,
                                              clusters=False, threads=threads)
                counts += [(al, y, r, int(n)) for r, n in enumerate(o["count"])]
                row.append(float(o["count"].mean()))
            if s["n_durations"]:
                dc = ClusterConfig.make(y, q.sigma_N, dgrid)
                th = cluster_durations(q, dc, int(s["n_durations"]), cfg["seed"] + 1000 * i + j)
                durations += [(al, y, k, float(x)) for k, x in enumerate(th)]
                row.append(float(np.mean(th)))
            table.append(row)
    header = ["alpha", "y", "expected_count", "expected_duration"]
    if s["n_reps"]:
        header.append("mc_count")
        out["cluster_counts.csv"] = _csv(["alpha", "y", "rep", "count"], counts)
    if s["n_durations"]:
        header.append("mc_duration")
        out["cluster_durations.csv"] = _csv(["alpha", "y", "index", "duration"], durations)
    out["cluster_table.csv"] = _csv(header, table)
    return out


def _parse_xi(triple):
    vals = []
    for z in triple:
        if isinstance(z, (list, tuple)):
            vals.append(complex(float(z[0]), float(z[1])))
        else:
            vals.append(complex(z))
    return FreqTriple(*vals)


def run_riccati(cfg, threads):
    p, s = _model(cfg), cfg["riccati"]
    T = float(s["T"])
    rows = []
    for triple in s["xi"]:
        xi = _parse_xi(triple)
        sol = solve_riccati(xi, T, p)
        rows.append({"xi": [complex(xi.xi1), complex(xi.xi2), complex(xi.xi3)], "T": T,
                     "psi_T": sol.psi_T, "phi_T": sol.phi_T,
                     "transform": sol.transform(p, complex(xi.xi1)),
                     "n_steps": sol.n_steps_used})
    return {"riccati.json": _json(rows)}


def run_measure(cfg, threads):
    p, s = _model(cfg), cfg["measure"]
    e = EsscherParams(float(s["eta"]), float(s["eta_bar"]), float(s["theta"]))
    phys = to_physical(p, e)
    lam_s, lam_v = risk_premiums(1.0, p, e)
    res = {"params_P": dataclasses.asdict(phys.params_P), "tempering": phys.tempering,
           "price_drift": {"r": phys.drift_coeffs[0], "v_coeff": phys.drift_coeffs[1]},
           "premium_coeffs": {"lambda_S": lam_s, "lambda_V": lam_v}, "valid": True}
    return {"measure.json": _json(res)}


def run_poisson(cfg, threads):
    p, s = _model(cfg), cfg["poisson_limit"]
    rep = poisson_limit_experiment(int(s["n"]), float(s["c"]), float(s["t"]), p, int(s["n_reps"]),
                                   stream(cfg["seed"], 9), dt=float(s["dt"]))
    return {"poisson_limit.json": _json(rep.to_dict())}


RUNNERS = {"simulate": run_simulate, "smile": run_smile, "tails": run_tails, "clusters": run_clusters,
           "riccati": run_riccati, "measure": run_measure, "poisson-limit": run_poisson}


def run(config: dict, experiment: str, out_dir: str, threads: int = 1) -> dict:
    """Run one experiment and return its manifest."""
    errors, warnings = validate(config)
    if errors:
        raise ValidationError(errors)
    start = time.perf_counter()
    outputs = RUNNERS[experiment](config, threads)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sums = {name: _atomic_write(out / name, text) for name, text in sorted(outputs.items())}
    return {"experiment": experiment, "config": config, "version": __version__,
            "wall_time_s": time.perf_counter() - start, "outputs": sums, "warnings": warnings}


# ---------------------------------------------------------------------------
# argument parsing


def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML config file")
    common.add_argument("--seed", type=int, help="master seed (overrides config)")
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    common.add_argument("--out", default="out", help="output directory")

    parser = argparse.ArgumentParser(prog="alpha-heston", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", parents=[common], help="one joint path and its jump ledger")
    sp.add_argument("--t-end", type=float)
    sp.add_argument("--n-steps", type=int)

    sp = sub.add_parser("smile", parents=[common], help="Monte Carlo implied-volatility smile")
    sp.add_argument("--underlying", choices=["asset", "variance"])
    sp.add_argument("--maturity", type=float)
    sp.add_argument("--paths", type=int)
    sp.add_argument("--k-min", type=float)
    sp.add_argument("--k-max", type=float)
    sp.add_argument("--n-strikes", type=int)

    sp = sub.add_parser("tails", parents=[common], help="tail asymptotics against Monte Carlo")
    sp.add_argument("--t", type=float)
    sp.add_argument("--paths", type=int)

    sp = sub.add_parser("clusters", parents=[common], help="cluster count and duration tables")
    sp.add_argument("--y", type=_floats, help="comma-separated thresholds")
    sp.add_argument("--alpha", type=_floats, help="comma-separated stability indices")
    sp.add_argument("--t", type=float)
    sp.add_argument("--n-reps", type=int)
    sp.add_argument("--n-durations", type=int)

    sub.add_parser("riccati", parents=[common], help="generalized Riccati transforms")
    sp = sub.add_parser("measure", parents=[common], help="physical parameters and risk premiums")
    sp.add_argument("--eta", type=float)
    sp.add_argument("--eta-bar", type=float)
    sp.add_argument("--theta", type=float)

    sp = sub.add_parser("poisson-limit", parents=[common], help="Poisson limit of mother-jump counts")
    sp.add_argument("--n", type=int)
    sp.add_argument("--c", type=float)
    sp.add_argument("--n-reps", type=int)

    sub.add_parser("validate", parents=[common], help="list every config violation")
    return parser


_OVERRIDES = {
    "simulate": {"t_end": ("grid", "t_end"), "n_steps": ("grid", "n_steps")},
    "smile": {"underlying": ("smile", "underlying"), "maturity": ("smile", "maturity"),
              "paths": ("smile", "n_paths"), "k_min": ("smile", "k_min"), "k_max": ("smile", "k_max"),
              "n_strikes": ("smile", "n_strikes")},
    "tails": {"t": ("tails", "t"), "paths": ("tails", "n_paths")},
    "clusters": {"y": ("clusters", "y"), "alpha": ("clusters", "alpha"), "t": ("clusters", "t"),
                 "n_reps": ("clusters", "n_reps"), "n_durations": ("clusters", "n_durations")},
    "measure": {"eta": ("measure", "eta"), "eta_bar": ("measure", "eta_bar"),
                "theta": ("measure", "theta")},
    "poisson-limit": {"n": ("poisson_limit", "n"), "c": ("poisson_limit", "c"),
                      "n_reps": ("poisson_limit", "n_reps")},
}


def _apply_overrides(cfg: dict, args) -> dict:
    if args.seed is not None:
        cfg["seed"] = args.seed
    for attr, (sec, key) in _OVERRIDES.get(args.command, {}).items():
        val = getattr(args, attr, None)
        if val is not None:
            cfg[sec][key] = val
    return cfg


def _origin(exc: BaseException) -> str:
    """First library module below this one on the traceback of ``exc``."""
    tb = exc.__traceback__
    while tb is not None:
        name = tb.tb_frame.f_globals.get("__name__", "?")
        if name != __name__:
            return name
        tb = tb.tb_next
    return __name__


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _apply_overrides(load_config(args.config), args)
    except (OSError, yaml.YAMLError, ValidationError) as exc:
        print(json.dumps({"status": "invalid", "errors": [str(exc)]}), file=sys.stderr)
        return EXIT_VALIDATION
    if args.command == "validate":
        errors, warnings = validate(cfg)
        print(_json({"valid": not errors, "errors": errors, "warnings": warnings}), end="")
        return EXIT_VALIDATION if errors else EXIT_OK
    try:
        manifest = run(cfg, args.command, args.out, max(1, args.threads))
    except ValidationError as exc:
        print(_json({"status": "invalid", "errors": exc.violations}), end="", file=sys.stderr)
        return EXIT_VALIDATION
    except (BlowUpError, DivergenceError, ArithmeticError) as exc:
        print(_json({"status": "numerical failure", "module": _origin(exc),
                     "error": f"{type(exc).__name__}: {exc}"}), end="", file=sys.stderr)
        return EXIT_NUMERICAL
    except AlphaHestonError as exc:
        print(_json({"status": "invalid", "errors": [f"{type(exc).__name__}: {exc}"]}), end="",
              file=sys.stderr)
        return EXIT_VALIDATION
    print(_json(manifest), end="")
    return EXIT_OK
