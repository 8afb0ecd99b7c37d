"""Command-line front end: ``rangenav simulate | observe | audit | sweep``.

Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 observer
divergence, 4 observability margin at or below the audit threshold.
"""

from __future__ import annotations

import argparse
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import io
from .config import ConfigError, RunConfig, grid_points, parse_grid
from .observability import CrossCheckReport, analysis_truth, cross_check, sliding_windows
from .pipeline import CascadeResult, rms_tail, run_cascade
from .riccati import PNotPositiveDefinite
from .scenario import HorizonExceeded, InvalidGrid, run_truth, sense_run

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_DIVERGED, EXIT_AUDIT = 0, 1, 2, 3, 4
TAIL_WINDOW = 5.0


def load_config(args) -> RunConfig:
    cfg = RunConfig() if args.config is None else RunConfig.from_file(args.config)
    if args.seed is not None:
        cfg = cfg.with_overrides({"seed": args.seed})
    if getattr(args, "jobs", None) is not None:
        cfg = cfg.with_overrides({"jobs": args.jobs})
    extra = {}
    for item in getattr(args, "grid", None) or []:
        if "=" not in item:
            raise ConfigError(f"--grid expects key=v1,v2 (got {item!r})")
        key, values = item.split("=", 1)
        extra[key.strip()] = values
    if extra:
        grid = dict(cfg.grid)
        grid.update(parse_grid(extra, cfg))
        cfg = RunConfig(**{**cfg.as_dict(), "grid": grid})
    return cfg


# ----------------------------------------------------------------------------
# shared computations


def audit_report(cfg: RunConfig, delta: float | None = None) -> CrossCheckReport:
    delta = cfg.audit_delta if delta is None else delta
    if delta > cfg.T + 1e-12:
        raise ConfigError(f"audit window {delta} exceeds the horizon T={cfg.T}")
    truth = analysis_truth(cfg.trajectory(), cfg.world(), cfg.dt, cfg.T)
    starts = sliding_windows(truth, delta, cfg.audit_step)
    return cross_check(truth, starts, delta, zero_tol=cfg.audit_threshold)


def summarize(result: CascadeResult, margins: dict[str, float]) -> dict[str, object]:
    """Run summary computed from the same arrays that the step logs hold."""
    err = result.errors()
    t = result.t
    out: dict[str, object] = {}
    for key, label in (("p", "p_B"), ("v", "v_B"), ("g", "g_B")):
        out[f"final_err_{label}"] = err[key][-1]
        out[f"rms_err_{label}"] = float(np.sqrt(np.mean(err[key] ** 2)))
        out[f"rms_tail_err_{label}"] = rms_tail(err[key], t, TAIL_WINDOW)
    out["final_attitude_err_rad"] = err["attitude"][-1]
    out["rms_tail_attitude_err_rad"] = rms_tail(err["attitude"], t, TAIL_WINDOW)
    out["pe_margin"] = margins["pe_phi"]
    out["reduced_gramian_margin"] = margins["reduced_pair"]
    out["full_gramian_margin"] = margins["full_augmented"]
    out["max_P_asymmetry"] = float(np.max(result.riccati.P_asym))
    out["min_P_eig"] = float(np.min(result.riccati.P_min_eig))
    out["rotation_defect"] = result.rotation_defect()
    return out


def observe_config(cfg: RunConfig, margins: dict[str, float]) -> tuple[CascadeResult, dict[str, object]]:
    x0, R0 = cfg.initial_estimates()
    result = run_cascade(
        cfg.trajectory(), cfg.world(), cfg.noise(), cfg.riccati(), cfg.attitude(), cfg.dt, cfg.T, x0, R0
    )
    return result, summarize(result, margins)


def _observe_margins(cfg: RunConfig) -> dict[str, float]:
    return audit_report(cfg, min(cfg.audit_delta, cfg.T)).margins()


# ----------------------------------------------------------------------------
# subcommands


def cmd_simulate(cfg: RunConfig, out: Path, dump_model: bool = False) -> int:
    truth = run_truth(cfg.trajectory(), cfg.world(), cfg.dt, cfg.T)
    sensors = sense_run(truth, cfg.noise())
    io.write_simulation(out / "simulation.csv", truth, sensors)
    if dump_model:
        io.write_model_dump(out, truth.omega[0], truth.a_B[0], cfg.world().g_norm_sq)
    print(f"wrote {len(truth)} samples to {out / 'simulation.csv'}")
    return EXIT_OK


def cmd_observe(cfg: RunConfig, out: Path) -> int:
    margins = _observe_margins(cfg)
    try:
        result, summary = observe_config(cfg, margins)
    except PNotPositiveDefinite as exc:
        print(f"observer diverged at step {exc.step}: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    io.write_simulation(out / "simulation.csv", result.truth, result.sensors)
    io.write_riccati(out / "riccati.csv", result.riccati)
    io.write_attitude(out / "attitude.csv", result.t, result.R_hat, result.errors()["attitude"])
    io.write_summary(out / "summary.txt", summary)
    # timing is the only non-deterministic output, kept apart from the summary
    io.write_summary(out / "timing.txt", {"wall_time_s": result.wall_time})
    for k, v in summary.items():
        print(f"{k}={io._fmt(v)}")
    return EXIT_OK


def cmd_audit(cfg: RunConfig, out: Path) -> int:
    report = audit_report(cfg)
    io.write_audit(out / "audit.csv", report)
    margins = report.margins()
    ok = all(v > cfg.audit_threshold for v in margins.values())
    for k, v in margins.items():
        print(f"{k}={io._fmt(v)}")
    print(f"audit {'passed' if ok else 'FAILED'} (threshold {cfg.audit_threshold:g})")
    return EXIT_OK if ok else EXIT_AUDIT


def _trajectory_key(cfg: RunConfig) -> tuple:
    keys = ("scenario", "dt", "T", "g_I", "m_I", "anchor_I", "audit_delta", "audit_step", "audit_threshold")
    keys += ("position_poly", "position_terms", "omega_poly", "omega_terms", "R0")
    return tuple(getattr(cfg, k) for k in keys)


def _sweep_point(args) -> dict[str, object]:
    cfg, margins = args
    try:
        _, summary = observe_config(cfg, margins)
        summary["diverged"] = 0
    except PNotPositiveDefinite:
        summary = {"diverged": 1}
    return summary


def cmd_sweep(cfg: RunConfig, out: Path) -> int:
    points = grid_points(cfg)
    configs = [cfg.with_overrides(p) for p in points]
    margins: dict[tuple, dict[str, float]] = {}
    for c in configs:
        key = _trajectory_key(c)
        if key not in margins:
            margins[key] = _observe_margins(c)
    tasks = [(c, margins[_trajectory_key(c)]) for c in configs]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_sweep_point, tasks))
    else:
        results = [_sweep_point(t) for t in tasks]
    metric_keys = next((list(r) for r in results if not r["diverged"]), ["diverged"])
    header = list(cfg.grid) + metric_keys
    rows = []
    for p, r in zip(points, results):
        rows.append([p[k] for k in cfg.grid] + [r.get(k, float("nan")) for k in metric_keys])
    io.write_table(out / "sweep.csv", header, rows)
    print(f"wrote {len(rows)} rows to {out / 'sweep.csv'}")
    return EXIT_DIVERGED if any(r["diverged"] for r in results) else EXIT_OK


# ----------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rangenav", description="Single-range aided inertial navigation")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, default=None, help="flat key = value config file")
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        return p

    sim = common(sub.add_parser("simulate", help="write truth and sensor logs"))
    sim.add_argument("--dump-model", action="store_true", help="also dump C family, T and system matrices")
    common(sub.add_parser("observe", help="run the observer cascade"))
    common(sub.add_parser("audit", help="sliding-window observability margins"))
    sweep = common(sub.add_parser("sweep", help="run the cascade over a parameter grid"))
    sweep.add_argument("--grid", action="append", metavar="KEY=V1,V2", help="sweep axis (repeatable)")
    sweep.add_argument("--jobs", type=int, default=None, help="parallel worker processes")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    try:
        cfg = load_config(args)
        args.out.mkdir(parents=True, exist_ok=True)
        if args.command == "simulate":
            code = cmd_simulate(cfg, args.out, args.dump_model)
        elif args.command == "observe":
            code = cmd_observe(cfg, args.out)
        elif args.command == "audit":
            code = cmd_audit(cfg, args.out)
        else:
            code = cmd_sweep(cfg, args.out)
    except (ConfigError, InvalidGrid, HorizonExceeded) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"done in {time.perf_counter() - start:.2f} s", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
