"""Command-line entry point: scenario dispatch and artifact writing.

Usage: telesim run <scenario> [--config path] [--trials N] [--seed S]
[--out dir] [--fibre-km X]. All randomness derives from --seed, so a
rerun with the same manifest reproduces every output byte for byte.
"""
from __future__ import annotations

import argparse
import importlib.resources
import json
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .analysis import (
    CoincidenceWindow,
    build_threefold_histograms,
    calibrate_offsets,
    diamond_counts,
    estimate_gsi,
    fit_visibility_curves,
    histogram_to_csv,
    slice_histogram,
    slice_to_csv,
)
from .config import ExperimentConfig, config_hash, load_config
from .engine import run, run_hom_scan, run_visibility_scan
from .exceptions import (
    CalibrationError,
    ConfigError,
    InsufficientStatisticsError,
    MethodInapplicableError,
    TelesimError,
)
from .oracle import (
    budget_report,
    fibre_invariance_check,
    gsi_ideal,
    noise_probabilities,
    sweep_budgets,
)
from .qubit import named_state
from .tomography import (
    apply_normalization,
    normalization_factor,
    reconstruct,
    uncertainty,
)

SCENARIOS = ("teleport", "tomography", "hom", "gsi", "visibility", "oracle", "sweep")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="telesim")
    sub = parser.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="run one scenario and write its artifacts")
    runp.add_argument("scenario", choices=SCENARIOS)
    runp.add_argument("--config", default=None, help="TOML config (default: bundled paper set)")
    runp.add_argument("--trials", type=int, default=100_000, help="pump windows to simulate")
    runp.add_argument("--seed", type=int, default=0)
    runp.add_argument("--out", default=".", help="output directory")
    runp.add_argument(
        "--fibre-km", type=float, default=None, help="apply X km of fibre to both arms"
    )
    return parser


def _load(args) -> ExperimentConfig:
    if args.config is None:
        path = importlib.resources.files("telesim") / "configs/paper.toml"
    else:
        path = args.config
    cfg = load_config(str(path))
    if args.fibre_km is not None:
        if args.fibre_km < 0:
            raise ConfigError("--fibre-km must be >= 0")
        cfg = cfg.replace(fibre_km_idler=args.fibre_km, fibre_km_wcs=args.fibre_km)
    return cfg


def _write(out: Path, name: str, text: str) -> None:
    try:
        (out / name).write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {out / name}: {exc}") from exc


def _manifest(args, cfg: ExperimentConfig) -> str:
    doc = {
        "scenario": args.scenario,
        "seed": args.seed,
        "trials": args.trials,
        "fibre_km": args.fibre_km,
        "config_hash": config_hash(cfg),
        "config": cfg.to_dict(),
        "versions": {
            "telesim": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }
    return json.dumps(doc, indent=2, default=str)


def _offsets(log):
    """Calibrated per-detector offsets, or none when the log is too thin."""
    try:
        return calibrate_offsets(log)
    except (CalibrationError, InsufficientStatisticsError):
        return {}


def _histogram_files(out: Path, log) -> None:
    h3, h4 = build_threefold_histograms(log, offsets=_offsets(log))
    for det, hist in (("D3", h3), ("D4", h4)):
        _write(out, f"hist2d_{det}.csv", histogram_to_csv(hist))
        centres, counts = slice_histogram(hist, "row", centre=0.0)
        _write(out, f"slice_{det}.csv", slice_to_csv(centres, counts))


def _scenario_teleport(args, cfg, out):
    log = run(cfg, args.trials, args.seed)
    _histogram_files(out, log)


def _scenario_tomography(args, cfg, out):
    logs, counts = {}, {}
    for i, basis in enumerate(("X", "Y", "Z")):
        log = run(cfg.replace(analyzer_basis=basis), args.trials, args.seed + i)
        logs[basis] = log
        h3, h4 = build_threefold_histograms(log, offsets=_offsets(log))
        # D4 projects the plus port of the analysis basis, D3 the minus
        counts[basis] = (diamond_counts(h4), diamond_counts(h3))
    input_state = named_state(cfg.wcs_pol)
    normalized = False
    try:
        factor = normalization_factor(logs, input_state, cfg.tau_i)
        counts = apply_normalization(counts, factor)
        normalized = True
    except (MethodInapplicableError, InsufficientStatisticsError):
        factor = 1.0
    result = reconstruct(counts, input_state)
    result.sigmas = uncertainty(counts, input_state, seed=args.seed)
    doc = json.loads(result.to_json())
    doc["normalization_factor"] = factor
    doc["normalized"] = normalized
    _write(out, "tomography.json", json.dumps(doc, indent=2))


def _scenario_hom(args, cfg, out):
    delta_ts = np.linspace(-10.0, 10.0, 41)
    rates, visibility = run_hom_scan(cfg, delta_ts, args.trials, args.seed)
    lines = [f"# visibility={visibility!r}", "delta_t_ns,coincidence_rate"]
    for dt, rate in zip(delta_ts, rates):
        lines.append(f"{dt:.6f},{rate!r}")
    _write(out, "hom.csv", "\n".join(lines) + "\n")


def _scenario_gsi(args, cfg, out):
    log = run(cfg, args.trials, args.seed)
    window = CoincidenceWindow(centre=0.0, width=2.0)
    doc = {
        "window_centre_ns": window.centre,
        "window_width_ns": window.width,
        "gsi_ideal": gsi_ideal(cfg.p) if cfg.p > 0 else None,
        "gsi_transmitted": estimate_gsi(log, window, peak="transmitted"),
    }
    if cfg.mem_efficiency > 0:
        try:
            doc["gsi_stored"] = estimate_gsi(log, window, peak="stored")
        except InsufficientStatisticsError:
            doc["gsi_stored"] = None
    _write(out, "gsi.json", json.dumps(doc, indent=2))


def _scenario_visibility(args, cfg, out):
    # the visibility curves are monitored with the WCS blocked
    cfg = cfg.replace(mu=0.0)
    angles = np.linspace(0.0, np.pi / 2, 12, endpoint=False)
    scan = run_visibility_scan(cfg, angles, args.trials, args.seed)
    pairs = ("D1-D3", "D1-D4", "D2-D3", "D2-D4")
    try:
        vis, phase = fit_visibility_curves(scan)
        fit_line = f"# fit V={{{', '.join(f'{p}: {vis[p]:.6f}' for p in pairs)}}} phi={phase:.6f}"
    except TelesimError:
        fit_line = "# fit failed"
    lines = [fit_line, "angle_rad," + ",".join(pairs)]
    for angle in angles:
        row = scan[angle]
        lines.append(f"{angle:.6f}," + ",".join(str(row[p]) for p in pairs))
    _write(out, "visibility.csv", "\n".join(lines) + "\n")


def _scenario_oracle(args, cfg, out):
    budget = noise_probabilities(cfg.p, cfg.mu, cfg.eta_i, cfg.eta_s)
    doc = budget_report(budget)
    if args.fibre_km:
        eta = cfg.fibre_transmission("idler")
        f_with, f_without, delta = fibre_invariance_check(budget, eta)
        doc["fibre"] = {
            "km": args.fibre_km,
            "eta": eta,
            "fidelity_with": f_with,
            "fidelity_without": f_without,
            "delta": delta,
        }
    _write(out, "oracle.json", json.dumps(doc, indent=2))


def _scenario_sweep(args, cfg, out):
    p_values = np.geomspace(1e-3, 0.1, 11)
    mu_values = np.geomspace(1e-3, 0.1, 11)
    lines = ["p,mu,eta_i,eta_s,P11,P20,P02,F,P"]
    for row in sweep_budgets(p_values, mu_values, cfg.eta_i, cfg.eta_s):
        lines.append(",".join(repr(float(row[k])) for k in ("p", "mu", "eta_i", "eta_s"))
                     + "," + ",".join(repr(float(row[k])) for k in ("P11", "P20", "P02", "F", "P")))
    _write(out, "sweep.csv", "\n".join(lines) + "\n")


_DISPATCH = {
    "teleport": _scenario_teleport,
    "tomography": _scenario_tomography,
    "hom": _scenario_hom,
    "gsi": _scenario_gsi,
    "visibility": _scenario_visibility,
    "oracle": _scenario_oracle,
    "sweep": _scenario_sweep,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.trials < 1:
        print("error: --trials must be a positive integer", file=sys.stderr)
        return 2
    try:
        cfg = _load(args)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _DISPATCH[args.scenario](args, cfg, out)
        _write(out, "run_manifest.json", _manifest(args, cfg))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except TelesimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
