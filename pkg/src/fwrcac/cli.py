"""Command line entry point: ``fwrcac run|sweep|validate|plot``.

Exit status is 0 on success, 2 when a simulation fails (ground impact,
non-finite state, incomplete mission) and 1 on configuration errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .attitude import NOMINAL_GAINS, AttitudeGains, degrade
from .plots import PlotError, emit_plots
from .scenario import (ConfigError, MetricsError, ScenarioConfig, metrics, output_root,
                       read_telemetry, run_scenario, summary_record, sweep)

log = logging.getLogger("fwrcac")

EXIT_OK, EXIT_CONFIG, EXIT_FAILED = 0, 1, 2

SWEEP_KEYS = {"base", "alphas", "adaptive", "faults", "fault", "workers", "output_dir"}


def _load_scenario(path, seed=None) -> ScenarioConfig:
    cfg = ScenarioConfig.from_json(path)
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    return cfg


def load_sweep(path, seed=None) -> dict:
    """Read a sweep file.

    ``base`` is either an inline scenario object or a path to a scenario
    file (relative to the sweep file).  ``alphas`` is required; ``adaptive``
    and ``faults`` default to ``[false, true]`` and ``[false]``.
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read sweep {path}: {exc}") from exc
    unknown = set(data) - SWEEP_KEYS
    if unknown:
        raise ConfigError(f"unknown sweep fields: {sorted(unknown)}")
    if "alphas" not in data or not data["alphas"]:
        raise ConfigError("sweep needs a nonempty 'alphas' list")
    base = data.get("base", {})
    if isinstance(base, str):
        cfg = ScenarioConfig.from_json(path.parent / base)
    else:
        cfg = ScenarioConfig.from_dict(base, base_dir=path.parent)
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    alphas = [float(a) for a in data["alphas"]]
    if any(a < 0 for a in alphas):
        raise ConfigError("alphas must be >= 0")
    return {"base": cfg, "alphas": alphas,
            "adaptive": [bool(x) for x in data.get("adaptive", [False, True])],
            "faults": [bool(x) for x in data.get("faults", [False])],
            "fault_spec": data.get("fault"), "workers": int(data.get("workers", 1)),
            "out_dir": data.get("output_dir")}


def cmd_run(args) -> int:
    cfg = _load_scenario(args.scenario, args.seed)
    out = Path(args.out) if args.out else (Path(cfg.output_dir) if cfg.output_dir
                                           else output_root() / cfg.name)
    res = run_scenario(cfg, out)
    print(json.dumps(summary_record(res), indent=2))
    if not args.no_plots and len(res.telemetry["t"]):
        fixed = _fixed_gains(cfg.build_gains(), cfg.degradation_factor)
        emit_plots(res.telemetry, res.summary, out, cfg.name, fixed)
    if res.failed:
        log.error("run %s failed: %s", cfg.name, res.reason)
        return EXIT_FAILED
    return EXIT_OK


def cmd_sweep(args) -> int:
    spec = load_sweep(args.sweep, args.seed)
    out = Path(args.out or spec["out_dir"] or output_root() / "sweep")
    try:
        rows, table = sweep(spec["base"], spec["alphas"], spec["adaptive"], spec["faults"],
                            out_dir=out, workers=args.workers or spec["workers"],
                            fault_spec=spec["fault_spec"])
    except MetricsError as exc:
        log.error("%s", exc)
        return EXIT_FAILED
    print(table, end="")
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = _load_scenario(args.scenario, args.seed)
    print(f"{args.scenario}: ok ({cfg.name})")
    return EXIT_OK


def _fixed_gains(gains: AttitudeGains, alpha_d: float) -> dict:
    g = degrade(gains, alpha_d)
    return {"theta": g.k_theta, "phi": g.k_phi}


def cmd_plot(args) -> int:
    try:
        tel = read_telemetry(args.telemetry)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read telemetry {args.telemetry}: {exc}") from exc
    try:
        summary = metrics(tel)
    except MetricsError:
        summary = None
    name = Path(args.telemetry).stem
    out = Path(args.out) if args.out else Path(args.telemetry).parent
    try:
        paths = emit_plots(tel, summary, out, name, _fixed_gains(NOMINAL_GAINS, args.alpha_d))
    except PlotError as exc:
        raise ConfigError(str(exc)) from exc
    for p in paths:
        print(p)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fwrcac", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one scenario")
    p.add_argument("scenario")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a degradation/adaptation/fault sweep")
    p.add_argument("sweep")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="check a scenario file without running it")
    p.add_argument("scenario")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("plot", help="render SVG plots from a telemetry CSV")
    p.add_argument("telemetry")
    p.add_argument("--out")
    p.add_argument("--alpha-d", type=float, default=1.0,
                   help="degradation factor for the dashed fixed-gain reference")
    p.set_defaults(func=cmd_plot)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
