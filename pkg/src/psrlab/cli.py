"""Command-line entry point: ``psrlab <subcommand> ...``.

Exit codes: 0 success, 2 configuration or validation error, 3 simulation error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .detection import (
    DetectionChain,
    HomodyneScan,
    effective_efficiency,
    fit_covariance,
    fmt,
    infer_source_db,
    scan_summary,
    wigner_grid,
)
from .errors import ConfigError, DomainError, ParseError, PsrLabError, SchemeMismatch, Unphysical
from .experiments import (
    SWEEP_PARAMS,
    ExperimentConfig,
    detected_summary,
    load_config,
    phase_scan,
    run_experiment,
    source_state,
)
from .plotting import plot_svg

EXIT_OK, EXIT_CONFIG, EXIT_SIM = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if getattr(args, "tier", None):
        cfg = replace(cfg, tier="shear" if args.tier == "shear" else "micro")
    return cfg


def _kv(pairs) -> str:
    return "".join(f"{k}={fmt(v) if not isinstance(v, str) else v}\n" for k, v in pairs)


def cmd_simulate(args) -> int:
    cfg = _config(args)
    state = source_state(cfg)
    src = scan_summary(state)
    lo, hi, ang = detected_summary(state, cfg.chain())
    sys.stdout.write(
        _kv(
            [
                ("tier", cfg.tier),
                ("min_db", lo),
                ("max_db", hi),
                ("angle_rad", ang),
                ("source_min_db", src["min_db"]),
                ("source_max_db", src["max_db"]),
                ("eta", effective_efficiency(cfg.chain())),
                ("det", state.det),
            ]
        )
    )
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    try:
        cfg = replace(
            cfg,
            sweep_param=args.param or cfg.sweep_param,
            sweep_from=cfg.sweep_from if args.start is None else args.start,
            sweep_to=cfg.sweep_to if args.stop is None else args.stop,
            sweep_steps=cfg.sweep_steps if args.steps is None else args.steps,
            seed=cfg.seed if args.seed is None else args.seed,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    report = run_experiment(cfg, args.out)
    for key, val in report.flags().items():
        sys.stderr.write(f"{key}={val}\n")
    if report.n_failed == len(report.points):
        sys.stderr.write("every sweep point failed\n")
        return EXIT_SIM
    return EXIT_OK


def cmd_scan_phase(args) -> int:
    cfg = _config(args)
    cfg = replace(
        cfg,
        scan_points=cfg.scan_points if args.points is None else args.points,
        scan_samples=cfg.scan_samples if args.samples is None else args.samples,
        seed=cfg.seed if args.seed is None else args.seed,
    )
    phase_scan(cfg).write_csv(args.out)
    return EXIT_OK


def cmd_infer(args) -> int:
    chain = DetectionChain(args.transmission, args.qe, args.visibility)
    eta = effective_efficiency(chain)
    src = infer_source_db(args.measured_db, eta)
    sys.stdout.write(_kv([("eta", eta), ("source_db", src)]))
    return EXIT_OK


def cmd_tomo(args) -> int:
    scan = HomodyneScan.read_csv(args.scan)
    fit = fit_covariance(scan)
    summary = scan_summary(fit.state)
    cov = fit.state.cov
    rows = [
        ("s_xx", cov[0, 0]),
        ("s_pp", cov[1, 1]),
        ("s_xp", cov[0, 1]),
        ("min_db", summary["min_db"]),
        ("max_db", summary["max_db"]),
        ("angle_rad", summary["angle_rad"]),
        ("residual_snu", fit.residual),
    ]
    text = "quantity,value\n" + "".join(f"{k},{fmt(v)}\n" for k, v in rows)
    Path(args.out).write_text(text)
    if args.wigner:
        Path(args.wigner).write_text(wigner_grid(fit.state, args.half_width, args.grid_points).to_csv())
    sys.stdout.write(_kv(rows[3:6]))
    return EXIT_OK


def cmd_plot(args) -> int:
    plot_svg(args.inp, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="psrlab", description="Vacuum squeezing by polarization self-rotation: simulations and analysis.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="report min/max noise of the configured source")
    s.add_argument("--config")
    s.add_argument("--tier", choices=["shear", "micro"])
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("sweep", help="sweep one parameter and write a CSV")
    s.add_argument("--config")
    s.add_argument("--tier", choices=["shear", "micro"])
    s.add_argument("--param", choices=SWEEP_PARAMS)
    s.add_argument("--from", dest="start", type=float)
    s.add_argument("--to", dest="stop", type=float)
    s.add_argument("--steps", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("scan-phase", help="homodyne phase scan of the configured source")
    s.add_argument("--config")
    s.add_argument("--tier", choices=["shear", "micro"])
    s.add_argument("--points", type=int)
    s.add_argument("--samples", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_scan_phase)

    s = sub.add_parser("infer", help="undo detection loss on a measured squeezing level")
    s.add_argument("--measured-db", type=float, required=True)
    s.add_argument("--transmission", type=float, default=1.0)
    s.add_argument("--qe", type=float, default=1.0)
    s.add_argument("--visibility", type=float, default=1.0)
    s.set_defaults(func=cmd_infer)

    s = sub.add_parser("tomo", help="fit a Gaussian covariance to a phase scan")
    s.add_argument("--scan", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--wigner")
    s.add_argument("--half-width", type=float, default=3.0)
    s.add_argument("--grid-points", type=int, default=121)
    s.set_defaults(func=cmd_tomo)

    s = sub.add_parser("plot", help="render a sweep or scan CSV as SVG")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_plot)
    return p


# input problems the user can fix map to exit 2; anything raised while solving maps to 3
_VALIDATION = (ConfigError, DomainError, ParseError, SchemeMismatch, Unphysical, OSError)


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # usage errors exit 2 from argparse; --help exits 0
        return int(exc.code or 0)
    try:
        return args.func(args)
    except _VALIDATION as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG
    except (PsrLabError, np.linalg.LinAlgError) as exc:
        sys.stderr.write(f"simulation error: {type(exc).__name__}: {exc}\n")
        return EXIT_SIM


if __name__ == "__main__":
    sys.exit(main())
