"""Command-line entry point: ``platoonlat simulate|analyze|design --config PATH``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import polyfreq as pf
from .analysis import attenuation_report, format_certificate, verdict
from .config import ConfigError, load_config_file
from .control import DelayViolation
from .design import NOT_FOUND, design_lfp
from .sim import BlowUpError, LFP_DT, simulate

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_BLOWUP = 2
EXIT_PRECONDITION = 3
EXIT_NOT_FOUND = 4

log = logging.getLogger("platoonlat")


def _err(msg: str) -> None:
    print(f"platoonlat: {msg}", file=sys.stderr)


def _empirical_lines(report) -> list[str]:
    lines = [
        f"empirical verdict ({report.output} output): {report.verdict}",
        f"horizon: {report.horizon:.6g} m",
        f"max consecutive ratio: {report.gamma:.6g}",
    ]
    if report.first_amplifying is not None:
        lines.append(f"first amplifying vehicle: {report.first_amplifying}")
    return lines


def cmd_simulate(cfg, out: Path, quiet: bool) -> int:
    try:
        traj = simulate(cfg.scenario())
    except DelayViolation as exc:
        _err(f"{cfg.source}: infeasible delay: {exc}")
        return EXIT_CONFIG
    except BlowUpError as exc:
        _err(f"{cfg.source}: simulation aborted: {exc}")
        return EXIT_BLOWUP
    report = attenuation_report(traj, cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    opts = cfg.outputs
    if opts.trajectory:
        traj.write_csv(out / "trajectory.csv", stride=opts.trajectory_stride)
    if opts.norms:
        report.write_csv(out / "norms.csv")
    if opts.path:
        cfg.path.write_csv(out / "path.csv")
    if opts.learned and cfg.strategy == LFP_DT:
        for i, sig in enumerate(traj.learned, start=1):
            sig.write_csv(out / f"learned_{i:02d}.csv")
    status = EXIT_OK
    text = ""
    try:
        text = format_certificate(verdict(cfg.params, cfg.gains, cfg.strategy, cfg.output), cfg.params, cfg.gains)
    except pf.PolyfreqError as exc:
        _err(f"{cfg.source}: frequency-domain analysis failed: {exc}")
        status = EXIT_PRECONDITION
    text += "\n".join(_empirical_lines(report)) + "\n"
    if opts.certificate:
        (out / "certificate.txt").write_text(text)
    if not quiet:
        print(text, end="")
    return status


def cmd_analyze(cfg, out: Path, quiet: bool) -> int:
    try:
        cert = verdict(cfg.params, cfg.gains, cfg.strategy, cfg.output)
    except pf.PolyfreqError as exc:
        _err(f"{cfg.source}: precondition failed: {exc}")
        return EXIT_PRECONDITION
    text = format_certificate(cert, cfg.params, cfg.gains)
    out.mkdir(parents=True, exist_ok=True)
    (out / "certificate.txt").write_text(text)
    if not quiet:
        print(text, end="")
    return EXIT_OK


def cmd_design(cfg, out: Path, quiet: bool) -> int:
    if cfg.design is None:
        _err(f"{cfg.source}: no [design] block")
        return EXIT_CONFIG
    try:
        result = design_lfp(cfg.design)
    except pf.UnstableDenominatorError as exc:
        _err(f"{cfg.source}: {exc}")
        return EXIT_PRECONDITION
    except ValueError as exc:
        _err(f"{cfg.source}: {exc}")
        return EXIT_CONFIG
    lines = [f"design status: {result.status}", f"candidates evaluated: {result.evaluated}"]
    if result.gains is not None:
        lines.append(f"k_lp_rad_per_m = {result.gains.k_lp:.10g}")
        lines.append(f"k_ld_rad = {result.gains.k_ld:.10g}")
        lines.append(f"k_ff_m = {result.gains.k_ff:.10g}")
    lines += [f"diagnostic: {d}" for d in result.diagnostics]
    text = "\n".join(lines) + "\n"
    if result.certificate is not None:
        text += format_certificate(result.certificate, cfg.params, result.gains)
    out.mkdir(parents=True, exist_ok=True)
    (out / "design.txt").write_text(text)
    if not quiet:
        print(text, end="")
    if result.status == NOT_FOUND:
        for d in result.diagnostics:
            _err(d)
        return EXIT_NOT_FOUND
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "analyze": cmd_analyze, "design": cmd_design}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="platoonlat", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("simulate", "run a platoon simulation and write CSVs and a certificate"),
                        ("analyze", "frequency-domain string-stability certificate"),
                        ("design", "search learning gains that satisfy the coefficient condition")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, type=Path, help="scenario configuration file")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: out)")
        p.add_argument("--quiet", action="store_true", help="suppress the summary on standard output")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = load_config_file(args.config)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    return COMMANDS[args.command](cfg, args.out, args.quiet)


if __name__ == "__main__":
    sys.exit(main())
