"""Command-line entry point ``ipps``.

Exit status: 0 when every check passes, 1 on a numerical failure,
2 on a configuration error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import COMMANDS, RunConfig, apply_overrides, env_overrides, parse_config
from .errors import ConfigError, IppsError
from .harness import SCHEMAS, run

log = logging.getLogger("ipps")

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _epilog() -> str:
    lines = ["output files (all CSV files start with a header row):",
             f"  report.csv   {SCHEMAS['report.csv']}",
             "  report.json  rows, status, seed, environment and the echoed config",
             "per-command tables:"]
    lines += [f"  {cmd:<17} {SCHEMAS[cmd]}" for cmd in COMMANDS]
    lines += ["", "precedence: defaults < --config file < IPPS_<KEY> environment < --set < "
              "--seed/--out", "exit status: 0 pass, 1 numerical failure, 2 configuration error"]
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="ipps",
        description="Verification suites for Pfaffian point processes of interacting walks.",
        epilog=_epilog(), formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("command", choices=COMMANDS, help="suite to run")
    ap.add_argument("--config", type=Path, help="key = value configuration file")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="override one configuration key (repeatable)")
    ap.add_argument("--out", type=Path, help="output directory")
    ap.add_argument("--seed", type=str, help="unsigned 64-bit seed for stochastic suites")
    ap.add_argument("-q", "--quiet", action="store_true", help="only print the summary line")
    return ap


def load_config(args) -> RunConfig:
    cfg = RunConfig()
    if args.config is not None:
        try:
            text = args.config.read_text()
        except OSError as exc:
            raise ConfigError(f"--config: {exc}") from None
        cfg = parse_config(text, cfg)
    cfg = apply_overrides(cfg, env_overrides(), origin="environment")
    cfg = apply_overrides(cfg, args.set)
    cfg = apply_overrides(cfg, [f"command={args.command}"])
    if args.seed is not None:
        cfg = apply_overrides(cfg, [f"seed={args.seed}"], origin="--seed")
    if args.out is not None:
        cfg.out = str(args.out)
    return cfg


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_PASS
    try:
        cfg = load_config(args)
        result = run(cfg)
    except IppsError as exc:
        # bad keys, infeasible sizes and inadmissible parameter values
        print(f"ipps: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    rep = result.report
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.csv").write_text(rep.to_csv())
    (out / "report.json").write_text(rep.to_json())
    for name, text in result.artifacts.items():
        (out / name).write_text(text)
    if not args.quiet:
        for row in rep.rows:
            if not row.passed:
                log.info("FAIL %s: computed %.17g reference %.17g tolerance %.3g",
                         row.name, row.computed, row.reference, row.tolerance)
    log.info("%s (written to %s)", rep.summary(), out)
    return EXIT_PASS if rep.ok else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
