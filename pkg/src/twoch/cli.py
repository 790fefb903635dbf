"""Command-line entry point.

    twoch propagate    --config run.cfg --out out/prop
    twoch monotonicity --override sweep.L=30,40,50 --override weights.K=6
    twoch stability    --override sweep.eps=1e-4,4e-4,1.6e-3 --seed 7
    twoch coercivity   --override coercivity.speeds=1.5,2,3
    twoch profile-dump --override profile.c=3

Exit codes: 0 success, 2 configuration error, 3 numerical breakdown,
4 modulation-fit failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import experiments as ex
from .coercivity import CoercivityError
from .config import EXPERIMENTS, ConfigError, load_config
from .dynamics import BreakdownError, CFLError
from .modulation import ModulationError
from .solitary import ProfileError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BREAKDOWN = 3
EXIT_FIT = 4

log = logging.getLogger("twoch")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="twoch", description="Solitary-wave train experiments.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging")
    sub = p.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        sp.add_argument("--config", type=Path, help="key=value configuration file")
        sp.add_argument("--out", type=Path, help="output directory (overrides output.dir)")
        sp.add_argument("--seed", type=str, help="perturbation seed, unsigned 64-bit")
        sp.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="set one configuration key; may be repeated")
    return p


def _status_code(statuses) -> int:
    if ex.STATUS_BREAKDOWN in statuses:
        return EXIT_BREAKDOWN
    if ex.STATUS_FIT in statuses:
        return EXIT_FIT
    return EXIT_OK


def run(args: argparse.Namespace) -> int:
    overrides = list(args.override)
    if args.seed is not None:
        overrides.append(f"perturb.seed={args.seed}")
    if args.out is not None:
        overrides.append(f"output.dir={args.out}")
    cfg = load_config(args.config, overrides, experiment=args.command)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(cfg.to_text())

    cmd = args.command
    if cmd == "propagate":
        res = ex.run_propagation(cfg, out)
        _report(res.summary())
        return _status_code([res.status])
    if cmd == "monotonicity":
        sw = ex.run_monotonicity(cfg, out)
        _report(sw.summary)
        return _status_code(sw.statuses)
    if cmd == "stability":
        sw = ex.run_stability(cfg, out)
        _report(sw.summary)
        return _status_code(sw.statuses)
    if cmd == "coercivity":
        _report(ex.run_coercivity(cfg, out).summary())
        return EXIT_OK
    ex.profile_dump(cfg, out)
    print(out / "profile.txt")
    return EXIT_OK


def _report(rec: dict) -> None:
    from .io import format_record
    sys.stdout.write(format_record(rec))


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return run(args)
    except (ConfigError, ProfileError) as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except (BreakdownError, CFLError, CoercivityError) as exc:
        log.error("numerical breakdown: %s", exc)
        return EXIT_BREAKDOWN
    except ModulationError as exc:
        log.error("modulation fit failed: %s", exc)
        return EXIT_FIT


if __name__ == "__main__":
    sys.exit(main())
