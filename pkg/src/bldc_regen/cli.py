"""``bldc-sim`` command line: run scenarios, compare them, print and check switching tables.

Exit codes: 0 success, 1 usage error, 2 configuration or parse error,
3 simulation aborted on a non-finite state.  Errors go to standard error as
``error[<code>]: message``.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import __version__, engine
from .config import ConfigError, Scenario, apply_overrides, load_scenario
from .cycle import CycleError, load_cycle
from .dtc import Mode, table_rows, write_table_csv
from .motor import NonFiniteState

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_SIM = 0, 1, 2, 3
LOG_LEVELS = {"quiet": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}

log = logging.getLogger("bldc_regen")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bldc-sim", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="verb", metavar="VERB", parser_class=_Parser)
    sub.required = True

    def common(sp):
        sp.add_argument("-o", "--out", default="bldc_out", metavar="DIR",
                        help="output directory (created if missing; nothing is written elsewhere)")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a scenario key, e.g. dtc.mode=modified (repeatable)")
        sp.add_argument("--no-plots", action="store_true", help="skip the PNG figures")

    sp = sub.add_parser("run", help="simulate one scenario")
    sp.add_argument("scenario")
    sp.add_argument("--mode", choices=("conventional", "modified"))
    common(sp)

    sp = sub.add_parser("compare", help="simulate two scenarios on the same cycle; with one "
                        "scenario, compare its conventional and modified variants")
    sp.add_argument("scenario")
    sp.add_argument("other", nargs="?")
    common(sp)

    sp = sub.add_parser("tables", help="print a switching table")
    sp.add_argument("--mode", choices=("conventional", "modified"), default="modified")
    sp.add_argument("--format", choices=("csv",), default="csv")
    sp.add_argument("--patched", action="store_true", help="print the corrected table")
    sp.add_argument("--check", action="store_true",
                    help="apply every cell at a mid-sector operating point and report direction errors")

    sp = sub.add_parser("cycle-check", help="validate a drive-cycle CSV")
    sp.add_argument("cycle")

    sub.add_parser("version", help="print the version")
    return p


def _configure_logging() -> None:
    level = os.environ.get("BLDC_SIM_LOG", "quiet").strip().lower()
    if level not in LOG_LEVELS:
        raise UsageError(f"BLDC_SIM_LOG must be one of {', '.join(LOG_LEVELS)}, got {level!r}")
    if not log.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
        log.addHandler(handler)
    log.setLevel(LOG_LEVELS[level])


def _load(path: str, overrides: list[str], mode: str | None = None) -> Scenario:
    sc = load_scenario(path)
    if mode:
        overrides = [*overrides, f"dtc.mode={mode}"]
    return apply_overrides(sc, overrides)


def _write_run(result: engine.RunResult, out: Path, prefix: str = "") -> None:
    engine.write_trace_csv(result, out / f"{prefix}trace.csv")
    engine.write_summary(result.summary, out / f"{prefix}summary.txt")


def _plots(results, out: Path, enabled: bool) -> None:
    if not enabled:
        return
    from . import plots

    for path in plots.report(results, out):
        log.info("wrote %s", path)


def cmd_run(args) -> int:
    sc = _load(args.scenario, args.set, args.mode)
    result = engine.run(sc)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_run(result, out)
    _plots([result], out, not args.no_plots)
    engine.write_summary(result.summary, sys.stdout)
    return EXIT_OK


def cmd_compare(args) -> int:
    a = _load(args.scenario, args.set)
    if args.other:
        b = _load(args.other, args.set)
    else:
        a = engine.with_mode(a, Mode.CONVENTIONAL)
        b = engine.with_mode(a, Mode.MODIFIED)
    ra, rb = engine.compare(a, b)
    # nothing is written until both runs have finished
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_run(ra, out, "a_")
    _write_run(rb, out, "b_")
    delta = engine.comparison_summary(ra, rb)
    engine.write_summary(delta, out / "comparison.txt")
    _plots([ra, rb], out, not args.no_plots)
    engine.write_summary(delta, sys.stdout)
    return EXIT_OK


def cmd_tables(args) -> int:
    if args.check:
        from .tablecheck import check_table

        results = check_table(args.mode, args.patched)
        bad = [r for r in results if not r.ok]
        for r in results:
            print(r.describe())
        print(f"{len(results) - len(bad)}/{len(results)} cells move torque and flux as commanded")
        return EXIT_OK
    write_table_csv(table_rows(args.mode, args.patched), sys.stdout)
    return EXIT_OK


def cmd_cycle_check(args) -> int:
    cycle = load_cycle(args.cycle)
    print(f"name = {cycle.name}")
    print(f"knots = {len(cycle.times)}")
    print(f"duration_s = {cycle.duration}")
    print(f"peak_speed_mps = {cycle.peak_speed}")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "compare": cmd_compare, "tables": cmd_tables,
            "cycle-check": cmd_cycle_check, "version": lambda args: print(__version__) or EXIT_OK}


def _fail(code: int, message: str) -> int:
    print(f"error[{code}]: {message}", file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        _configure_logging()
        return COMMANDS[args.verb](args)
    except UsageError as exc:
        return _fail(EXIT_USAGE, str(exc))
    except FileNotFoundError as exc:
        return _fail(EXIT_CONFIG, f"file not found: {exc.filename}" if exc.filename else str(exc))
    except (ConfigError, CycleError, engine.MismatchError) as exc:
        return _fail(EXIT_CONFIG, str(exc))
    except NonFiniteState as exc:
        return _fail(EXIT_SIM, str(exc))


if __name__ == "__main__":
    sys.exit(main())
