"""Command-line entry point.

    nlwave run <config>               run an experiment from a TOML file
    nlwave preset <name>              run a named preset
    nlwave preset <name> --emit-config
    nlwave audit <config>             admissibility audit only
    nlwave dump-symbols <config>      symbol table as CSV

Every command returns one of the codes in ``ExitCode``.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import dump_config, load_config
from .errors import NLWaveError
from .presets import PRESETS, manufactured_case
from .runner import ExitCode, build_grid, build_table, exit_code_for, run_experiment, write_csv
from .symbols import check_admissibility, symbol_rows

log = logging.getLogger("nlwave")

U64_MAX = 2**64 - 1


def _seed(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value <= U64_MAX:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--force", action="store_true",
                        help="run even when the admissibility audit fails")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--seed", type=_seed, help="override the config seed (u64)")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    parser = argparse.ArgumentParser(prog="nlwave", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="run an experiment")
    p.add_argument("config", type=Path)

    p = sub.add_parser("preset", parents=[common], help="run or print a named preset")
    p.add_argument("name", help=", ".join(PRESETS))
    p.add_argument("--emit-config", action="store_true",
                   help="print the preset as TOML instead of running it")

    p = sub.add_parser("audit", parents=[common], help="admissibility audit")
    p.add_argument("config", type=Path)

    p = sub.add_parser("dump-symbols", parents=[common], help="write the symbol table as CSV")
    p.add_argument("config", type=Path)
    return parser


def _report(report, out) -> int:
    print(f"{report.code.message} (exit {int(report.code)})")
    if report.stop_reason:
        print(f"stop_reason={report.stop_reason}")
    if report.message:
        print(report.message, file=sys.stderr)
    print(f"steps={report.steps} wall_time={report.wall_time:.3f}s output={out}")
    return int(report.code)


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    out = args.out or Path(cfg.output.directory)
    return _report(run_experiment(cfg, out, force=args.force, seed=args.seed), out)


def _cmd_preset(args) -> int:
    case = manufactured_case(args.name)
    if args.emit_config:
        text = dump_config(case.config)
        if args.out is not None:
            args.out.mkdir(parents=True, exist_ok=True)
            (args.out / f"{case.name}.toml").write_text(text)
        else:
            sys.stdout.write(text)
        return int(ExitCode.OK)
    out = args.out or Path(case.config.output.directory) / case.name
    return _report(run_experiment(case.config, out, force=args.force, seed=args.seed), out)


def _cmd_audit(args) -> int:
    cfg = load_config(args.config)
    table = build_table(cfg, build_grid(cfg))
    audit = check_admissibility(table, cfg.kernel, s=cfg.diagnostics.s)
    text = audit.to_text()
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "admissibility.txt").write_text(text)
    sys.stdout.write(text)
    code = ExitCode.OK if audit.overall else ExitCode.REJECTED_ADMISSIBILITY
    return int(code)


def _cmd_dump_symbols(args) -> int:
    cfg = load_config(args.config)
    header, data = symbol_rows(build_table(cfg, build_grid(cfg)))
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        write_csv(args.out / "symbols.csv", data.tolist(), header=header)
    else:
        sys.stdout.write(",".join(header) + "\n")
        for row in data:
            sys.stdout.write(",".join(format(float(x), ".17g") for x in row) + "\n")
    return int(ExitCode.OK)


COMMANDS = {
    "run": _cmd_run,
    "preset": _cmd_preset,
    "audit": _cmd_audit,
    "dump-symbols": _cmd_dump_symbols,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (NLWaveError, OSError) as exc:
        code = exit_code_for(exc)
        print(f"{code.message}: {exc}", file=sys.stderr)
        return int(code)


if __name__ == "__main__":
    sys.exit(main())
