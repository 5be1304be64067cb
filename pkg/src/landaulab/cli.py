"""Command line: ``landau-lab run <config>`` and ``landau-lab report <dir>``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys

from . import __version__
from .lab import (EXIT_CONFIG, EXIT_INTEGRITY, EXIT_OK, ConfigError, ExperimentConfig, IntegrityError, report, run)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="landau-lab", description="Landau Hamiltonian spectral experiments.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    r = sub.add_parser("run", help="run an experiment config and write a result bundle")
    r.add_argument("config", help="INI config file")
    r.add_argument("--seed", type=int, help="override the config seed")
    r.add_argument("--threads", type=int, help="override the worker thread count")
    r.add_argument("--out", help="override the output directory")
    s = sub.add_parser("report", help="verify a result bundle and print its summary")
    s.add_argument("directory")
    s.add_argument("--json", dest="json_out", help="also write the consolidated JSON here")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "run":
        try:
            cfg = ExperimentConfig.load(args.config)
            overrides = {k: getattr(args, k) for k in ("seed", "threads", "out") if getattr(args, k) is not None}
            cfg = dataclasses.replace(cfg, **overrides).validate()
        except (ConfigError, TypeError) as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        bundle = run(cfg)
        text, _ = report(bundle.directory)
        print(text, end="")
        print(f"bundle: {bundle.directory}")
        return bundle.exit_code()
    try:
        text, data = report(args.directory)
    except IntegrityError as exc:
        print(f"integrity error: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY
    print(text, end="")
    if args.json_out:
        with open(args.json_out, "w") as fh:
            json.dump(data, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
