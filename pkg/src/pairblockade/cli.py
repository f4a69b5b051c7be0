"""``sim`` command line entry point.

    sim <scenario> [--config PATH] [--out DIR] [--allow-detuned] [--workers N]

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 validation failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

from .config import SCENARIOS, parse_config, parse_text
from .errors import ConfigError, NumericalError
from .scenarios import EXIT_CONFIG, EXIT_NUMERICAL, RUNNERS, _jsonable


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sim", description="Photon-pair blockade scenarios")
    ap.add_argument("scenario", choices=SCENARIOS)
    ap.add_argument("--config", help="config file (defaults to the built-in benchmark parameters)")
    ap.add_argument("--out", help="output directory (overrides [output] dir)")
    ap.add_argument("--allow-detuned", action="store_true", help="run rabi off the pair resonance")
    ap.add_argument("--workers", type=int, default=1, help="worker processes for sweeps")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def summarize(manifest: dict) -> str:
    keys = ("results", "checks", "warnings")
    return json.dumps({k: manifest[k] for k in keys if k in manifest}, indent=2)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        cfg = parse_config(args.config, args.scenario) if args.config else parse_text("", args.scenario)
        if args.out:
            cfg = replace(cfg, output_dir=args.out)
        runner = RUNNERS[cfg.scenario]
        if cfg.scenario == "rabi":
            result = runner(cfg, allow_detuned=args.allow_detuned)
        elif cfg.scenario == "emission-sweep":
            result = runner(cfg, workers=args.workers)
        else:
            result = runner(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(summarize(_jsonable(result.manifest)))
    for f in result.files:
        print(f"wrote {f}")
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
