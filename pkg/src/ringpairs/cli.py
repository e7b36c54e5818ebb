"""Simulate and analyze photon-pair measurements on a microring source.

    ringpairs <command> --config paper.json --out results [--seed N]
              [--duration S] [--power MW] [--channel I] [--emit-tags] [--workers K]

Exit codes: 0 success, 2 config validation failure, 3 statistical
precondition failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, config_hash, paper_config_path, parse_config, with_overrides
from .errors import AcquisitionTooLarge, RangeError, StatisticsError
from .experiments import COMMANDS, DISPATCH, RunOptions

EXIT_OK, EXIT_CONFIG, EXIT_STATISTICS = 0, 2, 3

log = logging.getLogger("ringpairs")

# which config keys the generic --duration / --power / --channel flags address
_DURATION_KEYS = {"pairs": ["pairs.duration"], "multichannel": ["multichannel.duration"],
                  "franson": ["franson.dwell"], "hbt": ["hbt.herald_duration"],
                  "table1": ["table1.herald_duration"], "dispersion": [], "spectrum": []}
_POWER_KEYS = {"spectrum": ["spectrum.power"], "multichannel": ["multichannel.power"],
               "franson": ["franson.power"], "hbt": ["hbt.herald_power"],
               "table1": ["table1.herald_power"], "pairs": [], "dispersion": []}
_CHANNEL_KEYS = {"pairs": "pairs.channel", "franson": "franson.channel", "hbt": "hbt.channel"}


def build_parser():
    p = argparse.ArgumentParser(prog="ringpairs", description=__doc__.split("\n\n")[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", type=Path, default=None,
                   help="JSON experiment config (default: shipped paper.json)")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--duration", type=float, default=None, help="acquisition time in s")
    p.add_argument("--power", type=float, default=None, help="on-chip pump power in mW")
    p.add_argument("--channel", type=int, default=None, help="channel pair index")
    p.add_argument("--emit-tags", action="store_true", help="also write raw .qtg tag files")
    p.add_argument("--workers", type=int, default=1, help="threads for sweep points")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _overrides(args):
    out = {}
    if args.seed is not None:
        out["acquisition.seed"] = args.seed
    if args.duration is not None:
        for key in _DURATION_KEYS[args.command]:
            out[key] = args.duration
    if args.power is not None:
        for key in _POWER_KEYS[args.command]:
            out[key] = args.power
    if args.channel is not None:
        if args.command in _CHANNEL_KEYS:
            out[_CHANNEL_KEYS[args.command]] = args.channel
        elif args.command in ("multichannel", "table1"):
            out[f"{args.command}.channels"] = [args.channel]
    return out


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    path = args.config or paper_config_path()
    try:
        try:
            document = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError("$", f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError("$", f"invalid JSON: {exc}") from None
        if args.workers < 1:
            raise ConfigError("--workers", "must be >= 1")
        overrides = _overrides(args)
        cfg = parse_config(with_overrides(document, **overrides))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    log.info("config %s (hash %s)", path, config_hash(cfg.document)[:12])
    try:
        summary = DISPATCH[args.command](cfg, args.out,
                                         RunOptions(workers=args.workers, emit_tags=args.emit_tags))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StatisticsError as exc:
        print(f"statistics error: {exc}", file=sys.stderr)
        return EXIT_STATISTICS
    except (RangeError, AcquisitionTooLarge) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps({"command": args.command, "out": str(Path(args.out) / args.command),
                      "summary": str(Path(args.out) / args.command / "summary.json")}))
    log.info("%s", summary)
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
