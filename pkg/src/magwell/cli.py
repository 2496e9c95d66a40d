"""Command line front door: `magwell run <config>` and `magwell validate`."""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .runner import ConfigError, RunConfig, run


def _apply_override(raw: dict, spec: str):
    if "=" not in spec:
        raise ConfigError("--override", f"expected key=value, got {spec!r}")
    path, _, value = spec.partition("=")
    keys = path.split(".")
    try:
        parsed = json.loads(value)
    except json.JSONDecodeError:
        parsed = value
    node = raw
    for key in keys[:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ConfigError(path, "override path crosses a non-object")
    node[keys[-1]] = parsed


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="magwell",
        description="Magnetic double-well laboratory: hopping, splitting, "
                    "sophon tuning, and flat-band crystals.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a scenario from a JSON config")
    p_run.add_argument("config", help="path to the config file")
    p_run.add_argument("--output-dir", help="override the output directory")
    p_run.add_argument("--seed", type=int, help="override the run seed")
    p_run.add_argument("--grid-n", type=int, help="override grid.n")
    p_run.add_argument("--override", action="append", default=[],
                       metavar="KEY=VALUE",
                       help="override any config field (dotted path, JSON value)")

    p_val = sub.add_parser("validate", help="run the invariant suite")
    p_val.add_argument("--output-dir", default="validate_out")
    p_val.add_argument("--seed", type=int, default=0)

    args = parser.parse_args(argv)
    try:
        if args.command == "validate":
            raw = {"scenario": "validate", "seed": args.seed,
                   "output_dir": args.output_dir}
            cfg = RunConfig.from_dict(raw)
        else:
            with open(args.config) as fh:
                raw = json.load(fh)
            if args.output_dir:
                raw["output_dir"] = args.output_dir
            if args.seed is not None:
                raw["seed"] = args.seed
            if args.grid_n is not None:
                raw.setdefault("grid", {})["n"] = args.grid_n
            for spec in args.override:
                _apply_override(raw, spec)
            cfg = RunConfig.from_dict(raw)
        run(cfg)
        return 0
    except ConfigError as exc:
        print(json.dumps(exc.record), file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(json.dumps({"error": {"field": "config",
                                    "message": str(exc)}}), file=sys.stderr)
        return 2
    except json.JSONDecodeError as exc:
        print(json.dumps({"error": {"field": "<file>",
                                    "message": f"invalid JSON: {exc}"}}),
              file=sys.stderr)
        return 2
    except Exception as exc:  # pipeline errors: nonzero exit, machine-readable
        print(json.dumps({"error": {"field": "<pipeline>",
                                    "message": str(exc)}}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
