"""Command line entry point: one subcommand per experiment kind.

Exit codes: 0 pass, 2 threshold violation under --assert, 1 usage or config error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .experiments import KINDS, ConfigError, ExperimentConfig, run_experiment


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rankwalk",
                                 description="Seeded corank experiments over finite fields.")
    sub = ap.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        sp = sub.add_parser(kind)
        sp.add_argument("--config", help="JSON config; flags override its fields")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--workers", type=int)
        sp.add_argument("--assert", dest="check", action="store_true",
                        help="exit 2 if any acceptance threshold is violated")
        sp.add_argument("--out", help="output directory for results.csv and summary.json")
        sp.add_argument("--q", type=int)
        sp.add_argument("--n", type=int, nargs="+")
        sp.add_argument("--k", type=int)
        sp.add_argument("--t", type=float, nargs="+")
        sp.add_argument("--trials", type=int)
        sp.add_argument("--L", type=int)
        sp.add_argument("--threshold", type=float)
        sp.add_argument("--excursions", type=int)
    return ap


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as e:  # argparse uses 2 for usage errors; ours is 1
        return 0 if not e.code else 1
    try:
        base = {}
        if args.config:
            with open(args.config) as fh:
                base = json.load(fh)
        base["kind"] = args.kind
        for name in ("seed", "workers", "out", "q", "n", "k", "t", "trials", "L", "threshold",
                     "excursions"):
            v = getattr(args, name)
            if v is not None:
                base[name] = v
        cfg = ExperimentConfig.from_dict(base)
        rep = run_experiment(cfg)
    except (ConfigError, OSError, json.JSONDecodeError, TypeError, ValueError) as e:
        sys.stderr.write(f"rankwalk: {e}\n")
        return 1
    for c in rep.checks:
        mark = "PASS" if c["passed"] else "FAIL"
        print(f"{mark} {c['name']} = {c['value']:.6g} {c['op']} {c['threshold']}")
    print(f"wrote {cfg.out}/results.csv and {cfg.out}/summary.json")
    if args.check and not rep.passed:
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
