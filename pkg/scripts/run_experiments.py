"""Run the bundled experiment configs and print their checks.

    python3 scripts/run_experiments.py                 # all configs
    python3 scripts/run_experiments.py truncated localization --workers 2
"""

from __future__ import annotations

import argparse
import json
import pathlib
import sys

from rankwalk.experiments import ExperimentConfig, run_experiment

CONFIGS = pathlib.Path(__file__).with_name("configs")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("names", nargs="*", help="config stems under scripts/configs (default: all)")
    ap.add_argument("--workers", type=int, help="override worker count")
    ap.add_argument("--trials", type=int, help="override trial count, e.g. for a quick pass")
    args = ap.parse_args(argv)

    names = args.names or sorted(p.stem for p in CONFIGS.glob("*.json"))
    failed = 0
    for name in names:
        d = json.loads((CONFIGS / f"{name}.json").read_text())
        for key in ("workers", "trials"):
            if getattr(args, key) is not None:
                d[key] = getattr(args, key)
        rep = run_experiment(ExperimentConfig.from_dict(d))
        print(f"== {name}: {len(rep.rows)} rows -> {d['out']}")
        for c in rep.checks:
            print(f"   [{'PASS' if c['passed'] else 'FAIL'}] {c['name']} = {c['value']:.4g}"
                  f" (threshold {c['threshold']})")
            failed += not c["passed"]
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
