#!/usr/bin/env python3
"""
Run every experiment config in a directory and summarize the outcomes.

Usage:
    python scripts/run_experiments.py
    python scripts/run_experiments.py --configs configs --out results --jobs 4
    python scripts/run_experiments.py --only piracy.json counterfeit.json

Each config writes <out>/<prefix>.csv and <out>/<prefix>.json. The script
exits 1 if any asserted bound failed, 2 if a config was invalid.
"""

import argparse
import sys
from pathlib import Path

# Allow running from the repo root without installing the package
sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from src.experiments.cli import EXIT_FAILED, EXIT_INVALID, EXIT_OK, main as lab_main


def main() -> None:
    parser = argparse.ArgumentParser(description="Run all experiment configs in a directory")
    parser.add_argument(
        "--configs",
        default="configs",
        help="Directory holding *.json experiment configs (default: configs)",
    )
    parser.add_argument("--out", default="results", help="Output directory (default: results)")
    parser.add_argument("--jobs", type=int, default=None, help="Parallel workers per experiment")
    parser.add_argument("--seed", type=int, default=None, help="Override every config's seed")
    parser.add_argument("--only", nargs="*", default=None, help="Config file names to run")
    args = parser.parse_args()

    config_dir = Path(args.configs)
    paths = sorted(config_dir.glob("*.json"))
    if args.only:
        paths = [p for p in paths if p.name in set(args.only)]
    if not paths:
        print(f"No configs found in {config_dir}")
        sys.exit(EXIT_INVALID)

    statuses: dict[str, int] = {}
    for path in paths:
        print(f"\n=== {path.name} ===")
        argv = ["run", "--config", str(path), "--out", args.out]
        if args.jobs is not None:
            argv += ["--jobs", str(args.jobs)]
        if args.seed is not None:
            argv += ["--seed", str(args.seed)]
        statuses[path.name] = lab_main(argv)

    print("\nSummary:")
    for name, status in statuses.items():
        label = {EXIT_OK: "ok", EXIT_FAILED: "FAILED", EXIT_INVALID: "INVALID"}.get(status, str(status))
        print(f"  {name:28s} {label}")

    worst = max(statuses.values())
    if worst == EXIT_OK:
        print(f"\n[OK] {len(statuses)} experiments passed; results in {args.out}/")
    sys.exit(worst)


if __name__ == "__main__":
    main()
