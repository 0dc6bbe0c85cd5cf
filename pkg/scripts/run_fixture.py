#!/usr/bin/env python3
"""Run the full robust-training experiment on the shipped fixture config.

Drives the CLI stages (synth, adv-train, eval, sweep) into an output
directory and prints the four headline metric pairs plus the epsilon sweep.
"""

import argparse
import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from robustids.cli import main as cli_main  # noqa: E402
from robustids.jsonutil import read_json  # noqa: E402

REPO = Path(__file__).resolve().parent.parent


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default=str(REPO / "configs" / "fixture.json"))
    parser.add_argument("--out", default=str(REPO / "runs" / "fixture"))
    args = parser.parse_args()

    for cmd in ("synth", "adv-train", "eval", "sweep"):
        rc = cli_main([cmd, "--config", args.config, "--out", args.out])
        if rc != 0:
            return rc

    manifest = read_json(Path(args.out) / "run_manifest.json")
    print()
    print("headline metric pairs (accuracy, weighted F1):")
    for name, pair in manifest["metric_pairs"].items():
        print(f"  {name:>22}: {pair['accuracy']:.6f}  {pair['f1_weighted']:.6f}")
    print()
    print("epsilon sweep (epsilon, surrogate accuracy, ensemble accuracy):")
    for row in read_json(Path(args.out) / "sweep.json"):
        print(
            f"  {row['epsilon']:>5}: {row['surrogate_accuracy']:.6f}  {row['ensemble_accuracy']:.6f}"
        )
    print(f"\nartifacts under {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
