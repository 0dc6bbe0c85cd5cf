#!/usr/bin/env python3
"""Sweep the attack strength against a trained booster and its surrogate.

Standalone experiment: builds a seeded synthetic corpus, trains both models
on the clean train split, then prints accuracy against perturbations of
increasing magnitude.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from robustids import advtrain, flowdata, gbdt, surrogate  # noqa: E402
from robustids.attack import AttackConfig, epsilon_sweep  # noqa: E402


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rows", type=int, default=20000)
    parser.add_argument("--separation", type=float, default=2.0)
    parser.add_argument("--rounds", type=int, default=30)
    parser.add_argument("--seed", type=int, default=1337)
    parser.add_argument(
        "--epsilons", type=float, nargs="+", default=[0.0, 0.02, 0.05, 0.1, 0.2, 0.4]
    )
    args = parser.parse_args()

    spec = flowdata.SynthSpec(
        n_rows=args.rows, n_numeric=20, n_categorical=4,
        missing_rate=0.01, separation=args.separation, seed=args.seed,
    )
    table = flowdata.synth_generate(spec)
    hp = gbdt.Hyperparams(n_classes=10, rounds=args.rounds)
    scfg = surrogate.SurrogateTrainCfg(epochs=30, seed=args.seed + 1)
    baseline, _, result = advtrain.adversarial_training_pipeline(
        table, hp, scfg, AttackConfig(epsilon=0.1), split_seed=args.seed + 2, workers=2,
        chunk_rows=8192,
    )
    rows = epsilon_sweep(
        result.surrogate_params, baseline, result.X_test, result.y_test, args.epsilons
    )
    print(f"{'epsilon':>8}  {'surrogate_acc':>13}  {'booster_acc':>11}")
    for eps, surr, ens in rows:
        print(f"{eps:>8.3f}  {surr:>13.4f}  {ens:>11.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
