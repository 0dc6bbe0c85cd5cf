#!/usr/bin/env python3
"""Large-corpus smoke run: synthesize a CSV, preprocess it in chunks, and
train a short booster, reporting wall time and peak memory.

Exits nonzero if peak RSS exceeds the budget. Prints one JSON summary line
on stdout so callers (including the test suite) can parse the outcome.
"""

import argparse
import json
import resource
import sys
import tempfile
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from robustids import flowdata, gbdt, preprocess  # noqa: E402


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--config",
        default=str(Path(__file__).resolve().parent.parent / "configs" / "scale_1m.json"),
    )
    parser.add_argument("--budget-mib", type=float, default=4096.0)
    parser.add_argument("--keep-csv", action="store_true")
    args = parser.parse_args()

    cfg = json.loads(Path(args.config).read_text())
    spec = flowdata.SynthSpec.from_dict(cfg["dataset"]["synth"])
    pre = cfg["preprocess"]
    booster = dict(cfg["booster"])

    timings = {}
    t0 = time.time()
    table = flowdata.synth_generate(spec)
    timings["synth_s"] = round(time.time() - t0, 1)

    with tempfile.TemporaryDirectory() as tmp:
        csv_path = Path(tmp) / "dataset.csv"
        t0 = time.time()
        flowdata.write_csv(table, csv_path)
        timings["write_csv_s"] = round(time.time() - t0, 1)
        size_mib = csv_path.stat().st_size / 2**20
        del table

        t0 = time.time()
        table = flowdata.load_csv(csv_path, spec.schema)
        timings["load_csv_s"] = round(time.time() - t0, 1)

        t0 = time.time()
        stats = preprocess.fit_stats(table)
        X, y = preprocess.transform_parallel(
            table, stats, chunk_rows=int(pre["chunk_rows"]), workers=int(pre["workers"])
        )
        timings["preprocess_s"] = round(time.time() - t0, 1)
        del table

        t0 = time.time()
        hp = gbdt.Hyperparams(n_classes=stats.n_classes, **booster)
        model = gbdt.train(X, y, hp)
        timings["train_s"] = round(time.time() - t0, 1)

    peak_mib = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024
    summary = {
        "rows": spec.n_rows,
        "csv_mib": round(size_mib, 1),
        "rounds": hp.rounds,
        "final_train_logloss": model.train_losses[-1],
        "peak_rss_mib": round(peak_mib, 1),
        "budget_mib": args.budget_mib,
        "within_budget": peak_mib <= args.budget_mib,
        "timings": timings,
        "total_s": round(sum(timings.values()), 1),
    }
    print(json.dumps(summary))
    return 0 if summary["within_budget"] else 1


if __name__ == "__main__":
    sys.exit(main())
