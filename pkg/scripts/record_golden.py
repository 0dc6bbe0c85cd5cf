#!/usr/bin/env python3
"""Re-record the golden fixture values used by the acceptance suite.

Deletes tests/data/golden_fixture.json and reruns the end-to-end criterion,
which records fresh values on its first verified pass.
"""

import subprocess
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
GOLDEN = REPO / "tests" / "data" / "golden_fixture.json"


def main() -> int:
    if GOLDEN.exists():
        GOLDEN.unlink()
        print(f"removed {GOLDEN}")
    rc = subprocess.call(
        [
            sys.executable,
            "-m",
            "pytest",
            "tests/test_acceptance.py::test_criterion_6_end_to_end_pattern",
            "-v",
            "-s",
        ],
        cwd=REPO,
    )
    if rc == 0 and GOLDEN.exists():
        print(f"recorded {GOLDEN}")
    return rc


if __name__ == "__main__":
    sys.exit(main())
