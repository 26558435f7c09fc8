"""Run the acceptance criteria outside pytest and print one line per criterion."""
import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

import test_acceptance as acc  # noqa: E402


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--only", type=int, nargs="*", help="criterion numbers to run (default all)")
    args = ap.parse_args()
    picks = args.only or range(1, len(acc.CRITERIA) + 1)
    ok = [acc.CRITERIA[k - 1]() for k in picks]
    print(f"{sum(ok)}/{len(ok)} passed")
    return 0 if all(ok) else 1


if __name__ == "__main__":
    sys.exit(main())
