"""Run the acceptance suite and print one PASS/FAIL line per criterion."""

import argparse
import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("-k", help="pytest -k expression to pick criteria, e.g. 'test_1_ or test_3_'")
    args, extra = ap.parse_known_args()
    cmd = [sys.executable, "-m", "pytest", str(ROOT / "tests" / "test_acceptance.py"), "-q", "-p", "no:cacheprovider"]
    if args.k:
        cmd += ["-k", args.k]
    sys.exit(subprocess.call(cmd + extra, cwd=ROOT))


if __name__ == "__main__":
    main()
