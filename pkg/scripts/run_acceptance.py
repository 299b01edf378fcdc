"""Run the acceptance suite and print its criterion lines.

Running the whole test directory also evaluates criterion 10 from the
property suites of the same session; ``--quick`` runs only the acceptance
module, which then runs the property suites in a subprocess.
"""
import argparse
import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--quick", action="store_true", help="acceptance module only")
    args = p.parse_args()
    target = "tests/test_acceptance.py" if args.quick else "tests"
    return subprocess.call([sys.executable, "-m", "pytest", "-q", target], cwd=ROOT)


if __name__ == "__main__":
    sys.exit(main())
