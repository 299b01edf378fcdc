"""Run every scenario in configs/ through the CLI, one output directory each."""
import argparse
import sys
from pathlib import Path

from orthospec.cli import main as cli_main

ROOT = Path(__file__).resolve().parents[1]


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", default="runs", help="parent output directory")
    p.add_argument("--threads", type=int, default=1)
    args = p.parse_args()
    codes = {}
    for cfg in sorted((ROOT / "configs").glob("*.json")):
        command = cfg.stem.split("_")[0]
        codes[cfg.stem] = cli_main([command, "--config", str(cfg), "--out", str(Path(args.out) / cfg.stem),
                                    "--threads", str(args.threads)])
    bad = {k: v for k, v in codes.items() if v}
    if bad:
        print(f"failed: {bad}", file=sys.stderr)
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
