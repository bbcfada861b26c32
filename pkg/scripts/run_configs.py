"""Run experiment configs through the bench CLI and report exit codes.

    python3 scripts/run_configs.py                 # every config in scripts/configs
    python3 scripts/run_configs.py gates corr_demo # selected ones
"""
import argparse
import json
import sys
from pathlib import Path

from rsbcodes.bench import main

CONFIGS = Path(__file__).parent / "configs"


def run(names, out_root: Path | None) -> int:
    worst = 0
    for name in names:
        path = CONFIGS / f"{name}.json"
        kind = json.loads(path.read_text())["kind"]
        argv = [kind, "--config", str(path)]
        if out_root is not None:
            argv += ["--out", str(out_root / name)]
        status = main(argv)
        print(f"{name:24s} {kind:12s} exit {status}")
        worst = max(worst, status)
    return worst


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("names", nargs="*", help="config names without .json (default: all)")
    p.add_argument("--out", type=Path, help="root directory for outputs (default: each config's own)")
    args = p.parse_args()
    names = args.names or sorted(c.stem for c in CONFIGS.glob("*.json"))
    sys.exit(run(names, args.out))
