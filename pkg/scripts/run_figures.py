"""Run every example config in scripts/configs through the CLI.

    python scripts/run_figures.py [--only gate-time variability] [--out out]
"""

import argparse
import sys
import time
from pathlib import Path

from gehole.cli import main

CONFIGS = Path(__file__).resolve().parent / "configs"


def run(names, out: Path) -> int:
    worst = 0
    for cfg in sorted(CONFIGS.glob("*.ini")):
        if names and cfg.stem not in names:
            continue
        t0 = time.perf_counter()
        code = main(["--config", str(cfg), "--out", str(out / cfg.stem)])
        print(f"{cfg.stem:18s} exit {code}  {time.perf_counter() - t0:6.1f} s  -> {out / cfg.stem}")
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--only", nargs="*", default=[])
    ap.add_argument("--out", type=Path, default=Path("out"))
    a = ap.parse_args()
    sys.exit(run(set(a.only), a.out))
