"""Build one construction and run every study through the CLI, then summarize.

    python scripts/run_all_studies.py --out runs/seed0 --seed 0
"""

import argparse
import sys

from parabola_cantor_lab.cli import main as pcl

STUDIES = ("decay", "ball", "martingale", "knapp", "kp", "localrestrict")


def run(out: str, seed: int, alpha: float, depth: int, skip: list) -> int:
    common = ["--out", out, "--seed", str(seed), "--alpha", str(alpha), "--depth", str(depth)]
    code = pcl(["build", *common])
    if code:
        return code
    worst = 0
    for name in STUDIES:
        if name in skip:
            continue
        print(f"== {name}", flush=True)
        worst = max(worst, pcl([name, *common]))
    pcl(["report", out])
    return worst


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="runs/all")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--alpha", type=float, default=0.5)
    ap.add_argument("--depth", type=int, default=6)
    ap.add_argument("--skip", nargs="*", default=[], help="studies to leave out, e.g. kp localrestrict")
    a = ap.parse_args()
    sys.exit(run(a.out, a.seed, a.alpha, a.depth, a.skip))
