"""Count how often each ordering property holds over seeds.

    python3 scripts/ordering_study.py --family cookie_like --seeds 10
"""

import argparse
import json
import time

from colortraj.config import RunConfig, apply_overrides, config_from_dict
from colortraj.pipeline import ORDERINGS, ablate, orderings


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--family", default="cookie_like", choices=["cookie_like", "apple_like"])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--json", help="write per-seed results here")
    args = ap.parse_args()
    wins = dict.fromkeys(ORDERINGS, 0)
    results = []
    for seed in range(args.seeds):
        cfg = apply_overrides(config_from_dict({"world": {"family": args.family}}), seed=seed)
        t0 = time.perf_counter()
        report = ablate(cfg)
        held = orderings(report)
        for k, v in held.items():
            wins[k] += v
        rmses = [round(r.rmse, 4) for r in report.rows]
        results.append({"seed": seed, "rmse": rmses, "orderings": held})
        print(f"seed {seed}  {time.perf_counter() - t0:5.1f}s  rmse {rmses}  {held}", flush=True)
    print("wins:", {k: f"{v}/{args.seeds}" for k, v in wins.items()})
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"family": args.family, "results": results, "wins": wins}, fh, indent=2)


if __name__ == "__main__":
    main()
