"""Sweep synthetic benchmark parameters and report how each setting behaves.

A setting qualifies when, over the fixed seeds,
  * the grid-search optimum is interior in at least 4 seeds,
  * the volume-ratio choice equals or neighbours the grid optimum in at least 4,
  * replay at the chosen quality beats no replay by at least 0.02 AIC,
  * seed 7 picks 50.

    python tools/calibrate_synthetic.py [--quick]
"""

import argparse
import itertools

import replayq

QUALITIES = [10, 25, 50, 75, 90]
SEEDS = [7, 11, 23, 42, 101]


def evaluate(params):
    interior = agree = 0
    benefit = []
    picks = {}
    for seed in SEEDS:
        cfg = replayq.SyntheticConfig()
        for k, v in params.items():
            setattr(cfg, k, v)
        cfg.seed = seed
        grid = replayq.grid_search_synthetic(cfg, QUALITIES)
        best = grid["best_quality"]
        chosen = replayq.select_synthetic(cfg, QUALITIES, 0.5)["chosen_quality"]
        picks[seed] = (best, chosen)
        interior += best not in (QUALITIES[0], QUALITIES[-1])
        agree += abs(QUALITIES.index(best) - QUALITIES.index(chosen)) <= 1
        with_replay = next(r["aic"] for r in grid["rows"] if r["quality"] == chosen)
        without = replayq.simulate_synthetic(cfg, chosen, False)["aic"]
        benefit.append(with_replay - without)
    ok = interior >= 4 and agree >= 4 and min(benefit) >= 0.02 and picks[7][1] == 50
    return ok, interior, agree, min(benefit), picks


def endpoints():
    """Grid optimum for harmless (c=0) and destructive (large c) compression."""
    out = []
    for c in (0.0, 1000.0):
        bests = []
        for seed in SEEDS:
            cfg = replayq.SyntheticConfig()
            cfg.noise_scale = c
            cfg.seed = seed
            bests.append(replayq.grid_search_synthetic(cfg, QUALITIES)["best_quality"])
        out.append((c, bests))
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true", help="only re-check the current defaults")
    args = ap.parse_args()

    if args.quick:
        grids = [{}]
        for c, bests in endpoints():
            print(f"noise_scale={c}: grid best per seed {bests}")
    else:
        grids = [
            dict(cluster_spread=s, noise_scale=c, noise_exponent=p, budget_k=k)
            for s, c, p, k in itertools.product([0.3, 0.4, 0.5, 0.7], [2.0, 3.0, 4.0, 6.0], [2.0, 3.0, 4.0], [5])
        ]
    for params in grids:
        ok, interior, agree, benefit, picks = evaluate(params)
        print(("OK  " if ok else "    "), params, f"interior={interior} agree={agree} benefit={benefit:.3f}",
              " ".join(f"{s}:{b}/{c}" for s, (b, c) in picks.items()), flush=True)


if __name__ == "__main__":
    main()
