"""Pilot runs behind the frozen thresholds in ``majdyn.experiments``.

Uses master seed 12345, disjoint from the suite default (0), and writes the
measured values to pilots/pilot_results.json. Rerun with
``python scripts/pilot.py``.
"""

import json
import time
from pathlib import Path

from majdyn import dynamics as dyn
from majdyn import experiments as ex
from majdyn.graphs import random_regular

PILOT_SEED = 12345


def main():
    out = {"seed": PILOT_SEED}
    t0 = time.time()
    cyc = ex.cycle_suite(seed=PILOT_SEED)
    out["cycle"] = {
        "n": 500, "delta": 0.2, "trials": 2000,
        "p_consensus": cyc.estimates["p_consensus"].to_dict(),
        "p_correct_majority_nodes": cyc.estimates["p_correct_majority_nodes"].to_dict(),
        "mean_blocking_pairs": cyc.extra["mean_blocking_pairs"],
        "frozen": {"p_consensus_below": ex.CYCLE_MAX_P_CONSENSUS,
                   "p_correct_majority_above": ex.CYCLE_MIN_P_CORRECT_MAJORITY},
    }
    exp = ex.expander_trend_suite(seed=PILOT_SEED)
    out["expander"] = {
        "n": 4000, "d": 16, "delta": 0.3, "trials": 500,
        "lambda": exp.extra["lambda"], "regime": exp.extra["regime"],
        "p_red_consensus": exp.estimates["p_red_consensus"].to_dict(),
        "frozen": {"p_red_consensus_at_least": ex.EXPANDER_MIN_P_RED},
    }
    n, d = 600, 3
    T, x = dyn.checkpoint_times(n, d)
    cp = dyn.checkpoint_red_volume(2000, random_regular(n, d, 1), 0.3, T, PILOT_SEED, x=x)
    out["checkpoint"] = {
        "n": n, "d": d, "delta": 0.3, "trials": 2000, "T": T,
        "threshold": cp.threshold,
        "max_red_volume_possible_by_T": T * d,
        "mean_red_volume": float(cp.red_volumes.mean()),
        "fraction_at_or_below": cp.fraction_at_or_below,
        "uncolored_mean": cp.uncolored_mean,
        "uncolored_bound": cp.uncolored_bound,
        "frozen": {"fraction_below": ex.CHECKPOINT_MAX_FRACTION_BELOW},
    }
    out["elapsed_s"] = round(time.time() - t0, 1)
    path = Path(__file__).resolve().parent.parent / "pilots" / "pilot_results.json"
    path.write_text(json.dumps(out, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(json.dumps(out, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
