"""Two neurons with K_21 held fixed: classify K_12 for each w21 and report where it turns ergodic.

Writes threshold.csv (w21,classification,R_plus,R_minus,R_diff) and, with
--simulate, averaged trajectories of K_12 at chosen w21 values.
"""
import argparse
import csv
import os

import numpy as np

from stochastic_stdp.averaged import RatesProvider, bd_classify, simulate_averaged
from stochastic_stdp.model import NeuronParams, PlasticityParams, WeightMatrix
from stochastic_stdp.sim import fmt, make_rng


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--w21-max", type=int, default=60)
    ap.add_argument("--k-max", type=int, default=100)
    ap.add_argument("--S0", type=float, default=1.0)
    ap.add_argument("--simulate", type=int, nargs="*", default=[], metavar="W21")
    ap.add_argument("--k0", type=int, default=30)
    ap.add_argument("--horizon", type=float, default=1e7, help="rescaled ms")
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--out", default="out_threshold")
    a = ap.parse_args()
    os.makedirs(a.out, exist_ok=True)
    nu, pl = NeuronParams(S0=a.S0), PlasticityParams()

    rows, prev, flip = [], None, None
    for w21 in range(1, a.w21_max + 1):
        r = bd_classify(nu, pl, w21, a.k_max)
        rows.append((w21, r.classification, fmt(r.R_plus), fmt(r.R_minus), fmt(r.R_plus - r.R_minus)))
        if prev == "transient" and r.classification == "ergodic" and flip is None:
            flip = w21
        prev = r.classification
    with open(os.path.join(a.out, "threshold.csv"), "w", newline="") as f:
        wr = csv.writer(f, lineterminator="\n")
        wr.writerow(["w21", "classification", "R_plus", "R_minus", "R_diff"])
        wr.writerows(rows)
    print(f"transient -> ergodic at w21 = {flip}")

    frozen = np.array([[False, False], [True, False]])
    prov = RatesProvider(nu, pl)
    for w21 in a.simulate:
        for seed in range(a.seeds):
            tr = simulate_averaged(WeightMatrix(np.array([[0, a.k0], [w21, 0]])), prov, a.horizon,
                                   make_rng(seed, w21), frozen)
            t, k = tr.path(0, 1)
            path = os.path.join(a.out, f"k12_w21_{w21}_seed{seed}.csv")
            with open(path, "w", newline="") as f:
                wr = csv.writer(f, lineterminator="\n")
                wr.writerow(["time", "K12"])
                wr.writerows((fmt(x), int(y)) for x, y in zip(t, k))
            print(f"w21={w21} seed={seed}: K12 {a.k0} -> {int(k[-1])} (max {int(k.max())}, jumps {len(t) - 1})")


if __name__ == "__main__":
    main()
