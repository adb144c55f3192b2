"""Pairing curve of the rule: expected relative weight change after 60 pairings versus dt.

Uses A_plus = 1, A_minus = 0.4, tau_plus = 17 ms, tau_minus = 34 ms and
writes bi_poo.csv (dt_ms,rel_change).
"""
import argparse
import csv
import os

import numpy as np

from stochastic_stdp.model import PlasticityParams
from stochastic_stdp.sim import fmt, stdp_curve


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--epsilon", type=float, default=0.01)
    ap.add_argument("--pairings", type=int, default=60)
    ap.add_argument("--out", default="out_bi_poo")
    a = ap.parse_args()
    os.makedirs(a.out, exist_ok=True)
    pl = PlasticityParams(A_plus=1.0, A_minus=0.4, tau_plus=17.0, tau_minus=34.0, epsilon=a.epsilon)
    dts = np.concatenate([np.arange(-100, 0, 2.0), np.arange(2, 101, 2.0)])
    dts, rel = stdp_curve(pl, dts, a.pairings)
    with open(os.path.join(a.out, "bi_poo.csv"), "w", newline="") as f:
        wr = csv.writer(f, lineterminator="\n")
        wr.writerow(["dt_ms", "rel_change"])
        wr.writerows((fmt(x), fmt(y)) for x, y in zip(dts, rel))
    k = np.argmax(rel)
    print(f"max +{rel[k]:.4f} at dt={dts[k]:g} ms, min {rel.min():.4f}; integral "
          f"{np.trapezoid(rel, dts):.3f} ms")


if __name__ == "__main__":
    main()
