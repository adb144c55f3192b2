"""Sign of the limiting two-neuron drift over an (A_minus, tau_minus) grid with A_plus = 0.2.

Negative values are a sufficient condition for recurrence. Writes
sign_map.csv (A_minus,tau_minus,sup_eta) and prints a character map
('-' recurrent, '+' not covered).
"""
import argparse
import csv
import os

import numpy as np

from stochastic_stdp.averaged import limit_sup_drift
from stochastic_stdp.model import NeuronParams, PlasticityParams
from stochastic_stdp.sim import fmt


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--A-plus", type=float, default=0.2)
    ap.add_argument("--tau-plus", type=float, default=17.0)
    ap.add_argument("--points", type=int, default=11)
    ap.add_argument("--resolution", type=int, default=32)
    ap.add_argument("--out", default="out_sign_map")
    a = ap.parse_args()
    os.makedirs(a.out, exist_ok=True)
    nu = NeuronParams()
    A_grid = np.linspace(0.1, 1.0, a.points)
    tau_grid = np.linspace(1.0, 50.0, a.points)
    sup = np.empty((len(A_grid), len(tau_grid)))
    for i, A in enumerate(A_grid):
        for j, tau in enumerate(tau_grid):
            pl = PlasticityParams(A_plus=a.A_plus, A_minus=float(A), tau_plus=a.tau_plus, tau_minus=float(tau))
            sup[i, j] = limit_sup_drift(nu, pl, a.resolution).sup_eta
    with open(os.path.join(a.out, "sign_map.csv"), "w", newline="") as f:
        wr = csv.writer(f, lineterminator="\n")
        wr.writerow(["A_minus", "tau_minus", "sup_eta"])
        for i, A in enumerate(A_grid):
            for j, tau in enumerate(tau_grid):
                wr.writerow([fmt(A), fmt(tau), fmt(sup[i, j])])
    print("rows: A_minus from high to low; columns: tau_minus from 1 to 50")
    for i in range(len(A_grid) - 1, -1, -1):
        print(f"{A_grid[i]:4.2f} " + "".join("-" if x < 0 else "+" for x in sup[i]))


if __name__ == "__main__":
    main()
