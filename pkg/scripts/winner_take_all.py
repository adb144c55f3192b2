"""Ten plastic neurons with strong initial input to neuron 0: does one incoming weight win?

Prints, per seed, the two largest incoming weights of neuron 0 at the horizon,
then the largest weight reached from a uniform start of 1.
"""
import argparse

import numpy as np

from stochastic_stdp.model import NeuronParams, PlasticityParams, WeightMatrix
from stochastic_stdp.sim import SimConfig, run


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=10)
    ap.add_argument("--boost", type=int, default=50)
    ap.add_argument("--horizon", type=float, default=1e4, help="ms")
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--tau-plus", type=float, default=17.0)
    ap.add_argument("--tau-minus", type=float, default=34.0)
    a = ap.parse_args()
    nu = NeuronParams(beta=1.0, alpha_m=0.01, S0=0.49)
    pl = PlasticityParams(A_plus=0.8, A_minus=0.9, tau_plus=a.tau_plus, tau_minus=a.tau_minus, epsilon=0.1)
    K = np.ones((a.n, a.n), dtype=np.int64)
    K[:, 0] = a.boost
    np.fill_diagonal(K, 0)
    wins = 0
    for seed in range(a.seeds):
        Kf = run(SimConfig(seed=seed, horizon=a.horizon, record_events=False), WeightMatrix(K), nu, pl).final_weights.K
        inc = np.delete(Kf[:, 0], 0)
        order = np.argsort(inc)[::-1]
        win = inc[order[0]] > 2 * inc[order[1]]
        wins += win
        src = [int(x) + 1 for x in order[:2]]  # back to neuron labels
        print(f"seed {seed}: top incoming {inc[order[0]]} (from {src[0]}), {inc[order[1]]} (from {src[1]})"
              f"{'  winner' if win else ''}")
    print(f"winner in {wins}/{a.seeds} seeds")
    res = run(SimConfig(seed=0, horizon=a.horizon, sample_interval=a.horizon / 100, record_events=False),
              WeightMatrix.uniform(a.n, 1), nu, pl)
    off = ~np.eye(a.n, dtype=bool)
    print(f"uniform start: max weight over the horizon {max(s[off].max() for s in res.snapshots)}")


if __name__ == "__main__":
    main()
