import csv
import os

import numpy as np
import pytest
from hypothesis import given, strategies as st

from stochastic_stdp.cli import derived_seed, dispatch, main, run_sweep
from stochastic_stdp.config import ConfigError, RunConfig, emit_config, parse_config, parse_sweep, replace


def _rows(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


def test_empty_config_gives_defaults():
    cfg = parse_config("")
    assert cfg == RunConfig()
    nu, pl = cfg.neuron(), cfg.plasticity()
    assert (nu.beta, nu.alpha_m, nu.S0, nu.sigma) == (0.1, 0.01, 1.0, 0.3)
    assert pl.epsilon == 0.01


def test_errors_carry_line_numbers():
    with pytest.raises(ConfigError) as e:
        parse_config("# header\nA_plus=0.8\nepsilon=1.5\n")
    assert e.value.line == 3
    with pytest.raises(ConfigError) as e:
        parse_config("n=2\nbogus=1\n")
    assert e.value.line == 2 and "unknown key" in str(e.value)
    with pytest.raises(ConfigError):
        parse_config("n two")


def test_column_boost():
    w = parse_config("n=10\nw_init=column-boost:1:50\n").weights()
    K = w.K
    assert K[1, 1] == 0 and np.all(np.delete(K[:, 1], 1) == 50)
    other = np.delete(np.delete(K, 1, axis=1), 1, axis=0)
    assert np.all(other[~np.eye(9, dtype=bool)] == 1)


def test_matrix_file(tmp_path):
    (tmp_path / "w.txt").write_text("0 3\n4 0\n")
    cfg = parse_config("w_init=file:w.txt\n", base_dir=str(tmp_path))
    assert cfg.weights(str(tmp_path)).K.tolist() == [[0, 3], [4, 0]]


def test_env_override():
    cfg = parse_config("tau_plus=20\n", env={"STDP_TAU_PLUS": "12.5", "STDP_N": "3"})
    assert cfg.tau_plus == 12.5 and cfg.n == 3
    with pytest.raises(ConfigError):
        parse_config("", env={"STDP_EPSILON": "2"})


@given(st.floats(0.01, 1), st.floats(0, 1), st.floats(1, 50), st.integers(1, 8), st.booleans(),
       st.lists(st.floats(0, 100), max_size=4), st.sampled_from(["plastic", "frozen-shadow", "frozen-silent"]))
def test_round_trip(beta, A, tau, n, skip, ugrid, mode):
    cfg = replace(RunConfig(), beta=beta, A_minus=A, tau_minus=tau, n=n, geometric_skip=skip,
                  u_grid=tuple(ugrid), mode=mode, theta=None if n % 2 else 3.25,
                  frozen_pairs=((0, 1),) if n > 1 else ())
    assert parse_config(emit_config(cfg)) == cfg


def test_sweep_axes_are_canonical():
    a = parse_sweep("tau_minus:10|40|20,A_minus:0.2:0.6:3")
    b = parse_sweep("A_minus:0.6|0.2|0.4, tau_minus:40|20|10")
    assert a == b == [("A_minus", [0.2, 0.4, 0.6]), ("tau_minus", [10.0, 20.0, 40.0])]


def test_sweep_matches_direct_and_is_order_independent(tmp_path):
    base = replace(RunConfig(), A_plus=0.2, grid_resolution=8)
    cfg1 = replace(base, sweep="A_minus:0.9|0.5,tau_minus:30|10")
    cfg2 = replace(base, sweep="tau_minus:10|30,A_minus:0.5|0.9")
    h1, r1, e1 = run_sweep(cfg1, 5)
    h2, r2, e2 = run_sweep(cfg2, 5, threads=2)
    assert h1 == ["A_minus", "tau_minus", "sup_eta"] and r1 == r2 and not e1 and not e2
    from stochastic_stdp.averaged import limit_sup_drift
    direct = limit_sup_drift(replace(base, A_minus=0.5, tau_minus=30.0).neuron(),
                             replace(base, A_minus=0.5, tau_minus=30.0).plasticity(), 8).sup_eta
    assert [r for r in r1 if r[:2] == (0.5, 30.0)][0][2] == direct


def test_averaged_sweep_one_point_equals_direct(tmp_path):
    cfg = replace(RunConfig(), sweep="A_minus:0.7", sweep_target="averaged-k12", avg_horizon=2000.0,
                  w_init="uniform:5", replicates=2)
    _, rows, _ = run_sweep(cfg, 9)
    assert [r[1] for r in rows] == [0, 1]
    assert rows[0][2] == derived_seed(9, 0, 0) and rows[0][2] != rows[1][2]
    from stochastic_stdp.averaged import RatesProvider, simulate_averaged
    from stochastic_stdp.sim import make_rng
    w0 = cfg.weights().with_entry(1, 0, cfg.w21)
    frozen = np.array([[False, False], [True, False]])
    tr = simulate_averaged(w0, RatesProvider(cfg.neuron(), cfg.plasticity()), 2000.0, make_rng(9, 0, 0), frozen)
    assert rows[0][3] == tr.K_final[0, 1]


COMMAND_FILES = {
    "simulate-full": ["events.csv", "snapshots.csv"],
    "simulate-averaged": ["averaged.csv"],
    "analyze-fast": ["analyze_fast_axis0_lam0.csv", "analyze_fast_index.csv"],
    "birth-death": ["birth_death.csv"],
    "drift-field": ["drift_field.csv"],
    "stdp-curve": ["stdp_curve.csv"],
    "bounds-check": ["bounds.txt"],
    "classify": ["classify.txt"],
}


@pytest.mark.parametrize("command", sorted(COMMAND_FILES))
def test_commands_write_outputs(tmp_path, command, capsys):
    conf = tmp_path / "c.txt"
    conf.write_text("horizon=500\navg_horizon=500\nw12_range=1:5\nw21_range=1:3\nK_max=20\n")
    out = tmp_path / "out"
    assert main([command, "--config", str(conf), "--out", str(out), "--seed", "3"]) == 0
    for name in COMMAND_FILES[command]:
        assert (out / name).exists()
    assert capsys.readouterr().out.count("\n") == 1


def test_csv_schemas(tmp_path):
    cfg = replace(RunConfig(), horizon=300.0, w12_range=(1, 2), w21_range=(3,), K_max=10)
    for c in ("simulate-full", "analyze-fast", "birth-death", "drift-field", "stdp-curve"):
        dispatch(c, cfg, str(tmp_path))
    assert _rows(tmp_path / "snapshots.csv")[0] == ["time_ms", "i", "j", "K"]
    assert _rows(tmp_path / "analyze_fast_axis0_lam0.csv")[0] == ["v_bitstring", "mu", "value"]
    assert _rows(tmp_path / "birth_death.csv")[0] == ["k", "r_plus", "r_minus", "theta"]
    assert _rows(tmp_path / "drift_field.csv")[0] == ["w12", "w21", "eta12", "eta21"]
    assert [r[0] for r in _rows(tmp_path / "analyze_fast_axis0_lam0.csv")[1:]] == ["00", "01", "10", "11"]


def test_estimates_json(tmp_path):
    cfg = replace(RunConfig(), mode="frozen-shadow", estimate=True, horizon=2000.0, n_batches=4)
    dispatch("simulate-full", cfg, str(tmp_path))
    import json
    est = json.loads((tmp_path / "estimates.json").read_text())
    assert len(est["occupancy"]) == 4 and "r_plus_count" in est


def test_deterministic_across_runs(tmp_path):
    cfg = replace(RunConfig(), horizon=1000.0, n=3, w_init="uniform:8", epsilon=0.2)
    for d in ("a", "b"):
        dispatch("simulate-full", cfg, str(tmp_path / d), seed=11)
    for name in ("events.csv", "snapshots.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("epsilon=1.5\n")
    assert main(["classify", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert main(["classify", "--config", str(tmp_path / "missing.txt"), "--out", str(tmp_path)]) == 2
    big = tmp_path / "big.txt"
    big.write_text("n=13\nlambda_grid=0.1\n")
    assert main(["analyze-fast", "--config", str(big), "--out", str(tmp_path)]) in (2, 3)
    assert main(["sweep", "--out", str(tmp_path)]) == 2
    ok = tmp_path / "ok.txt"
    ok.write_text("")
    assert main(["classify", "--config", str(ok), "--out", str(tmp_path), "--quiet"]) == 0
    assert capsys.readouterr().out == ""
