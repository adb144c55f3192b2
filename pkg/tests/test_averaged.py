import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stochastic_stdp.averaged import (ConstantRates, RatesProvider, averaged_rates, bd_classify, bd_escape_probability,
                                      bd_from_rates,
                                      bd_stationary, classify_limits, drift, drift_field_grid, eta12_explicit,
                                      limit_sup_drift, saturation_index, simulate_averaged)
from stochastic_stdp.fast import laplace_axis, solve_mu, enumeration, up_rates_from_weights
from stochastic_stdp.model import NeuronParams, PlasticityParams, WeightMatrix
from stochastic_stdp.sim import make_rng
from stochastic_stdp.stability import rate_envelopes

from conftest import neurons, plasticities, weights


def test_trivial_cases():
    nu = NeuronParams()
    r = averaged_rates(WeightMatrix.uniform(3, 4), nu, PlasticityParams(A_plus=0.0))
    assert np.all(r.r_plus == 0) and np.all(r.r_minus[~np.eye(3, dtype=bool)] > 0)
    r1 = averaged_rates(WeightMatrix(np.zeros((1, 1), int)), nu, PlasticityParams())
    assert r1.r_plus.shape == (1, 1) and np.all(r1.r_plus == 0) and np.all(r1.r_minus == 0)


def test_rates_match_direct_sum():
    nu, pl = NeuronParams(), PlasticityParams()
    w = WeightMatrix(np.array([[0, 12, 3], [7, 0, 25], [1, 9, 0]]))
    mu = solve_mu(w, nu)
    up = up_rates_from_weights(w, nu)
    st_ = enumeration(3).states
    r = averaged_rates(w, nu, pl)
    for i in range(3):
        for j in range(3):
            if i == j:
                continue
            Lp = laplace_axis(w, nu, i, 1 / pl.tau_plus)
            Lm = laplace_axis(w, nu, j, 1 / pl.tau_minus)
            rp = sum(pl.A_plus * mu[k] * up[k, j] * Lp[k] for k in range(8) if st_[k, j] == 0)
            rm = sum(pl.A_minus * mu[k] * up[k, i] * Lm[k] for k in range(8) if st_[k, i] == 0)
            assert r.r_plus[i, j] == pytest.approx(rp, rel=1e-13)
            assert r.r_minus[i, j] == pytest.approx(rm, rel=1e-13)


@given(neurons(), plasticities(), weights())
def test_drift_identity_and_envelopes(nu, pl, w):
    r = averaged_rates(w, nu, pl)
    eta = drift(r, pl.delta_w).eta
    assert np.array_equal(eta, (r.r_plus - r.r_minus) * pl.delta_w)
    env = rate_envelopes(nu, pl)
    off = ~np.eye(w.n, dtype=bool)
    tol = 1e-12
    assert np.all(r.r_plus[off] >= env.plus_lower * (1 - tol) - tol)
    assert np.all(r.r_plus[off] <= env.plus_upper * (1 + tol) + tol)
    assert np.all(r.r_minus[off] >= env.minus_lower * (1 - tol) - tol)
    assert np.all(r.r_minus[off] <= env.minus_upper * (1 + tol) + tol)


def test_provider_caches():
    prov = RatesProvider(NeuronParams(), PlasticityParams(), capacity=2)
    K = np.array([[0, 3], [4, 0]])
    a = prov(K)
    b = prov(K.copy())
    assert a is b and prov.misses == 1
    prov(np.array([[0, 5], [4, 0]]))
    prov(np.array([[0, 6], [4, 0]]))
    prov(K)
    assert prov.misses == 4


def test_symmetric_walk_harness():
    rp = np.array([[0, 0.5], [0.5, 0]])
    tr = simulate_averaged(WeightMatrix.uniform(2, 200), ConstantRates(rp, rp), 2e4, make_rng(3))
    assert tr.K_final[0, 1] >= 1 and tr.K_final[1, 0] >= 1
    steps = tr.delta[tr.i == 0]
    # symmetric walk: mean step zero, about rate * horizon jumps per coordinate
    assert abs(steps.mean()) < 4 / np.sqrt(len(steps))
    assert abs(len(steps) - 2e4) < 5 * np.sqrt(2e4)


def test_floor_and_determinism():
    rp = np.array([[0, 0.1], [0.2, 0]])
    rm = np.array([[0, 1.0], [0.9, 0]])
    tr = simulate_averaged(WeightMatrix.uniform(2, 3), ConstantRates(rp, rm), 1e3, make_rng(1))
    for i, j in [(0, 1), (1, 0)]:
        _, k = tr.path(i, j)
        assert k.min() >= 1
    tr2 = simulate_averaged(WeightMatrix.uniform(2, 3), ConstantRates(rp, rm), 1e3, make_rng(1))
    assert np.array_equal(tr.times, tr2.times) and np.array_equal(tr.delta, tr2.delta)


def test_geometric_stationary_law():
    lam, mu_ = 0.3, 0.5
    k = 60
    theta = bd_stationary(np.full(k, lam), np.full(k, mu_))
    rho = lam / mu_
    expect = (1 - rho) * rho ** np.arange(k)
    assert np.allclose(theta, expect / expect.sum(), rtol=1e-12)
    res = bd_from_rates(np.full(k, lam), np.full(k, mu_), lam, mu_, 1)
    assert res.classification == "ergodic"
    assert np.allclose(res.theta, expect, rtol=1e-10)
    assert res.theta.sum() + res.tail_bound == pytest.approx(1.0)
    # frozen reverse weight plus constant rates: simulated occupancy follows theta
    rp = np.array([[0, lam], [0, 0]])
    rm = np.array([[0, mu_], [0, 0]])
    frozen = np.array([[False, False], [True, False]])
    tr = simulate_averaged(WeightMatrix.uniform(2, 1), ConstantRates(rp, rm), 2e5, make_rng(5), frozen)
    occ = tr.occupancy(0, 1, k)
    assert 0.5 * np.abs(occ - expect).sum() < 0.02
    assert np.all(tr.path(1, 0)[1] == 1)


def test_classify_limits():
    assert classify_limits(1.0, 2.0) == "ergodic"
    assert classify_limits(2.0, 1.0) == "transient"
    assert classify_limits(1.0, 1.0 + 1e-12) == "inconclusive"


def test_bd_classify_invariants():
    nu, pl = NeuronParams(), PlasticityParams()
    assert saturation_index(nu, 1.0) == 62
    for w21 in (5, 30, 60):
        res = bd_classify(nu, pl, w21, 100)
        if res.classification == "ergodic":
            assert res.R_plus < res.R_minus
            assert res.theta.sum() <= 1 + 1e-12
            assert res.theta.sum() + res.tail_bound == pytest.approx(1.0, abs=1e-12)
        else:
            assert res.tail_bound == np.inf
    with pytest.raises(ValueError):
        bd_classify(nu, pl, 30, 5)


def test_limit_sup_drift_pure_depression():
    nu = NeuronParams()
    res = limit_sup_drift(nu, PlasticityParams(A_plus=0.0), 16)
    assert res.sup_eta < 0 and res.recurrent


def test_limit_sup_drift_grid_refinement():
    nu = NeuronParams()
    pl = PlasticityParams(A_plus=0.2, A_minus=0.9, tau_minus=20)
    a = limit_sup_drift(nu, pl, 64).sup_eta
    b = limit_sup_drift(nu, pl, 128).sup_eta
    assert abs(a - b) < 0.01 * abs(b)


def test_eta12_explicit_matches_weights_at_saturation():
    nu, pl = NeuronParams(), PlasticityParams()
    w = WeightMatrix(np.array([[0, 200], [7, 0]]))
    r = averaged_rates(w, nu, pl)
    eta = eta12_explicit(nu.gain(7.0), nu.gain(200.0), nu, pl)
    assert eta == pytest.approx(r.r_plus[0, 1] - r.r_minus[0, 1], rel=1e-12)


def test_drift_field_rows():
    rows = drift_field_grid(NeuronParams(), PlasticityParams(), [1, 2], [3, 4, 5])
    assert [(a, b) for a, b, _, _ in rows] == [(1, 3), (1, 4), (1, 5), (2, 3), (2, 4), (2, 5)]


def test_escape_probability_gamblers_ruin():
    # constant rates p > q: P(reach infinity before 1 | k0) = 1 - (q/p)^(k0-1)
    p, q = 0.6, 0.4
    for k0 in (1, 2, 5, 20):
        got = bd_escape_probability(np.full(50, p), np.full(50, q), k0, p, q)
        assert got == pytest.approx(1 - (q / p) ** (k0 - 1), rel=1e-12)
    assert bd_escape_probability(np.full(50, q), np.full(50, p), 10, q, p) == 0.0
