import numpy as np
import pytest
from scipy.integrate import quad
from hypothesis import given, strategies as st

from stochastic_stdp import oracle2
from stochastic_stdp.fast import (DEGENERATE_TOL, DominanceError, SpinSystem, density_active, density_rest,
                                  diagonal_margin, enumeration, fast_stationary, laplace_active, laplace_axis,
                                  laplace_general, laplace_marginal, laplace_rest, solve_mu, spin_system, tail)
from stochastic_stdp.model import NeuronParams, WeightMatrix

from conftest import neurons, random_weights, weights


def test_enumeration_order():
    en = enumeration(3)
    assert [en.bitstring(k) for k in range(8)] == ["000", "001", "010", "100", "011", "101", "110", "111"]
    for k in range(8):
        assert en.index(en.states[k]) == k


def test_single_neuron_mu_and_laplace():
    nu = NeuronParams()
    w = WeightMatrix(np.zeros((1, 1), int))
    a, b = nu.gain(0.0), nu.beta
    assert np.allclose(solve_mu(w, nu), [b / (a + b), a / (a + b)], rtol=1e-13)
    for lam in [0.0, 0.01, 1 / 17, 1.0, 30.0]:
        L = laplace_axis(w, nu, 0, lam)
        assert L[0] == pytest.approx(laplace_rest(a, b, lam), rel=1e-12)
        assert L[1] == pytest.approx(laplace_active(a, b, lam), rel=1e-12)


def test_product_form_for_independent_neurons():
    a, b = 0.3, 0.1
    for n in [2, 3, 4]:
        en = enumeration(n)
        sys_ = SpinSystem(np.full((1 << n, n), a), b)
        p1 = a / (a + b)
        expect = np.prod(np.where(en.states == 1, p1, 1 - p1), axis=1)
        assert np.allclose(sys_.mu, expect, rtol=1e-12)
    sys2 = SpinSystem(np.full((4, 2), a), b)
    assert np.allclose(sys2.mu, np.array([b * b, a * b, a * b, a * a]) / (a + b) ** 2, rtol=1e-12)


def test_independent_neurons_laplace_factorises():
    a, b, lam = 0.3, 0.1, 0.2
    sys_ = SpinSystem(np.full((4, 2), a), b)
    L = sys_.laplace_axis(0, lam)
    en = sys_.enum
    for k in range(4):
        v0 = en.states[k][0]
        expect = laplace_active(a, b, lam) if v0 else laplace_rest(a, b, lam)
        assert L[k] == pytest.approx(expect, rel=1e-12)
    J = sys_.laplace(np.array([lam, 2 * lam]))
    for k in range(4):
        f = [laplace_active(a, b, l) if v else laplace_rest(a, b, l)
             for v, l in zip(en.states[k], [lam, 2 * lam])]
        assert J[k] == pytest.approx(f[0] * f[1], rel=1e-12)


def test_lambda_zero_gives_ones():
    nu = NeuronParams()
    w = WeightMatrix(np.array([[0, 5, 3], [2, 0, 9], [4, 1, 0]]))
    assert np.all(laplace_axis(w, nu, 1, 0.0) == 1.0)
    assert np.all(laplace_general(w, nu, np.zeros(3)) == 1.0)


def test_oracle_equivalence_two_neurons():
    rng = np.random.default_rng(7)
    for _ in range(20):
        nu = NeuronParams(beta=rng.uniform(0.02, 2), alpha_m=rng.uniform(0.001, 0.1),
                          S0=rng.uniform(0.2, 2), sigma=rng.uniform(0.05, 1))
        w = random_weights(rng, 2)
        r = oracle2.rates2(w, nu)
        mu = oracle2.mu2(r)
        sys_ = spin_system(w, nu)
        assert np.allclose(sys_.mu, mu, rtol=1e-11, atol=0)
        l1, l2 = rng.uniform(0.001, 1, 2)
        assert np.allclose(sys_.laplace_axis(0, l1), oracle2.laplace_lambda1(r, mu, l1), rtol=1e-10)
        assert np.allclose(sys_.laplace_axis(1, l2), oracle2.laplace_lambda2(r, mu, l2), rtol=1e-10)
        assert np.allclose(sys_.laplace(np.array([l1, l2])), oracle2.laplace_joint(r, mu, l1, l2), rtol=1e-10)


@given(neurons(), weights(), st.floats(0, 5))
def test_normalisation_dominance_and_range(nu, w, lam):
    sys_ = spin_system(w, nu)
    assert abs(sys_.mu.sum() - 1) < 1e-12
    assert np.all(sys_.mu > 0)
    assert sys_.residual() < 1e-12
    for l in range(w.n):
        L = sys_.laplace_axis(l, lam)
        assert np.all(L > 0) and np.all(L <= 1 + 1e-12)
    L = sys_.laplace(np.full(w.n, lam))
    assert np.all(L > 0) and np.all(L <= 1 + 1e-12)
    assert sys_.min_margin > 0


@given(neurons(), weights())
def test_laplace_nonincreasing_in_lambda(nu, w):
    sys_ = spin_system(w, nu)
    grid = [0.0, 1e-3, 1e-2, 0.05, 0.2, 1.0, 5.0]
    for l in range(w.n):
        vals = np.array([sys_.laplace_axis(l, lam) for lam in grid])
        assert np.all(np.diff(vals, axis=0) <= 1e-13)


def test_dominance_guard():
    sys_ = SpinSystem(np.full((4, 2), 0.3), 0.1)
    M = -np.ones((4, 4))
    with pytest.raises(DominanceError):
        sys_._solve(M, np.ones(4), np.ones(4))
    M, margins = sys_._system(np.array([False, True]), np.array([0.3, 0.0]))
    with pytest.raises(DominanceError):
        sys_._solve(M, np.ones(4), margins - 1.0)


@pytest.mark.parametrize("lam", [5e-324, 1e-310, 1e-250])
def test_tiny_lambda(lam):
    sys_ = spin_system(WeightMatrix.uniform(2, 1, 1.0), NeuronParams(beta=1.0, alpha_m=0.5, S0=1.0, sigma=1.0, theta=0.0))
    assert np.allclose(sys_.laplace_axis(0, lam), 1.0, rtol=0, atol=1e-14)
    assert np.allclose(sys_.laplace(np.array([lam, lam])), 1.0, rtol=0, atol=1e-14)


@given(neurons(), weights(), st.floats(1e-3, 5))
def test_structural_margin_matches_numeric(nu, w, lam):
    sys_ = spin_system(w, nu)
    zero = np.ones(w.n, dtype=bool)
    zero[0] = False
    lvec = np.zeros(w.n)
    lvec[0] = lam
    M, margins = sys_._system(zero, lvec)
    d = np.abs(np.diag(M))
    numeric = (d - (np.abs(M).sum(axis=1) - d)) / d
    assert np.allclose(margins, numeric, atol=1e-9)
    assert diagonal_margin(np.diag([2.0, 3.0])) == 1.0


def test_fast_stationary_bundle():
    nu = NeuronParams()
    w = WeightMatrix(np.array([[0, 10], [20, 0]]))
    fs = fast_stationary(w, nu, [0.1, 0.5])
    assert fs.bitstrings() == ["00", "01", "10", "11"]
    assert set(fs.laplace_axis) == {(0, 0.1), (0, 0.5), (1, 0.1), (1, 0.5)}


def test_cap():
    nu = NeuronParams()
    with pytest.raises(ValueError):
        laplace_general(WeightMatrix.uniform(5), nu, np.full(5, 0.1))
    with pytest.raises(ValueError):
        solve_mu(WeightMatrix.uniform(13), nu)


@given(st.floats(1e-3, 3), st.floats(1e-3, 3), st.floats(0, 50), st.floats(0, 2))
def test_single_neuron_closed_forms(a, b, u, lam):
    for dens in (density_rest, density_active):
        assert quad(lambda s: dens(a, b, s), 0, np.inf)[0] == pytest.approx(1.0, abs=1e-6)

    def mix(s):
        return (b * density_rest(a, b, s) + a * density_active(a, b, s)) / (a + b)

    assert quad(mix, u, np.inf)[0] == pytest.approx(float(tail(a, b, u)), abs=1e-6)
    got = quad(lambda s: np.exp(-lam * s) * mix(s), 0, np.inf)[0]
    assert got == pytest.approx(float(laplace_marginal(a, b, lam)), abs=1e-6)
    rest = quad(lambda s: np.exp(-lam * s) * density_rest(a, b, s), 0, np.inf)[0]
    assert rest == pytest.approx(float(laplace_rest(a, b, lam)), abs=1e-6)
    assert tail(a, b, 0.0) == pytest.approx(1.0)
    assert tail(a, b, 1e9) == 0.0


@pytest.mark.parametrize("a", [0.02, 0.1, 1.0])
def test_degenerate_branch_matches_nearby_values(a):
    u = np.array([0.0, 1.0, 5.0, 20.0, 100.0])
    near = [tail(a, a * (1 + d), u) for d in (1e-6, -1e-6)]
    exact = tail(a, a, u)
    for x in near:
        assert np.allclose(x, exact, atol=1e-4)
    s = np.array([0.5, 10.0])
    assert np.allclose(density_rest(a, a * (1 + 1e-6), s), density_rest(a, a, s), atol=1e-4)
    assert abs(a * (1 + 0.5 * DEGENERATE_TOL) - a) <= DEGENERATE_TOL * a
