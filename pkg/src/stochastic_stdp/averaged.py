"""Slow-timescale (averaged) weight dynamics.

On the rescaled clock ``t / epsilon`` the weights perform a Markov jump
process on the integer lattice with single-coordinate jumps::

    K_ij -> K_ij + 1  at rate r_plus[i, j](w)
    K_ij -> K_ij - 1  at rate r_minus[i, j](w)   (only when K_ij > 1)

where the rates average the STDP kernels against the stationary law of the
fast process at frozen ``w``::

    r_plus[i, j]  = A+ sum_{v: v_j = 0} mu_v alpha_j(v) L_v(e_i / tau+)
    r_minus[i, j] = A- sum_{v: v_i = 0} mu_v alpha_i(v) L_v(e_j / tau-)

Potentiation of ``i -> j`` happens when the postsynaptic ``j`` spikes and is
weighted by the time since the last presynaptic spike; depression of
``i -> j`` happens when ``i`` spikes and looks back at ``j``.
"""
from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .fast import SpinSystem, spin_system
from .model import NeuronParams, PlasticityParams, WeightMatrix

SATURATION_TOL = 1e-6
INCONCLUSIVE_TOL = 1e-9


@dataclass(frozen=True)
class AveragedRates:
    """Jump rates of the limit process (1/ms of rescaled time); diagonals are 0."""

    r_plus: np.ndarray
    r_minus: np.ndarray
    w_key: tuple = ()

    @property
    def n(self) -> int:
        return self.r_plus.shape[0]


@dataclass(frozen=True)
class DriftField:
    eta: np.ndarray


def rates_from_system(sys_: SpinSystem, plasticity: PlasticityParams):
    """``(r_plus, r_minus)`` matrices for the spin chain ``sys_``."""
    n = sys_.n
    rp = np.zeros((n, n))
    rm = np.zeros((n, n))
    if n < 2:
        return rp, rm
    st, mu, up = sys_.enum.states, sys_.mu, sys_.up_rates
    # flux[:, j] = mu_v alpha_j(v) on states where j is at rest, 0 elsewhere
    flux = np.where(st == 0, mu[:, None] * up, 0.0)
    lp = [sys_.laplace_axis(l, 1.0 / plasticity.tau_plus) for l in range(n)]
    lm = [sys_.laplace_axis(l, 1.0 / plasticity.tau_minus) for l in range(n)]
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            rp[i, j] = plasticity.A_plus * float(flux[:, j] @ lp[i])
            rm[i, j] = plasticity.A_minus * float(flux[:, i] @ lm[j])
    return rp, rm


def averaged_rates(w: WeightMatrix, neuron: NeuronParams, plasticity: PlasticityParams) -> AveragedRates:
    rp, rm = rates_from_system(spin_system(w, neuron), plasticity)
    rp.setflags(write=False)
    rm.setflags(write=False)
    return AveragedRates(rp, rm, w.key())


def drift(rates: AveragedRates, delta_w: float = 1.0) -> DriftField:
    return DriftField((rates.r_plus - rates.r_minus) * delta_w)


class RatesProvider:
    """``averaged_rates`` behind an LRU cache keyed by the weight matrix."""

    def __init__(self, neuron: NeuronParams, plasticity: PlasticityParams, capacity: int = 100_000):
        self.neuron = neuron
        self.plasticity = plasticity
        self.capacity = capacity
        self._cache: OrderedDict = OrderedDict()
        self.misses = 0

    def __call__(self, K: np.ndarray):
        key = K.tobytes()
        hit = self._cache.get(key)
        if hit is not None:
            self._cache.move_to_end(key)
            return hit
        self.misses += 1
        r = averaged_rates(WeightMatrix(K, self.plasticity.delta_w), self.neuron, self.plasticity)
        out = (r.r_plus, r.r_minus)
        self._cache[key] = out
        if len(self._cache) > self.capacity:
            self._cache.popitem(last=False)
        return out


class ConstantRates:
    """Injected constant rates, for harness tests of the jump simulator."""

    def __init__(self, r_plus, r_minus):
        self.r_plus = np.asarray(r_plus, dtype=float)
        self.r_minus = np.asarray(r_minus, dtype=float)

    def __call__(self, K):
        return self.r_plus, self.r_minus


@dataclass
class AveragedTrajectory:
    """Jump log of the averaged process: ``K`` changes by ``delta`` at ``times[e]`` on pair ``(i, j)``."""

    K0: np.ndarray
    horizon: float
    times: np.ndarray
    i: np.ndarray
    j: np.ndarray
    delta: np.ndarray
    K_final: np.ndarray = field(default=None)

    def path(self, i: int, j: int):
        """``(jump times, values)`` of ``K[i, j]``, starting with ``(0, K0[i, j])``."""
        sel = (self.i == i) & (self.j == j)
        t = np.concatenate([[0.0], self.times[sel]])
        k = self.K0[i, j] + np.concatenate([[0], np.cumsum(self.delta[sel])])
        return t, k

    def value_at(self, i: int, j: int, t_query) -> np.ndarray:
        t, k = self.path(i, j)
        return k[np.searchsorted(t, np.asarray(t_query, dtype=float), side="right") - 1]

    def occupancy(self, i: int, j: int, k_max: int, burn_in: float = 0.0) -> np.ndarray:
        """Time-weighted occupancy of ``K[i, j] = 1..k_max`` after ``burn_in``; mass above k_max dropped."""
        t, k = self.path(i, j)
        t_end = np.append(t[1:], self.horizon)
        dur = np.clip(t_end, burn_in, None) - np.clip(t, burn_in, None)
        occ = np.bincount(np.minimum(k, k_max + 1), weights=dur, minlength=k_max + 2)
        return occ[1 : k_max + 1] / max(self.horizon - burn_in, 1e-300)


def simulate_averaged(w0: WeightMatrix, rates, horizon: float, rng: np.random.Generator,
                      frozen=None, max_events: int = 50_000_000) -> AveragedTrajectory:
    """Exact Gillespie simulation of the averaged weight process.

    ``rates(K) -> (r_plus, r_minus)``; ``frozen`` is a boolean mask of pairs
    whose weights never move. ``horizon`` is in rescaled ms.
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    K = np.array(w0.K, dtype=np.int64)
    n = K.shape[0]
    movable = ~np.eye(n, dtype=bool)
    if frozen is not None:
        movable &= ~np.asarray(frozen, dtype=bool)
    ii, jj = np.nonzero(movable)
    m = len(ii)
    times, ei, ej, ed = [], [], [], []
    t = 0.0
    while len(times) < max_events:
        rp, rm = rates(K)
        up = rp[ii, jj]
        down = np.where(K[ii, jj] > 1, rm[ii, jj], 0.0)
        cum = np.cumsum(np.concatenate([up, down]))
        total = cum[-1] if m else 0.0
        if not total > 0:
            break
        t += rng.exponential(1.0 / total)
        if t >= horizon:
            break
        e = min(int(np.searchsorted(cum, rng.random() * total, side="right")), 2 * m - 1)
        p, d = (e, 1) if e < m else (e - m, -1)
        K[ii[p], jj[p]] += d
        times.append(t)
        ei.append(ii[p])
        ej.append(jj[p])
        ed.append(d)
    return AveragedTrajectory(np.array(w0.K), float(horizon), np.array(times, dtype=float),
                              np.array(ei, dtype=np.int64), np.array(ej, dtype=np.int64),
                              np.array(ed, dtype=np.int64), K)


# --- one free weight: birth-death chain --------------------------------------

@dataclass
class BDResult:
    classification: str  # "ergodic", "transient" or "inconclusive"
    R_plus: float
    R_minus: float
    k_saturation: int
    k: np.ndarray  # 1..K_max
    r_plus: np.ndarray
    r_minus: np.ndarray
    theta: np.ndarray  # probabilities of K = 1..K_max
    tail_bound: float  # bound on the mass above K_max (inf if not ergodic)


def _two_neuron(k12: int, w21: int, delta_w: float) -> WeightMatrix:
    return WeightMatrix(np.array([[0, k12], [w21, 0]]), delta_w)


def saturation_index(neuron: NeuronParams, delta_w: float, tol: float = SATURATION_TOL) -> int:
    """Smallest ``k >= 1`` with ``|gain(k dw) - alpha_sup| < tol * alpha_sup``."""
    a = neuron.alpha_sup
    # gain deficit is S0 * expit(-sigma (x - theta)); solve for the crossing then step up
    target = tol * a / neuron.S0
    k = 1
    if target < 1:
        x = neuron.theta + math.log(1.0 / target - 1.0) / neuron.sigma
        k = max(1, int(math.floor(x / delta_w)) - 1)
    while not abs(neuron.gain(k * delta_w) - a) < tol * a:
        k += 1
    return k


def bd_rates(neuron: NeuronParams, plasticity: PlasticityParams, w21: int, ks) -> tuple[np.ndarray, np.ndarray]:
    """Birth and death rates of ``K_12`` at each ``k`` in ``ks`` with ``K_21 = w21``."""
    rp, rm = [], []
    for k in ks:
        r = averaged_rates(_two_neuron(int(k), w21, plasticity.delta_w), neuron, plasticity)
        rp.append(r.r_plus[0, 1])
        rm.append(r.r_minus[0, 1])
    return np.array(rp), np.array(rm)


def bd_stationary(r_plus: np.ndarray, r_minus: np.ndarray) -> np.ndarray:
    """Normalised ``theta`` on ``1..len`` for a chain reflected at 1 and truncated at the top.

    ``theta(k) / theta(k-1) = r_plus(k-1) / r_minus(k)``; computed in log space.
    """
    r_plus = np.asarray(r_plus, dtype=float)
    r_minus = np.asarray(r_minus, dtype=float)
    logs = np.concatenate([[0.0], np.cumsum(np.log(r_plus[:-1]) - np.log(r_minus[1:]))])
    th = np.exp(logs - logs.max())
    return th / th.sum()


def classify_limits(R_plus: float, R_minus: float, tol: float = INCONCLUSIVE_TOL) -> str:
    if abs(R_plus - R_minus) < tol * (R_plus + R_minus):
        return "inconclusive"
    return "ergodic" if R_plus < R_minus else "transient"


def bd_from_rates(r_plus, r_minus, R_plus, R_minus, k_saturation, beyond_ratio=None) -> BDResult:
    """Assemble a ``BDResult`` from rates on ``k = 1..K_max`` and the limits.

    ``beyond_ratio`` is a bound on ``r_plus(k-1)/r_minus(k)`` for ``k > K_max``;
    it defaults to ``R_plus / R_minus``.
    """
    r_plus = np.asarray(r_plus, dtype=float)
    r_minus = np.asarray(r_minus, dtype=float)
    k_max = len(r_plus)
    cls = classify_limits(R_plus, R_minus)
    rho = R_plus / R_minus if beyond_ratio is None else beyond_ratio
    if cls != "ergodic" or rho >= 1:
        theta = bd_stationary(r_plus, r_minus)
        return BDResult(cls, R_plus, R_minus, k_saturation, np.arange(1, k_max + 1),
                        r_plus, r_minus, theta, math.inf)
    # unnormalised u(k) with u(1) = 1; mass beyond K_max <= u(K_max) * rho / (1 - rho)
    logs = np.concatenate([[0.0], np.cumsum(np.log(r_plus[:-1]) - np.log(r_minus[1:]))])
    u = np.exp(logs)
    tail_u = u[-1] * rho / (1.0 - rho)
    z = u.sum() + tail_u  # upper bound on the full normaliser
    theta = u / z
    # theta sums to at most 1; the remainder is at most tail_u / z
    return BDResult(cls, R_plus, R_minus, k_saturation, np.arange(1, k_max + 1),
                    r_plus, r_minus, theta, float(tail_u / z))


def bd_classify(neuron: NeuronParams, plasticity: PlasticityParams, w21: int, k_max: int = 100) -> BDResult:
    """Classify ``K_12`` for two neurons with ``K_21 = w21`` held fixed."""
    if k_max < 10:
        raise ValueError("K_max must be >= 10")
    k_sat = saturation_index(neuron, plasticity.delta_w)
    k_hi = max(k_max, k_sat)
    rp, rm = bd_rates(neuron, plasticity, w21, range(1, k_hi + 1))
    R_plus, R_minus = rp[k_sat - 1], rm[k_sat - 1]
    beyond = R_plus / R_minus
    if k_sat > k_max:
        # ratios between K_max and saturation are known exactly; take the worst
        ratios = rp[k_max - 1 : k_hi - 1] / rm[k_max:k_hi]
        beyond = max(beyond, float(ratios.max()))
    beyond *= 1.0 + 10 * SATURATION_TOL  # slack for the residual approach to the limit
    return bd_from_rates(rp[:k_max], rm[:k_max], float(R_plus), float(R_minus), k_sat, beyond)


def bd_escape_probability(r_plus, r_minus, k0: int, R_plus: float, R_minus: float) -> float:
    """Probability that a transient chain started at ``k0`` diverges before visiting 1.

    Rates are given on ``k = 1..K``; beyond ``K`` they are taken at their
    limits. Returns 0 unless ``R_plus > R_minus``.
    """
    r_plus = np.asarray(r_plus, dtype=float)
    r_minus = np.asarray(r_minus, dtype=float)
    if not R_plus > R_minus:
        return 0.0
    if not 1 <= k0 <= len(r_plus):
        raise ValueError("k0 must lie in 1..K")
    # gamma_k = prod_{m=2..k} r_minus(m) / r_plus(m), gamma_1 = 1
    log_g = np.concatenate([[0.0], np.cumsum(np.log(r_minus[1:]) - np.log(r_plus[1:]))])
    g = np.exp(log_g - log_g.max())
    rho = R_minus / R_plus
    total = g.sum() + g[-1] * rho / (1.0 - rho)
    return float(g[: k0 - 1].sum() / total)


def bd_threshold(neuron: NeuronParams, plasticity: PlasticityParams, w21_values, k_max: int = 100):
    """Classifications over ``w21_values`` and the first ``w21`` where transient turns ergodic."""
    classes = [bd_classify(neuron, plasticity, int(w), k_max).classification for w in w21_values]
    flip = None
    for a, b, w in zip(classes, classes[1:], list(w21_values)[1:]):
        if a == "transient" and b == "ergodic":
            flip = int(w)
            break
    return classes, flip


# --- two neurons: limit of the drift at large weights ------------------------

@lru_cache(maxsize=65536)
def _limit_system(a01: float, a10: float, neuron: NeuronParams) -> SpinSystem:
    # states 00, 01, 10, 11; column i is neuron i's up-rate (only read where it is at rest)
    g0 = neuron.gain(0.0)
    up = np.array([[g0, g0], [a01, g0], [g0, a10], [a01, a10]])
    return SpinSystem(up, neuron.beta)


def eta12_explicit(a01: float, a10: float, neuron: NeuronParams, plasticity: PlasticityParams) -> float:
    """``eta^{12}`` for a 2-neuron chain with up-rates ``a01`` (neuron 1 when 2 is on) and ``a10``."""
    rp, rm = rates_from_system(_limit_system(float(a01), float(a10), neuron), plasticity)
    return float((rp[0, 1] - rm[0, 1]) * plasticity.delta_w)


@dataclass
class LimitSupDrift:
    sup_eta: float
    alpha_grid: np.ndarray
    eta_w12_large: np.ndarray  # eta12 with a10 = alpha_M, a01 on the grid
    eta_w21_large: np.ndarray  # eta12 with a01 = alpha_M, a10 on the grid

    @property
    def recurrent(self) -> bool:
        return self.sup_eta < 0


def limit_sup_drift(neuron: NeuronParams, plasticity: PlasticityParams, resolution: int = 64) -> LimitSupDrift:
    """Sup of the two-neuron drift along the directions where one weight is saturated.

    A negative value is a sufficient condition for positive recurrence.
    """
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    a_m, a_M = neuron.alpha_m, neuron.alpha_sup
    grid = np.linspace(a_m, a_M, resolution)
    e1 = np.array([eta12_explicit(a, a_M, neuron, plasticity) for a in grid])
    e2 = np.array([eta12_explicit(a_M, a, neuron, plasticity) for a in grid])
    return LimitSupDrift(float(max(e1.max(), e2.max())), grid, e1, e2)


def drift_field_grid(neuron: NeuronParams, plasticity: PlasticityParams, w12_values, w21_values):
    """Rows ``(w12, w21, eta12, eta21)`` of the two-neuron drift over a weight grid."""
    rows = []
    for a in w12_values:
        for b in w21_values:
            r = averaged_rates(_two_neuron(int(a), int(b), plasticity.delta_w), neuron, plasticity)
            eta = drift(r, plasticity.delta_w).eta
            rows.append((int(a), int(b), float(eta[0, 1]), float(eta[1, 0])))
    return rows
