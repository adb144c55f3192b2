"""Stationary analytics of the fast process at frozen weights.

For fixed weights the activity vector ``V`` is a finite CTMC on ``{0,1}^N``
with stationary law ``mu``. Conditioned on ``V = v`` the vector of times since
last spikes ``S`` has law ``pi_v``; its Laplace transform
``L_v(lam) = E[exp(-lam . S) | V = v]`` solves a sequence of linear systems
indexed by which coordinates of ``lam`` are zero.

For a zero set ``Z`` (coordinates of ``lam`` forced to 0) the unknowns
``x_k = L_k(lam with Z zeroed)`` satisfy, row by row over states ``j``::

    (out_j + |lam|) mu_j x_j
        - sum_{i}      beta        mu_{j+e_i} x_{j+e_i}
        - sum_{i in Z} alpha_i(j-e_i) mu_{j-e_i} x_{j-e_i}
      = sum_{i notin Z} alpha_i(j-e_i) mu_{j-e_i} L_{j-e_i}(lam with Z+{i} zeroed)

The single-axis transform (only ``lam_l`` nonzero) has a constant right-hand
side; the general transform recurses over zero sets down to that base case.
"""
from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .model import NeuronParams, WeightMatrix

DEFAULT_N_CAP = 12
GENERAL_N_CAP = 4
DEGENERATE_TOL = 1e-9
# below this 1 - L <= lam E[S] is far under double resolution, and lam*mu underflows
LAM_FLUSH = 1e-300


class DominanceError(RuntimeError):
    """An assembled Laplace system lost strict diagonal dominance."""


class SpinEnumeration:
    """States of ``{0,1}^n`` ordered by active count, ties lexicographic in ``(v_1..v_n)``."""

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("n must be >= 1")
        self.n = n
        size = 1 << n
        bits = ((np.arange(size)[:, None] >> np.arange(n)[None, :]) & 1).astype(np.int8)
        # lexicographic on (v_1, ..., v_n): v_1 is the most significant digit
        lex = bits @ (1 << np.arange(n - 1, -1, -1))
        order = np.lexsort((lex, bits.sum(axis=1)))
        self.masks = order.astype(np.int64)  # masks[k] = bitmask of k-th state
        self.states = bits[order]  # states[k, i] = v_i
        self.index_of_mask = np.empty(size, dtype=np.int64)
        self.index_of_mask[self.masks] = np.arange(size)
        # up[k, i]: index of state k with neuron i switched on (-1 if already on)
        up = np.full((size, n), -1, dtype=np.int64)
        down = np.full((size, n), -1, dtype=np.int64)
        for i in range(n):
            on = self.states[:, i] == 1
            up[~on, i] = self.index_of_mask[self.masks[~on] | (1 << i)]
            down[on, i] = self.index_of_mask[self.masks[on] & ~(1 << i)]
        self.up = up
        self.down = down

    def __len__(self):
        return len(self.masks)

    def bitstring(self, k: int) -> str:
        return "".join(str(int(b)) for b in self.states[k])

    def index(self, v) -> int:
        v = np.asarray(v, dtype=np.int64)
        return int(self.index_of_mask[int(v @ (1 << np.arange(self.n)))])


_ENUMS: dict[int, SpinEnumeration] = {}


def enumeration(n: int) -> SpinEnumeration:
    if n not in _ENUMS:
        _ENUMS[n] = SpinEnumeration(n)
    return _ENUMS[n]


def up_rates_from_weights(w: WeightMatrix, neuron: NeuronParams) -> np.ndarray:
    """``A[k, i] = alpha_i(w, v_k)``, the gain of neuron i's active input in state k."""
    en = enumeration(w.n)
    return np.asarray(neuron.gain(en.states.astype(float) @ w.physical), dtype=float)


def transition_matrix(up_rates: np.ndarray, beta: float) -> np.ndarray:
    """Generator ``Q`` of the spin chain in enumeration order (rows sum to 0)."""
    size, n = up_rates.shape
    en = enumeration(n)
    Q = np.zeros((size, size))
    rows = np.arange(size)
    for i in range(n):
        off = en.up[:, i] >= 0
        Q[rows[off], en.up[off, i]] += up_rates[off, i]
        Q[rows[~off], en.down[~off, i]] += beta
    Q[rows, rows] = -Q.sum(axis=1)
    return Q


def _stationary(Q: np.ndarray) -> np.ndarray:
    size = Q.shape[0]
    A = Q.T.copy()
    A[-1, :] = 1.0
    b = np.zeros(size)
    b[-1] = 1.0
    mu = np.linalg.solve(A, b)
    return mu / mu.sum()


def diagonal_margin(M: np.ndarray) -> float:
    """min over rows of ``(|M_jj| - sum_{k!=j} |M_jk|) / |M_jj|``."""
    d = np.abs(np.diag(M))
    off = np.abs(M).sum(axis=1) - d
    return float(np.min((d - off) / d))


class SpinSystem:
    """Spin chain given by explicit up-rates; owns ``mu`` and the Laplace solvers.

    Results of the single-axis solves are cached per ``(l, lam)``.
    """

    def __init__(self, up_rates: np.ndarray, beta: float, n_cap: int = DEFAULT_N_CAP):
        up_rates = np.asarray(up_rates, dtype=float)
        size, n = up_rates.shape
        if n > n_cap:
            raise ValueError(f"n={n} exceeds the cap of {n_cap} neurons")
        if size != 1 << n:
            raise ValueError("up_rates must have 2**n rows")
        if not beta > 0 or np.any(up_rates <= 0):
            raise ValueError("rates must be positive")
        self.n = n
        self.beta = float(beta)
        self.enum = enumeration(n)
        self.up_rates = up_rates
        self.Q = transition_matrix(up_rates, beta)
        self.mu = _stationary(self.Q)
        self.min_margin = math.inf
        self._axis_cache: dict[tuple[int, float], np.ndarray] = {}
        self._general_cache: dict[tuple, np.ndarray] = {}

    @cached_property
    def out_rates(self) -> np.ndarray:
        return -np.diag(self.Q)

    def residual(self) -> float:
        """Scaled stationarity residual ``||Q^T mu||_inf / max|Q|``."""
        return float(np.max(np.abs(self.Q.T @ self.mu)) / np.max(np.abs(self.Q)))

    def _system(self, zero: np.ndarray, lam: np.ndarray):
        """Matrix for zero set ``zero`` plus its exact-arithmetic dominance margins.

        By stationarity of ``mu`` each row's excess of diagonal over
        off-diagonal mass is ``|lam| mu_j`` plus the inflow along the free
        axes; that is strictly positive for ``|lam| > 0`` but can vanish
        below rounding for tiny ``lam``, so it is computed directly with
        ``mu`` divided out of the ``lam`` term.
        """
        en, mu, A = self.enum, self.mu, self.up_rates
        size = len(en)
        rows = np.arange(size)
        lam_tot = float(lam[~zero].sum())
        M = np.zeros((size, size))
        diag = (self.out_rates + lam_tot) * mu
        M[rows, rows] = diag
        inflow = np.zeros(size)
        for i in range(self.n):
            has_up = en.up[:, i] >= 0
            k = en.up[has_up, i]
            M[rows[has_up], k] -= self.beta * mu[k]
            on = ~has_up
            k = en.down[on, i]
            if zero[i]:
                M[rows[on], k] -= A[k, i] * mu[k]
            else:
                inflow[on] += A[k, i] * mu[k]
        # lam/(out+lam) first: lam*mu underflows for subnormal lam
        return M, lam_tot / (self.out_rates + lam_tot) + inflow / diag

    def _solve(self, M, rhs, margins):
        margin = float(margins.min())
        numeric = diagonal_margin(M)
        if not (margin > 0 and numeric > -1e-12):
            raise DominanceError(f"Laplace system not strictly diagonally dominant "
                                 f"(margin={margin}, numeric={numeric})")
        self.min_margin = min(self.min_margin, margin)
        return np.linalg.solve(M, rhs)

    def laplace_axis(self, l: int, lam: float) -> np.ndarray:
        """``L_{v_k}(lam e_l)`` for every state ``k`` (enumeration order)."""
        if not 0 <= l < self.n:
            raise IndexError(f"axis {l} out of range")
        lam = float(lam)
        if not lam >= 0:
            raise ValueError("lambda must be >= 0")
        if lam < LAM_FLUSH:
            return np.ones(len(self.enum))
        key = (l, lam)
        hit = self._axis_cache.get(key)
        if hit is not None:
            return hit
        zero = np.ones(self.n, dtype=bool)
        zero[l] = False
        lvec = np.zeros(self.n)
        lvec[l] = lam
        M, margins = self._system(zero, lvec)
        rhs = np.zeros(len(self.enum))
        on = self.enum.down[:, l] >= 0
        k = self.enum.down[on, l]
        rhs[on] = self.up_rates[k, l] * self.mu[k]
        x = self._solve(M, rhs, margins)
        x.setflags(write=False)
        self._axis_cache[key] = x
        return x

    def laplace(self, lam, n_cap: int = GENERAL_N_CAP) -> np.ndarray:
        """Joint transform ``L_{v_k}(lam)`` for a full nonnegative vector ``lam``."""
        lam = np.asarray(lam, dtype=float)
        if lam.shape != (self.n,):
            raise ValueError("lam must have length n")
        if np.any(~(lam >= 0)):
            raise ValueError("lambda must be >= 0")
        lam = np.where(lam < LAM_FLUSH, 0.0, lam)
        nz = np.flatnonzero(lam > 0)
        if len(nz) == 0:
            return np.ones(len(self.enum))
        if len(nz) == 1:
            return self.laplace_axis(int(nz[0]), float(lam[nz[0]]))
        if self.n > n_cap:
            raise ValueError(f"joint Laplace transform capped at n <= {n_cap}")
        return self._laplace_rec(tuple(lam.tolist()), frozenset(np.flatnonzero(lam == 0).tolist()))

    def _laplace_rec(self, lam_t: tuple, zero_set: frozenset) -> np.ndarray:
        lam = np.asarray(lam_t)
        free = [i for i in range(self.n) if i not in zero_set]
        if not free:
            return np.ones(len(self.enum))
        if len(free) == 1:
            return self.laplace_axis(free[0], float(lam[free[0]]))
        key = (lam_t, zero_set)
        hit = self._general_cache.get(key)
        if hit is not None:
            return hit
        zero = np.zeros(self.n, dtype=bool)
        zero[list(zero_set)] = True
        M, margins = self._system(zero, lam)
        rhs = np.zeros(len(self.enum))
        for i in free:
            lower = self._laplace_rec(lam_t, zero_set | {i})
            on = self.enum.down[:, i] >= 0
            k = self.enum.down[on, i]
            rhs[on] += self.up_rates[k, i] * self.mu[k] * lower[k]
        x = self._solve(M, rhs, margins)
        self._general_cache[key] = x
        return x


@dataclass
class FastStationary:
    """``mu`` plus single-axis Laplace tables for one weight matrix."""

    w_key: tuple
    enum: SpinEnumeration
    mu: np.ndarray
    laplace_axis: dict = field(default_factory=dict)

    def bitstrings(self) -> list[str]:
        return [self.enum.bitstring(k) for k in range(len(self.enum))]


class _LRU:
    def __init__(self, capacity: int):
        self.capacity = capacity
        self.data: OrderedDict = OrderedDict()

    def get(self, key):
        val = self.data.get(key)
        if val is not None:
            self.data.move_to_end(key)
        return val

    def put(self, key, val):
        self.data[key] = val
        self.data.move_to_end(key)
        while len(self.data) > self.capacity:
            self.data.popitem(last=False)


_SYSTEMS = _LRU(4096)


def spin_system(w: WeightMatrix, neuron: NeuronParams, n_cap: int = DEFAULT_N_CAP) -> SpinSystem:
    """Cached ``SpinSystem`` for weights ``w``."""
    if w.n > n_cap:
        raise ValueError(f"n={w.n} exceeds the cap of {n_cap} neurons")
    key = (w.key(), neuron)
    sys_ = _SYSTEMS.get(key)
    if sys_ is None:
        sys_ = SpinSystem(up_rates_from_weights(w, neuron), neuron.beta, n_cap)
        _SYSTEMS.put(key, sys_)
    return sys_


def solve_mu(w: WeightMatrix, neuron: NeuronParams, n_cap: int = DEFAULT_N_CAP) -> np.ndarray:
    return spin_system(w, neuron, n_cap).mu


def laplace_axis(w: WeightMatrix, neuron: NeuronParams, l: int, lam: float) -> np.ndarray:
    return spin_system(w, neuron).laplace_axis(l, lam)


def laplace_general(w: WeightMatrix, neuron: NeuronParams, lam, n_cap: int = GENERAL_N_CAP) -> np.ndarray:
    return spin_system(w, neuron).laplace(lam, n_cap=n_cap)


def fast_stationary(w: WeightMatrix, neuron: NeuronParams, lams=()) -> FastStationary:
    """Bundle ``mu`` with axis transforms at every ``(l, lam)`` for ``lam`` in ``lams``."""
    sys_ = spin_system(w, neuron)
    table = {(l, float(lam)): sys_.laplace_axis(l, lam) for l in range(w.n) for lam in lams}
    return FastStationary(w.key(), sys_.enum, sys_.mu, table)


# --- one neuron in closed form ------------------------------------------------

def _check_rates(alpha, beta):
    if not (alpha > 0 and beta > 0):
        raise ValueError("alpha and beta must be positive")


def _degenerate(alpha, beta):
    return abs(alpha - beta) <= DEGENERATE_TOL * max(alpha, beta)


def density_rest(alpha, beta, s):
    """Density of S given V = 0 for a lone neuron."""
    _check_rates(alpha, beta)
    s = np.asarray(s, dtype=float)
    if _degenerate(alpha, beta):
        return alpha**2 * s * np.exp(-alpha * s)
    return alpha * beta / (alpha - beta) * (np.exp(-beta * s) - np.exp(-alpha * s))


def density_active(alpha, beta, s):
    """Density of S given V = 1 for a lone neuron."""
    _check_rates(alpha, beta)
    s = np.asarray(s, dtype=float)
    return beta * np.exp(-beta * s)


def tail(alpha, beta, u):
    """Stationary ``P(S > u)`` of a lone neuron (both activity states)."""
    _check_rates(alpha, beta)
    u = np.asarray(u, dtype=float)
    if _degenerate(alpha, beta):
        return (1.0 + alpha * u / 2.0) * np.exp(-alpha * u)
    return (alpha**2 * np.exp(-beta * u) - beta**2 * np.exp(-alpha * u)) / (alpha**2 - beta**2)


def laplace_rest(alpha, beta, lam):
    _check_rates(alpha, beta)
    lam = np.asarray(lam, dtype=float)
    return alpha * beta / ((alpha + lam) * (beta + lam))


def laplace_active(alpha, beta, lam):
    _check_rates(alpha, beta)
    lam = np.asarray(lam, dtype=float)
    return beta / (beta + lam)


def laplace_marginal(alpha, beta, lam):
    """``E[exp(-lam S)]`` over the stationary law of a lone neuron."""
    _check_rates(alpha, beta)
    lam = np.asarray(lam, dtype=float)
    return alpha * beta * (alpha + beta + lam) / ((alpha + beta) * (alpha + lam) * (beta + lam))
