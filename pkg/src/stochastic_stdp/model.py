"""Parameters, state types and the pointwise rate/probability functions.

Conventions used everywhere in the package:

* times are in ms, rates in 1/ms;
* ``K[i, j]`` is the integer weight of the connection ``i -> j``; the
  physical weight is ``delta_w * K[i, j]``;
* neuron indices are 0-based;
* a neuron that never spiked has ``last_spike = NEVER`` (``-inf``), so its
  time since last spike is ``+inf`` and it cannot trigger plasticity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

NEVER = -math.inf


@dataclass(frozen=True)
class NeuronParams:
    """Binary neuron with sigmoid gain ``S0 / (1 + exp(-sigma (x - theta))) + alpha_m``.

    ``theta=None`` selects the default threshold ``ln(S0/alpha_m - 1) / sigma``
    which places the gain at ``2 alpha_m`` for zero input.
    """

    beta: float = 0.1
    alpha_m: float = 0.01
    S0: float = 1.0
    sigma: float = 0.3
    theta: float | None = None

    def __post_init__(self):
        for name in ("beta", "alpha_m", "S0", "sigma"):
            val = getattr(self, name)
            if not (val > 0 and math.isfinite(val)):
                raise ValueError(f"{name} must be positive and finite, got {val!r}")
        if self.theta is None:
            if self.S0 <= self.alpha_m:
                raise ValueError("default theta needs S0 > alpha_m; pass theta explicitly")
            object.__setattr__(self, "theta", math.log(self.S0 / self.alpha_m - 1.0) / self.sigma)
        elif not math.isfinite(self.theta):
            raise ValueError("theta must be finite")

    @property
    def alpha_sup(self) -> float:
        """Supremum of the gain; used as the upper rate bound ``alpha_M``."""
        return self.S0 + self.alpha_m

    def gain(self, x):
        x = np.asarray(x, dtype=float)
        out = self.S0 * expit(self.sigma * (x - self.theta)) + self.alpha_m
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PlasticityParams:
    A_plus: float = 0.8
    A_minus: float = 0.7
    tau_plus: float = 17.0
    tau_minus: float = 34.0
    delta_w: float = 1.0
    epsilon: float = 0.01

    def __post_init__(self):
        # A = 0 is allowed (kernel switched off); the model itself uses (0, 1].
        if not 0.0 <= self.A_plus <= 1.0:
            raise ValueError(f"A_plus must lie in [0, 1], got {self.A_plus!r}")
        if not 0.0 <= self.A_minus <= 1.0:
            raise ValueError(f"A_minus must lie in [0, 1], got {self.A_minus!r}")
        if not (self.tau_plus > 0 and self.tau_minus > 0):
            raise ValueError("tau_plus and tau_minus must be positive")
        if not self.delta_w > 0:
            raise ValueError("delta_w must be positive")
        if not 0.0 < self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in (0, 1], got {self.epsilon!r}")
        if self.epsilon * self.A_plus > 1.0 or self.epsilon * self.A_minus > 1.0:
            raise ValueError("epsilon * A must be a probability")

    def p_plus(self, s):
        return _exp_kernel(self.A_plus, self.tau_plus, s)

    def p_minus(self, s):
        return _exp_kernel(self.A_minus, self.tau_minus, s)


def _exp_kernel(A, tau, s):
    s = np.asarray(s, dtype=float)
    if np.any(s < 0) or np.any(np.isnan(s)):
        raise ValueError("time since spike must be >= 0")
    out = A * np.exp(-s / tau)  # exp(-inf) == 0 handles "never spiked"
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    """Integer weight grid with zero diagonal and off-diagonal entries >= 1."""

    K: np.ndarray
    delta_w: float = 1.0

    def __post_init__(self):
        K = np.array(self.K, dtype=np.int64)
        if K.ndim != 2 or K.shape[0] != K.shape[1]:
            raise ValueError("K must be a square matrix")
        n = K.shape[0]
        if np.any(np.diag(K) != 0):
            raise ValueError("K must have a zero diagonal")
        off = ~np.eye(n, dtype=bool)
        if np.any(K[off] < 1):
            raise ValueError("off-diagonal weights must be >= 1 (floor at delta_w)")
        if not self.delta_w > 0:
            raise ValueError("delta_w must be positive")
        K.setflags(write=False)
        object.__setattr__(self, "K", K)

    @classmethod
    def uniform(cls, n: int, k: int = 1, delta_w: float = 1.0) -> "WeightMatrix":
        K = np.full((n, n), k, dtype=np.int64)
        np.fill_diagonal(K, 0)
        return cls(K, delta_w)

    @property
    def n(self) -> int:
        return self.K.shape[0]

    @property
    def physical(self) -> np.ndarray:
        return self.delta_w * self.K

    def key(self) -> tuple:
        return (self.delta_w, self.K.tobytes(), self.n)

    def __eq__(self, other):
        return isinstance(other, WeightMatrix) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def with_entry(self, i: int, j: int, k: int) -> "WeightMatrix":
        K = self.K.copy()
        K[i, j] = k
        return WeightMatrix(K, self.delta_w)


@dataclass
class NetworkState:
    t: float
    v: np.ndarray
    last_spike: np.ndarray = field(default=None)

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=np.int8).copy()
        if np.any((self.v != 0) & (self.v != 1)):
            raise ValueError("v must be binary")
        if self.last_spike is None:
            self.last_spike = np.full(self.v.shape, NEVER)
        self.last_spike = np.asarray(self.last_spike, dtype=float).copy()
        if self.last_spike.shape != self.v.shape:
            raise ValueError("last_spike must have the same length as v")
        if np.any(self.last_spike > self.t):
            raise ValueError("last_spike cannot lie in the future")

    @classmethod
    def quiescent(cls, n: int, t: float = 0.0) -> "NetworkState":
        return cls(t, np.zeros(n, dtype=np.int8))

    @property
    def n(self) -> int:
        return self.v.shape[0]

    @property
    def s(self) -> np.ndarray:
        return self.t - self.last_spike


def neuron_rate(i: int, w: WeightMatrix, v, neuron: NeuronParams) -> float:
    """0 -> 1 rate of neuron ``i``: gain of the summed active input weights."""
    v = np.asarray(v)
    if v.shape != (w.n,):
        raise ValueError("v must have length n")
    if not 0 <= i < w.n:
        raise IndexError(f"neuron index {i} out of range for n={w.n}")
    return neuron.gain(float(w.delta_w * (v @ w.K[:, i])))


def config_probability(i, s, zeta_p, zeta_d, plasticity: PlasticityParams,
                       K=None, scale=None) -> float:
    """Probability that a spike of ``i`` produces the weight jump ``(zeta_p, zeta_d)``.

    ``zeta_p[j] = 1`` potentiates ``K[j, i]``, ``zeta_d[j] = 1`` depresses
    ``K[i, j]``. When ``K[i, j]`` sits at the floor its depression draw is
    blocked, so that factor is 1 for ``zeta_d[j] = 0``; this keeps the total
    over admissible configurations equal to 1.
    """
    eps = plasticity.epsilon if scale is None else scale
    s = np.asarray(s, dtype=float)
    zp = np.asarray(zeta_p, dtype=int)
    zd = np.asarray(zeta_d, dtype=int)
    n = s.shape[0]
    if zp.shape != (n,) or zd.shape != (n,):
        raise ValueError("zeta vectors must have length n")
    if zp[i] or zd[i]:
        raise ValueError("self-entries of zeta must be 0")
    floored = np.zeros(n, dtype=bool)
    if K is not None:
        floored = np.asarray(K)[i] == 1
        floored[i] = False
        if np.any(zd[floored]):
            raise ValueError("cannot depress a weight sitting at the floor")
    pp = eps * plasticity.p_plus(s)
    pm = eps * plasticity.p_minus(s)
    prob = 1.0
    for j in range(n):
        if j == i:
            continue
        prob *= pp[j] if zp[j] else 1.0 - pp[j]
        if not floored[j]:
            prob *= pm[j] if zd[j] else 1.0 - pm[j]
    return float(prob)
