"""Closed-form envelopes and sufficient conditions for weight stability.

All flags here are sufficient conditions only. A negative recurrence flag does
not mean the weights diverge, and a negative transience flag does not mean
they stay bounded.

The rate bound ``alpha_M`` is the supremum of the gain, ``S0 + alpha_m``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .fast import DEGENERATE_TOL, laplace_marginal, tail
from .model import NeuronParams, PlasticityParams


def mu_sum_bounds(neuron: NeuronParams) -> tuple[float, float]:
    """Bounds on the stationary probability that a given neuron is at rest."""
    b = neuron.beta
    return b / (neuron.alpha_sup + b), b / (neuron.alpha_m + b)


def joint_tail_bounds(neuron: NeuronParams, u):
    """Bounds on ``P(S_i > u, V_j = 0)`` for ``i != j``.

    Products of the lone-neuron tail at the extreme rates with the rest
    probability bounds. For ``i == j`` the upper bound can fail (a neuron at
    rest has on average waited longer than its marginal suggests).
    """
    lo_mu, hi_mu = mu_sum_bounds(neuron)
    b = neuron.beta
    return tail(neuron.alpha_sup, b, u) * lo_mu, tail(neuron.alpha_m, b, u) * hi_mu


def envelope_factor(alpha: float, beta: float, tau: float) -> float:
    """``1 - [a^2/(tau b + 1) - b^2/(tau a + 1)] / (a^2 - b^2)``.

    This equals the lone-neuron transform ``E[exp(-S / tau)]``, which is also
    used when ``a`` and ``b`` nearly coincide.
    """
    if abs(alpha - beta) <= DEGENERATE_TOL * max(alpha, beta):
        return float(laplace_marginal(alpha, beta, 1.0 / tau))
    a2, b2 = alpha * alpha, beta * beta
    return 1.0 - (a2 / (tau * beta + 1.0) - b2 / (tau * alpha + 1.0)) / (a2 - b2)


@dataclass(frozen=True)
class RateEnvelopes:
    plus_lower: float
    plus_upper: float
    minus_lower: float
    minus_upper: float


def rate_envelopes(neuron: NeuronParams, plasticity: PlasticityParams) -> RateEnvelopes:
    """Weight-independent bounds on every averaged jump rate (exponential kernels)."""
    a_m, a_M, b = neuron.alpha_m, neuron.alpha_sup, neuron.beta
    lo_mu, hi_mu = mu_sum_bounds(neuron)
    p = plasticity

    def pair(A, tau):
        return (A * a_m * lo_mu * envelope_factor(a_m, b, tau),
                A * a_M * hi_mu * envelope_factor(a_M, b, tau))

    pl, pu = pair(p.A_plus, p.tau_plus)
    ml, mu = pair(p.A_minus, p.tau_minus)
    return RateEnvelopes(pl, pu, ml, mu)


def recurrence_from_constants(upper_plus: float, lower_minus: float) -> bool:
    """General sufficient condition: every potentiation rate lies below every depression rate."""
    return upper_plus < lower_minus


def recurrence_condition(neuron: NeuronParams, plasticity: PlasticityParams) -> tuple[float, bool]:
    """``(ratio, ratio < 1)``; ``ratio`` is the envelope ratio ``plus_upper / minus_lower`` in closed form."""
    a_m, a_M, b = neuron.alpha_m, neuron.alpha_sup, neuron.beta
    p = plasticity
    tp, tm = p.tau_plus, p.tau_minus
    num = a_M**2 * p.A_plus * tp * (a_M * tp + b * tp + 1) * (tm * a_m + 1) * (tm * b + 1)
    den = a_m**2 * p.A_minus * tm * (a_m * tm + b * tm + 1) * (tp * a_M + 1) * (tp * b + 1)
    if den == 0:
        ratio = math.inf if num > 0 else math.nan
    else:
        ratio = num / den
    return ratio, bool(ratio < 1)


@dataclass(frozen=True)
class Kernel:
    """A plasticity kernel ``s -> p(s)`` with optional tail information.

    ``limit`` is the value as ``s -> inf``; ``eventually_monotone`` declares
    that the kernel is monotone beyond the checked grid.
    """

    fn: Callable
    limit: float | None = None
    eventually_monotone: bool = False

    def __call__(self, s):
        return np.asarray(self.fn(np.asarray(s, dtype=float)), dtype=float)

    @classmethod
    def exponential(cls, A: float, tau: float) -> "Kernel":
        return cls(lambda s: A * np.exp(-s / tau), 0.0, True)

    @classmethod
    def constant(cls, c: float) -> "Kernel":
        return cls(lambda s: np.full(np.shape(s), c, dtype=float), c, True)


def kernel_gap_infimum(p_plus: Kernel, p_minus: Kernel, s_max: float = 1e6, points: int = 4001) -> float:
    """Lower bound on ``inf_s p_plus(s) - p_minus(s)``; ``-inf`` without tail information.

    On ``[0, s_max]`` the infimum is taken over a log-spaced grid. Beyond
    ``s_max`` each kernel is monotone and lies between its value at ``s_max``
    and its limit, which bounds the gap from below.
    """
    s = np.concatenate([[0.0], np.logspace(-6, math.log10(s_max), points)])
    gap = float(np.min(p_plus(s) - p_minus(s)))
    if not (p_plus.eventually_monotone and p_minus.eventually_monotone):
        return -math.inf
    if p_plus.limit is None or p_minus.limit is None:
        return -math.inf
    end_p = float(p_plus(np.array([s_max]))[0])
    end_m = float(p_minus(np.array([s_max]))[0])
    beyond = min(end_p, p_plus.limit) - max(end_m, p_minus.limit)
    return min(gap, beyond)


def transience_condition(p_plus: Kernel, p_minus: Kernel, gamma: float, s_max: float = 1e6) -> bool:
    """Sufficient condition for divergence: ``p_plus(s) - p_minus(s) > gamma > 0`` for all ``s``."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    return kernel_gap_infimum(p_plus, p_minus, s_max) > gamma


@dataclass(frozen=True)
class BoundsReport:
    mu_sum_lower: float
    mu_sum_upper: float
    u_grid: np.ndarray
    tail_lower: np.ndarray
    tail_upper: np.ndarray
    r_plus_lower: float
    r_plus_upper: float
    r_minus_lower: float
    r_minus_upper: float
    condition_ratio: float
    recurrent_sufficient: bool
    transient_sufficient: bool
    gamma: float

    def to_text(self) -> str:
        lines = [
            "# all flags are sufficient conditions only",
            f"mu_sum_lower={self.mu_sum_lower!r}",
            f"mu_sum_upper={self.mu_sum_upper!r}",
            f"r_plus_lower={self.r_plus_lower!r}",
            f"r_plus_upper={self.r_plus_upper!r}",
            f"r_minus_lower={self.r_minus_lower!r}",
            f"r_minus_upper={self.r_minus_upper!r}",
            f"condition_ratio={self.condition_ratio!r}",
            f"recurrent_sufficient={str(self.recurrent_sufficient).lower()}",
            f"transient_sufficient={str(self.transient_sufficient).lower()}",
            f"gamma={self.gamma!r}",
        ]
        for u, lo, hi in zip(self.u_grid, self.tail_lower, self.tail_upper):
            lines.append(f"tail u={float(u)!r} lower={float(lo)!r} upper={float(hi)!r}")
        return "\n".join(lines) + "\n"


def bounds_report(neuron: NeuronParams, plasticity: PlasticityParams, u_grid=(0.0, 10.0, 50.0),
                  gamma: float = 1e-3) -> BoundsReport:
    lo, hi = mu_sum_bounds(neuron)
    u = np.asarray(u_grid, dtype=float)
    tl, tu = joint_tail_bounds(neuron, u)
    env = rate_envelopes(neuron, plasticity)
    ratio, flag = recurrence_condition(neuron, plasticity)
    trans = transience_condition(Kernel.exponential(plasticity.A_plus, plasticity.tau_plus),
                                 Kernel.exponential(plasticity.A_minus, plasticity.tau_minus), gamma)
    return BoundsReport(lo, hi, u, np.atleast_1d(tl), np.atleast_1d(tu), env.plus_lower, env.plus_upper,
                        env.minus_lower, env.minus_upper, ratio, flag, trans, gamma)
