"""Hand-written two-neuron systems, kept independent of the general solver.

States are ordered 00, 01, 10, 11 (``v_1 v_2``). Rates are named
``a_<from>_<to>``: ``a_00_01`` is neuron 2 switching on from 00, ``a_10_11``
is neuron 2 switching on while neuron 1 is active, and so on. Rows of the
Laplace matrices are divided by the stationary mass of the row state.
"""
from __future__ import annotations

import numpy as np

from .model import NeuronParams, WeightMatrix


def rates2(w: WeightMatrix, neuron: NeuronParams) -> dict:
    if w.n != 2:
        raise ValueError("two neurons only")
    g0 = neuron.gain(0.0)
    return {
        "a_00_01": g0,
        "a_00_10": g0,
        "a_01_11": neuron.gain(w.delta_w * w.K[1, 0]),  # neuron 1 driven by neuron 2
        "a_10_11": neuron.gain(w.delta_w * w.K[0, 1]),  # neuron 2 driven by neuron 1
        "beta": neuron.beta,
    }


def q_balance(r: dict) -> np.ndarray:
    """Matrix whose kernel is the stationary law (balance equations, one per state)."""
    b = r["beta"]
    return np.array([
        [-r["a_00_01"] - r["a_00_10"], b, b, 0.0],
        [r["a_00_01"], -r["a_01_11"] - b, 0.0, b],
        [r["a_00_10"], 0.0, -r["a_10_11"] - b, b],
        [0.0, r["a_01_11"], r["a_10_11"], -2 * b],
    ])


def mu2(r: dict) -> np.ndarray:
    A = q_balance(r)
    A[-1] = 1.0
    return np.linalg.solve(A, np.array([0.0, 0.0, 0.0, 1.0]))


def m_full(r: dict, mu: np.ndarray, l1: float, l2: float) -> np.ndarray:
    b, s = r["beta"], l1 + l2
    return np.array([
        [-r["a_00_10"] - r["a_00_01"] - s, b * mu[1] / mu[0], b * mu[2] / mu[0], 0.0],
        [0.0, -r["a_01_11"] - b - s, 0.0, b * mu[3] / mu[1]],
        [0.0, 0.0, -r["a_10_11"] - b - s, b * mu[3] / mu[2]],
        [0.0, 0.0, 0.0, -2 * b - s],
    ])


def m1(r: dict, mu: np.ndarray, l1: float) -> np.ndarray:
    b = r["beta"]
    return np.array([
        [-r["a_00_10"] - r["a_00_01"] - l1, b * mu[1] / mu[0], b * mu[2] / mu[0], 0.0],
        [r["a_00_01"] * mu[0] / mu[1], -r["a_01_11"] - b - l1, 0.0, b * mu[3] / mu[1]],
        [0.0, 0.0, -r["a_10_11"] - b - l1, b * mu[3] / mu[2]],
        [0.0, 0.0, r["a_10_11"] * mu[2] / mu[3], -2 * b - l1],
    ])


def m2(r: dict, mu: np.ndarray, l2: float) -> np.ndarray:
    b = r["beta"]
    return np.array([
        [-r["a_00_10"] - r["a_00_01"] - l2, b * mu[1] / mu[0], b * mu[2] / mu[0], 0.0],
        [0.0, -r["a_01_11"] - b - l2, 0.0, b * mu[3] / mu[1]],
        [r["a_00_10"] * mu[0] / mu[2], 0.0, -r["a_10_11"] - b - l2, b * mu[3] / mu[2]],
        [0.0, r["a_01_11"] * mu[1] / mu[3], 0.0, -2 * b - l2],
    ])


def rhs1(r: dict, mu: np.ndarray) -> np.ndarray:
    # constant terms: jumps that reset s_1 (neuron 1 switching on)
    return np.array([0.0, 0.0, -r["a_00_10"] * mu[0] / mu[2], -r["a_01_11"] * mu[1] / mu[3]])


def rhs2(r: dict, mu: np.ndarray) -> np.ndarray:
    return np.array([0.0, -r["a_00_01"] * mu[0] / mu[1], 0.0, -r["a_10_11"] * mu[2] / mu[3]])


def laplace_lambda1(r: dict, mu: np.ndarray, l1: float) -> np.ndarray:
    """``L_v(l1, 0)`` for the four states."""
    return np.linalg.solve(m1(r, mu, l1), rhs1(r, mu))


def laplace_lambda2(r: dict, mu: np.ndarray, l2: float) -> np.ndarray:
    return np.linalg.solve(m2(r, mu, l2), rhs2(r, mu))


def laplace_joint(r: dict, mu: np.ndarray, l1: float, l2: float) -> np.ndarray:
    """``L_v(l1, l2)`` from the triangular full system."""
    x1 = laplace_lambda1(r, mu, l1)
    x2 = laplace_lambda2(r, mu, l2)
    rhs = np.array([
        0.0,
        -r["a_00_01"] * x1[0] * mu[0] / mu[1],
        -r["a_00_10"] * x2[0] * mu[0] / mu[2],
        -r["a_01_11"] * x2[1] * mu[1] / mu[3] - r["a_10_11"] * x1[2] * mu[2] / mu[3],
    ])
    return np.linalg.solve(m_full(r, mu, l1, l2), rhs)
