"""Flat ``key=value`` run configuration.

Lines are ``key=value``; ``#`` starts a comment; blank lines are ignored.
Every key has a default, so an empty file is a valid configuration. Any key
can be overridden from the environment as ``STDP_<KEY>`` (key upper-cased).

Weight initialisation (``w_init``):

* ``uniform:K``: every off-diagonal entry equals K;
* ``column-boost:c:K``: ``K[i, c] = K`` for every ``i != c``, all else 1;
* ``file:PATH``: whitespace- or comma-separated integer rows.

Neuron indices are 0-based everywhere.
"""
from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass, fields

import numpy as np

from .model import NeuronParams, PlasticityParams, WeightMatrix
from .sim import MODES, SimConfig

ENV_PREFIX = "STDP_"
SWEEP_TARGETS = ("limit-sup-drift", "birth-death", "averaged-k12")


class ConfigError(ValueError):
    def __init__(self, msg: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


def _floats(text: str) -> tuple:
    text = text.strip()
    return tuple(float(x) for x in text.split(",")) if text else ()


def _int_range(text: str) -> tuple:
    """``start:stop:step`` with inclusive stop, or a comma list."""
    if ":" in text:
        a, b, *c = (int(x) for x in text.split(":"))
        step = c[0] if c else 1
        if step <= 0 or b < a:
            raise ValueError("range needs start <= stop and step > 0")
        return tuple(range(a, b + 1, step))
    return tuple(int(x) for x in text.split(",") if x.strip())


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _theta(text: str):
    t = text.strip().lower()
    return None if t in ("", "default", "none") else float(text)


def _opt_int(text: str):
    t = text.strip().lower()
    return None if t in ("", "none") else int(text)


@dataclass(frozen=True)
class RunConfig:
    # neuron
    beta: float = 0.1
    alpha_m: float = 0.01
    S0: float = 1.0
    sigma: float = 0.3
    theta: float | None = None
    # plasticity
    A_plus: float = 0.8
    A_minus: float = 0.7
    tau_plus: float = 17.0
    tau_minus: float = 34.0
    delta_w: float = 1.0
    epsilon: float = 0.01
    # network
    n: int = 2
    w_init: str = "uniform:1"
    # full simulation
    seed: int = 0
    horizon: float = 10_000.0
    horizon_kind: str = "time"
    mode: str = "plastic"
    sample_interval: float = math.inf
    burn_in: float = 0.0
    estimate: bool = False
    n_batches: int = 20
    event_thinning: int = 1
    geometric_skip: bool = False
    # analytics and command options
    u_grid: tuple = (0.0, 10.0, 50.0)
    lambda_grid: tuple = ()
    axis: int = 0
    dt_grid: tuple = (-100.0, -50.0, -34.0, -20.0, -10.0, -5.0, -1.0, 1.0, 5.0, 10.0, 17.0, 20.0, 50.0, 100.0)
    pairings: int = 60
    w0_physical: float = 1.0
    K_max: int = 100
    w21: int = 30
    grid_resolution: int = 64
    gamma: float = 1e-3
    w12_range: tuple = tuple(range(1, 61))
    w21_range: tuple = tuple(range(1, 61))
    avg_horizon: float = 1e6
    frozen_pairs: tuple = ()
    max_avg_events: int = 50_000_000
    sweep: str = ""
    sweep_target: str = "limit-sup-drift"
    replicates: int = 1

    # --- derived objects -------------------------------------------------
    def neuron(self) -> NeuronParams:
        return NeuronParams(self.beta, self.alpha_m, self.S0, self.sigma, self.theta)

    def plasticity(self) -> PlasticityParams:
        return PlasticityParams(self.A_plus, self.A_minus, self.tau_plus, self.tau_minus, self.delta_w, self.epsilon)

    def weights(self, base_dir: str = ".") -> WeightMatrix:
        return weights_from_spec(self.w_init, self.n, self.delta_w, base_dir)

    def sim_config(self, seed: int | None = None) -> SimConfig:
        n = self.n
        lams = tuple(tuple(lam if i == self.axis else 0.0 for i in range(n)) for lam in self.lambda_grid)
        return SimConfig(self.seed if seed is None else seed, self.horizon, self.horizon_kind, self.mode,
                         self.sample_interval, self.burn_in, self.estimate, self.n_batches, self.u_grid, lams,
                         True, self.event_thinning, self.geometric_skip)

    def frozen_mask(self) -> np.ndarray:
        mask = np.zeros((self.n, self.n), dtype=bool)
        for i, j in self.frozen_pairs:
            mask[i, j] = True
        return mask

    def sweep_axes(self) -> list:
        """``[(key, sorted values)]`` sorted by key; empty if no sweep is configured."""
        return parse_sweep(self.sweep)


def parse_sweep(text: str) -> list:
    axes = {}
    for part in (p.strip() for p in text.split(",") if p.strip()):
        bits = part.split(":")
        key = bits[0]
        if key not in _FIELDS or _FIELDS[key].type not in ("float", "int"):
            raise ValueError(f"cannot sweep over {key!r}")
        if len(bits) == 4:
            lo, hi, num = float(bits[1]), float(bits[2]), int(bits[3])
            if num < 1:
                raise ValueError("sweep needs at least one point per axis")
            vals = np.linspace(lo, hi, num).tolist() if num > 1 else [lo]
        elif len(bits) == 2:
            vals = [float(x) for x in bits[1].split("|")]
        else:
            raise ValueError(f"bad sweep axis {part!r}; use key:lo:hi:num or key:v1|v2|...")
        if _FIELDS[key].type == "int":
            vals = [int(round(x)) for x in vals]
        axes[key] = sorted(set(vals))
    return sorted(axes.items())


def weights_from_spec(spec: str, n: int, delta_w: float, base_dir: str = ".") -> WeightMatrix:
    kind, _, rest = spec.partition(":")
    if kind == "uniform":
        return WeightMatrix.uniform(n, int(rest), delta_w)
    if kind == "column-boost":
        c, k = (int(x) for x in rest.split(":"))
        if not 0 <= c < n:
            raise ValueError(f"column {c} out of range for n={n}")
        K = np.ones((n, n), dtype=np.int64)
        K[:, c] = k
        np.fill_diagonal(K, 0)
        return WeightMatrix(K, delta_w)
    if kind == "file":
        path = rest if os.path.isabs(rest) else os.path.join(base_dir, rest)
        with open(path) as f:
            rows = [ln.replace(",", " ").split() for ln in f if ln.strip() and not ln.lstrip().startswith("#")]
        K = np.array([[int(x) for x in r] for r in rows], dtype=np.int64)
        if K.shape != (n, n):
            raise ValueError(f"matrix file has shape {K.shape}, expected ({n}, {n})")
        return WeightMatrix(K, delta_w)
    raise ValueError(f"unknown w_init {spec!r}")


def _pairs(text: str) -> tuple:
    out = []
    for part in (p.strip() for p in text.split(";") if p.strip()):
        i, j = (int(x) for x in part.split(":"))
        out.append((i, j))
    return tuple(out)


def _emit_pairs(v) -> str:
    return ";".join(f"{i}:{j}" for i, j in v)


def _emit_float(x: float) -> str:
    return repr(float(x))


def _emit_floats(v) -> str:
    return ",".join(repr(float(x)) for x in v)


def _emit_ints(v) -> str:
    return ",".join(str(int(x)) for x in v)


# key -> (parser, emitter)
_CODECS = {
    "float": (float, _emit_float),
    "int": (int, str),
    "str": (str.strip, str),
    "bool": (_bool, lambda b: "true" if b else "false"),
    "theta": (_theta, lambda t: "default" if t is None else repr(float(t))),
    "floats": (_floats, _emit_floats),
    "ints": (_int_range, _emit_ints),
    "pairs": (_pairs, _emit_pairs),
    "opt_int": (_opt_int, lambda v: "none" if v is None else str(v)),
}

_KINDS = {
    "beta": "float", "alpha_m": "float", "S0": "float", "sigma": "float", "theta": "theta",
    "A_plus": "float", "A_minus": "float", "tau_plus": "float", "tau_minus": "float",
    "delta_w": "float", "epsilon": "float", "n": "int", "w_init": "str", "seed": "int",
    "horizon": "float", "horizon_kind": "str", "mode": "str", "sample_interval": "float",
    "burn_in": "float", "estimate": "bool", "n_batches": "int", "event_thinning": "int",
    "geometric_skip": "bool", "u_grid": "floats", "lambda_grid": "floats", "axis": "int",
    "dt_grid": "floats", "pairings": "int", "w0_physical": "float", "K_max": "int", "w21": "int",
    "grid_resolution": "int", "gamma": "float", "w12_range": "ints", "w21_range": "ints",
    "avg_horizon": "float", "frozen_pairs": "pairs", "max_avg_events": "int", "sweep": "str",
    "sweep_target": "str", "replicates": "int",
}


@dataclass(frozen=True)
class _Field:
    type: str


_FIELDS = {k: _Field(v) for k, v in _KINDS.items()}
assert set(_FIELDS) == {f.name for f in fields(RunConfig)}


def validate(cfg: RunConfig, base_dir: str = ".") -> None:
    """Raise ``ValueError`` if any owning type rejects the values."""
    cfg.neuron()
    cfg.plasticity()
    if cfg.n < 1:
        raise ValueError("n must be >= 1")
    cfg.weights(base_dir)
    if cfg.mode not in MODES:
        raise ValueError(f"mode must be one of {sorted(MODES)}")
    cfg.sim_config()
    if not 0 <= cfg.axis < cfg.n:
        raise ValueError("axis out of range")
    if any(not lam >= 0 for lam in cfg.lambda_grid):
        raise ValueError("lambda_grid must be >= 0")
    if cfg.K_max < 10:
        raise ValueError("K_max must be >= 10")
    if cfg.w21 < 1 or min(cfg.w12_range + cfg.w21_range, default=1) < 1:
        raise ValueError("weights must be >= 1")
    if cfg.grid_resolution < 2:
        raise ValueError("grid_resolution must be >= 2")
    if not cfg.avg_horizon > 0:
        raise ValueError("avg_horizon must be positive")
    for i, j in cfg.frozen_pairs:
        if not (0 <= i < cfg.n and 0 <= j < cfg.n and i != j):
            raise ValueError(f"frozen pair {i}:{j} is not an off-diagonal entry")
    if cfg.sweep_target not in SWEEP_TARGETS:
        raise ValueError(f"sweep_target must be one of {SWEEP_TARGETS}")
    if cfg.replicates < 1:
        raise ValueError("replicates must be >= 1")
    cfg.sweep_axes()


def parse_config(text: str, env: dict | None = None, base_dir: str = ".") -> RunConfig:
    """Parse and validate; errors carry the offending line number when known."""
    values: dict = {}
    lines: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected key=value, got {line!r}", lineno)
        key, _, val = (s.strip() for s in line.partition("="))
        if key not in _FIELDS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        try:
            values[key] = _CODECS[_FIELDS[key].type][0](val)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad value for {key}: {exc}", lineno) from None
        lines[key] = lineno
    if env:
        for key in _FIELDS:
            name = ENV_PREFIX + key.upper()
            if name in env:
                try:
                    values[key] = _CODECS[_FIELDS[key].type][0](env[name])
                except (ValueError, TypeError) as exc:
                    raise ConfigError(f"bad value in {name}: {exc}") from None
                lines[key] = None
    cfg = RunConfig(**values)
    try:
        validate(cfg, base_dir)
    except (ValueError, OSError) as exc:
        # point at the line that most plausibly caused it: the last key named in the message
        hit = [lines[k] for k in sorted(lines, key=len, reverse=True) if k in str(exc) and lines[k]]
        raise ConfigError(str(exc), hit[0] if hit else None) from None
    return cfg


def emit_config(cfg: RunConfig) -> str:
    """Text that ``parse_config`` maps back to ``cfg``."""
    out = []
    for f in fields(RunConfig):
        out.append(f"{f.name}={_CODECS[_FIELDS[f.name].type][1](getattr(cfg, f.name))}")
    return "\n".join(out) + "\n"


def replace(cfg: RunConfig, **kw) -> RunConfig:
    return dataclasses.replace(cfg, **kw)
