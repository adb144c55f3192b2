"""Exact event-driven simulation of the plastic network.

Between activity flips nothing random happens and every rate depends only on
``(v, K)``, so waiting times are exactly exponential. Times since last spike
are never integrated: each neuron stores its last spike time.

Bookkeeping per event:

* ``inp[i] = sum_j K[j, i] v_j`` is kept as an exact integer and updated on
  every flip (O(N)) and every weight jump (O(1));
* gains are read from a table indexed by the integer input, extended on demand;
* the neuron that moves is drawn from a sum tree in O(log N).

Modes: ``plastic`` applies weight jumps; ``frozen-shadow`` draws them but does
not apply them (for estimating jump rates at fixed ``w``); ``frozen-silent``
skips plasticity altogether.

Random streams: every trajectory owns a ``numpy.random.Generator`` on a
Philox bit generator seeded by ``SeedSequence(seed, spawn_key=keys)``; see
:func:`make_rng`. Parallel trajectories use distinct ``keys``.
"""
from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field

import numba
import numpy as np

from .fast import enumeration
from .model import NEVER, NetworkState, NeuronParams, PlasticityParams, WeightMatrix

MODES = {"plastic": 0, "frozen-shadow": 1, "frozen-silent": 2}
KINDS = ("UP", "DOWN", "POT", "DEP")
UP, DOWN, POT, DEP = range(4)

_DONE_TIME, _DONE_EVENTS, _LOG_FULL, _TABLE_FULL, _CHECK_FAILED = range(5)
_MAX_ESTIMATED_N = 16


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Counter-based generator for the stream ``(seed, *keys)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))))


@dataclass(frozen=True)
class EventRecord:
    time: float
    kind: str  # UP, DOWN, POT or DEP
    i: int  # neuron for UP/DOWN; row of the changed weight K[i, j] for POT/DEP
    j: int = -1


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    horizon: float = 1000.0  # ms, or a count of activity flips if horizon_kind == "events"
    horizon_kind: str = "time"
    mode: str = "plastic"
    sample_interval: float = math.inf  # ms between weight snapshots
    burn_in: float = 0.0  # ms simulated before estimators start
    estimate: bool = False
    n_batches: int = 20
    u_grid: tuple = ()
    lambdas: tuple = ()  # tuple of length-n tuples
    record_events: bool = True
    event_thinning: int = 1  # keep every k-th flip in the log; weight jumps are always kept
    geometric_skip: bool = False
    check_every: int = 10_000

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if self.horizon_kind not in ("time", "events"):
            raise ValueError("horizon_kind must be 'time' or 'events'")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {sorted(MODES)}")
        if not self.sample_interval > 0:
            raise ValueError("sample_interval must be positive")
        if not self.burn_in >= 0:
            raise ValueError("burn_in must be >= 0")
        if self.n_batches < 1:
            raise ValueError("n_batches must be >= 1")
        if self.event_thinning < 1 or self.check_every < 1:
            raise ValueError("event_thinning and check_every must be >= 1")
        if any(not u >= 0 for u in self.u_grid):
            raise ValueError("u_grid must be nonnegative")


# --- kernel -------------------------------------------------------------------

@numba.njit(cache=True)
def _accumulate(a, b, mask, v, last, occ, ugrid, tails, lams, lap):
    d = b - a
    if d <= 0.0:
        return
    n = v.shape[0]
    if occ.shape[0] > 0:
        occ[mask] += d
    for iu in range(ugrid.shape[0]):
        u = ugrid[iu]
        for i in range(n):
            start = last[i] + u  # s_i > u from this time on
            if start <= a:
                dur = d
            elif start < b:
                dur = b - start
            else:
                continue
            for j in range(n):
                if v[j] == 0:
                    tails[i, j, iu] += dur
            tails[i, n, iu] += dur  # last slot: any activity state
    for m in range(lams.shape[0]):
        tot = 0.0
        expo = 0.0
        dead = False
        for i in range(n):
            lam = lams[m, i]
            if lam > 0.0:
                if last[i] == -np.inf:
                    dead = True
                    break
                tot += lam
                expo += lam * (a - last[i])
        if dead:
            continue
        if tot == 0.0:
            lap[m, mask] += d
        else:
            lap[m, mask] += math.exp(-expo) * (-math.expm1(-tot * d)) / tot


@numba.njit(cache=True)
def _rebuild(tree, rates):
    size = tree.shape[0] // 2
    n = rates.shape[0]
    for k in range(n):
        tree[size + k] = rates[k]
    for node in range(size - 1, 0, -1):
        tree[node] = tree[2 * node] + tree[2 * node + 1]


@numba.njit(cache=True)
def _select(tree, rates, x):
    """Leaf holding the point ``x`` in ``[0, total)``: O(log n) descent."""
    size = tree.shape[0] // 2
    n = rates.shape[0]
    node = 1
    while node < size:
        left = 2 * node
        if x < tree[left]:
            node = left
        else:
            x -= tree[left]
            node = left + 1
    i = node - size
    if i >= n or rates[i] <= 0.0:  # float round-off at the right edge
        i = n - 1
        while rates[i] <= 0.0:
            i -= 1
    return i


@numba.njit(cache=True)
def _set_leaf(tree, k, val):
    node = tree.shape[0] // 2 + k
    tree[node] = val
    node //= 2
    while node >= 1:
        tree[node] = tree[2 * node] + tree[2 * node + 1]
        node //= 2


@numba.njit(cache=True)
def _selection_loop(tree, rates, rng, draws):
    acc = 0
    for _ in range(draws):
        i = _select(tree, rates, rng.random() * tree[1])
        rates[i] = 0.5 + rng.random()
        _set_leaf(tree, i, rates[i])
        acc += i
    return acc


def selection_benchmark(n: int, draws: int = 1_000_000, seed: int = 0) -> float:
    """Seconds per event-selection step (draw a neuron, update its rate) on a sum tree of ``n`` leaves."""
    rng = make_rng(seed)
    rates = 0.5 + rng.random(n)
    size = 1 << max(1, int(math.ceil(math.log2(n))))
    tree = np.zeros(2 * size)
    _rebuild(tree, rates)
    _selection_loop(tree, rates.copy(), rng, 10)  # compile outside the timing
    t0 = time.perf_counter()
    _selection_loop(tree, rates, rng, draws)
    return (time.perf_counter() - t0) / draws


@numba.njit(cache=True)
def _geometric(rng, p):
    if p >= 1.0:
        return 1
    return 1 + int(math.floor(math.log(1.0 - rng.random()) / math.log1p(-p)))


@numba.njit(cache=True)
def _log(log_t, log_k, log_i, log_j, istate, t, kind, i, j):
    pos = istate[3]
    log_t[pos] = t
    log_k[pos] = kind
    log_i[pos] = i
    log_j[pos] = j
    istate[3] = pos + 1


@numba.njit(cache=True)
def _advance(K, v, last, inp, colsum, rates, tree, gtab, prm, mode, skip, rng,
             fstate, istate, t_stop, ev_stop,
             log_on, thin, log_t, log_k, log_i, log_j,
             est_on, occ, ugrid, tails, lams, lap, rbp, rbm, cntp, cntm, check_every):
    dw, beta, eps, Ap, Am, tp, tm = prm[0], prm[1], prm[2], prm[3], prm[4], prm[5], prm[6]
    n = v.shape[0]
    t = fstate[0]
    n_ev = 0
    status = _DONE_TIME
    while True:
        if n_ev >= ev_stop:
            status = _DONE_EVENTS
            break
        if log_on and istate[3] + 2 * n + 1 > log_t.shape[0]:
            status = _LOG_FULL
            break
        total = tree[1]
        t_next = t + rng.standard_exponential() / total
        if t_next >= t_stop:
            if est_on:
                _accumulate(t, t_stop, istate[0], v, last, occ, ugrid, tails, lams, lap)
            t = t_stop
            status = _DONE_TIME
            break
        if est_on:
            _accumulate(t, t_next, istate[0], v, last, occ, ugrid, tails, lams, lap)
        t = t_next

        i = _select(tree, rates, rng.random() * total)

        keep = (istate[1] % thin) == 0
        istate[1] += 1
        n_ev += 1
        if v[i] == 0:
            v[i] = 1
            if n <= 62:
                istate[0] |= 1 << i
            last[i] = t
            for j in range(n):
                if j != i:
                    inp[j] += K[i, j]
                    if v[j] == 0:
                        rates[j] = gtab[inp[j]]
            rates[i] = beta
            if log_on and keep:
                _log(log_t, log_k, log_i, log_j, istate, t, 0, i, -1)

            if est_on and rbp.shape[0] > 0:
                for j in range(n):
                    if j != i and last[j] != -np.inf:
                        s = t - last[j]
                        rbp[j, i] += Ap * math.exp(-s / tp)
                        rbm[i, j] += Am * math.exp(-s / tm)

            if mode != 2:
                if skip:
                    # potentiation candidates thinned from the bound eps * A+
                    pmax = eps * Ap
                    j = -1
                    while pmax > 0.0:
                        j += _geometric(rng, pmax)
                        if j >= n:
                            break
                        if j == i or last[j] == -np.inf:
                            continue
                        if rng.random() < math.exp(-(t - last[j]) / tp):
                            if mode == 0:
                                K[j, i] += 1
                                colsum[i] += 1
                                if v[j] == 1:
                                    inp[i] += 1
                                if log_on:
                                    _log(log_t, log_k, log_i, log_j, istate, t, 2, j, i)
                            elif est_on and cntp.shape[0] > 0:
                                cntp[j, i] += 1.0
                    pmax = eps * Am
                    j = -1
                    while pmax > 0.0:
                        j += _geometric(rng, pmax)
                        if j >= n:
                            break
                        if j == i or last[j] == -np.inf:
                            continue
                        if mode == 0 and K[i, j] <= 1:
                            continue
                        if rng.random() < math.exp(-(t - last[j]) / tm):
                            if mode == 0:
                                K[i, j] -= 1
                                colsum[j] -= 1
                                inp[j] -= 1
                                if v[j] == 0:
                                    rates[j] = gtab[inp[j]]
                                if log_on:
                                    _log(log_t, log_k, log_i, log_j, istate, t, 3, i, j)
                            elif est_on and cntm.shape[0] > 0:
                                cntm[i, j] += 1.0
                else:
                    for j in range(n):
                        if j == i or last[j] == -np.inf:
                            continue
                        s = t - last[j]
                        if rng.random() < eps * Ap * math.exp(-s / tp):
                            if mode == 0:
                                K[j, i] += 1
                                colsum[i] += 1
                                if v[j] == 1:
                                    inp[i] += 1
                                if log_on:
                                    _log(log_t, log_k, log_i, log_j, istate, t, 2, j, i)
                            elif est_on and cntp.shape[0] > 0:
                                cntp[j, i] += 1.0
                        if mode == 1 or K[i, j] > 1:
                            if rng.random() < eps * Am * math.exp(-s / tm):
                                if mode == 0:
                                    K[i, j] -= 1
                                    colsum[j] -= 1
                                    inp[j] -= 1
                                    if v[j] == 0:
                                        rates[j] = gtab[inp[j]]
                                    if log_on:
                                        _log(log_t, log_k, log_i, log_j, istate, t, 3, i, j)
                                elif est_on and cntm.shape[0] > 0:
                                    cntm[i, j] += 1.0
        else:
            v[i] = 0
            if n <= 62:
                istate[0] &= ~(1 << i)
            for j in range(n):
                if j != i:
                    inp[j] -= K[i, j]
                    if v[j] == 0:
                        rates[j] = gtab[inp[j]]
            rates[i] = gtab[inp[i]]
            if log_on and keep:
                _log(log_t, log_k, log_i, log_j, istate, t, 1, i, -1)
        _rebuild(tree, rates)

        istate[2] += 1
        if istate[2] >= check_every:
            istate[2] = 0
            for j in range(n):
                acc = 0
                for k in range(n):
                    acc += K[k, j] * v[k]
                    if k != j and K[k, j] < 1:
                        status = _CHECK_FAILED
                if acc != inp[j]:
                    status = _CHECK_FAILED
            if status == _CHECK_FAILED:
                break
        if colsum[i] + n + 1 >= gtab.shape[0]:
            status = _TABLE_FULL
            break
    fstate[0] = t
    return status, n_ev


# --- Python driver ------------------------------------------------------------

class _EventLog:
    def __init__(self, capacity: int):
        self.t = np.empty(capacity)
        self.k = np.empty(capacity, dtype=np.int8)
        self.i = np.empty(capacity, dtype=np.int64)
        self.j = np.empty(capacity, dtype=np.int64)
        self.chunks: list = []

    def flush(self, count: int):
        if count:
            self.chunks.append((self.t[:count].copy(), self.k[:count].copy(),
                                self.i[:count].copy(), self.j[:count].copy()))

    def arrays(self):
        if not self.chunks:
            return np.empty(0), np.empty(0, np.int8), np.empty(0, np.int64), np.empty(0, np.int64)
        return tuple(np.concatenate(c) for c in zip(*self.chunks))


_EMPTY1 = np.zeros(0)
_EMPTY2 = np.zeros((0, 0))
_EMPTY3 = np.zeros((0, 0, 0))


class Simulator:
    """Mutable simulation state plus the compiled event loop."""

    def __init__(self, w0: WeightMatrix, neuron: NeuronParams, plasticity: PlasticityParams,
                 state: NetworkState | None = None, mode: str = "plastic", rng=None,
                 geometric_skip: bool = False, gain=None, check_every: int = 10_000):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {sorted(MODES)}")
        n = w0.n
        state = NetworkState.quiescent(n) if state is None else state
        if state.n != n:
            raise ValueError("state and weights disagree on n")
        self.neuron, self.plasticity = neuron, plasticity
        self.delta_w = w0.delta_w
        self.mode = mode
        self.rng = make_rng(0) if rng is None else rng
        self.skip = bool(geometric_skip)
        self.gain = neuron.gain if gain is None else gain
        self.check_every = int(check_every)
        self.K = np.array(w0.K, dtype=np.int64)
        self.v = state.v.astype(np.int64)
        self.last = state.last_spike.astype(float)
        self.fstate = np.array([float(state.t)])
        mask = int((self.v << np.arange(n)).sum()) if n <= 62 else 0
        # istate = [bitmask of v, flips so far, flips since last check, log fill]
        self.istate = np.array([mask, 0, 0, 0], dtype=np.int64)
        self.inp = (self.v @ self.K).astype(np.int64)
        self.colsum = self.K.sum(axis=0).astype(np.int64)
        self.gtab = np.empty(0)
        self._extend_table(int(self.colsum.max()) + 2 * n + 64)
        self.rates = np.where(self.v == 1, neuron.beta, self.gtab[self.inp])
        size = 1 << max(1, int(math.ceil(math.log2(n))))
        self.tree = np.zeros(2 * size)
        _rebuild(self.tree, self.rates)
        p = plasticity
        self.prm = np.array([self.delta_w, neuron.beta, p.epsilon, p.A_plus, p.A_minus, p.tau_plus, p.tau_minus])

    @property
    def n(self) -> int:
        return self.v.shape[0]

    @property
    def t(self) -> float:
        return float(self.fstate[0])

    @property
    def n_events(self) -> int:
        return int(self.istate[1])

    def state(self) -> NetworkState:
        return NetworkState(self.t, self.v.astype(np.int8), self.last.copy())

    def weights(self) -> WeightMatrix:
        return WeightMatrix(self.K.copy(), self.delta_w)

    def _extend_table(self, size: int):
        size = max(size, 2 * len(self.gtab))
        x = self.delta_w * np.arange(size, dtype=float)
        tab = np.asarray(self.gain(x), dtype=float)
        if tab.shape != x.shape or np.any(~(tab > 0)):
            raise ValueError("gain must be positive and vectorised")
        self.gtab = tab

    def advance(self, t_stop: float = math.inf, max_events: int | None = None,
                log: _EventLog | None = None, thin: int = 1, est: dict | None = None) -> int:
        """Run until ``t_stop`` or ``max_events`` flips; returns the number of flips."""
        if t_stop == math.inf and max_events is None:
            raise ValueError("need a time or event bound")
        remaining = np.iinfo(np.int64).max if max_events is None else int(max_events)
        done = 0
        est = est or {}
        while True:
            lt = (log.t, log.k, log.i, log.j) if log is not None else (_EMPTY1, np.zeros(0, np.int8),
                                                                       np.zeros(0, np.int64), np.zeros(0, np.int64))
            status, nev = _advance(
                self.K, self.v, self.last, self.inp, self.colsum, self.rates, self.tree, self.gtab,
                self.prm, MODES[self.mode], self.skip, self.rng, self.fstate, self.istate,
                float(t_stop), remaining - done, log is not None, int(thin), *lt,
                bool(est), est.get("occ", _EMPTY1), est.get("ugrid", _EMPTY1), est.get("tails", _EMPTY3),
                est.get("lams", _EMPTY2), est.get("lap", _EMPTY2), est.get("rbp", _EMPTY2),
                est.get("rbm", _EMPTY2), est.get("cntp", _EMPTY2), est.get("cntm", _EMPTY2),
                self.check_every)
            done += nev
            if status == _LOG_FULL:
                log.flush(int(self.istate[3]))
                self.istate[3] = 0
            elif status == _TABLE_FULL:
                self._extend_table(int(self.colsum.max()) + 2 * self.n + 64)
            elif status == _CHECK_FAILED:
                raise RuntimeError("incremental input sums or weight floor check failed")
            else:
                return done

    def recompute_inputs(self) -> np.ndarray:
        return self.v @ self.K


def step(state: NetworkState, w: WeightMatrix, neuron: NeuronParams, plasticity: PlasticityParams,
         rng: np.random.Generator, mode: str = "plastic"):
    """One activity flip with its weight jumps: ``(records, new state, new weights)``."""
    sim = Simulator(w, neuron, plasticity, state, mode, rng)
    log = _EventLog(4 * w.n + 4)
    sim.advance(max_events=1, log=log)
    log.flush(int(sim.istate[3]))
    t, k, i, j = log.arrays()
    records = [EventRecord(float(a), KINDS[b], int(c), int(d)) for a, b, c, d in zip(t, k, i, j)]
    return records, sim.state(), sim.weights()


@dataclass
class RunResult:
    config: SimConfig
    n: int
    K0: np.ndarray
    final_state: NetworkState
    final_weights: WeightMatrix
    n_events: int
    event_time: np.ndarray
    event_kind: np.ndarray
    event_i: np.ndarray
    event_j: np.ndarray
    snapshot_times: list
    snapshots: list
    epsilon: float = 1.0
    batches: dict = field(default_factory=dict)

    def events(self):
        for a, b, c, d in zip(self.event_time, self.event_kind, self.event_i, self.event_j):
            yield EventRecord(float(a), KINDS[b], int(c), int(d))


def _est_buffers(n: int, cfg: SimConfig) -> dict:
    # per-state estimators need 2**n slots; tails and jump rates do not
    states = n <= _MAX_ESTIMATED_N
    if cfg.lambdas and not states:
        raise ValueError(f"Laplace estimators need n <= {_MAX_ESTIMATED_N}")
    B = cfg.n_batches
    lams = np.asarray(cfg.lambdas, dtype=float).reshape(-1, n) if cfg.lambdas else np.zeros((0, n))
    if np.any(~(lams >= 0)):
        raise ValueError("lambdas must be >= 0")
    ugrid = np.asarray(cfg.u_grid, dtype=float)
    return {
        "duration": np.zeros(B),
        "occ": np.zeros((B, 1 << n if states else 0)),
        "ugrid": ugrid,
        "tails": np.zeros((B, n, n + 1, len(ugrid))),
        "lams": lams,
        "lap": np.zeros((B, len(lams), 1 << n if states else 0)),
        "rbp": np.zeros((B, n, n)),
        "rbm": np.zeros((B, n, n)),
        "cntp": np.zeros((B, n, n)),
        "cntm": np.zeros((B, n, n)),
    }


def _batch_view(buf: dict, b: int) -> dict:
    keys = ("occ", "tails", "lap", "rbp", "rbm", "cntp", "cntm")
    out = {k: buf[k][b] for k in keys}
    out["ugrid"] = buf["ugrid"]
    out["lams"] = buf["lams"]
    return out


def run(config: SimConfig, w0: WeightMatrix, neuron: NeuronParams, plasticity: PlasticityParams,
        state: NetworkState | None = None, rng: np.random.Generator | None = None, gain=None) -> RunResult:
    """Simulate one trajectory; deterministic given ``config.seed`` (or ``rng``)."""
    rng = make_rng(config.seed) if rng is None else rng
    sim = Simulator(w0, neuron, plasticity, state, config.mode, rng, config.geometric_skip, gain,
                    config.check_every)
    n = sim.n
    t0 = sim.t
    log = _EventLog(max(4096, 8 * n)) if config.record_events else None
    snap_t, snaps = [t0], [sim.K.copy()]
    next_snap = t0 + config.sample_interval

    def go(t_stop, max_events=None, est=None):
        nonlocal next_snap
        done = 0
        while True:
            target = min(t_stop, next_snap)
            left = None if max_events is None else max_events - done
            before = sim.t
            done += sim.advance(target, left, log, config.event_thinning, est)
            if est is not None:
                est_duration[0] += sim.t - before
            if sim.t >= next_snap:
                snap_t.append(sim.t)
                snaps.append(sim.K.copy())
                next_snap += config.sample_interval
            if sim.t >= t_stop or (max_events is not None and done >= max_events):
                return

    if config.burn_in > 0:
        go(t0 + config.burn_in)
    buf = _est_buffers(n, config) if config.estimate else {}
    B = config.n_batches if config.estimate else 1
    start = sim.t
    for b in range(B):
        est_duration = [0.0]
        est = _batch_view(buf, b) if config.estimate else None
        if config.horizon_kind == "time":
            go(start + config.horizon * (b + 1) / B, None, est)
        else:
            total = int(config.horizon)
            go(math.inf, total * (b + 1) // B - total * b // B, est)
        if config.estimate:
            buf["duration"][b] = est_duration[0]
    if snap_t[-1] != sim.t:
        snap_t.append(sim.t)
        snaps.append(sim.K.copy())
    if log is not None:
        log.flush(int(sim.istate[3]))
        sim.istate[3] = 0
        et, ek, ei, ej = log.arrays()
    else:
        et, ek, ei, ej = np.empty(0), np.empty(0, np.int8), np.empty(0, np.int64), np.empty(0, np.int64)
    return RunResult(config, n, np.array(w0.K), sim.state(), sim.weights(), sim.n_events,
                     et, ek, ei, ej, snap_t, snaps, plasticity.epsilon, buf)


# --- stationary estimates -----------------------------------------------------

@dataclass
class StationaryEstimates:
    """Time averages from a frozen-weight run, with batch-means standard errors.

    ``occupancy`` and ``laplace`` are in spin-enumeration order; ``tails[i, j, u]``
    estimates ``P(S_i > u, V_j = 0)`` and ``marginal_tails[i, u]`` estimates
    ``P(S_i > u)``; ``laplace[m, k]`` estimates
    ``E[exp(-lambdas[m] . S) | V = v_k]``. Jump rates are per ms on the
    rescaled clock: ``r_plus_rb`` averages the kernel over spikes, while
    ``r_plus_count`` counts sampled (shadow) jumps and divides by ``epsilon T``.
    """

    n: int
    bitstrings: list
    total_time: float
    n_batches: int
    occupancy: np.ndarray
    occupancy_se: np.ndarray
    u_grid: np.ndarray
    tails: np.ndarray
    tails_se: np.ndarray
    marginal_tails: np.ndarray
    marginal_tails_se: np.ndarray
    lambdas: np.ndarray
    laplace: np.ndarray
    laplace_se: np.ndarray
    r_plus_rb: np.ndarray
    r_plus_rb_se: np.ndarray
    r_minus_rb: np.ndarray
    r_minus_rb_se: np.ndarray
    r_plus_count: np.ndarray
    r_plus_count_se: np.ndarray
    r_minus_count: np.ndarray
    r_minus_count_se: np.ndarray
    insufficient: bool

    def to_dict(self) -> dict:
        out = {}
        for k, val in self.__dict__.items():
            out[k] = val.tolist() if isinstance(val, np.ndarray) else val
        return out


def _ratio(num: np.ndarray, den: np.ndarray):
    """Pooled ratio and batch-means SE over the leading batch axis."""
    B = num.shape[0]
    den_b = den.reshape((B,) + (1,) * (num.ndim - 1))
    tot_den = den_b.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        est = num.sum(axis=0) / tot_den
        per = num / den_b
    if B < 2:
        return est, np.full(est.shape, np.nan)
    se = np.nanstd(per, axis=0, ddof=1) / np.sqrt(np.sum(np.isfinite(per), axis=0).clip(1))
    return est, se


def estimate_stationary(result: RunResult) -> StationaryEstimates:
    cfg = result.config
    if not cfg.estimate:
        raise ValueError("run was made without estimators (config.estimate=False)")
    if cfg.mode == "plastic":
        raise ValueError("stationary estimates need frozen weights")
    buf = result.batches
    n = result.n
    dur = buf["duration"]
    all_tails, all_se = _ratio(buf["tails"], dur)
    tails, tails_se = all_tails[:, :n], all_se[:, :n]
    mtails, mtails_se = all_tails[:, n], all_se[:, n]
    B = len(dur)
    if buf["occ"].shape[1]:
        en = enumeration(n)
        bits = [en.bitstring(k) for k in range(len(en))]
        occ_b = buf["occ"][:, en.masks]
        lap_b = buf["lap"][:, :, en.masks]
    else:  # too many neurons for per-state estimates
        bits = []
        occ_b = np.zeros((B, 0))
        lap_b = np.zeros((B, 0, 0))
    occ, occ_se = _ratio(occ_b, dur)
    with np.errstate(invalid="ignore", divide="ignore"):
        lap = lap_b.sum(axis=0) / occ_b.sum(axis=0)[None, :]
        per = lap_b / occ_b[:, None, :]
    lap_se = (np.nanstd(per, axis=0, ddof=1) / np.sqrt(np.sum(np.isfinite(per), axis=0).clip(1))
              if B > 1 else np.full(lap.shape, np.nan))
    rbp, rbp_se = _ratio(buf["rbp"], dur)
    rbm, rbm_se = _ratio(buf["rbm"], dur)
    eps = result.epsilon
    cp, cp_se = _ratio(buf["cntp"], dur * eps)
    cm, cm_se = _ratio(buf["cntm"], dur * eps)
    insufficient = bool(B < 2 or np.any(dur <= 0) or np.any(occ_b.sum(axis=0) <= 0))
    return StationaryEstimates(n, bits, float(dur.sum()), B,
                               occ, occ_se, buf["ugrid"].copy(), tails, tails_se, mtails, mtails_se, buf["lams"].copy(),
                               lap, lap_se, rbp, rbp_se, rbm, rbm_se, cp, cp_se, cm, cm_se, insufficient)


# --- pairing protocol ---------------------------------------------------------

def stdp_curve(plasticity: PlasticityParams, dt_grid, pairings: int = 60, w0: float = 1.0):
    """Expected relative weight change after ``pairings`` pre/post pairings at each ``dt`` (ms).

    ``dt > 0`` means the presynaptic spike leads. Computed from the rule itself:
    each pairing moves the weight by ``+dw eps p+(dt)`` or ``-dw eps p-(-dt)``.
    """
    dts = np.asarray(dt_grid, dtype=float)
    if np.any(dts == 0):
        raise ValueError("dt = 0 has no pre/post ordering")
    if not np.all(np.isfinite(dts)):
        raise ValueError("dt must be finite")
    if pairings < 1 or not w0 > 0:
        raise ValueError("pairings must be >= 1 and w0 > 0")
    p = plasticity
    change = np.where(dts > 0, p.p_plus(np.abs(dts)), -p.p_minus(np.abs(dts)))
    return dts, pairings * p.delta_w * p.epsilon * change / w0


# --- CSV output -----------------------------------------------------------------

def fmt(x) -> str:
    """Float with 17 significant digits (round-trips exactly)."""
    return format(float(x), ".17g")


def write_events_csv(path, result: RunResult):
    with open(path, "w", newline="") as f:
        wr = csv.writer(f, lineterminator="\n")
        wr.writerow(["time_ms", "kind", "i", "j"])
        for t, k, i, j in zip(result.event_time, result.event_kind, result.event_i, result.event_j):
            wr.writerow([fmt(t), KINDS[k], int(i), int(j)])


def write_snapshots_csv(path, result: RunResult):
    n = result.n
    off = ~np.eye(n, dtype=bool)
    ii, jj = np.nonzero(off)
    with open(path, "w", newline="") as f:
        wr = csv.writer(f, lineterminator="\n")
        wr.writerow(["time_ms", "i", "j", "K"])
        for t, K in zip(result.snapshot_times, result.snapshots):
            for i, j in zip(ii, jj):
                wr.writerow([fmt(t), int(i), int(j), int(K[i, j])])
