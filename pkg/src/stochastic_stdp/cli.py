"""Command-line entry point: ``python3 -m stochastic_stdp COMMAND [flags]``.

Exit status: 0 on success, 2 on a configuration error, 3 on a numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import itertools
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import averaged as avg
from . import sim
from .config import ConfigError, RunConfig, parse_config, replace
from .fast import DominanceError, fast_stationary, spin_system
from .sim import fmt, make_rng
from .stability import bounds_report, mu_sum_bounds, rate_envelopes, recurrence_condition

COMMANDS = ("simulate-full", "simulate-averaged", "analyze-fast", "birth-death", "drift-field",
            "stdp-curve", "bounds-check", "classify", "sweep")


class NumericalError(RuntimeError):
    pass


def _csv(path, header, rows):
    with open(path, "w", newline="") as f:
        wr = csv.writer(f, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([fmt(x) if isinstance(x, (float, np.floating)) else x for x in row])


# --- commands: each returns the one-line summary ------------------------------

def cmd_simulate_full(cfg: RunConfig, out: str, seed: int, base_dir: str) -> str:
    scfg = cfg.sim_config(seed)
    res = sim.run(scfg, cfg.weights(base_dir), cfg.neuron(), cfg.plasticity(), rng=make_rng(seed, 0, 0))
    sim.write_events_csv(os.path.join(out, "events.csv"), res)
    sim.write_snapshots_csv(os.path.join(out, "snapshots.csv"), res)
    extra = ""
    if scfg.estimate and scfg.mode != "plastic":
        est = sim.estimate_stationary(res)
        with open(os.path.join(out, "estimates.json"), "w") as f:
            json.dump(est.to_dict(), f, indent=1)
        extra = f" insufficient={str(est.insufficient).lower()}"
    K = res.final_weights.K
    off = K[~np.eye(res.n, dtype=bool)]
    return (f"simulate-full: n={res.n} events={res.n_events} t_end={fmt(res.final_state.t)} "
            f"K_min={off.min() if off.size else 0} K_max={off.max() if off.size else 0}{extra}")


def cmd_simulate_averaged(cfg: RunConfig, out: str, seed: int, base_dir: str) -> str:
    w0 = cfg.weights(base_dir)
    prov = avg.RatesProvider(cfg.neuron(), cfg.plasticity())
    tr = avg.simulate_averaged(w0, prov, cfg.avg_horizon, make_rng(seed, 0, 0), cfg.frozen_mask(),
                               cfg.max_avg_events)
    K = np.array(w0.K)
    rows = []
    for t, i, j, d in zip(tr.times, tr.i, tr.j, tr.delta):
        K[i, j] += d
        rows.append((float(t), int(i), int(j), int(K[i, j])))
    _csv(os.path.join(out, "averaged.csv"), ["time", "i", "j", "K"], rows)
    return f"simulate-averaged: jumps={len(tr.times)} final_K={tr.K_final.tolist()}"


def cmd_analyze_fast(cfg: RunConfig, out: str, seed: int, base_dir: str) -> str:
    w = cfg.weights(base_dir)
    lams = cfg.lambda_grid or (1.0 / cfg.tau_plus,)
    fs = fast_stationary(w, cfg.neuron(), lams)
    bits = fs.bitstrings()
    index = []
    for k, lam in enumerate(lams):
        name = f"analyze_fast_axis{cfg.axis}_lam{k}.csv"
        vals = fs.laplace_axis[(cfg.axis, float(lam))]
        _csv(os.path.join(out, name), ["v_bitstring", "mu", "value"],
             [(b, float(m), float(x)) for b, m, x in zip(bits, fs.mu, vals)])
        index.append((name, cfg.axis, float(lam)))
    _csv(os.path.join(out, "analyze_fast_index.csv"), ["file", "axis", "lambda"], index)
    resid = spin_system(w, cfg.neuron()).residual()
    return f"analyze-fast: n={w.n} states={len(bits)} lambdas={len(lams)} residual={fmt(resid)}"


def cmd_birth_death(cfg: RunConfig, out: str, seed: int, base_dir: str) -> str:
    r = avg.bd_classify(cfg.neuron(), cfg.plasticity(), cfg.w21, cfg.K_max)
    _csv(os.path.join(out, "birth_death.csv"), ["k", "r_plus", "r_minus", "theta"],
         [(int(k), float(a), float(b), float(t)) for k, a, b, t in zip(r.k, r.r_plus, r.r_minus, r.theta)])
    return (f"birth-death: w21={cfg.w21} classification={r.classification} R_plus={fmt(r.R_plus)} "
            f"R_minus={fmt(r.R_minus)} k_saturation={r.k_saturation} tail_bound={fmt(r.tail_bound)}")


def cmd_drift_field(cfg: RunConfig, out: str, seed: int, base_dir: str) -> str:
    rows = avg.drift_field_grid(cfg.neuron(), cfg.plasticity(), cfg.w12_range, cfg.w21_range)
    _csv(os.path.join(out, "drift_field.csv"), ["w12", "w21", "eta12", "eta21"], rows)
    return f"drift-field: points={len(rows)}"


def cmd_stdp_curve(cfg: RunConfig, out: str, seed: int, base_dir: str) -> str:
    dts, rel = sim.stdp_curve(cfg.plasticity(), cfg.dt_grid, cfg.pairings, cfg.w0_physical)
    _csv(os.path.join(out, "stdp_curve.csv"), ["dt_ms", "rel_change"], zip(dts.tolist(), rel.tolist()))
    return f"stdp-curve: points={len(dts)} max={fmt(rel.max())} min={fmt(rel.min())}"


def cmd_bounds_check(cfg: RunConfig, out: str, seed: int, base_dir: str) -> str:
    nu, pl = cfg.neuron(), cfg.plasticity()
    rep = bounds_report(nu, pl, cfg.u_grid, cfg.gamma)
    text = rep.to_text()
    w = cfg.weights(base_dir)
    ok = True
    if 2 <= w.n <= 12:
        # check the configured weights against the envelopes
        r = avg.averaged_rates(w, nu, pl)
        env = rate_envelopes(nu, pl)
        lo, hi = mu_sum_bounds(nu)
        sys_ = spin_system(w, nu)
        off = ~np.eye(w.n, dtype=bool)
        rest = [float(sys_.mu[sys_.enum.states[:, j] == 0].sum()) for j in range(w.n)]
        checks = {
            "mu_sums": all(lo <= m <= hi for m in rest),
            "r_plus": bool(np.all((env.plus_lower <= r.r_plus[off]) & (r.r_plus[off] <= env.plus_upper))),
            "r_minus": bool(np.all((env.minus_lower <= r.r_minus[off]) & (r.r_minus[off] <= env.minus_upper))),
        }
        for k, v in checks.items():
            text += f"check {k}={'ok' if v else 'VIOLATED'}\n"
        ok = all(checks.values())
    with open(os.path.join(out, "bounds.txt"), "w") as f:
        f.write(text)
    return (f"bounds-check: ratio={fmt(rep.condition_ratio)} recurrent_sufficient="
            f"{str(rep.recurrent_sufficient).lower()} checks={'ok' if ok else 'VIOLATED'}")


def cmd_classify(cfg: RunConfig, out: str, seed: int, base_dir: str) -> str:
    ratio, flag = recurrence_condition(cfg.neuron(), cfg.plasticity())
    with open(os.path.join(out, "classify.txt"), "w") as f:
        f.write(f"condition_ratio={ratio!r}\nrecurrent_sufficient={str(flag).lower()}\n")
    return f"classify: ratio={fmt(ratio)} recurrent_sufficient={str(flag).lower()} (sufficient only)"


# --- sweeps -------------------------------------------------------------------

def derived_seed(root: int, point: int, replicate: int) -> int:
    """64-bit seed of stream ``(root, point, replicate)``."""
    ss = np.random.SeedSequence(int(root), spawn_key=(int(point), int(replicate)))
    return int(ss.generate_state(1, np.uint64)[0])


def _sweep_point(args):
    cfg, keys, values, point, rep, root, base_dir = args
    cfg = replace(cfg, **dict(zip(keys, values)))
    try:
        nu, pl = cfg.neuron(), cfg.plasticity()
        if cfg.sweep_target == "limit-sup-drift":
            res = avg.limit_sup_drift(nu, pl, cfg.grid_resolution)
            return ("ok", tuple(values) + (res.sup_eta,))
        if cfg.sweep_target == "birth-death":
            r = avg.bd_classify(nu, pl, cfg.w21, cfg.K_max)
            return ("ok", tuple(values) + (r.classification, r.R_plus, r.R_minus))
        # averaged-k12: two-neuron averaged run with K_21 frozen
        w0 = cfg.weights(base_dir)
        frozen = np.zeros((cfg.n, cfg.n), dtype=bool)
        frozen[1, 0] = True
        w0 = w0.with_entry(1, 0, cfg.w21)
        tr = avg.simulate_averaged(w0, avg.RatesProvider(nu, pl), cfg.avg_horizon,
                                   make_rng(root, point, rep), frozen, cfg.max_avg_events)
        return ("ok", tuple(values) + (rep, derived_seed(root, point, rep), int(tr.K_final[0, 1])))
    except Exception as exc:  # reported per point, the sweep carries on
        return ("error", tuple(values) + (rep, f"{type(exc).__name__}: {exc}"))


def run_sweep(cfg: RunConfig, root: int, threads: int = 1, base_dir: str = "."):
    """``(header, sorted rows, errors)``; identical for any scheduling or thread count."""
    axes = cfg.sweep_axes()
    if not axes:
        raise ConfigError("missing required key 'sweep' (at least one varying parameter)")
    keys = [k for k, _ in axes]
    if cfg.sweep_target == "averaged-k12" and cfg.n != 2:
        raise ConfigError("sweep_target=averaged-k12 needs n=2")
    reps = cfg.replicates if cfg.sweep_target == "averaged-k12" else 1
    points = list(itertools.product(*(v for _, v in axes)))
    jobs = [(cfg, keys, p, idx, r, root, base_dir) for idx, p in enumerate(points) for r in range(reps)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(_sweep_point, jobs, chunksize=max(1, len(jobs) // (4 * threads))))
    else:
        results = [_sweep_point(j) for j in jobs]
    rows = sorted(r for s, r in results if s == "ok")
    errors = sorted(r for s, r in results if s == "error")
    tail = {"limit-sup-drift": ["sup_eta"], "birth-death": ["classification", "R_plus", "R_minus"],
            "averaged-k12": ["replicate", "seed", "K12_final"]}[cfg.sweep_target]
    return keys + tail, rows, errors


def cmd_sweep(cfg: RunConfig, out: str, seed: int, base_dir: str, threads: int = 1) -> str:
    header, rows, errors = run_sweep(cfg, seed, threads, base_dir)
    _csv(os.path.join(out, "sweep.csv"), header, rows)
    if errors:
        _csv(os.path.join(out, "sweep_errors.csv"), header[: -1] + ["error"], errors)
    return f"sweep: target={cfg.sweep_target} rows={len(rows)} errors={len(errors)}"


_DISPATCH = {
    "simulate-full": cmd_simulate_full,
    "simulate-averaged": cmd_simulate_averaged,
    "analyze-fast": cmd_analyze_fast,
    "birth-death": cmd_birth_death,
    "drift-field": cmd_drift_field,
    "stdp-curve": cmd_stdp_curve,
    "bounds-check": cmd_bounds_check,
    "classify": cmd_classify,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stochastic_stdp", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="key=value configuration file")
    ap.add_argument("--seed", type=int, help="root seed (overrides the config)")
    ap.add_argument("--out", default=".", help="output directory")
    ap.add_argument("--threads", type=int, default=1, help="worker processes for sweeps")
    ap.add_argument("--quiet", action="store_true", help="suppress the summary line")
    return ap


def dispatch(command: str, cfg: RunConfig, out: str = ".", seed: int | None = None, threads: int = 1,
             base_dir: str = ".") -> str:
    os.makedirs(out, exist_ok=True)
    seed = cfg.seed if seed is None else seed
    if seed < 0 or seed >= 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    fn = _DISPATCH[command]
    if command == "sweep":
        return fn(cfg, out, seed, base_dir, threads)
    return fn(cfg, out, seed, base_dir)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text, base_dir = "", "."
        if args.config:
            with open(args.config, encoding="utf-8") as f:
                text = f.read()
            base_dir = os.path.dirname(os.path.abspath(args.config))
        cfg = parse_config(text, os.environ, base_dir)
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        summary = dispatch(args.command, cfg, args.out, args.seed, args.threads, base_dir)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DominanceError, np.linalg.LinAlgError, FloatingPointError, RuntimeError, NumericalError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if not args.quiet:
        print(summary)
    return 0
