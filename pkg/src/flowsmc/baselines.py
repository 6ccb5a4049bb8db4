"""Whole-program baselines: forward rejection-style runs and SMC over the
full control-flow graph.

Both execute the graph directly, so particles sit at different locations:
each sweep iteration advances every unfinished particle by one transition,
grouped by location.  A per-particle transition cap bounds loops; particles
still running at the cap contribute weight zero.  The rejection baseline also
serves as the brute-force oracle behind the sample-set ground truths.
"""
from __future__ import annotations

import numpy as np

from . import dists
from .pcfg import AssignLabel, DrawLabel, Pcfg, Transition, WeightLabel
from .smc import _systematic_resample, _vec, compile_expr


def _compile_graph(g: Pcfg):
    table = []
    for loc, kind in enumerate(g.kinds):
        edges = g.out[loc]
        if kind == "det":
            guard = compile_expr(edges[0].label.formula)
            table.append(("det", guard, edges[0].dst, edges[1].dst))
        elif kind == "final":
            table.append(("final",))
        else:
            t: Transition = edges[0]
            lab = t.label
            if isinstance(lab, AssignLabel):
                table.append(("assign", lab.var, compile_expr(lab.expr), t.dst))
            elif isinstance(lab, DrawLabel):
                fns = tuple(compile_expr(q) for q in lab.params)
                table.append(("draw", lab.var, lab.family, fns, t.dst))
            elif isinstance(lab, WeightLabel):
                table.append(("weight", compile_expr(lab.pred), t.dst))
            else:
                raise TypeError(f"bad label {lab!r}")
    return table


def _forward_sweep(g: Pcfg, n: int, rng, step_cap: int,
                   resample: bool, ess_ratio: float = 0.5):
    """Advance n particles through the whole graph; returns (weights, values, steps)."""
    table = _compile_graph(g)
    loc = np.full(n, g.l_init, dtype=np.int64)
    state = {v: np.full(n, float(g.sigma_init[v])) for v in g.variables}
    w = np.ones(n)
    final = g.l_final
    steps = 0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        while steps < step_cap:
            active = loc != final
            if not active.any():
                break
            weighted = False
            for at in np.unique(loc[active]):
                entry = table[at]
                mask = loc == at
                sub = {v: state[v][mask] for v in state}
                kind = entry[0]
                if kind == "det":
                    guard = np.not_equal(entry[1](sub), 0.0)
                    guard = np.broadcast_to(guard, (int(mask.sum()),))
                    nxt = np.where(guard, entry[2], entry[3])
                    loc[mask] = nxt
                elif kind == "assign":
                    state[entry[1]][mask] = _vec(entry[2](sub), int(mask.sum()))
                    loc[mask] = entry[3]
                elif kind == "draw":
                    params = [fn(sub) for fn in entry[3]]
                    values, bad = dists.draw_batch(entry[2], params, rng,
                                                   int(mask.sum()))
                    state[entry[1]][mask] = values
                    if bad is not None:
                        wm = w[mask]
                        wm[bad] = 0.0
                        w[mask] = wm
                    loc[mask] = entry[4]
                else:  # weight
                    val = _vec(entry[1](sub), int(mask.sum()))
                    ok = np.isfinite(val) & (val >= 0.0)
                    val = np.where(ok, val, 0.0)
                    w[mask] = w[mask] * val
                    loc[mask] = entry[2]
                    weighted = True
            steps += 1
            if resample and weighted:
                total = w.sum()
                if total > 0.0:
                    ess = total * total / float(w @ w)
                    if ess < n * ess_ratio:
                        mean = total / n
                        idx = _systematic_resample(w, rng)
                        loc = loc[idx]
                        for v in state:
                            state[v] = state[v][idx]
                        w = np.full(n, mean)
        unfinished = loc != final
        if unfinished.any():
            w = np.where(unfinished, 0.0, w)
        values = _vec(compile_expr(g.e_final)(state), n)
    bad = ~np.isfinite(values)
    if bad.any():
        w = np.where(bad, 0.0, w)
        values = np.where(bad, 0.0, values)
    return w, values, steps


def baseline_rejection(g: Pcfg, n: int, rng, step_cap: int = 10_000):
    """n independent forward runs; the weight of a run is the product of its
    conditioning values, so zero-weight runs are the rejected ones."""
    w, values, _ = _forward_sweep(g, n, rng, step_cap, resample=False)
    return w, values


def baseline_whole_smc(g: Pcfg, J: int, rng, step_cap: int = 10_000,
                       sweeps: int = 1):
    """SMC over the whole graph: J particles per sweep, systematic resampling
    after conditioning.  Returns pooled (weights, values, live_sweeps)."""
    all_w, all_x = [], []
    live = 0
    for _ in range(sweeps):
        w, x, _ = _forward_sweep(g, J, rng, step_cap, resample=True)
        if (w > 0.0).any():
            live += 1
        all_w.append(w)
        all_x.append(x)
    return np.concatenate(all_w), np.concatenate(all_x), live
