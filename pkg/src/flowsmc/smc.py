"""Execution of straight-line programs under the weighted semantics.

`run_smc` advances a population of particles through the program, one
transition at a time, multiplying weights at conditioning steps.  When the
effective sample size falls below half the population after a conditioning
step, particles are resampled systematically and every weight is reset to the
population mean, so the running weights always stay on the scale of the
weighted semantics and the evidence estimate is simply the mean final weight
(with no resampling it reduces to the plain average).

All particles advance in lockstep, so the state is a dict of arrays and every
transition is one vectorized operation.  `estimate_posterior_mc` is the same
engine with resampling off: n independent single-particle runs, the unbiased
brute-force oracle used to cross-check the symbolic pass.

Evaluation faults (division by zero, invalid distribution parameters,
negative weights) kill the affected particle and are counted in diagnostics
rather than raised.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import dists
from .pcfg import AssignLabel, DrawLabel, StraightLineProgram, WeightLabel
from .syntax import (
    BinaryOp, Const, Expr, Indicator, ProbError, UnaryOp, Var, fold_expr,
)


class EvalError(ProbError):
    pass


# --------------------------------------------------------------------------
# expression compilation


def _num(v):
    if isinstance(v, np.ndarray):
        return v if v.dtype == np.float64 else v.astype(np.float64)
    if isinstance(v, (bool, np.bool_)):
        return float(v)
    return v


def _vec(v, n: int):
    v = _num(v)
    if isinstance(v, np.ndarray):
        return v
    return np.full(n, float(v))


def compile_expr(e: Expr) -> Callable:
    """Closure evaluating `e` on a state dict of floats or same-length arrays."""
    if isinstance(e, Var):
        name = e.name

        def _var(st):
            try:
                return st[name]
            except KeyError:
                raise EvalError(f"unbound variable '{name}'") from None

        return _var
    if isinstance(e, Const):
        value = float(e.value)
        return lambda st: value
    if isinstance(e, Indicator):
        f = compile_expr(e.formula)
        return lambda st: _num(np.not_equal(f(st), 0.0))
    if isinstance(e, UnaryOp):
        f = compile_expr(e.operand)
        if e.op == "-":
            return lambda st: -_num(f(st))
        if e.op == "!":
            return lambda st: np.logical_not(np.not_equal(f(st), 0.0))
        raise EvalError(f"unknown unary operator '{e.op}'")
    if isinstance(e, BinaryOp):
        lf = compile_expr(e.left)
        rf = compile_expr(e.right)
        op = e.op
        if op == "+":
            return lambda st: _num(lf(st)) + _num(rf(st))
        if op == "-":
            return lambda st: _num(lf(st)) - _num(rf(st))
        if op == "*":
            return lambda st: _num(lf(st)) * _num(rf(st))
        if op == "/":
            def _div(st):
                denom = _num(rf(st))
                if not isinstance(denom, np.ndarray) and denom == 0.0:
                    raise EvalError("division by zero")
                return _num(lf(st)) / denom

            return _div
        if op == "<":
            return lambda st: np.less(_num(lf(st)), _num(rf(st)))
        if op == "<=":
            return lambda st: np.less_equal(_num(lf(st)), _num(rf(st)))
        if op == "=":
            return lambda st: np.equal(_num(lf(st)), _num(rf(st)))
        if op == "!=":
            return lambda st: np.not_equal(_num(lf(st)), _num(rf(st)))
        if op == ">=":
            return lambda st: np.greater_equal(_num(lf(st)), _num(rf(st)))
        if op == ">":
            return lambda st: np.greater(_num(lf(st)), _num(rf(st)))
        if op == "&&":
            return lambda st: np.logical_and(np.not_equal(lf(st), 0.0),
                                             np.not_equal(rf(st), 0.0))
        if op == "||":
            return lambda st: np.logical_or(np.not_equal(lf(st), 0.0),
                                            np.not_equal(rf(st), 0.0))
        raise EvalError(f"unknown binary operator '{op}'")
    raise TypeError(f"not an expression: {e!r}")


def eval_expr(e: Expr, state) -> float:
    """Strict evaluation under a memory state; comparisons yield booleans."""
    v = compile_expr(e)(state)
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, np.ndarray):
        return v
    return float(v)


# --------------------------------------------------------------------------
# scalar particles (reference semantics, used by tests and diagnostics)


@dataclass
class Particle:
    state: dict
    weight: float = 1.0
    alive: bool = True
    note: Optional[str] = None


def step(p: Particle, label, rng) -> Particle:
    """One transition of the weighted semantics on a single particle."""
    if not p.alive:
        return p
    try:
        if isinstance(label, AssignLabel):
            v = eval_expr(label.expr, p.state)
            st = dict(p.state)
            st[label.var] = float(v)
            return Particle(st, p.weight, True)
        if isinstance(label, DrawLabel):
            if label.restriction is not None:
                params = tuple(float(eval_expr(q, p.state)) for q in label.params)
                rd = dists.restrict(dists.DistInstance(label.family, params),
                                    label.restriction.admitted)
                v = rd.sample(rng)
            else:
                params = tuple(float(eval_expr(q, p.state)) for q in label.params)
                v = dists.sample(dists.DistInstance(label.family, params), rng)
            st = dict(p.state)
            st[label.var] = float(v)
            return Particle(st, p.weight, True)
        if isinstance(label, WeightLabel):
            v = float(_num(eval_expr(label.pred, p.state)))
            if not np.isfinite(v) or v < 0.0:
                return Particle(dict(p.state), 0.0, False, "bad weight value")
            return Particle(dict(p.state), p.weight * v, True)
    except ProbError as err:
        return Particle(dict(p.state), 0.0, False, str(err))
    raise TypeError(f"not a straight-line label: {label!r}")


# --------------------------------------------------------------------------
# vectorized runs


@dataclass
class SmcResult:
    weights: np.ndarray
    values: np.ndarray
    evidence: float
    stage_means: list = field(default_factory=list)
    ess_log: list = field(default_factory=list)
    resample_count: int = 0
    timed_out: bool = False
    anomalies: int = 0

    @property
    def evidence_se(self) -> float:
        n = len(self.weights)
        if n < 2:
            return 0.0
        return float(np.std(self.weights, ddof=1) / np.sqrt(n))


def _compile_plan(s: StraightLineProgram) -> list:
    plan = []
    for lab in s.steps:
        if isinstance(lab, AssignLabel):
            plan.append(("assign", lab.var, compile_expr(lab.expr)))
        elif isinstance(lab, DrawLabel):
            if lab.restriction is not None:
                folded = [fold_expr(q, {}) for q in lab.params]
                if not all(isinstance(q, Const) for q in folded):
                    raise EvalError("restricted draw with non-constant parameters")
                params = tuple(q.value for q in folded)
                if lab.restriction.mass <= 0.0:
                    plan.append(("dead_draw", lab.var, None))
                else:
                    rd = dists.restrict(dists.DistInstance(lab.family, params),
                                        lab.restriction.admitted)
                    plan.append(("rdraw", lab.var, rd))
            else:
                fns = tuple(compile_expr(q) for q in lab.params)
                plan.append(("draw", lab.var, (lab.family, fns)))
        elif isinstance(lab, WeightLabel):
            plan.append(("weight", None, compile_expr(lab.pred)))
        else:
            raise TypeError(f"not a straight-line label: {lab!r}")
    return plan


def _systematic_resample(w: np.ndarray, rng) -> np.ndarray:
    n = len(w)
    positions = (rng.random() + np.arange(n)) / n
    cdf = np.cumsum(w)
    cdf /= cdf[-1]
    return np.searchsorted(cdf, positions)


def run_smc(s: StraightLineProgram, J: int, rng,
            timeout_ms: Optional[float] = 2000.0,
            resample: bool = True,
            ess_ratio: float = 0.5) -> SmcResult:
    """Draw J weighted samples of the return expression; the evidence estimate
    is the mean final weight (stage means are folded back in at resampling)."""
    if J < 1:
        raise ValueError("need at least one particle")
    plan = _compile_plan(s)
    state = {v: np.full(J, float(s.sigma_init[v])) for v in s.variables}
    w = np.ones(J)
    res = SmcResult(weights=w, values=np.zeros(J), evidence=0.0)
    deadline = None
    if timeout_ms:
        deadline = time.perf_counter() + timeout_ms / 1000.0

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for kind, var, payload in plan:
            if kind == "assign":
                state[var] = _vec(payload(state), J)
            elif kind == "draw":
                family, fns = payload
                params = [fn(state) for fn in fns]
                values, bad = dists.draw_batch(family, params, rng, J)
                state[var] = values
                if bad is not None:
                    res.anomalies += int(np.count_nonzero(bad & (w > 0)))
                    w[bad] = 0.0
            elif kind == "rdraw":
                state[var] = np.asarray(payload.sample(rng, size=J), dtype=float)
            elif kind == "dead_draw":
                w[:] = 0.0
            else:  # weight
                val = _vec(payload(state), J)
                ok = np.isfinite(val) & (val >= 0.0)
                if not ok.all():
                    res.anomalies += int(np.count_nonzero(~ok & (w > 0)))
                    val = np.where(ok, val, 0.0)
                w *= val
                total = w.sum()
                if resample and total > 0.0:
                    ess = total * total / float(w @ w)
                    res.ess_log.append(float(ess))
                    if ess < J * ess_ratio:
                        mean = total / J
                        idx = _systematic_resample(w, rng)
                        for name in state:
                            state[name] = state[name][idx]
                        w = np.full(J, mean)
                        res.stage_means.append(float(mean))
                        res.resample_count += 1
            if deadline is not None and time.perf_counter() > deadline:
                res.timed_out = True
                break

        values = _vec(compile_expr(s.e_final)(state), J)
    bad_vals = ~np.isfinite(values)
    if bad_vals.any():
        res.anomalies += int(np.count_nonzero(bad_vals & (w > 0)))
        w = np.where(bad_vals, 0.0, w)
        values = np.where(bad_vals, 0.0, values)
    res.weights = w
    res.values = values
    res.evidence = float(w.mean())
    return res


def estimate_posterior_mc(s: StraightLineProgram, n: int, rng) -> SmcResult:
    """n independent single-particle runs with no resampling; the mean total
    weight is an unbiased evidence estimate."""
    return run_smc(s, n, rng, timeout_ms=None, resample=False)
