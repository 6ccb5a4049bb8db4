"""Epsilon-greedy scheduler for sampling arms in proportion to their unknown
likelihoods, learned as running means of noisy pulls.

Each round does one of three things: expand (adopt a fresh arm while the
known-arm count is below t^(2/3)), explore (uniform over known arms, with
probability eps_t = min(1, (k ln t / t)^(1/3))), or exploit (pick an arm in
proportion to its empirical likelihood).  When every empirical likelihood is
still zero the proportional pick falls back to uniform, which keeps the round
total where the literal proportional rule would divide by zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


def epsilon(t: int, k_known: int) -> float:
    """Exploration rate min(1, (k ln t / t)^(1/3)); natural log, 0 at t = 1."""
    if t < 1:
        raise ValueError("rounds are counted from 1")
    if k_known <= 0:
        return 0.0
    return min(1.0, (k_known * math.log(t) / t) ** (1.0 / 3.0))


@dataclass
class ArmState:
    key: object
    p_hat: float = 0.0  # running mean of observed likelihoods
    pulls: int = 0


@dataclass
class ArmRegistry:
    arms: dict = field(default_factory=dict)  # key -> ArmState, insertion order
    t: int = 1
    fresh_exhausted: bool = False

    @property
    def known(self) -> int:
        return len(self.arms)

    def add(self, key) -> ArmState:
        if key in self.arms:
            raise ValueError(f"arm {key!r} already known")
        state = ArmState(key)
        self.arms[key] = state
        return state

    def snapshot(self) -> list:
        return [(a.key, a.p_hat, a.pulls) for a in self.arms.values()]


@dataclass(frozen=True)
class Expand:
    pass


@dataclass(frozen=True)
class RandomPick:
    key: object


@dataclass(frozen=True)
class ProportionalPick:
    key: object


def _pick_known(reg: ArmRegistry, rng):
    keys = list(reg.arms.keys())
    if rng.random() < epsilon(reg.t, reg.known):
        return RandomPick(keys[rng.integers(len(keys))])
    p = np.array([reg.arms[k].p_hat for k in keys])
    total = p.sum()
    if total <= 0.0:
        return ProportionalPick(keys[rng.integers(len(keys))])
    idx = int(np.searchsorted(np.cumsum(p) / total, rng.random(), side="right"))
    return ProportionalPick(keys[min(idx, len(keys) - 1)])


def decide(reg: ArmRegistry, rng):
    """Choose this round's action.  Expansion applies while the known-arm
    count is below t^(2/3) and fresh arms remain; with no known arms the only
    possible action is expansion."""
    if not reg.fresh_exhausted and reg.known < reg.t ** (2.0 / 3.0):
        return Expand()
    if reg.known == 0:
        return Expand()
    return _pick_known(reg, rng)


def decide_known(reg: ArmRegistry, rng):
    """Random/proportional choice only, for rounds where expansion failed."""
    if reg.known == 0:
        raise ValueError("no known arms to pick from")
    return _pick_known(reg, rng)


def update(reg: ArmRegistry, key, p: float) -> None:
    """Record an observed likelihood: the empirical likelihood stays the mean
    of all observations for the arm; the round counter advances."""
    if p < 0.0:
        raise ValueError("observed likelihood must be nonnegative")
    arm = reg.arms[key]
    arm.p_hat = (arm.p_hat * arm.pulls + p) / (arm.pulls + 1)
    arm.pulls += 1
    reg.t += 1


def run_finite(oracles, budget: int, rng,
               checkpoints: Optional[list] = None) -> dict:
    """Finite-arm sampling: all arms known from the start, no expansion.

    `oracles` is a sequence of callables rng -> observed likelihood in [0, 1]
    with mean equal to the arm's true likelihood.  Returns the pulled-arm
    sequence plus visit-count snapshots at the requested checkpoint rounds.
    """
    K = len(oracles)
    if K == 0 or budget < 1:
        raise ValueError("need at least one arm and one round")
    p_hat = np.zeros(K)
    pulls = np.zeros(K, dtype=np.int64)
    history = np.empty(budget, dtype=np.int64)
    snaps = {}
    marks = sorted(set(checkpoints or []))
    for t in range(1, budget + 1):
        eps = epsilon(t, K)
        if rng.random() < eps:
            k = int(rng.integers(K))
        else:
            total = p_hat.sum()
            if total <= 0.0:
                k = int(rng.integers(K))
            else:
                k = int(np.searchsorted(np.cumsum(p_hat) / total, rng.random(),
                                        side="right"))
                k = min(k, K - 1)
        obs = float(oracles[k](rng))
        p_hat[k] = (p_hat[k] * pulls[k] + obs) / (pulls[k] + 1)
        pulls[k] += 1
        history[t - 1] = k
        if marks and t == marks[0]:
            snaps[t] = pulls.copy()
            marks.pop(0)
    return {"history": history, "pulls": pulls, "p_hat": p_hat,
            "checkpoints": snaps}
