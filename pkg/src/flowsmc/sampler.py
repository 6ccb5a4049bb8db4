"""The hierarchical sampler: flow enumeration and blacklisting on top,
per-flow SMC underneath, a weighted sample pool accumulating the output.

Each round the scheduler either adopts a freshly enumerated control flow or
re-pulls a known one.  A candidate flow is converted to its straight-line
program, simplified by condition propagation, and discarded outright when the
simplified program is statically dead; blacklisted candidates never become
arms, never advance the round counter, and are capped per round so one round
cannot stall on a long run of dead flows.  A successful pull appends its J
weighted samples to the pool and feeds the SMC evidence estimate back to the
scheduler as the flow's observed likelihood.

After the round budget is spent the pooled weights are adjusted once:
per-arm mode divides each weight by its flow's empirical likelihood (the
pull frequency already accounts for it); importance mode rescales each
flow's block to its empirical likelihood.  Pulls are strictly sequential;
a single seeded generator drives the whole run, so identical configurations
reproduce identical pools bit for bit (assuming no SMC run hits its timeout).
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import bandit
from .condprop import cdpg, is_blacklisted
from .pcfg import ControlFlow, FlowEnumerator, Pcfg, StraightLineProgram, straight_line
from .smc import run_smc


@dataclass(frozen=True)
class RunConfig:
    budget: int = 1000
    particles: int = 100
    timeout_ms: float = 2000.0
    weight_mode: str = "per-arm"  # "per-arm" | "importance"
    seed: int = 0
    max_flow_len: int = 400
    expand_attempts: int = 64

    def __post_init__(self):
        if self.budget < 1 or self.particles < 1:
            raise ValueError("budget and particle count must be positive")
        if self.weight_mode not in ("per-arm", "importance"):
            raise ValueError(f"unknown weight mode {self.weight_mode!r}")


@dataclass
class PoolBlock:
    """One pull's worth of samples: J raw weights and return values."""

    flow_id: str
    weights: np.ndarray
    values: np.ndarray


class SamplePool:
    def __init__(self):
        self.blocks: list = []
        self.weight_sums: dict = {}  # flow_id -> sum of raw weights

    def append(self, flow_id: str, weights: np.ndarray, values: np.ndarray):
        self.blocks.append(PoolBlock(flow_id, weights, values))
        self.weight_sums[flow_id] = self.weight_sums.get(flow_id, 0.0) \
            + float(weights.sum())

    @property
    def size(self) -> int:
        return sum(len(b.weights) for b in self.blocks)

    def zero_weight_fraction(self) -> float:
        if not self.blocks:
            return 0.0
        zeros = sum(int(np.count_nonzero(b.weights == 0.0)) for b in self.blocks)
        return zeros / self.size


@dataclass
class ArmRuntime:
    flow: ControlFlow
    program: StraightLineProgram  # propagated straight-line program
    timeouts: int = 0


BLACKLISTED = "blacklisted"


def prepare_flow(g: Pcfg, flow: ControlFlow):
    """Propagated straight-line program for a flow, or BLACKLISTED."""
    program = cdpg(straight_line(g, flow))
    if is_blacklisted(program):
        return BLACKLISTED
    return program


def pull_arm(g: Pcfg, flow: ControlFlow, cfg: RunConfig, rng,
             prepared: Optional[StraightLineProgram] = None):
    """One pull of a control-flow arm: SMC on its propagated program.

    Returns BLACKLISTED for statically dead flows, else the SmcResult whose
    `evidence` is the observed flow likelihood.
    """
    program = prepared if prepared is not None else prepare_flow(g, flow)
    if program is BLACKLISTED:
        return BLACKLISTED
    return run_smc(program, cfg.particles, rng, timeout_ms=cfg.timeout_ms)


@dataclass
class RunResult:
    weights: np.ndarray  # adjusted
    values: np.ndarray
    flow_ids: list
    pool: SamplePool
    registry: bandit.ArmRegistry
    report: dict


def adjust_weights(pool: SamplePool, reg: bandit.ArmRegistry, mode: str):
    """Final reweighting pass over the pool.

    per-arm: (w / p_hat_k, x); importance: (p_hat_k * w / w_sum_k, x).
    Blocks whose divisor is zero are dropped and counted.
    """
    weights, values, flow_ids = [], [], []
    dropped = 0
    for block in pool.blocks:
        arm = reg.arms.get(block.flow_id)
        if mode == "per-arm":
            divisor = arm.p_hat if arm is not None else 0.0
        elif mode == "importance":
            divisor = pool.weight_sums.get(block.flow_id, 0.0)
        else:
            raise ValueError(f"unknown weight mode {mode!r}")
        if divisor <= 0.0:
            dropped += len(block.weights)
            continue
        if mode == "per-arm":
            adjusted = block.weights / divisor
        else:
            adjusted = arm.p_hat * block.weights / divisor
        weights.append(adjusted)
        values.append(block.values)
        flow_ids.extend([block.flow_id] * len(block.weights))
    if weights:
        w = np.concatenate(weights)
        x = np.concatenate(values)
    else:
        w = np.zeros(0)
        x = np.zeros(0)
    return w, x, flow_ids, dropped


def run(g: Pcfg, cfg: RunConfig, collect_timing: bool = True) -> RunResult:
    """Run the full hierarchical sampler for cfg.budget rounds."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(cfg.seed)
    enum = FlowEnumerator(g, max_len=cfg.max_flow_len)
    reg = bandit.ArmRegistry()
    pool = SamplePool()
    arms: dict = {}  # flow_id -> ArmRuntime
    blacklisted_count = 0
    blacklisted_examples: list = []
    timeouts = 0
    rounds = 0
    resampled_stages = 0
    anomalies = 0

    def try_expand() -> Optional[str]:
        nonlocal blacklisted_count
        for _ in range(cfg.expand_attempts):
            flow = enum.next_complete()
            if flow is None:
                reg.fresh_exhausted = True
                return None
            prepared = prepare_flow(g, flow)
            if prepared is BLACKLISTED:
                blacklisted_count += 1
                if len(blacklisted_examples) < 10:
                    blacklisted_examples.append(flow.flow_id)
                continue
            arms[flow.flow_id] = ArmRuntime(flow, prepared)
            reg.add(flow.flow_id)
            return flow.flow_id
        return None

    while reg.t <= cfg.budget:
        decision = bandit.decide(reg, rng)
        key: Optional[str] = None
        if isinstance(decision, bandit.Expand):
            key = try_expand()
            if key is None:
                if reg.known == 0:
                    if enum.exhausted:
                        break  # nothing pullable at all
                    continue  # burn more enumeration work next round
                key = bandit.decide_known(reg, rng).key
        else:
            key = decision.key

        arm = arms[key]
        result = run_smc(arm.program, cfg.particles, rng, timeout_ms=cfg.timeout_ms)
        if result.timed_out:
            arm.timeouts += 1
            timeouts += 1
        resampled_stages += result.resample_count
        anomalies += result.anomalies
        pool.append(key, result.weights, result.values)
        bandit.update(reg, key, result.evidence)
        rounds += 1

    weights, values, flow_ids, dropped = adjust_weights(pool, reg, cfg.weight_mode)
    report = {
        "config": {
            "budget": cfg.budget,
            "particles": cfg.particles,
            "timeout_ms": cfg.timeout_ms,
            "weight_mode": cfg.weight_mode,
            "seed": cfg.seed,
            "max_flow_len": cfg.max_flow_len,
            "expand_attempts": cfg.expand_attempts,
        },
        "status": "ok" if pool.size else "empty",
        "rounds_completed": rounds,
        "arms": [
            {
                "flow": key,
                "p_hat": reg.arms[key].p_hat,
                "pulls": reg.arms[key].pulls,
                "weight_sum": pool.weight_sums.get(key, 0.0),
                "timeouts": arms[key].timeouts,
            }
            for key in reg.arms
        ],
        "blacklisted": {
            "count": blacklisted_count,
            "examples": blacklisted_examples,
        },
        "pool": {
            "size": pool.size,
            "zero_weight_fraction": pool.zero_weight_fraction(),
            "dropped_by_adjustment": dropped,
            "resampled_stages": resampled_stages,
            "eval_anomalies": anomalies,
        },
        "timeouts": timeouts,
        "enumeration": {
            "flows_examined": enum.emitted,
            "exhausted": enum.exhausted,
            "hit_length_cap": enum.hit_length_cap,
        },
    }
    if collect_timing:
        report["timing"] = {"wall_ms": (time.perf_counter() - t0) * 1000.0}
    return RunResult(weights, values, flow_ids, pool, reg, report)
