"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -v` (add -s to see the lines on
success).  Criterion 8's geometric-program half is expected red: the per-pull
weight adjustment is only asymptotically consistent, and the scheduler's
exploration floor keeps pull frequencies far from likelihood-proportional at
any desk-scale budget (see notes on the run report and the repository
README).  Everything else is green.
"""
import math
import time

import numpy as np
import pytest

from flowsmc import benchmarks
from flowsmc.baselines import baseline_rejection, baseline_whole_smc
from flowsmc.bandit import run_finite
from flowsmc.cli import main as cli_main
from flowsmc.condprop import cdpg, is_blacklisted
from flowsmc.dists import DistInstance, restrict
from flowsmc.metrics import ground_truth, kl_divergence, summarize
from flowsmc.pcfg import DrawLabel, FlowEnumerator, straight_line
from flowsmc.sampler import RunConfig, pull_arm, run
from flowsmc.smc import estimate_posterior_mc

from conftest import flow_program, nth_flow


def report(criterion: str, ok: bool, detail: str):
    print(f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"criterion {criterion}: {detail}"


def test_criterion_1_coin_posterior():
    t0 = time.perf_counter()
    g = benchmarks.build("coin", 0.36)
    gt = ground_truth("coin", 0.36)
    hits = 0
    kls = []
    for seed in range(10):
        result = run(g, RunConfig(budget=502, particles=100, seed=seed))
        assert result.pool.size >= 50_000
        kl = kl_divergence(gt, result.values, result.weights)
        kls.append(kl)
        hits += kl < 0.005
    elapsed = time.perf_counter() - t0
    report("1 coin posterior", hits >= 9 and elapsed < 120.0,
           f"KL<0.005 in {hits}/10 seeds, max KL {max(kls):.2e}, {elapsed:.1f}s")


def test_criterion_2_flow_likelihoods():
    t0 = time.perf_counter()
    g = benchmarks.build("geomIt", 0.5, 0)
    cfg = RunConfig(budget=1, particles=100)
    rng = np.random.default_rng(42)
    cursor = FlowEnumerator(g)
    worst = 0.0
    for n in range(7):
        flow = cursor.next_complete()
        observed = np.array(
            [pull_arm(g, flow, cfg, rng).evidence for _ in range(100)])
        truth = 0.5 ** n * 0.5
        p_hat = observed.mean()
        se = observed.std(ddof=1) / 10.0
        assert abs(p_hat - truth) <= 3 * se + 1e-9, (n, p_hat, truth, se)
        worst = max(worst, abs(p_hat - truth))
    elapsed = time.perf_counter() - t0
    report("2 flow likelihoods", elapsed < 300.0,
           f"7 flows x 100 pulls, worst |p_hat-truth| {worst:.2e}, {elapsed:.1f}s")


CORPUS = [
    ("condDemo", (), 1), ("condDemo", (), 2), ("condDemo", (), 3),
    ("obsLoop", (3, 2), 2), ("obsLoop", (3, 2), 3), ("obsLoop", (3, 2), 4),
    ("obsLoop", (3, 5), 5), ("obsLoop", (3, 5), 6),
    ("unifCd", (2,), 2), ("unifCd", (2,), 3), ("unifCd", (3,), 1),
    ("unifCd2", (2,), 2), ("unifCd2", (2,), 3),
    ("poisCd", (3, 2), 2), ("poisCd", (3, 2), 3),
    ("poisCd2", (3, 2), 2), ("poisCd2", (3, 2), 3),
    ("geomIt", (0.5, 2), 2), ("geomIt", (0.5, 2), 3), ("geomIt", (0.5, 2), 4),
    ("coin", (0.36,), 1), ("coin", (0.36,), 2),
]


def test_criterion_3_propagation_soundness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    n = 100_000
    bins = 16
    bin_checks = 0
    for name, params, iters in CORPUS:
        plain = flow_program(name, params, iters)
        optimized = cdpg(plain)
        a = estimate_posterior_mc(plain, n, rng)
        b = estimate_posterior_mc(optimized, n, rng)
        tol = 4 * math.hypot(a.evidence_se, b.evidence_se)
        assert abs(a.evidence - b.evidence) <= tol + 1e-12, (name, params, iters)
        if a.evidence == 0.0 and b.evidence == 0.0:
            continue  # statically dead flow: nothing to bin
        wa, wb = a.weights.sum(), b.weights.sum()
        live = np.concatenate([a.values[a.weights > 0], b.values[b.weights > 0]])
        lo, hi = live.min(), live.max() + 1e-9
        edges = np.linspace(lo, hi, bins + 1)
        for k in range(bins):
            ina = (a.values >= edges[k]) & (a.values < edges[k + 1])
            inb = (b.values >= edges[k]) & (b.values < edges[k + 1])
            pa = a.weights[ina].sum() / wa
            pb = b.weights[inb].sum() / wb
            sea = np.sqrt(np.sum((a.weights * (ina - pa)) ** 2)) / wa
            seb = np.sqrt(np.sum((b.weights * (inb - pb)) ** 2)) / wb
            assert abs(pa - pb) <= 4 * math.hypot(sea, seb) + 1e-9, \
                (name, params, iters, k)
            bin_checks += 1
    elapsed = time.perf_counter() - t0
    report("3 propagation soundness",
           len(CORPUS) >= 20 and bin_checks > 0,
           f"{len(CORPUS)} programs, {bin_checks} bin comparisons, "
           f"0 failures, {elapsed:.1f}s")


def test_criterion_4_domain_restriction_exact():
    optimized = flow_program("condDemo", (), 3, optimized=True)
    head = optimized.steps[0]
    assert isinstance(head, DrawLabel) and head.restriction is not None
    assert head.restriction.mass == 3 / 20
    rd = restrict(DistInstance("uniform", (0.0, 20.0)), head.restriction.admitted)
    assert rd.mass == 3 / 20
    draws = rd.sample(np.random.default_rng(5), size=100_000)
    inside = ((draws > 7.0) & (draws < 10.0)).all()
    report("4 domain restriction", bool(inside),
           f"head mass {head.restriction.mass!r} == 3/20, 1e5 draws in (7,10)")


def test_criterion_5_logical_blacklisting():
    details = []
    for t0 in (10, 15, 20):
        g = benchmarks.build("unifCd", t0)
        cursor = FlowEnumerator(g)
        for iters in range(t0 + 2):
            flow = cursor.next_complete()
            dead = is_blacklisted(cdpg(straight_line(g, flow)))
            assert dead == (iters < t0), (t0, iters)
        details.append(f"unifCd({t0}): first live flow at {t0} iterations")
    g = benchmarks.build("coin", 0.36)
    verdicts = [is_blacklisted(cdpg(straight_line(g, nth_flow(g, i))))
                for i in range(4)]
    assert verdicts == [True, False, False, True]  # both-heads / both-tails dead
    report("5 logical blacklisting", True,
           "; ".join(details) + "; coin agreeing flows dead")


def test_criterion_6_finite_armed_convergence():
    t0 = time.perf_counter()
    p = np.array([0.4, 0.25, 0.2, 0.1, 0.05])
    target = p / p.sum()
    checkpoints = [1_000, 10_000, 100_000]
    devs = np.zeros((20, 3))
    for seed in range(20):
        rng = np.random.default_rng(seed)
        oracles = [lambda r, m=m: float(r.random() < m) for m in p]
        out = run_finite(oracles, checkpoints[-1], rng, checkpoints=checkpoints)
        for j, t in enumerate(checkpoints):
            freq = out["checkpoints"][t] / t
            devs[seed, j] = np.abs(freq - target).max()
    avg = devs.mean(axis=0)
    elapsed = time.perf_counter() - t0
    ok = bool(avg[0] >= avg[1] >= avg[2] and avg[2] < 0.03 and elapsed < 180.0)
    report("6 finite-armed convergence", ok,
           f"avg max dev {avg[0]:.4f} -> {avg[1]:.4f} -> {avg[2]:.4f}, "
           f"{elapsed:.1f}s")


def test_criterion_7_rare_observation_advantage():
    t0 = time.perf_counter()
    g = benchmarks.build("unifCd", 20)
    w, _ = baseline_rejection(g, 1_000_000, np.random.default_rng(7))
    accepted = int(np.count_nonzero(w > 0))
    assert accepted == 0  # pinned seed; the rate-level expectation is ~1.9
    _, _, live = baseline_whole_smc(g, 100, np.random.default_rng(0), sweeps=100)
    assert live < 1  # < 1% of sweeps end with a live particle
    result = run(g, RunConfig(budget=100, particles=100, seed=1,
                              weight_mode="importance"))
    assert result.pool.size >= 5_000
    kl = kl_divergence(ground_truth("unifCd", 20), result.values, result.weights)
    elapsed = time.perf_counter() - t0
    report("7 rare-observation advantage",
           kl < 0.15 and elapsed < 600.0,
           f"rejection 0/1e6, whole-program SMC {live}/100 live sweeps, "
           f"hierarchical KL {kl:.4f} on {result.pool.size} samples, "
           f"{elapsed:.1f}s")


@pytest.mark.parametrize("name,params,budget", [
    ("coin", (0.36,), 500),
    ("geomIt", (0.5, 5), 500),
], ids=["coin(0.36)", "geomIt(0.5,5)"])
def test_criterion_8_weight_mode_equivalence(name, params, budget):
    # KNOWN RED for geomIt(0.5,5): the per-pull division by the empirical
    # likelihood is consistent only when pull frequencies converge to the
    # likelihood proportions, and the exploration floor keeps them far from
    # that at any desk-scale budget once expansion has flooded the arm set.
    # The criterion is asserted as stated; see the README's known-red note.
    g = benchmarks.build(name, *params)
    gt = ground_truth(name, *params)
    kls = {}
    for mode in ("per-arm", "importance"):
        result = run(g, RunConfig(budget=budget, particles=100, seed=11,
                                  weight_mode=mode))
        assert result.pool.size >= 50_000
        kls[mode] = kl_divergence(gt, result.values, result.weights)
    gap = abs(kls["per-arm"] - kls["importance"])
    report(f"8 weight-mode equivalence [{name}]", gap < 0.01,
           f"per-arm KL {kls['per-arm']:.4f}, importance KL "
           f"{kls['importance']:.4f}, gap {gap:.4f}")


def test_criterion_9_determinism(tmp_path):
    src = tmp_path / "coin.prob"
    src.write_text(benchmarks.source("coin", 0.36))
    blobs = []
    for tag in ("a", "b"):
        out = tmp_path / f"samples_{tag}.csv"
        rep = tmp_path / f"report_{tag}.json"
        code = cli_main(["run", str(src), "--budget", "120", "--particles",
                         "50", "--seed", "9", "--out", str(out), "--report",
                         str(rep), "--no-timing"])
        assert code == 0
        blobs.append((out.read_bytes(), rep.read_bytes()))
    ok = blobs[0] == blobs[1]
    report("9 determinism", ok,
           f"samples.csv and report.json byte-identical across reruns "
           f"({len(blobs[0][0])} + {len(blobs[0][1])} bytes)")


def test_criterion_10_obs_loop_feasibility():
    t0 = time.perf_counter()
    g = benchmarks.build("obsLoop", 3, 10)
    result = run(g, RunConfig(budget=150, particles=100, seed=2,
                              weight_mode="importance"))
    mean, std = summarize(result.values, result.weights)
    elapsed = time.perf_counter() - t0
    report("10 obsLoop feasibility", abs(mean - 10.1) <= 0.6,
           f"weighted mean {mean:.3f} (target 10.1 +/- 0.6), std {std:.3f}, "
           f"{result.pool.size} samples, {elapsed:.1f}s")
