import numpy as np
import pytest

from flowsmc import benchmarks
from flowsmc.frontend import desugar, parse_source
from flowsmc.pcfg import build_pcfg
from flowsmc.sampler import (
    BLACKLISTED, RunConfig, SamplePool, adjust_weights, pull_arm, run,
)
from flowsmc.bandit import ArmRegistry, update
from flowsmc.metrics import ground_truth, kl_divergence, summarize

from conftest import nth_flow


def test_config_validation():
    with pytest.raises(ValueError):
        RunConfig(budget=0)
    with pytest.raises(ValueError):
        RunConfig(weight_mode="magic")


def test_pull_arm_blacklisted_flows():
    g = benchmarks.build("coin", 0.36)
    rng = np.random.default_rng(0)
    cfg = RunConfig(budget=1, particles=100)
    assert pull_arm(g, nth_flow(g, 0), cfg, rng) is BLACKLISTED  # both heads
    assert pull_arm(g, nth_flow(g, 3), cfg, rng) is BLACKLISTED  # both tails


def test_pull_arm_live_coin_flow():
    g = benchmarks.build("coin", 0.36)
    rng = np.random.default_rng(0)
    res = pull_arm(g, nth_flow(g, 1), RunConfig(budget=1, particles=256), rng)
    assert res is not BLACKLISTED
    assert res.evidence == pytest.approx(0.2304, abs=1e-15)
    assert (res.values == 1.0).all()


def test_pull_arm_unifcd_shallow_flow_blacklisted():
    g = benchmarks.build("unifCd", 10)
    rng = np.random.default_rng(0)
    assert pull_arm(g, nth_flow(g, 9), RunConfig(), rng) is BLACKLISTED


def test_blacklisted_flows_never_reach_pool():
    g = benchmarks.build("coin", 0.36)
    result = run(g, RunConfig(budget=200, seed=8))
    live = {"0-1-2-4-5-7-8-9", "0-1-3-4-5-6-8-9"}
    assert set(result.pool.weight_sums) <= live
    assert result.report["blacklisted"]["count"] == 2


def test_coin_pool_balance_across_seeds():
    g = benchmarks.build("coin", 0.36)
    ratios = []
    for seed in range(10):
        result = run(g, RunConfig(budget=2_000, particles=10, seed=seed))
        pulls = [a.pulls for a in result.registry.arms.values()]
        assert len(pulls) == 2
        ratios.append(max(pulls) / min(pulls))
    assert np.mean(ratios) < 1.05


def test_geom_flow_likelihoods_converge():
    g = benchmarks.build("geomIt", 0.5, 0)
    result = run(g, RunConfig(budget=400, particles=20, seed=5))
    for arm in result.registry.arms.values():
        n = (len(arm.key.split("-")) - 3) // 4  # loop iterations in the id
        if arm.pulls >= 50:
            assert arm.p_hat == pytest.approx(0.5 ** n * 0.5, abs=1e-12)


def test_single_flow_program_degenerates_to_smc():
    g = build_pcfg(parse_source(
        "double x := 0.0;\nx ~ normal(0, 1);\nweight(0.5);\nreturn x;"))
    result = run(g, RunConfig(budget=50, particles=40, seed=1))
    assert len(result.registry.arms) == 1
    (arm,) = result.registry.arms.values()
    assert arm.pulls == 50
    assert arm.p_hat == pytest.approx(0.5, abs=1e-12)
    # per-arm adjustment cancels the constant weight exactly
    assert result.weights == pytest.approx(np.ones(50 * 40))


def test_empty_result_when_everything_blacklisted():
    g = build_pcfg(desugar(parse_source(
        "double x := 0.0;\nx ~ unif(0, 1);\nobserve(x < 0);\nreturn x;")))
    result = run(g, RunConfig(budget=20, seed=0))
    assert result.report["status"] == "empty"
    assert result.pool.size == 0 and len(result.weights) == 0
    assert result.report["blacklisted"]["count"] == 1


def test_adjust_weights_per_arm_scalar_ratio():
    pool = SamplePool()
    pool.append("f", np.full(4, 0.5), np.arange(4.0))
    reg = ArmRegistry()
    reg.add("f")
    update(reg, "f", 0.5)
    w, x, ids, dropped = adjust_weights(pool, reg, "per-arm")
    assert w == pytest.approx(np.ones(4))
    assert dropped == 0 and ids == ["f"] * 4


def test_adjust_weights_importance_identity():
    pool = SamplePool()
    pool.append("f", np.array([0.2, 0.4]), np.zeros(2))
    pool.append("f", np.array([0.1, 0.3]), np.zeros(2))
    reg = ArmRegistry()
    reg.add("f")
    update(reg, "f", 0.3)
    update(reg, "f", 0.2)
    w, _, _, dropped = adjust_weights(pool, reg, "importance")
    # per-flow adjusted weights sum to the empirical likelihood
    assert w.sum() == pytest.approx(reg.arms["f"].p_hat)
    assert dropped == 0


def test_adjust_weights_drops_zero_divisors():
    pool = SamplePool()
    pool.append("dead", np.zeros(3), np.zeros(3))
    reg = ArmRegistry()
    reg.add("dead")
    update(reg, "dead", 0.0)
    for mode in ("per-arm", "importance"):
        w, x, ids, dropped = adjust_weights(pool, reg, mode)
        assert dropped == 3 and len(w) == 0


def test_weight_modes_agree_on_coin():
    g = benchmarks.build("coin", 0.36)
    gt = ground_truth("coin", 0.36)
    kls = {}
    for mode in ("per-arm", "importance"):
        result = run(g, RunConfig(budget=500, particles=100, seed=4,
                                  weight_mode=mode))
        kls[mode] = kl_divergence(gt, result.values, result.weights)
    assert abs(kls["per-arm"] - kls["importance"]) < 0.01


def test_geom_posterior_mean():
    # expected iteration count r / (1 - r) = 1 for r = 0.5, x0 = 0; importance
    # adjustment pins each arm's mass to its empirical likelihood, so the
    # estimate converges at this budget even while expansion keeps adding
    # negligible deep arms
    g = benchmarks.build("geomIt", 0.5, 0)
    result = run(g, RunConfig(budget=600, particles=50, seed=12,
                              weight_mode="importance"))
    mean, _ = summarize(result.values, result.weights)
    assert mean == pytest.approx(1.0, abs=0.05)


@pytest.mark.parametrize("name,params,bound", [
    ("unifCd", (10,), 0.05),
    ("poisCd", (6, 20), 0.05),
    ("geomIt", (0.5, 5), 0.02),
])
def test_end_to_end_kl_against_closed_forms(name, params, bound):
    g = benchmarks.build(name, *params)
    result = run(g, RunConfig(budget=150, particles=100, seed=2,
                              weight_mode="importance"))
    gt = ground_truth(name, *params)
    assert kl_divergence(gt, result.values, result.weights) < bound


def test_mixed_rare_branch_posterior():
    # the rare branch is reached through a restricted draw with mass 1-Phi(5),
    # so the mixture weights come out right without ever rejecting
    g = benchmarks.build("mixed", 5)
    result = run(g, RunConfig(budget=200, particles=100, seed=6,
                              weight_mode="importance"))
    gt = ground_truth("mixed", 5)
    assert kl_divergence(gt, result.values, result.weights) < 0.05
    arms = sorted(result.registry.arms.values(), key=lambda a: a.p_hat)
    assert arms[0].p_hat == pytest.approx(2.866515719235352e-07, rel=1e-9)


def test_unifcd2_moments_match_reference_scale():
    g = benchmarks.build("unifCd2", 10)
    result = run(g, RunConfig(budget=200, particles=100, seed=3,
                              weight_mode="importance"))
    mean, std = summarize(result.values, result.weights)
    assert 10.0 < mean < 12.0
    assert 3.0 < std < 4.5


def test_run_reproducible():
    g = benchmarks.build("coin", 0.36)
    cfg = RunConfig(budget=300, particles=30, seed=123)
    a = run(g, cfg, collect_timing=False)
    b = run(g, cfg, collect_timing=False)
    assert np.array_equal(a.weights, b.weights)
    assert np.array_equal(a.values, b.values)
    assert a.flow_ids == b.flow_ids
    assert a.report == b.report


def test_report_contents():
    g = benchmarks.build("coin", 0.36)
    result = run(g, RunConfig(budget=100, particles=10, seed=0))
    report = result.report
    assert report["config"]["budget"] == 100
    assert report["pool"]["size"] == result.pool.size == 100 * 10
    assert {a["flow"] for a in report["arms"]} == set(result.registry.arms)
    assert all(set(a) >= {"flow", "p_hat", "pulls"} for a in report["arms"])
    assert "timing" in report
    assert report["pool"]["zero_weight_fraction"] == 0.0  # restricted draws
