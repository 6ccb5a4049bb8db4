import numpy as np
import pytest
from scipy import stats

from flowsmc import benchmarks
from flowsmc.baselines import baseline_rejection, baseline_whole_smc
from flowsmc.frontend import parse_source
from flowsmc.metrics import ground_truth, kl_divergence
from flowsmc.pcfg import build_pcfg, straight_line
from flowsmc.smc import run_smc

from conftest import nth_flow


def test_coin_rejection_zero_weight_fraction(rng):
    g = benchmarks.build("coin", 0.36)
    w, x = baseline_rejection(g, 100_000, rng)
    # disagreeing pairs appear with probability 1 - (0.36^2 + 0.64^2)
    expected = 0.36 ** 2 + 0.64 ** 2
    assert (w == 0.0).mean() == pytest.approx(expected, abs=0.006)
    accepted = x[w > 0]
    assert (accepted == 1.0).mean() == pytest.approx(0.5, abs=0.01)


def test_coin_weighted_semantics_four_outcomes(rng):
    # the full weighted behaviour: (0, true) with 0.36^2, (1, true) with
    # 0.36*0.64, (1, false) with 0.64*0.36, (0, false) with 0.64^2
    g = benchmarks.build("coin", 0.36)
    w, x = baseline_rejection(g, 200_000, rng)
    n = len(w)
    observed = {
        (0.0, 1.0): ((w == 0) & (x == 1)).mean(),
        (1.0, 1.0): ((w == 1) & (x == 1)).mean(),
        (1.0, 0.0): ((w == 1) & (x == 0)).mean(),
        (0.0, 0.0): ((w == 0) & (x == 0)).mean(),
    }
    expected = {
        (0.0, 1.0): 0.36 ** 2,
        (1.0, 1.0): 0.36 * 0.64,
        (1.0, 0.0): 0.64 * 0.36,
        (0.0, 0.0): 0.64 ** 2,
    }
    for key, prob in expected.items():
        se = (prob * (1 - prob) / n) ** 0.5
        assert abs(observed[key] - prob) < 4 * se + 1e-4, key


def test_rejection_deterministic_program(rng):
    g = build_pcfg(parse_source("int z := 3;\nz := z + 4;\nreturn z;"))
    w, x = baseline_rejection(g, 500, rng)
    assert (w == 1.0).all() and (x == 7.0).all()


def test_rejection_unifcd20_accepts_almost_nothing(rng):
    g = benchmarks.build("unifCd", 20)
    w, _ = baseline_rejection(g, 100_000, rng)
    # acceptance probability is 2^-19: about 0.2 runs expected here
    assert int(np.count_nonzero(w > 0)) <= 3


def test_whole_smc_matches_ground_truth_on_coin(rng):
    g = benchmarks.build("coin", 0.36)
    w, x, live = baseline_whole_smc(g, 10_000, rng)
    assert live == 1
    kl = kl_divergence(ground_truth("coin", 0.36), x, w)
    assert kl < 0.01


def test_whole_smc_single_flow_matches_slp_smc(rng):
    src = ("double x := 0.0;\ndouble y := 0.0;\n"
           "x ~ normal(0, 1);\ny ~ normal(0, 2);\ny := y + x;\nreturn y;")
    g = build_pcfg(parse_source(src))
    w1, x1, _ = baseline_whole_smc(g, 20_000, rng)
    s = straight_line(g, nth_flow(g, 0))
    res = run_smc(s, 20_000, rng)
    assert (w1 == 1.0).all() and (res.weights == 1.0).all()
    assert stats.ks_2samp(x1, res.values).pvalue > 0.01


def test_whole_smc_starves_when_the_seed_draw_decides(rng):
    # the threshold variable is drawn once up front, so resampling clones
    # cannot restore diversity and whole sweeps die at the final observation
    g = benchmarks.build("unifCd", 20)
    _, _, live = baseline_whole_smc(g, 100, rng, sweeps=20)
    assert live == 0


def test_step_cap_zeroes_unfinished_runs(rng):
    # loop that never terminates: every run hits the cap and contributes 0
    src = ("double x := 0.0;\nwhile (x < 1) { x := x * 1; }\nreturn x;")
    g = build_pcfg(parse_source(src))
    w, _ = baseline_rejection(g, 100, rng, step_cap=50)
    assert (w == 0.0).all()
