import pytest

from flowsmc import benchmarks
from flowsmc.frontend import parse_source
from flowsmc.pcfg import (
    AssignLabel, ControlFlow, DrawLabel, FlowEnumerator, GuardLabel, Pcfg,
    PcfgError, Transition, WeightLabel, build_pcfg, enumerate_flows, find_flow,
    straight_line, validate, validate_slp,
)
from flowsmc.syntax import Const, UnaryOp, Var

from conftest import nth_flow


def test_obs_loop_graph_shape():
    g = benchmarks.build("obsLoop", 3, 5)
    assert g.n_locations == 7
    kinds = sorted(g.kinds)
    assert kinds == sorted(["det", "assign", "draw", "weight", "assign",
                            "weight", "final"])
    # back edge: the in-loop accumulator assignment returns to the guard
    back = [t for edges in g.out for t in edges
            if t.dst == g.l_init and isinstance(t.label, AssignLabel)]
    assert len(back) == 1 and back[0].label.var == "x"
    assert validate(g) == []
    assert g.sigma_init == {"x": 0.0, "y": 0.0, "n": 0.0}


def test_sugar_rejected():
    p = parse_source(benchmarks.source("coin", 0.36))
    with pytest.raises(PcfgError, match="desugar"):
        build_pcfg(p)


@pytest.mark.parametrize("name,params", [
    ("coin", (0.36,)), ("obsLoop", (3, 5)), ("condDemo", ()),
    ("unifCd", (4,)), ("poisCd", (3, 4)), ("geomIt", (0.5, 2)),
    ("mixed", (0,)), ("unifCd2", (3,)), ("poisCd2", (3, 4)),
    ("geomIt2", (0.5, 2)),
])
def test_benchmarks_validate(name, params):
    assert validate(benchmarks.build(name, *params)) == []


def test_validate_flags_bad_det_location():
    g = benchmarks.build("obsLoop", 3, 5)
    guard_loc = g.l_init
    broken = Pcfg(
        kinds=g.kinds, variables=g.variables, l_init=g.l_init,
        l_final=g.l_final, sigma_init=g.sigma_init, e_final=g.e_final,
        out=tuple(edges[:1] if loc == guard_loc else edges
                  for loc, edges in enumerate(g.out)),
    )
    problems = validate(broken)
    assert any(f"l{guard_loc}" in p and "2 edges" not in p for p in problems)


def test_validate_flags_unreachable_location():
    g = benchmarks.build("condDemo")
    extra = Pcfg(
        kinds=g.kinds + ("assign",), variables=g.variables, l_init=g.l_init,
        l_final=g.l_final, sigma_init=g.sigma_init, e_final=g.e_final,
        out=g.out + ((Transition(g.n_locations, g.l_final,
                                 AssignLabel("x", Const(0.0))),),),
    )
    assert any("unreachable" in p for p in validate(extra))


def test_chain_program_single_flow():
    g = build_pcfg(parse_source(
        "double x := 0.0;\nx ~ unif(0, 1);\nx := x + 1;\nreturn x;"))
    cursor = FlowEnumerator(g)
    first = cursor.next_complete()
    assert first is not None and first.is_complete(g)
    assert cursor.next_complete() is None
    assert cursor.exhausted


def test_coin_graph_has_two_branch_locations():
    g = benchmarks.build("coin", 0.36)
    assert g.kinds.count("det") == 2


def test_coin_has_four_flows():
    flows = enumerate_flows(benchmarks.build("coin", 0.36), 10)
    assert len(flows) == 4
    assert len({f.flow_id for f in flows}) == 4


def test_obs_loop_flow_pattern():
    g = benchmarks.build("obsLoop", 3, 5)
    flows = enumerate_flows(g, 4)
    base = flows[0].locations
    cycle = flows[1].locations[1:-len(base) + 1]
    # flow n = init, n copies of the loop cycle, then the exit suffix
    for n, flow in enumerate(flows):
        expected = (g.l_init,) + cycle * n + base[1:]
        assert flow.locations == expected
        assert len(flow.locations) == len(base) + n * len(cycle)


def test_obs_loop_flow_lengths_follow_loop_size():
    g = benchmarks.build("obsLoop", 3, 5)
    flows = enumerate_flows(g, 11)
    sizes = [len(f.locations) for f in flows]
    assert sizes == [sizes[0] + 5 * n for n in range(11)]
    assert sizes[0] == 3  # guard, exit observation, final


def test_flows_unique_and_length_ordered():
    g = benchmarks.build("unifCd", 3)
    flows = enumerate_flows(g, 20)
    ids = [f.flow_id for f in flows]
    assert len(set(ids)) == len(ids)
    lengths = [len(f) for f in flows]
    assert lengths == sorted(lengths)


def test_guard_edge_explored_first():
    # binary-branch program: the guard-true flow enumerates first
    g = build_pcfg(benchmarks.program("mixed", 0))
    flows = enumerate_flows(g, 2)
    first_guard = flows[0].steps[1].label
    assert isinstance(first_guard, GuardLabel) and first_guard.polarity


def test_enumerator_admit_and_budget():
    g = benchmarks.build("unifCd", 3)
    cursor = FlowEnumerator(g)
    third = cursor.next_flow(admit=lambda f: len(f) > 10)
    assert third is not None and len(third) > 10
    cursor2 = FlowEnumerator(g)
    assert cursor2.next_flow(admit=lambda f: False, max_rejects=5) is None
    assert not cursor2.exhausted


def test_max_len_cap():
    g = benchmarks.build("condDemo")
    cursor = FlowEnumerator(g, max_len=8)
    flows = []
    while True:
        f = cursor.next_complete()
        if f is None:
            break
        flows.append(f)
    assert cursor.exhausted and cursor.hit_length_cap
    assert all(len(f) <= 8 for f in flows)


def test_find_flow_round_trips():
    g = benchmarks.build("coin", 0.36)
    for f in enumerate_flows(g, 4):
        assert find_flow(g, f.flow_id).steps == f.steps


def test_straight_line_matches_loop_unrolling():
    g = benchmarks.build("obsLoop", 3, 5)
    s = straight_line(g, nth_flow(g, 1))
    labels = s.steps
    # guard in, body, guard out, final observation
    assert isinstance(labels[0], WeightLabel) and labels[0].is_observation
    assert isinstance(labels[1], AssignLabel) and labels[1].var == "n"
    assert isinstance(labels[2], DrawLabel) and labels[2].family == "normal"
    assert isinstance(labels[3], WeightLabel)
    assert isinstance(labels[4], AssignLabel) and labels[4].var == "x"
    assert isinstance(labels[5], WeightLabel)
    neg = labels[5].pred.formula
    assert isinstance(neg, UnaryOp) and neg.op == "!"
    assert isinstance(labels[6], WeightLabel)
    assert s.e_final == Var("n")
    assert validate_slp(s) == []


@pytest.mark.parametrize("name,params,n", [
    ("obsLoop", (3, 5), 4), ("unifCd", (4,), 5), ("coin", (0.36,), 2),
])
def test_observation_count_equals_guard_traversals(name, params, n):
    g = benchmarks.build(name, *params)
    flow = nth_flow(g, n)
    guards = sum(1 for t in flow.steps if isinstance(t.label, GuardLabel))
    s = straight_line(g, flow)
    observations = sum(1 for lab in s.steps
                       if isinstance(lab, WeightLabel) and lab.is_observation)
    weights_in_program = sum(1 for lab in s.steps if isinstance(lab, WeightLabel))
    assert observations == weights_in_program  # all via observe in these sources
    # guard observations plus the source-level observes traversed
    assert observations >= guards
    draws = sum(1 for lab in s.steps if isinstance(lab, DrawLabel))
    assert draws == sum(1 for t in flow.steps if isinstance(t.label, DrawLabel))


def test_straight_line_requires_complete_flow():
    g = benchmarks.build("coin", 0.36)
    partial = ControlFlow(g.l_init, ())
    with pytest.raises(PcfgError, match="complete"):
        straight_line(g, partial)
