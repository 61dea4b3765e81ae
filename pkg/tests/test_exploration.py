from fractions import Fraction

import pytest

from pastlab.exploration import (ResourceCapExceeded, StateGraph,
                                 StateSpaceNotClosed, ast_semicheck,
                                 build_tree, collapse_to_state_graph,
                                 exp_reach_runtime_bounds, exp_runtime_bounds,
                                 run_masses, termination_prob_upto)
from pastlab.scheduling import RandomScheduler, constant, Ln
from pastlab.semantics import is_terminal
from pastlab.syntax import parse
from conftest import ballot_walk_oracle, geometric_series_limit, random_program

RANDOM_WALK = parse("x := 1; while (x != 0) "
                    "{ { x := x + 1 } <1/2> { x := x - 1 } }")
GEOMETRIC = parse("while (x = 0) { { skip } <1/2> { exit } }")
SPIN = parse("while (true) { skip }")


def hit_depths(profile):
    return [d for d, mass in enumerate(profile.hit_mass) if mass > 0]


def test_build_tree_single_assign():
    tree = build_tree(parse("x := 1"), constant(Ln), 1)
    assert tree.node_count() == 2
    (kind, child) = tree.root.children[0]
    assert is_terminal(child.state)


def test_build_tree_coin():
    tree = build_tree(parse("{ skip } <1/2> { exit }"), constant(Ln), 2)
    assert len(tree.root.children) == 2
    probs = sorted(c.state.prob for _, c in tree.root.children)
    assert probs == [Fraction(1, 2), Fraction(1, 2)]
    assert tree.terminal_mass() == 1


def test_build_tree_conservation_vs_brute_force():
    # Node count must agree with an independent recursive enumerator.
    def enumerate_states(state, scheduler, depth):
        if depth == 0 or is_terminal(state):
            return 1
        from pastlab.semantics import step
        return 1 + sum(enumerate_states(s.state, scheduler, depth - 1)
                       for s in step(state, scheduler))

    from pastlab.semantics import initial_state
    scheduler = constant(Ln)
    tree = build_tree(RANDOM_WALK, scheduler, 12)
    assert tree.node_count() == enumerate_states(
        initial_state(RANDOM_WALK), scheduler, 12)
    # More than one non-terminal state per depth: the walk branches.
    widths = [sum(1 for n in level if not is_terminal(n.state))
              for level in tree.levels]
    assert max(widths) > 1


def test_build_tree_node_cap():
    with pytest.raises(ResourceCapExceeded):
        build_tree(RANDOM_WALK, constant(Ln), 40, node_cap=100)


def test_termination_prob_trivial():
    assert termination_prob_upto(parse("exit"), constant(Ln), 1) == 1
    assert termination_prob_upto(SPIN, constant(Ln), 50) == 0


def test_random_walk_against_ballot_oracle():
    profile = run_masses(RANDOM_WALK, constant(Ln), 23)
    depths = hit_depths(profile)
    # Terminal mass appears only after odd iteration counts; the first
    # three hits land after iterations 1, 3, 5 of the loop.
    oracle = ballot_walk_oracle(5)
    assert [profile.cumulative_hit(d) for d in depths[:3]] == [
        oracle[0], oracle[2], oracle[4]]
    assert [oracle[0], oracle[2], oracle[4]] == [
        Fraction(1, 2), Fraction(5, 8), Fraction(11, 16)]


def test_monotonicity():
    values = [termination_prob_upto(RANDOM_WALK, constant(Ln), k)
              for k in range(0, 25, 4)]
    assert values == sorted(values)
    lowers = [exp_runtime_bounds(GEOMETRIC, constant(Ln), k).lower
              for k in range(0, 60, 7)]
    assert lowers == sorted(lowers)


def test_exp_runtime_straight_line():
    # One assign inside the sequence, the discharge step, the second assign.
    bounds = exp_runtime_bounds(parse("x := 1; x := 2"), constant(Ln), 10)
    assert bounds.closed and bounds.exact == 3


def test_exp_runtime_spin_grows_linearly():
    for k in (5, 17, 40):
        bounds = exp_runtime_bounds(SPIN, constant(Ln), k)
        assert bounds.lower == k
        assert not bounds.closed


def test_exp_runtime_geometric_approaches_oracle():
    profile = run_masses(GEOMETRIC, constant(Ln), 30)
    depths = hit_depths(profile)
    stride = depths[1] - depths[0]
    offset = depths[0] - stride
    assert [offset + stride * (i + 1) for i in range(len(depths))] == depths
    limit = geometric_series_limit(offset, stride)
    for k in (40, 80, 200):
        bounds = exp_runtime_bounds(GEOMETRIC, constant(Ln), k)
        assert bounds.lower < limit
        gap = limit - bounds.lower
        assert gap <= stride * (Fraction(k, stride) + 2) / 2 ** (k // stride)


def test_exp_reach_matches_runtime_on_terminal_target():
    target = lambda ps: is_terminal(ps)
    for k in (10, 30):
        reach = exp_reach_runtime_bounds(GEOMETRIC, constant(Ln), target, k)
        plain = exp_runtime_bounds(GEOMETRIC, constant(Ln), k)
        assert reach.lower == plain.lower
        assert reach.closed == plain.closed


def test_exp_reach_initial_state_is_zero():
    target = lambda ps: True
    bounds = exp_reach_runtime_bounds(RANDOM_WALK, constant(Ln), target, 10)
    assert bounds.closed and bounds.exact == 0


def test_exp_reach_x_zero_on_random_walk():
    # Hitting x = 0 precedes the loop-exit bookkeeping by a fixed margin.
    target = lambda ps: ps.valuation.get("x") == 0
    reach = exp_reach_runtime_bounds(RANDOM_WALK, constant(Ln), target, 23)
    plain = exp_runtime_bounds(RANDOM_WALK, constant(Ln), 23)
    assert reach.lower < plain.lower
    reach_profile = run_masses(RANDOM_WALK, constant(Ln), 23,
                               target=target)
    plain_profile = run_masses(RANDOM_WALK, constant(Ln), 23)
    gap = [p - r for r, p in zip(hit_depths(reach_profile),
                                 hit_depths(plain_profile))]
    assert len(set(gap)) == 1  # constant bookkeeping offset


def test_subtree_scaling_property():
    # The series contribution of the subtree under a probabilistic split is
    # the subtree's own expected runtime scaled by its branch probability.
    tail = "x := 1; x := 2"
    parent = parse("{ skip } <1/2> { exit }; " + tail)
    skip_side = parse("skip; " + tail)
    exit_side = parse("exit; " + tail)
    e_parent = exp_runtime_bounds(parent, constant(Ln), 30).exact
    e_skip = exp_runtime_bounds(skip_side, constant(Ln), 30).exact
    e_exit = exp_runtime_bounds(exit_side, constant(Ln), 30).exact
    half = Fraction(1, 2)
    assert e_parent == 1 + half * e_skip + half * e_exit


def test_ast_semicheck_trivial():
    assert ast_semicheck(parse("exit"), Fraction(1, 2), 1)
    assert not ast_semicheck(SPIN, Fraction(1, 2), 10)
    assert not ast_semicheck(SPIN, Fraction(99, 100), 60)


def test_ast_semicheck_choice_loop():
    loop = parse("x := 0; y := 0; z := 1; while (x + y = 0) "
                 "{ { y := 0 } [] { y := 1 }; { x := 0 } <1/2> { x := 1 }; "
                 "z := 4 * z }")
    # Each iteration exits with chance 1/2 whatever the scheduler picks, so
    # some desk-scale horizon pushes every schedule past 3/4.
    assert not ast_semicheck(loop, Fraction(3, 4), 12)
    assert ast_semicheck(loop, Fraction(3, 4), 40)


def test_collapse_geometric_graph():
    graph = collapse_to_state_graph(GEOMETRIC, 20)
    assert len(graph) <= 8
    assert sum(1 for k in graph.kinds if k == "terminal") == 1
    # cyclic: some edge returns to an earlier node
    assert any(e.dst <= src for src in range(len(graph))
               for e in graph.edges.get(src, ()))


def test_collapse_straight_line_is_path():
    program = parse("x := 1; y := 2; z := 3")
    graph = collapse_to_state_graph(program, 50)
    assert all(len(graph.edges.get(i, ())) <= 1 for i in range(len(graph)))
    assert len(graph) == 6


def test_collapse_unbounded_counter_refused():
    with pytest.raises(StateSpaceNotClosed):
        collapse_to_state_graph(RANDOM_WALK, 60)


def test_state_graph_json_round_trip():
    graph = collapse_to_state_graph(GEOMETRIC, 20)
    data = graph.to_json()
    back = StateGraph.from_json(data)
    assert back.kinds == graph.kinds
    assert [back.node_key(i) for i in range(len(back))] == \
        [graph.node_key(i) for i in range(len(graph))]
    assert back.to_json() == data


def test_conservation_random_programs(rng):
    for _ in range(60):
        program = random_program(rng, 4)
        scheduler = RandomScheduler(17)
        try:
            tree = build_tree(program, scheduler, 8, node_cap=4000)
        except ResourceCapExceeded:
            continue
        cumulative_terminal = Fraction(0)
        for level in tree.levels:
            frontier_mass = Fraction(0)
            for node in level:
                if is_terminal(node.state):
                    cumulative_terminal += node.state.prob
                else:
                    frontier_mass += node.state.prob
            assert cumulative_terminal + frontier_mass == 1
