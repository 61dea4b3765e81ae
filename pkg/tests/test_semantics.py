from fractions import Fraction

import pytest

from pastlab.semantics import (Direction, ExecState, Kind, TerminalStepError,
                               Valuation, classify, eval_aexpr, eval_bexpr,
                               exec_state_from_json, initial_state,
                               is_terminal, step, step_all)
from pastlab.scheduling import Scheduler, constant, Ln, Rn
from pastlab.syntax import parse, parse_aexpr, parse_bexpr
from conftest import random_program


class Poison(Scheduler):
    def decide(self, history, site=None):
        raise AssertionError("scheduler consulted for a nondet-free program")


def val(**kwargs):
    return Valuation({k: Fraction(v) for k, v in kwargs.items()})


def test_eval_aexpr():
    assert eval_aexpr(parse_aexpr("x + 1"), val(x=3)) == 4
    assert eval_aexpr(parse_aexpr("y"), Valuation()) == 0
    assert eval_aexpr(parse_aexpr("2 * x - 1/2"), val(x=Fraction(1, 4))) == 0


def test_eval_bexpr():
    assert eval_bexpr(parse_bexpr("x != 0"), val(x=1)) is True
    assert eval_bexpr(parse_bexpr("x != 0"), Valuation()) is False
    assert eval_bexpr(parse_bexpr("x + y = 0"), val(x=1, y=-1)) is True


def test_valuation_is_persistent_and_zero_normalised():
    base = Valuation()
    updated = base.set("x", 3)
    assert base.get("x") == 0 and updated.get("x") == 3
    assert updated.set("x", 0) == base
    assert hash(updated.set("x", 0)) == hash(base)


def test_assign_under_sequence():
    program = parse("x := 1; while (x != 0) { skip }")
    (succ,) = step(initial_state(program), Poison())
    assert succ.kind == Kind.DETERMINISTIC
    assert succ.state.valuation.get("x") == 1
    assert succ.state.prob == 1
    assert succ.state.history == ()


def test_prob_split():
    program = parse("{ x := 1 } <1/2> { x := 2 }")
    left, right = step(initial_state(program), Poison())
    assert left.kind == Kind.PROB_LEFT and right.kind == Kind.PROB_RIGHT
    assert left.state.prob == Fraction(1, 2)
    assert right.state.prob == Fraction(1, 2)
    assert left.state.history == (Direction.Lp,)
    assert right.state.history == (Direction.Rp,)


def test_forced_prob_branches_extend_history():
    low = parse("{ x := 1 } <0> { x := 2 }")
    (succ,) = step(initial_state(low), Poison())
    assert succ.state.prob == 1 and succ.state.history == (Direction.Rp,)
    high = parse("{ x := 1 } <3/2> { x := 2 }")
    (succ,) = step(initial_state(high), Poison())
    assert succ.state.prob == 1 and succ.state.history == (Direction.Lp,)


def test_state_dependent_probability():
    program = parse("{ skip } <p> { exit }")
    state = ExecState(program, val(p=Fraction(1, 3)), Fraction(1), ())
    left, right = step(state, Poison())
    assert left.state.prob == Fraction(1, 3)
    assert right.state.prob == Fraction(2, 3)


def test_nondet_consults_scheduler():
    program = parse("{ y := 0 } [] { y := 1 }")
    state = ExecState(program, Valuation(), Fraction(1), (Direction.Lp,))
    (succ,) = step(state, constant(Rn))
    assert succ.kind == Kind.NONDET
    assert succ.state.history == (Direction.Lp, Direction.Rn)
    assert succ.state.program == parse("y := 1")


def test_exit_collapses_continuation():
    program = parse("exit; x := 1; x := 2")
    (succ,) = step(initial_state(program), Poison())
    assert is_terminal(succ.state)
    assert succ.state.prob == 1


def test_skip_one_step():
    (succ,) = step(initial_state(parse("skip")), Poison())
    assert is_terminal(succ.state)


def test_if_reduces_in_one_step():
    program = parse("if (x = 0) { x := 1 } else { x := 2 }")
    (succ,) = step(initial_state(program), Poison())
    assert succ.state.program == parse("x := 1")


def test_while_unfold_and_exit():
    program = parse("while (x != 0) { skip }")
    (succ,) = step(initial_state(program), Poison())
    assert is_terminal(succ.state)
    state = ExecState(program, val(x=1), Fraction(1), ())
    (succ,) = step(state, Poison())
    assert succ.state.program == parse("skip; while (x != 0) { skip }")


def test_is_terminal():
    assert is_terminal(initial_state(parse("bot")))
    assert not is_terminal(initial_state(parse("skip")))
    assert not is_terminal(initial_state(parse("bot; skip")))


def test_step_terminal_is_contract_violation():
    with pytest.raises(TerminalStepError):
        step(initial_state(parse("bot")), Poison())


def test_classify():
    assert classify(initial_state(parse("bot")).program_state()) == "terminal"
    assert classify(initial_state(parse("x := 1; skip")).program_state()) \
        == "deterministic"
    assert classify(initial_state(
        parse("{ skip } [] { exit }; skip")).program_state()) == "nondet"
    assert classify(initial_state(
        parse("{ skip } <1/2> { exit }")).program_state()) == "prob"
    # Forced probabilistic branches count as deterministic.
    assert classify(initial_state(
        parse("{ skip } <2> { exit }")).program_state()) == "deterministic"


def test_probability_conservation_and_history_discipline(rng):
    for _ in range(150):
        program = random_program(rng, 4)
        state = initial_state(program)
        frontier = [state]
        for _ in range(6):
            layer = []
            for st in frontier:
                if is_terminal(st):
                    continue
                succs = step_all(st)
                if any(s.kind == Kind.NONDET for s in succs):
                    # Demonic branching: each direction keeps the full mass.
                    assert all(s.state.prob == st.prob for s in succs)
                else:
                    assert sum(s.state.prob for s in succs) == st.prob
                for succ in succs:
                    extension = len(succ.state.history) - len(st.history)
                    if succ.kind == Kind.DETERMINISTIC:
                        assert extension == 0
                    else:
                        assert extension == 1
                    assert succ.state.history[:len(st.history)] == st.history
                    assert succ.state.prob > 0
                    layer.append(succ.state)
            frontier = layer


def test_replayability(rng):
    for _ in range(30):
        program = random_program(rng, 4)
        sched = constant(Ln)
        state = initial_state(program)
        if is_terminal(state):
            continue
        first = step(state, sched)
        second = step(state, sched)
        assert first == second


def test_exec_state_json_round_trip():
    program = parse("{ skip } <1/2> { exit }")
    state = initial_state(program)
    (left, _) = step(state, Poison())
    data = left.state.to_json()
    assert data["history"] == "Lp"
    assert data["prob"] == "1/2"
    back = exec_state_from_json(data)
    assert back.prob == left.state.prob
    assert back.history == left.state.history
    assert back.valuation == left.state.valuation
