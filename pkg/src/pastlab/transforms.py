"""Normal-form recognition and the program constructions.

A program is in normal form when every probabilistic choice is the coin
"{ skip } <p> { exit }": continue or die.  Execution trees of such programs
have a single live branch shedding one dying leaf per coin.

Three emitters produce normal-form programs:

  * to_knievel rebuilds an arbitrary program (with constant branch
    probabilities) as a deterministic simulator of its own execution tree:
    branch weights and the terminated mass are tracked in exact rational
    variables, nondeterministic choices are re-exposed to the scheduler, a
    coin halves the continuation probability once per simulated step, and
    whenever the accumulated expected-runtime series crosses the current
    bound the bound doubles and a cheering loop of length one over the
    current continuation probability adds a constant to the expected
    runtime.  The rebuilt program has a finite expected runtime under a
    scheduler exactly when the source does.

  * emit_tree_reduction turns a tree description into the guessing program
    whose schedulers walk branches of the tree: a nondeterministically
    stopped counting loop picks each child (halving survival per extra
    iteration and cheering to keep per-pick expected cost constant), the
    membership check is compiled inline, and falling off the tree checks
    one deeper probe for disconnectedness (looping forever if it hits)
    before exiting.

  * emit_ordinal_program is the rank-forcing variant: child selection pays
    one coin per iteration, the inline membership check is guarded by a
    fixed number of per-step coins, rejection exits, and acceptance runs an
    increment gadget (scheduler-chosen power of two, then a busy-wait of
    that length) before the next round.

Tree node sequences are packed into one integer variable with the pairing
(a, b) -> (a+b)(a+b+1)/2 + a  plus a separate length counter; the triangular
number is computed by a counting loop since the language has no division.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional

from .syntax import (ABin, Assign, BBin, BoolLit, Cmp, EMPTY, EXIT, Empty,
                     Exit, If, Neg, NondetChoice, ProbChoice, Program, RatLit,
                     SKIP, Seq, Skip, Var, While, seq_of)
from .semantics import eval_aexpr, EMPTY_VALUATION


class TransformError(ValueError):
    pass


class NonConstantProbability(TransformError):
    """to_knievel refuses state-dependent branch probabilities."""


class FrontierWidthError(TransformError):
    """The execution-tree frontier cannot be bounded by the fixed slots."""


# ---------------------------------------------------------------------------
# Tree specifications
# ---------------------------------------------------------------------------

RULES = ("full", "all-zeros")


@dataclass(frozen=True)
class TreeSpec:
    """A prefix-closed set of finite child-index sequences.

    Either explicit (a finite set including the empty sequence) or one of
    the rule-defined trees: "full" (every sequence), "all-zeros" (the single
    infinite zero branch), "bounded-depth(d)" (every sequence of length at
    most d).
    """

    explicit: Optional[frozenset] = None
    rule: Optional[str] = None
    depth: Optional[int] = None

    def __post_init__(self):
        if (self.explicit is None) == (self.rule is None):
            raise TransformError("tree spec is explicit or rule-defined")
        if self.explicit is not None:
            if () not in self.explicit:
                raise TransformError("explicit tree must contain the root")
            for seq in self.explicit:
                if seq and seq[:-1] not in self.explicit:
                    raise TransformError(f"tree not prefix-closed at {seq}")
                if any(x < 0 for x in seq):
                    raise TransformError("children are natural numbers")
        elif self.rule not in RULES and self.rule != "bounded-depth":
            raise TransformError(f"unknown rule {self.rule!r}")
        if self.rule == "bounded-depth" and (self.depth is None
                                             or self.depth < 0):
            raise TransformError("bounded-depth needs a depth")

    def contains(self, seq: tuple) -> bool:
        seq = tuple(seq)
        if self.explicit is not None:
            return seq in self.explicit
        if self.rule == "full":
            return True
        if self.rule == "all-zeros":
            return all(x == 0 for x in seq)
        return len(seq) <= self.depth

    def to_json(self) -> dict:
        if self.explicit is not None:
            return {"explicit": sorted(list(s) for s in self.explicit)}
        if self.rule == "bounded-depth":
            return {"rule": f"bounded-depth({self.depth})"}
        return {"rule": self.rule}

    @staticmethod
    def from_json(data: dict) -> "TreeSpec":
        if "explicit" in data:
            return explicit_tree(tuple(tuple(s) for s in data["explicit"]))
        return rule_tree(data["rule"])


def explicit_tree(sequences) -> TreeSpec:
    return TreeSpec(explicit=frozenset(tuple(s) for s in sequences))


def rule_tree(name: str) -> TreeSpec:
    name = name.strip()
    if name.startswith("bounded-depth(") and name.endswith(")"):
        return TreeSpec(rule="bounded-depth",
                        depth=int(name[len("bounded-depth("):-1]))
    return TreeSpec(rule=name)


def cantor_pair(a: int, b: int) -> int:
    return (a + b) * (a + b + 1) // 2 + a


def encode_sequence(seq) -> int:
    code = 0
    for x in seq:
        code = cantor_pair(code, x)
    return code


def ord_of_tree(spec: TreeSpec):
    """Ordinal value of a finite explicit tree: absent nodes and leaves get
    0, internal nodes one more than the largest child value."""
    from . import ordinal
    if spec.explicit is None:
        raise TransformError("ordinal evaluation needs an explicit tree")

    def value(seq):
        children = [s for s in spec.explicit
                    if len(s) == len(seq) + 1 and s[:len(seq)] == seq]
        if seq not in spec.explicit or not children:
            return ordinal.ZERO
        return ordinal.successor(max(value(c) for c in children))

    return value(())


# ---------------------------------------------------------------------------
# Normal-form recognition
# ---------------------------------------------------------------------------

def is_knievel(p: Program) -> bool:
    """True when every probabilistic choice is { skip } <p> { exit }."""
    if isinstance(p, ProbChoice):
        return (isinstance(p.left, Skip) and isinstance(p.right, Exit)
                and is_knievel(p.left) and is_knievel(p.right))
    if isinstance(p, Seq):
        return is_knievel(p.first) and is_knievel(p.rest)
    if isinstance(p, NondetChoice):
        return is_knievel(p.left) and is_knievel(p.right)
    if isinstance(p, While):
        return is_knievel(p.body)
    if isinstance(p, If):
        return is_knievel(p.then) and is_knievel(p.orelse)
    return True


# ---------------------------------------------------------------------------
# Shared construction helpers
# ---------------------------------------------------------------------------

def _num(value) -> RatLit:
    return RatLit(Fraction(value))


COIN = ProbChoice(SKIP, _num(Fraction(1, 2)), EXIT)


def _chain(conditions, otherwise: Program) -> Program:
    """Nested if dispatch: first matching condition wins."""
    prog = otherwise
    for guard, body in reversed(conditions):
        prog = If(guard, body, prog)
    return prog


def _append_child(child_expr) -> Program:
    """node := pair(node, child); len := len + 1, with the triangular number
    of node + child computed by a counting loop."""
    return seq_of([
        Assign("d", ABin("+", Var("node"), child_expr)),
        Assign("t", _num(0)),
        Assign("i", _num(0)),
        While(Cmp("<", Var("i"), Var("d")), seq_of([
            Assign("i", ABin("+", Var("i"), _num(1))),
            Assign("t", ABin("+", Var("t"), Var("i"))),
        ])),
        Assign("node", ABin("+", Var("t"), Var("node"))),
        Assign("len", ABin("+", Var("len"), _num(1))),
    ])


def _membership_check(spec: TreeSpec) -> Program:
    """Set z to 1 exactly when the packed (node, len) pair encodes a
    sequence of the tree."""
    if spec.rule == "full":
        return Assign("z", _num(1))
    if spec.rule == "all-zeros":
        return If(Cmp("=", Var("node"), _num(0)),
                  Assign("z", _num(1)), Assign("z", _num(0)))
    if spec.rule == "bounded-depth":
        return If(Cmp("<=", Var("len"), _num(spec.depth)),
                  Assign("z", _num(1)), Assign("z", _num(0)))
    conditions = []
    for seq in sorted(spec.explicit):
        guard = BBin("and",
                     Cmp("=", Var("len"), _num(len(seq))),
                     Cmp("=", Var("node"), _num(encode_sequence(seq))))
        conditions.append((guard, Assign("z", _num(1))))
    return _chain(conditions, Assign("z", _num(0)))


# ---------------------------------------------------------------------------
# The tree reduction (guessing program with cheering)
# ---------------------------------------------------------------------------

def _numgen_block() -> Program:
    """Nondeterministically stopped counting loop leaving the count in x.

    Each continued iteration costs one survival coin and doubles the global
    s, so 1/s tracks the probability of the live branch; the closing wait
    loop of length s then adds exactly one to the expected runtime."""
    return seq_of([
        Assign("x", _num(0)),
        Assign("y", _num(0)),
        Assign("w", _num(0)),
        While(Cmp("=", Var("y"), _num(0)), seq_of([
            Assign("x", ABin("+", Var("x"), _num(1))),
            NondetChoice(Assign("y", _num(0)), Assign("y", _num(1))),
            If(Cmp("=", Var("y"), _num(0)), seq_of([
                COIN,
                Assign("s", ABin("*", _num(2), Var("s"))),
            ]), EMPTY),
        ])),
        While(Cmp("<", Var("w"), Var("s")),
              Assign("w", ABin("+", Var("w"), _num(1)))),
    ])


def emit_tree_reduction(spec: TreeSpec) -> Program:
    """The guessing program for a tree: schedulers choose a branch child by
    child; walking off the tree triggers one probe for a validated deeper
    node (disconnected input: loop forever) and otherwise stops."""
    edge_case = If(Cmp("=", Var("z"), _num(0)), seq_of([
        _numgen_block(),
        Assign("n2", ABin("-", Var("x"), _num(1))),
        While(Cmp(">", Var("n2"), _num(0)), seq_of([
            _numgen_block(),
            _append_child(ABin("-", Var("x"), _num(1))),
            Assign("n2", ABin("-", Var("n2"), _num(1))),
        ])),
        _membership_check(spec),
        If(Cmp("=", Var("z"), _num(1)),
           While(BoolLit(True), SKIP), EMPTY),
        EXIT,
    ]), EMPTY)
    body = seq_of([
        _numgen_block(),
        _append_child(ABin("-", Var("x"), _num(1))),
        _membership_check(spec),
        edge_case,
    ])
    return seq_of([Assign("s", _num(1)), While(BoolLit(True), body)])


# ---------------------------------------------------------------------------
# The rank-forcing program (increment gadget variant)
# ---------------------------------------------------------------------------

MACHINE_STEPS = 2  # membership machine steps simulated per check


def emit_inc(cap: Optional[int] = None) -> Program:
    """The increment gadget: a scheduler-chosen doubling run, one survival
    coin per iteration, then a busy-wait of the selected length.  With cap,
    the doubling stops at the cap so the state space stays finite."""
    guard = Cmp("=", Var("iy"), _num(0))
    if cap is not None:
        guard = BBin("and", guard, Cmp("<", Var("ix"), _num(cap)))
    return seq_of([
        Assign("ix", _num(1)),
        Assign("iy", _num(0)),
        While(guard, seq_of([
            Assign("ix", ABin("*", _num(2), Var("ix"))),
            NondetChoice(Assign("iy", _num(0)), Assign("iy", _num(1))),
            COIN,
        ])),
        While(Cmp(">", Var("ix"), _num(0)),
              Assign("ix", ABin("-", Var("ix"), _num(1)))),
    ])


def emit_ordinal_program(spec: TreeSpec) -> Program:
    """Tree walker whose minimal rank mirrors the tree's ordinal: each
    validated child costs a run of the increment gadget."""
    child_selection = seq_of([
        Assign("x", _num(0)),
        Assign("y", _num(0)),
        While(Cmp("=", Var("y"), _num(0)), seq_of([
            Assign("x", ABin("+", Var("x"), _num(1))),
            NondetChoice(Assign("y", _num(0)), Assign("y", _num(1))),
            COIN,
        ])),
    ])
    machine = seq_of([
        Assign("msteps", _num(MACHINE_STEPS)),
        While(Cmp(">", Var("msteps"), _num(0)), seq_of([
            COIN,
            Assign("msteps", ABin("-", Var("msteps"), _num(1))),
        ])),
        _membership_check(spec),
    ])
    body = seq_of([
        child_selection,
        _append_child(ABin("-", Var("x"), _num(1))),
        machine,
        If(Cmp("=", Var("z"), _num(0)), EXIT, EMPTY),
        emit_inc(),
    ])
    return While(BoolLit(True), body)


# ---------------------------------------------------------------------------
# to_knievel: the execution-tree simulator
# ---------------------------------------------------------------------------

@dataclass
class _Instr:
    kind: str  # noop / assign / test / nondet / prob / exit
    payload: tuple = ()
    next: int = -1


def _compile_instructions(program: Program):
    """Flatten a program into single-step instructions with explicit
    successors.  The halt address is len(instructions)."""
    instrs: List[_Instr] = []
    prob_in_loop = [False]

    def emit(instr) -> int:
        instrs.append(instr)
        return len(instrs) - 1

    def compile_node(p, next_pc, loop_depth) -> int:
        if isinstance(p, Empty):
            return next_pc
        if isinstance(p, Skip):
            return emit(_Instr("noop", (), next_pc))
        if isinstance(p, Exit):
            return emit(_Instr("exit", ()))
        if isinstance(p, Assign):
            return emit(_Instr("assign", (p.var, p.expr), next_pc))
        if isinstance(p, Seq):
            rest = compile_node(p.rest, next_pc, loop_depth)
            return compile_node(p.first, rest, loop_depth)
        if isinstance(p, If):
            then = compile_node(p.then, next_pc, loop_depth)
            orelse = compile_node(p.orelse, next_pc, loop_depth)
            return emit(_Instr("test", (p.guard, then, orelse)))
        if isinstance(p, While):
            test = emit(_Instr("test", (p.guard, -1, next_pc)))
            body = compile_node(p.body, test, loop_depth + 1)
            instrs[test] = _Instr("test", (p.guard, body, next_pc))
            return test
        if isinstance(p, NondetChoice):
            left = compile_node(p.left, next_pc, loop_depth)
            right = compile_node(p.right, next_pc, loop_depth)
            return emit(_Instr("nondet", (left, right)))
        if isinstance(p, ProbChoice):
            if _has_variable(p.prob):
                raise NonConstantProbability(
                    "probabilistic choice with state-dependent probability")
            value = eval_aexpr(p.prob, EMPTY_VALUATION)
            left = compile_node(p.left, next_pc, loop_depth)
            right = compile_node(p.right, next_pc, loop_depth)
            if value <= 0:
                return emit(_Instr("noop", (), right))
            if value >= 1:
                return emit(_Instr("noop", (), left))
            if loop_depth > 0:
                prob_in_loop[0] = True
            return emit(_Instr("prob", (value, left, right)))
        raise TransformError(f"cannot compile {p!r}")

    entry = compile_node(program, None, 0)
    halt = len(instrs)
    for instr in instrs:
        if instr.next is None:
            instr.next = halt
        if instr.kind == "test":
            guard, then, orelse = instr.payload
            instr.payload = (guard,
                             halt if then is None else then,
                             halt if orelse is None else orelse)
        elif instr.kind in ("nondet", "prob"):
            instr.payload = tuple(halt if x is None else x
                                  for x in instr.payload)
    if entry is None:
        entry = halt
    return instrs, entry, halt, prob_in_loop[0]


def _has_variable(expr) -> bool:
    if isinstance(expr, Var):
        return True
    if isinstance(expr, Neg):
        return _has_variable(expr.operand)
    if isinstance(expr, ABin):
        return _has_variable(expr.left) or _has_variable(expr.right)
    return False


def _source_vars(program: Program) -> list:
    names = set()

    def walk_a(e):
        if isinstance(e, Var):
            names.add(e.name)
        elif isinstance(e, Neg):
            walk_a(e.operand)
        elif isinstance(e, ABin):
            walk_a(e.left)
            walk_a(e.right)

    def walk_b(b):
        if isinstance(b, Cmp):
            walk_a(b.left)
            walk_a(b.right)
        elif isinstance(b, BBin):
            walk_b(b.left)
            walk_b(b.right)
        elif hasattr(b, "operand"):
            walk_b(b.operand)

    def walk(p):
        if isinstance(p, Assign):
            names.add(p.var)
            walk_a(p.expr)
        elif isinstance(p, Seq):
            walk(p.first)
            walk(p.rest)
        elif isinstance(p, (NondetChoice,)):
            walk(p.left)
            walk(p.right)
        elif isinstance(p, ProbChoice):
            walk_a(p.prob)
            walk(p.left)
            walk(p.right)
        elif isinstance(p, While):
            walk_b(p.guard)
            walk(p.body)
        elif isinstance(p, If):
            walk_b(p.guard)
            walk(p.then)
            walk(p.orelse)

    walk(program)
    return sorted(names)


def _rename_expr(expr, slot):
    if isinstance(expr, Var):
        return Var(f"s{slot}_{expr.name}")
    if isinstance(expr, Neg):
        return Neg(_rename_expr(expr.operand, slot))
    if isinstance(expr, ABin):
        return ABin(expr.op, _rename_expr(expr.left, slot),
                    _rename_expr(expr.right, slot))
    return expr


def _rename_bexpr(b, slot):
    if isinstance(b, Cmp):
        return Cmp(b.op, _rename_expr(b.left, slot), _rename_expr(b.right, slot))
    if isinstance(b, BBin):
        return BBin(b.op, _rename_bexpr(b.left, slot), _rename_bexpr(b.right, slot))
    if isinstance(b, BoolLit):
        return b
    return type(b)(_rename_bexpr(b.operand, slot))


def to_knievel(program: Program, horizon_policy="double",
               max_width: int = 8) -> Program:
    """Rebuild a program in normal form, preserving whether its expected
    runtime is finite under each scheduler.

    The output advances every live branch of the source execution tree one
    step per round (branch weights in rational slot variables, at most
    max_width simultaneous branches), re-exposes the source's
    nondeterministic choices, accumulates the expected-runtime series in
    cer, flips one continuation coin per round, and on each crossing of the
    doubling bound cheers for one over the current continuation
    probability.  horizon_policy sets the initial bound: "double" starts at
    1, an integer starts there.

    Probabilities must be constant, and probabilistic choice inside a loop
    is refused: its frontier could outgrow any fixed slot count.
    """
    instrs, entry, halt, prob_in_loop = _compile_instructions(program)
    if prob_in_loop:
        raise FrontierWidthError(
            "frontier-encoding width exceeded: probabilistic choice inside "
            "a loop can split an unbounded number of branches")
    splits = sum(1 for i in instrs if i.kind == "prob")
    width = splits + 1
    if width > max_width:
        raise FrontierWidthError(
            f"frontier-encoding width exceeded: {width} slots needed, "
            f"{max_width} allowed")
    source_vars = _source_vars(program)
    initial_bound = 1 if horizon_policy == "double" else int(horizon_policy)

    def slot_step(slot: int) -> Program:
        cases = []
        for pc, instr in enumerate(instrs):
            cases.append((Cmp("=", Var(f"pc{slot}"), _num(pc)),
                          translate(slot, pc, instr)))
        dispatch = _chain(cases, terminate(slot))
        return If(Cmp("=", Var(f"a{slot}"), _num(1)), dispatch, EMPTY)

    def terminate(slot: int) -> Program:
        return seq_of([
            Assign("term", ABin("+", Var("term"), Var(f"w{slot}"))),
            Assign(f"a{slot}", _num(0)),
        ])

    def goto(slot, pc) -> Program:
        if pc == halt:
            return terminate(slot)
        return Assign(f"pc{slot}", _num(pc))

    def translate(slot: int, pc: int, instr: _Instr) -> Program:
        if instr.kind == "noop":
            return goto(slot, instr.next)
        if instr.kind == "exit":
            return terminate(slot)
        if instr.kind == "assign":
            var, expr = instr.payload
            return seq_of([
                Assign(f"s{slot}_{var}", _rename_expr(expr, slot)),
                goto(slot, instr.next),
            ])
        if instr.kind == "test":
            guard, then, orelse = instr.payload
            return If(_rename_bexpr(guard, slot),
                      goto(slot, then), goto(slot, orelse))
        if instr.kind == "nondet":
            left, right = instr.payload
            return NondetChoice(goto(slot, left), goto(slot, right))
        if instr.kind == "prob":
            value, left, right = instr.payload
            spawn_cases = []
            for target in range(1, width + 1):
                if target == slot:
                    continue
                copy = [Assign(f"a{target}", _num(1)),
                        Assign(f"pc{target}", _num(right)),
                        Assign(f"w{target}",
                               ABin("*", _num(1 - value), Var(f"w{slot}")))]
                copy += [Assign(f"s{target}_{v}", Var(f"s{slot}_{v}"))
                         for v in source_vars]
                spawn_cases.append((Cmp("=", Var(f"a{target}"), _num(0)),
                                    seq_of(copy)))
            spawn = _chain(spawn_cases, EMPTY)
            return seq_of([
                spawn,
                Assign(f"w{slot}", ABin("*", _num(value), Var(f"w{slot}"))),
                goto(slot, left),
            ])
        raise TransformError(f"unknown instruction {instr.kind}")

    alive_sum = Var("a1")
    for slot in range(2, width + 1):
        alive_sum = ABin("+", Var(f"a{slot}"), alive_sum)

    round_body = [slot_step(slot) for slot in range(1, width + 1)]
    round_body += [
        Assign("cer", ABin("+", Var("cer"),
                           ABin("-", _num(1), Var("term")))),
        COIN,
        Assign("chl", ABin("*", _num(2), Var("chl"))),
        If(Cmp(">", Var("cer"), Var("bnd")), seq_of([
            Assign("bnd", ABin("*", _num(2), Var("bnd"))),
            Assign("cw", _num(0)),
            While(Cmp("<", Var("cw"), Var("chl")),
                  Assign("cw", ABin("+", Var("cw"), _num(1)))),
        ]), EMPTY),
    ]
    inits = [
        Assign("a1", _num(1)),
        Assign("w1", _num(1)),
        Assign("pc1", _num(entry)),
        Assign("bnd", _num(initial_bound)),
        Assign("chl", _num(1)),
    ]
    return seq_of(inits + [While(Cmp(">", alive_sum, _num(0)),
                                 seq_of(round_body))])
