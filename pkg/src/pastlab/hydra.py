"""The stochastic Hydra game.

A hydra is a finite rooted tree together with a regrowth capacity n
(initially 4).  Each round Hercules chops off a head (a leaf plus its edge).
If the leaf had a grandparent the Hydra may then attempt any number of
evolutions; each evolution kills the Hydra outright with probability 1/2
and quadruples n otherwise.  Afterwards n - 1 copies of the remaining
subtree rooted at the chopped leaf's parent grow beneath the grandparent.
Without a grandparent nothing regrows and no evolution is possible.

Trees are immutable recursive tuples and node ids are root paths (tuples of
child indices), so copies of a subtree share structure; a million-headed
star costs one shared leaf object.  Tree equality in the game sense is
rooted-tree isomorphism, exposed through canonical shapes.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional

from . import ordinal
from .ordinal import Ordinal
from .syntax import (ABin, Assign, BoolLit, Cmp, EMPTY, EXIT, If,
                     NondetChoice, ProbChoice, Program, RatLit, SKIP, Seq,
                     Var, While, seq_of)


class HydraError(ValueError):
    pass


class EncodingWidthError(HydraError):
    """The tree does not fit the fixed pGCL variable encoding."""


@dataclass(frozen=True)
class Tree:
    children: tuple  # tuple of Tree

    def is_leaf(self):
        return not self.children


LEAF = Tree(())


@dataclass(frozen=True)
class HydraState:
    tree: Tree
    n: int = 4

    def node(self, path: tuple) -> Tree:
        t = self.tree
        for i in path:
            t = t.children[i]
        return t


@dataclass(frozen=True)
class RoundOutcome:
    survived: bool
    prob: Fraction
    result: Optional[HydraState]
    steps: int


# ---------------------------------------------------------------------------
# Tree utilities
# ---------------------------------------------------------------------------

def leaves(tree: Tree) -> List[tuple]:
    """Root paths of all leaves, in document order (the root itself counts
    only when the tree has a single node, in which case it has no head)."""
    out = []

    def walk(t, path):
        if t.is_leaf():
            out.append(path)
        for i, child in enumerate(t.children):
            walk(child, path + (i,))

    if tree.is_leaf():
        return []
    walk(tree, ())
    return out


def depth(tree: Tree) -> int:
    memo = {}

    def go(t):
        key = id(t)
        if key not in memo:
            memo[key] = 0 if t.is_leaf() else 1 + max(go(c) for c in t.children)
        return memo[key]

    return go(tree)


def head_count(tree: Tree) -> int:
    """Number of heads: leaves that hang on an edge."""
    if tree.is_leaf():
        return 0
    memo = {}

    def go(t):
        key = id(t)
        if key not in memo:
            memo[key] = 1 if t.is_leaf() else sum(go(c) for c in t.children)
        return memo[key]

    return go(tree)


def node_count(tree: Tree) -> int:
    memo = {}

    def go(t):
        key = id(t)
        if key not in memo:
            memo[key] = 1 + sum(go(c) for c in t.children)
        return memo[key]

    return go(tree)


def canonical_shape(tree: Tree) -> str:
    """Parenthesised canonical form; equal strings mean isomorphic trees."""
    memo = {}

    def go(t):
        key = id(t)
        if key not in memo:
            parts = sorted((go(c) for c in t.children), reverse=True)
            memo[key] = "(" + "".join(parts) + ")"
        return memo[key]

    return go(tree)


def isomorphic(a: Tree, b: Tree) -> bool:
    return canonical_shape(a) == canonical_shape(b)


def parse_hydra(text: str, n: int = 4) -> HydraState:
    """Nested-parentheses form: "(()())" is a root with two leaf children."""
    text = text.strip()
    pos = 0

    def node():
        nonlocal pos
        if pos >= len(text) or text[pos] != "(":
            raise HydraError(f"expected '(' at offset {pos} in {text!r}")
        pos += 1
        children = []
        while pos < len(text) and text[pos] == "(":
            children.append(node())
        if pos >= len(text) or text[pos] != ")":
            raise HydraError(f"expected ')' at offset {pos} in {text!r}")
        pos += 1
        return Tree(tuple(children))

    tree = node()
    if pos != len(text):
        raise HydraError(f"trailing input at offset {pos} in {text!r}")
    return HydraState(tree, n)


def print_hydra(h: HydraState) -> str:
    return canonical_shape(h.tree)


def hydra_to_json(h: HydraState) -> dict:
    parents = {}
    counter = [0]

    def walk(t, my_id):
        for child in t.children:
            counter[0] += 1
            child_id = counter[0]
            parents[str(child_id)] = my_id
            walk(child, child_id)

    walk(h.tree, 0)
    return {"n": h.n, "root": 0, "parents": parents}


def hydra_from_json(data: dict) -> HydraState:
    children = {}
    for child, parent in data.get("parents", {}).items():
        children.setdefault(int(parent), []).append(int(child))

    def build(node_id):
        return Tree(tuple(build(c) for c in sorted(children.get(node_id, ()))))

    return HydraState(build(int(data.get("root", 0))), int(data.get("n", 4)))


# ---------------------------------------------------------------------------
# The ordinal map
# ---------------------------------------------------------------------------

def T(h) -> Ordinal:
    """Ordinal rank of a hydra: leaves rank 0, internal nodes the natural
    sum of omega to the rank of each child."""
    tree = h.tree if isinstance(h, HydraState) else h
    memo = {}

    def go(t):
        key = id(t)
        if key in memo:
            return memo[key]
        if t.is_leaf():
            memo[key] = ordinal.ZERO
            return memo[key]
        terms = {}
        for child in t.children:
            exponent = go(child)
            terms[exponent] = terms.get(exponent, 0) + 1
        ordered = sorted(terms.items(), key=lambda kv: kv[0], reverse=True)
        memo[key] = Ordinal(tuple(ordered))
        return memo[key]

    return go(tree)


# ---------------------------------------------------------------------------
# Round mechanics
# ---------------------------------------------------------------------------

def _remove_leaf(tree: Tree, path: tuple) -> Tree:
    if not path:
        raise HydraError("the root is not a head")
    index = path[0]
    if index >= len(tree.children):
        raise HydraError(f"no child {index}")
    child = tree.children[index]
    if len(path) == 1:
        if not child.is_leaf():
            raise HydraError("chosen node is not a leaf")
        new_children = tree.children[:index] + tree.children[index + 1:]
        return Tree(new_children)
    return Tree(tree.children[:index]
                + (_remove_leaf(child, path[1:]),)
                + tree.children[index + 1:])


def _attach(tree: Tree, path: tuple, extra: Tree, copies: int) -> Tree:
    if not path:
        return Tree(tree.children + (extra,) * copies)
    index = path[0]
    return Tree(tree.children[:index]
                + (_attach(tree.children[index], path[1:], extra, copies),)
                + tree.children[index + 1:])


def play_round(h: HydraState, leaf: tuple, evolutions: int) -> List[RoundOutcome]:
    """All outcomes of one round in which Hercules chops `leaf` and the Hydra
    attempts `evolutions` evolutions.

    With a grandparent present: one surviving outcome with probability
    2**-evolutions, capacity n * 4**evolutions, and capacity-1 copies of the
    post-removal subtree rooted at the leaf's parent attached beneath the
    grandparent; plus one death outcome per evolution coin, with
    probabilities 1/2, 1/4, ..., 2**-evolutions.  Without a grandparent the
    single outcome has probability 1 and nothing regrows.
    """
    leaf = tuple(leaf)
    if evolutions < 0:
        raise HydraError("evolutions must be non-negative")
    node = h.node(leaf)
    if not node.is_leaf():
        raise HydraError("chosen node is not a leaf")
    if not leaf:
        raise HydraError("the root is not a head")
    removed = _remove_leaf(h.tree, leaf)
    has_grandparent = len(leaf) >= 2
    if not has_grandparent:
        if evolutions > 0:
            raise HydraError("cannot evolve without a grandparent")
        return [RoundOutcome(True, Fraction(1), HydraState(removed, h.n),
                             round_steps(h, leaf, 0, survived=True))]
    parent_path = leaf[:-1]
    grandparent_path = leaf[:-2]
    subtree = removed
    for i in parent_path:
        subtree = subtree.children[i]
    new_capacity = h.n * 4 ** evolutions
    grown = _attach(removed, grandparent_path, subtree, new_capacity - 1)
    outcomes = [RoundOutcome(True, Fraction(1, 2 ** evolutions),
                             HydraState(grown, new_capacity),
                             round_steps(h, leaf, evolutions, survived=True))]
    for i in range(1, evolutions + 1):
        outcomes.append(RoundOutcome(False, Fraction(1, 2 ** i), None,
                                     round_steps(h, leaf, i, survived=False)))
    return outcomes


def surviving(outcomes: List[RoundOutcome]) -> RoundOutcome:
    for outcome in outcomes:
        if outcome.survived:
            return outcome
    raise HydraError("no surviving outcome")


def successors_T(h: HydraState, leaf: tuple, e_max: int) -> List[Ordinal]:
    """Rank of the surviving hydra for 0, 1, ..., e_max evolutions: the
    one-round successor ranks whose least upper bound witnesses T."""
    if T(h) < ordinal.OMEGA:
        raise HydraError("successor enumeration needs rank at least omega")
    out = []
    for e in range(e_max + 1):
        result = surviving(play_round(h, leaf, e)).result
        out.append(T(result))
    return out


# ---------------------------------------------------------------------------
# Hercules strategies
# ---------------------------------------------------------------------------

class LeftmostDeepest:
    """Chop a deepest leaf; ties break toward the largest subtree (by node
    count, then shape) so the choice matches the compiled class dispatch,
    which serves the highest leaf class first."""

    name = "leftmost-deepest"

    def choose(self, h: HydraState) -> tuple:
        candidates = leaves(h.tree)
        if not candidates:
            raise HydraError("no heads left")

        def rank(path):
            keys = []
            t = h.tree
            for i in path:
                t = t.children[i]
                keys.append((node_count(t), canonical_shape(t)))
            return (len(path), tuple(keys))

        return max(candidates, key=rank)


class Scripted:
    """Follow a fixed list of leaf paths, one per round."""

    name = "scripted"

    def __init__(self, script):
        self.script = list(script)
        self.cursor = 0

    def choose(self, h: HydraState) -> tuple:
        if self.cursor >= len(self.script):
            raise HydraError("script exhausted")
        choice = tuple(self.script[self.cursor])
        self.cursor += 1
        return choice


class RandomLeaf:
    """Uniformly random head, deterministic for a fixed seed."""

    name = "random"

    def __init__(self, seed: int):
        self.rng = random.Random(seed)

    def choose(self, h: HydraState) -> tuple:
        candidates = leaves(h.tree)
        if not candidates:
            raise HydraError("no heads left")
        return self.rng.choice(candidates)


def hercules_choose(h: HydraState, strategy) -> tuple:
    if isinstance(strategy, str):
        if strategy == "leftmost-deepest":
            strategy = LeftmostDeepest()
        else:
            raise HydraError(f"unknown strategy {strategy!r}")
    return strategy.choose(h)


# ---------------------------------------------------------------------------
# Compilation to pGCL
# ---------------------------------------------------------------------------
#
# Hydras of depth at most two are encoded in integer variables: hc counts the
# root's internal children bearing exactly c leaves (c = 1..width), b counts
# the root's own leaf children, and n is the regrowth capacity.  Chopping a
# leaf under a class-c child moves that child (and, after evolution, n - 1
# fresh copies of it) into class c-1, where class 0 means a bare leaf under
# the root.  Round dynamics never deepen a tree or raise a child's leaf
# count, so the width fixed at compile time suffices forever.  Deeper trees
# have no such finite-variable numbering here and are refused.

def _num(value) -> RatLit:
    return RatLit(Fraction(value))


def _class_counts(h: HydraState):
    """(counts per leaf-class 1..width, root leaf count) for depth <= 2."""
    if depth(h.tree) > 2:
        raise EncodingWidthError(
            "tree too large for the configured encoding width: "
            "only hydras of depth <= 2 have the class encoding")
    b = 0
    classes = {}
    for child in h.tree.children:
        if child.is_leaf():
            b += 1
        else:
            c = len(child.children)
            classes[c] = classes.get(c, 0) + 1
    width = max(classes) if classes else 0
    return [classes.get(c, 0) for c in range(1, width + 1)], b


def _evolution_block() -> Program:
    evolve_choice = NondetChoice(Assign("evolve", _num(0)),
                                 Assign("evolve", _num(1)))
    body = seq_of([
        ProbChoice(SKIP, _num(Fraction(1, 2)), EXIT),
        Assign("n", ABin("*", _num(4), Var("n"))),
        evolve_choice,
    ])
    return seq_of([evolve_choice, While(Cmp("=", Var("evolve"), _num(1)), body)])


def _round_program(c: int) -> Program:
    """One round chopping a leaf in class c (c = 0 chops a root leaf)."""
    if c == 0:
        return Assign("b", ABin("-", Var("b"), _num(1)))
    target = f"h{c}" if c >= 1 else "b"
    gain = "b" if c == 1 else f"h{c - 1}"
    return seq_of([
        Assign(target, ABin("-", Var(target), _num(1))),
        _evolution_block(),
        Assign(gain, ABin("+", Var(gain), Var("n"))),
    ])


def _priority_dispatch(order) -> Program:
    """if (class count > 0) round else if ... chained along the priority."""
    prog: Program = EMPTY
    for c in reversed(order):
        var = "b" if c == 0 else f"h{c}"
        prog = If(Cmp(">", Var(var), _num(0)), _round_program(c), prog)
    return prog


def compile_to_pgcl(h: HydraState, hercules="leftmost-deepest") -> Program:
    """Compile the whole game into a pGCL program.

    The program's nondeterministic choices are exactly the Hydra's evolution
    decisions; deaths are skip-or-exit coin flips, so the output is already
    in normal form.  Hercules's strategy is fixed at compile time as a
    priority order over leaf classes: leftmost-deepest prefers the deepest
    class, random(seed) uses a seed-shuffled priority, and scripted takes a
    list of class picks (0 for a root leaf) consumed one per round before
    falling back to leftmost-deepest.
    """
    counts, b = _class_counts(h)
    width = len(counts)
    order = list(range(width, 0, -1)) + [0]

    script: list = []
    if isinstance(hercules, tuple):
        kind = hercules[0]
        if kind == "random":
            rng = random.Random(hercules[1])
            rng.shuffle(order)
        elif kind == "scripted":
            script = [int(c) for c in hercules[1]]
            if any(c < 0 or c > width for c in script):
                raise HydraError("scripted class out of range")
        else:
            raise HydraError(f"unknown strategy {hercules!r}")
    elif hercules != "leftmost-deepest":
        raise HydraError(f"unknown strategy {hercules!r}")

    total = Var("b")
    for c in range(1, width + 1):
        total = ABin("+", Var(f"h{c}"), total)

    dispatch = _priority_dispatch(order)
    if script:
        # Round counter dispatch for the scripted prefix, guarded so an
        # empty scripted class falls back to the priority order.
        for r, c in reversed(list(enumerate(script))):
            var = "b" if c == 0 else f"h{c}"
            scripted_round = If(Cmp(">", Var(var), _num(0)),
                                _round_program(c), dispatch)
            dispatch = If(Cmp("=", Var("r"), _num(r)), scripted_round, dispatch)
        dispatch = Seq(dispatch, Assign("r", ABin("+", Var("r"), _num(1))))

    body = seq_of([
        If(Cmp("=", total, _num(0)), EXIT, EMPTY),
        dispatch,
    ])
    inits = [Assign("n", _num(h.n)), Assign("b", _num(b))]
    for c in range(1, width + 1):
        inits.append(Assign(f"h{c}", _num(counts[c - 1])))
    return seq_of(inits + [While(BoolLit(True), body)])


def class_of_leaf(h: HydraState, leaf: tuple) -> int:
    """Leaf class in the depth <= 2 encoding: 0 for a root leaf, else the
    leaf count of its parent (before the chop)."""
    leaf = tuple(leaf)
    if len(leaf) == 1:
        return 0
    if len(leaf) == 2:
        return len(h.tree.children[leaf[0]].children)
    raise EncodingWidthError("leaf deeper than the class encoding")


def tree_from_counts(counts, b: int) -> Tree:
    children = [LEAF] * b
    for c, count in enumerate(counts, start=1):
        children.extend([Tree((LEAF,) * c)] * count)
    return Tree(tuple(children))


# Step counts of one round of the compiled game along one outcome's path,
# measured against the leftmost-deepest emission and pinned by a test that
# simulates the compiled program (tests/test_hydra.py).  From the loop head:
# unfold + emptiness check + dispatch gives 4 steps plus one per priority
# class inspected before the match; a root-leaf chop then takes 2 more, a
# class chop 9 more plus 9 per surviving evolution cycle, and a death at
# coin i collapses 8 + 9*(i - 1) steps after the dispatch.
_ROUND_HEAD = 4
_ROUND_ROOT_TAIL = 2
_ROUND_CLASS_TAIL = 9
_ROUND_PER_EVOLUTION = 9
_ROUND_DEATH_TAIL = 8


def round_steps(h: HydraState, leaf: tuple, evolutions: int,
                survived: bool = True) -> int:
    """Deterministic step count of one round of the compiled game.

    For the surviving path this counts a full outer-loop iteration of the
    class encoding; a death outcome at coin i counts the steps up to and
    including the collapse of that exit.  Trees deeper than the encoding
    reuse the formula with the leaf treated as first priority.
    """
    leaf = tuple(leaf)
    try:
        cls = class_of_leaf(h, leaf)
        counts, _ = _class_counts(h)
        width = len(counts)
        order = list(range(width, 0, -1)) + [0]
        position = order.index(cls) if cls in order else 0
    except (EncodingWidthError, HydraError):
        cls = 0 if len(leaf) == 1 else 1
        position = 0
    base = _ROUND_HEAD + position
    if cls == 0:
        return base + _ROUND_ROOT_TAIL
    if survived:
        return base + _ROUND_CLASS_TAIL + evolutions * _ROUND_PER_EVOLUTION
    return base + _ROUND_DEATH_TAIL + (evolutions - 1) * _ROUND_PER_EVOLUTION
