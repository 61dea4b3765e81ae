"""Bounded execution-tree analytics.

Everything here is exact: probabilities are rationals, and the quantitative
outputs are prefixes of the defining series, never floating approximations.
Depth is counted in applications of the transition relation.

The expected-runtime lower bound after k depths is

    L(k) = sum over j < k of (1 - terminal mass reached within j steps)

which is monotone in k and equals the expected runtime once the tree has no
non-terminal frontier left.  The expected-time-to-reach variant truncates
every path at its first state satisfying the target predicate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, List, Optional

from .semantics import (ExecState, Exit, Kind, ProgramState, classify,
                        head_redex, initial_state, is_terminal, step,
                        step_all)
from .syntax import Program, print_rational
from .scheduling import Scheduler, iter_partial_schedules, standard_extension

ZERO = Fraction(0)
ONE = Fraction(1)

DEFAULT_NODE_CAP = 500_000


class ResourceCapExceeded(Exception):
    """Exploration hit the configured node cap."""


class StateSpaceNotClosed(Exception):
    """The reachable program-state space did not close within the bound."""


# ---------------------------------------------------------------------------
# Execution trees
# ---------------------------------------------------------------------------

@dataclass
class TreeNode:
    state: ExecState
    depth: int
    children: list = field(default_factory=list)  # (Kind, TreeNode)


@dataclass
class ExecTree:
    root: TreeNode
    depth_cap: int
    levels: list  # levels[d] = list of TreeNode at depth d

    @property
    def frontier(self):
        """Non-terminal states left unexpanded at the depth cap."""
        if len(self.levels) <= self.depth_cap:
            return []
        return [n for n in self.levels[self.depth_cap]
                if not is_terminal(n.state)]

    def node_count(self):
        return sum(len(level) for level in self.levels)

    def terminal_mass(self):
        return sum((n.state.prob for level in self.levels for n in level
                    if is_terminal(n.state)), ZERO)

    def frontier_mass(self):
        return sum((n.state.prob for n in self.frontier), ZERO)

    def to_json(self):
        nodes = []
        edges = []
        ids = {}
        for level in self.levels:
            for node in level:
                ids[id(node)] = len(nodes)
                nodes.append({
                    "id": ids[id(node)],
                    "depth": node.depth,
                    "terminal": is_terminal(node.state),
                    **node.state.to_json(),
                })
        for level in self.levels:
            for node in level:
                for kind, child in node.children:
                    edges.append({"from": ids[id(node)],
                                  "to": ids[id(child)],
                                  "kind": kind.value})
        return {"depth_cap": self.depth_cap, "nodes": nodes, "edges": edges}


def build_tree(program: Program, scheduler: Scheduler, depth: int,
               node_cap: int = DEFAULT_NODE_CAP) -> ExecTree:
    """Breadth-first execution tree from (program, zero valuation, 1, empty
    history) down to the depth cap.  Terminal states are leaves."""
    root = TreeNode(initial_state(program), 0)
    levels = [[root]]
    count = 1
    for d in range(depth):
        layer = []
        for node in levels[d]:
            if is_terminal(node.state):
                continue
            for succ in step(node.state, scheduler):
                child = TreeNode(succ.state, d + 1)
                node.children.append((succ.kind, child))
                layer.append(child)
                count += 1
                if count > node_cap:
                    raise ResourceCapExceeded(
                        f"execution tree exceeds {node_cap} nodes")
        if not layer:
            break
        levels.append(layer)
    return ExecTree(root, depth, levels)


# ---------------------------------------------------------------------------
# Mass profiles (terminal/absorbed probability per depth)
# ---------------------------------------------------------------------------

@dataclass
class MassProfile:
    """Per-depth accounting of one bounded run.

    hit_mass[d] is the probability mass first absorbed at depth d (reaching a
    terminal state, or the target for reachability runs).  dead_mass is mass
    that terminated without ever hitting the target and so never will.
    frontier holds the live states at the final explored depth.
    """

    depth: int
    hit_mass: List[Fraction]
    dead_mass: Fraction
    frontier: List[ExecState]

    def cumulative_hit(self, k: int) -> Fraction:
        return sum(self.hit_mass[:k + 1], ZERO)

    def frontier_mass(self) -> Fraction:
        return sum((s.prob for s in self.frontier), ZERO)


def run_masses(program: Program, scheduler: Scheduler, depth: int,
               target: Optional[Callable[[ProgramState], bool]] = None,
               node_cap: int = DEFAULT_NODE_CAP) -> MassProfile:
    state = initial_state(program)
    hit = [ZERO] * (depth + 1)
    dead = ZERO
    if target is not None and target(state.program_state()):
        hit[0] = state.prob
        return MassProfile(depth, hit, ZERO, [])
    if is_terminal(state):
        if target is None:
            hit[0] = state.prob
            return MassProfile(depth, hit, ZERO, [])
        return MassProfile(depth, hit, state.prob, [])
    frontier = [state]
    visited = 1
    for d in range(1, depth + 1):
        layer = []
        for st in frontier:
            for succ in step(st, scheduler):
                new = succ.state
                visited += 1
                if visited > node_cap:
                    raise ResourceCapExceeded(
                        f"exploration exceeds {node_cap} states")
                if target is not None and target(new.program_state()):
                    hit[d] += new.prob
                elif is_terminal(new):
                    if target is None:
                        hit[d] += new.prob
                    else:
                        dead += new.prob
                else:
                    layer.append(new)
        frontier = layer
        if not frontier:
            break
    return MassProfile(depth, hit, dead, frontier)


def termination_prob_upto(program: Program, scheduler: Scheduler, k: int,
                          node_cap: int = DEFAULT_NODE_CAP) -> Fraction:
    """Exact probability of reaching a terminal state within k steps."""
    profile = run_masses(program, scheduler, k, node_cap=node_cap)
    return profile.cumulative_hit(k)


@dataclass
class RuntimeBounds:
    lower: Fraction
    exact: Optional[Fraction]
    closed: bool


def _series_bounds(profile: MassProfile, k: int) -> RuntimeBounds:
    lower = ZERO
    cum = ZERO
    for j in range(k):
        if j <= profile.depth:
            cum += profile.hit_mass[j]
        lower += ONE - cum
    closed = not profile.frontier and profile.dead_mass == 0
    return RuntimeBounds(lower, lower if closed else None, closed)


def exp_runtime_bounds(program: Program, scheduler: Scheduler, k: int,
                       node_cap: int = DEFAULT_NODE_CAP) -> RuntimeBounds:
    """Lower bound (exact when closed) for the expected-runtime series."""
    profile = run_masses(program, scheduler, k, node_cap=node_cap)
    return _series_bounds(profile, k)


def exp_reach_runtime_bounds(program: Program, scheduler: Scheduler,
                             target: Callable[[ProgramState], bool], k: int,
                             node_cap: int = DEFAULT_NODE_CAP) -> RuntimeBounds:
    """Expected time until a path first enters the target set.

    Paths are truncated at their first target hit.  A path that terminates
    without hitting the target never will, so such mass keeps every later
    series term positive and the bounds can only close when all mass hits.
    """
    profile = run_masses(program, scheduler, k, target=target,
                         node_cap=node_cap)
    return _series_bounds(profile, k)


# ---------------------------------------------------------------------------
# Reachable nondeterministic queries and the AST semi-decider
# ---------------------------------------------------------------------------

def collect_nondet_queries(program: Program, depth: int,
                           node_cap: int = DEFAULT_NODE_CAP) -> set:
    """Histories at which some execution can query the scheduler within
    `depth` steps, exploring both directions of every choice."""
    queries = set()
    frontier = [initial_state(program)]
    visited = 1
    for _ in range(depth):
        layer = []
        for st in frontier:
            if is_terminal(st):
                continue
            if classify(st.program_state()) == "nondet":
                queries.add(st.history)
            for succ in step_all(st):
                layer.append(succ.state)
                visited += 1
                if visited > node_cap:
                    raise ResourceCapExceeded(
                        f"query collection exceeds {node_cap} states")
        frontier = layer
        if not frontier:
            break
    return queries


def ast_semicheck(program: Program, delta: Fraction, n: int,
                  query_cap: int = 16,
                  node_cap: int = DEFAULT_NODE_CAP) -> bool:
    """True iff every partial schedule of size n pushes the termination
    probability within n steps strictly above delta.

    This is one instance of the almost-sure-termination semi-decision
    procedure: a program is AST iff for every delta < 1 some n makes this
    true.  Schedules are enumerated lazily over the reachable queries and
    the check short-circuits on the first failing schedule.
    """
    delta = Fraction(delta)
    if not 0 < delta < 1:
        raise ValueError("delta must lie strictly between 0 and 1")
    queries = collect_nondet_queries(program, n, node_cap=node_cap)
    for partial in iter_partial_schedules(n, queries, cap=query_cap):
        got = termination_prob_upto(program, standard_extension(partial), n,
                                    node_cap=node_cap)
        if got <= delta:
            return False
    return True


# ---------------------------------------------------------------------------
# Knievel artery measurements
# ---------------------------------------------------------------------------

def artery_widths(program: Program, scheduler: Scheduler, depth: int,
                  node_cap: int = DEFAULT_NODE_CAP) -> list:
    """Per-depth count of live states: non-terminal states whose next step
    is not the collapse of an exit.

    Under the one-step exit convention every probabilistic skip-or-exit
    split necessarily leaves a transient exit-headed state at the next
    depth; those states are the terminal leaves of the artery picture and
    are not counted as live.
    """
    widths = []
    frontier = [initial_state(program)]
    visited = 1
    for _ in range(depth + 1):
        live = [s for s in frontier
                if not is_terminal(s)
                and not isinstance(head_redex(s.program), Exit)]
        widths.append(len(live))
        layer = []
        for st in frontier:
            if is_terminal(st):
                continue
            for succ in step(st, scheduler):
                layer.append(succ.state)
                visited += 1
                if visited > node_cap:
                    raise ResourceCapExceeded(
                        f"exploration exceeds {node_cap} states")
        frontier = layer
        if not frontier:
            break
    return widths


# ---------------------------------------------------------------------------
# Program-state graphs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Edge:
    src: int
    label: str  # det / nondet-left / nondet-right / prob-left / prob-right
    dst: int
    prob: Optional[Fraction] = None


@dataclass
class StateGraph:
    states: list            # ProgramState per node id
    kinds: list             # terminal / deterministic / nondet / prob
    edges: dict             # node id -> list of Edge
    initial: int = 0

    def __len__(self):
        return len(self.states)

    def node_key(self, i: int) -> str:
        return self.states[i].key()

    def key_index(self) -> dict:
        return {self.states[i].key(): i for i in range(len(self.states))}

    def terminal_nodes(self) -> set:
        return {i for i, k in enumerate(self.kinds) if k == "terminal"}

    def reachable_from(self, start: int) -> set:
        seen = {start}
        stack = [start]
        while stack:
            node = stack.pop()
            for edge in self.edges.get(node, ()):
                if edge.dst not in seen:
                    seen.add(edge.dst)
                    stack.append(edge.dst)
        return seen

    def to_json(self):
        return {
            "initial": self.initial,
            "nodes": [{"id": i, "key": self.node_key(i),
                       "kind": self.kinds[i]}
                      for i in range(len(self.states))],
            "edges": [{"from": e.src, "label": e.label, "to": e.dst,
                       **({"prob": print_rational(e.prob)}
                          if e.prob is not None else {})}
                      for src in range(len(self.states))
                      for e in self.edges.get(src, ())],
        }

    @staticmethod
    def from_json(data: dict) -> "StateGraph":
        from .syntax import parse
        from .semantics import Valuation
        states = []
        kinds = []
        for node in sorted(data["nodes"], key=lambda n: n["id"]):
            program_text, _, valuation_text = node["key"].partition(" | ")
            mapping = {}
            for item in valuation_text.split(","):
                if item:
                    name, _, value = item.partition("=")
                    mapping[name] = Fraction(value)
            states.append(ProgramState(parse(program_text),
                                       Valuation(mapping)))
            kinds.append(node["kind"])
        edges = {}
        for edge in data.get("edges", ()):
            prob = Fraction(edge["prob"]) if "prob" in edge else None
            edges.setdefault(edge["from"], []).append(
                Edge(edge["from"], edge["label"], edge["to"], prob))
        return StateGraph(states, kinds, edges, data.get("initial", 0))


def collapse_to_state_graph(program: Program, bound: int) -> StateGraph:
    """Finite graph of reachable program states, exploring both directions of
    every nondeterministic choice and both probabilistic branches.

    Fails loudly when more than `bound` distinct program states appear, since
    certificate checking on an incomplete graph would prove nothing.
    """
    start = ProgramState(program, initial_state(program).valuation)
    states = [start]
    index = {start: 0}
    kinds = [classify(start)]
    edges = {}
    todo = [0]
    while todo:
        node = todo.pop()
        ps = states[node]
        if kinds[node] == "terminal":
            continue
        out = []
        exec_state = ExecState(ps.program, ps.valuation, ONE, ())
        successors = step_all(exec_state)
        kind = kinds[node]
        for succ in successors:
            child = succ.state.program_state()
            if child not in index:
                if len(states) >= bound:
                    raise StateSpaceNotClosed(
                        f"state space not closed within {bound} states")
                index[child] = len(states)
                states.append(child)
                kinds.append(classify(child))
                todo.append(index[child])
            dst = index[child]
            if kind == "nondet":
                label = ("nondet-left" if succ.kind == Kind.NONDET
                         and succ.state.history
                         and succ.state.history[-1].value == "Ln"
                         else "nondet-right")
                out.append(Edge(node, label, dst))
            elif kind == "prob":
                if succ.kind == Kind.PROB_LEFT:
                    out.append(Edge(node, "prob-left", dst,
                                    succ.state.prob))
                else:
                    out.append(Edge(node, "prob-right", dst,
                                    succ.state.prob))
            else:
                out.append(Edge(node, "det", dst))
        edges[node] = out
    return StateGraph(states, kinds, edges, 0)
