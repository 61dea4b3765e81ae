"""Certificate checkers over finite program-state graphs.

An RSM certificate (h, epsilon) asserts that h drops by at least epsilon in
expectation at every state where h is positive: through the single successor
of a deterministic state, the worse of the two successors of a
nondeterministic state, and the exact mixture at a probabilistic state.
When it checks out, h(s)/epsilon bounds the expected time to reach the
states where h vanishes, under every scheduler.

A rank certificate (g, k) assigns an ordinal rank to every node, zero
exactly on terminals, and for each non-terminal node an RSM certificate
whose zero set is exactly the strictly-lower-ranked region reachable from
it (plus everything unreachable from it).  Checking is purely structural;
the rule is sound only for normal-form programs, and the regression suite
keeps a non-normal-form certificate that passes while the program diverges.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional

from .exploration import StateGraph
from .ordinal import parse_ordinal, print_ordinal
from .ordinal import ZERO as ORD_ZERO
from .syntax import print_rational

ZERO = Fraction(0)
ONE = Fraction(1)


class CertificateError(ValueError):
    """Malformed certificate: missing entries or invalid payloads."""


@dataclass(frozen=True)
class RsmCert:
    h: dict  # node id -> non-negative Fraction
    epsilon: Fraction

    def value(self, node: int) -> Fraction:
        if node not in self.h:
            raise CertificateError(f"certificate missing node {node}")
        return self.h[node]

    def to_json(self, graph: StateGraph) -> dict:
        return {
            "epsilon": print_rational(self.epsilon),
            "h": {graph.node_key(i): print_rational(v)
                  for i, v in sorted(self.h.items())},
        }

    @staticmethod
    def from_json(data: dict, graph: StateGraph) -> "RsmCert":
        index = graph.key_index()
        h = {}
        for key, value in data.get("h", {}).items():
            if key not in index:
                raise CertificateError(f"certificate names unknown state {key!r}")
            h[index[key]] = Fraction(value)
        return RsmCert(h, Fraction(data["epsilon"]))


@dataclass(frozen=True)
class RuleCert:
    g: dict  # node id -> Ordinal
    k: dict  # non-terminal node id -> RsmCert

    def to_json(self, graph: StateGraph) -> dict:
        return {
            "g": {graph.node_key(i): print_ordinal(v)
                  for i, v in sorted(self.g.items())},
            "k": {graph.node_key(i): cert.to_json(graph)
                  for i, cert in sorted(self.k.items())},
        }

    @staticmethod
    def from_json(data: dict, graph: StateGraph) -> "RuleCert":
        index = graph.key_index()
        g = {}
        for key, value in data.get("g", {}).items():
            if key not in index:
                raise CertificateError(f"certificate names unknown state {key!r}")
            g[index[key]] = parse_ordinal(value)
        k = {}
        for key, value in data.get("k", {}).items():
            if key not in index:
                raise CertificateError(f"certificate names unknown state {key!r}")
            k[index[key]] = RsmCert.from_json(value, graph)
        return RuleCert(g, k)


@dataclass
class Verdict:
    ok: bool
    violations: list = field(default_factory=list)
    # violations: (node, condition-id, lhs, rhs)

    def describe(self, graph: Optional[StateGraph] = None) -> str:
        if self.ok:
            return "OK"
        lines = []
        for node, condition, lhs, rhs in self.violations:
            name = graph.node_key(node) if graph is not None else f"#{node}"
            lines.append(f"{condition} at {name}: {lhs} vs {rhs}")
        return "\n".join(lines)


def _successor_values(graph: StateGraph, cert: RsmCert, node: int):
    kind = graph.kinds[node]
    edges = graph.edges.get(node, ())
    if kind == "deterministic":
        (edge,) = edges
        return cert.value(edge.dst)
    if kind == "nondet":
        return max(cert.value(e.dst) for e in edges)
    if kind == "prob":
        return sum((e.prob * cert.value(e.dst) for e in edges), ZERO)
    raise CertificateError(f"no successor for kind {kind}")


def check_rsm(graph: StateGraph, cert: RsmCert,
              restrict: Optional[set] = None) -> Verdict:
    """Verify all RSM conditions; the verdict lists every violated
    inequality with its exact sides.

    With `restrict`, only nodes in that set are examined (used by the proof
    rule to limit a per-state certificate to the states reachable from it).
    """
    if cert.epsilon <= 0:
        return Verdict(False, [(graph.initial, "epsilon-positive",
                                cert.epsilon, ZERO)])
    nodes = range(len(graph.states)) if restrict is None else sorted(restrict)
    violations = []
    for node in nodes:
        value = cert.value(node)
        if value < 0:
            violations.append((node, "h-nonnegative", value, ZERO))
            continue
        if graph.kinds[node] == "terminal":
            if value != 0:
                violations.append((node, "h-zero-on-terminal", value, ZERO))
            continue
        if value == 0:
            continue
        successor = _successor_values(graph, cert, node)
        if successor + cert.epsilon > value:
            condition = {"deterministic": "rsm-det", "nondet": "rsm-nondet",
                         "prob": "rsm-prob"}[graph.kinds[node]]
            violations.append((node, condition,
                               successor + cert.epsilon, value))
    return Verdict(not violations, violations)


def rsm_bound(cert: RsmCert, node: int) -> Fraction:
    """h(node)/epsilon: the certified ceiling on the expected time to reach
    the zero set of h from this node, valid once check_rsm passed."""
    return cert.value(node) / cert.epsilon


def lower_set(graph: StateGraph, g: dict, node: int) -> set:
    """Nodes reachable from `node` whose rank is strictly below its own."""
    if node not in g:
        raise CertificateError(f"rank missing node {node}")
    rank = g[node]
    out = set()
    for other in graph.reachable_from(node):
        if other not in g:
            raise CertificateError(f"rank missing node {other}")
        if g[other] < rank:
            out.add(other)
    return out


def check_proof_rule(graph: StateGraph, cert: RuleCert) -> Verdict:
    """Check the ordinal rank rule: rank zero exactly on terminals, and for
    each non-terminal node a valid RSM certificate over its reachable cone
    whose zero set is exactly the lower-ranked region plus the unreachable
    remainder."""
    violations = []
    all_nodes = set(range(len(graph.states)))
    for node in sorted(all_nodes):
        if node not in cert.g:
            raise CertificateError(f"rank missing node {node}")
        rank = cert.g[node]
        terminal = graph.kinds[node] == "terminal"
        if terminal and rank != ORD_ZERO:
            violations.append((node, "rank-zero-on-terminal", rank, ORD_ZERO))
        if not terminal and rank == ORD_ZERO:
            violations.append((node, "rank-positive-on-nonterminal",
                               rank, ORD_ZERO))
    for node in sorted(all_nodes):
        if graph.kinds[node] == "terminal":
            continue
        if node not in cert.k:
            raise CertificateError(f"certification missing node {node}")
        rsm = cert.k[node]
        reach = graph.reachable_from(node)
        lower = lower_set(graph, cert.g, node)
        expected_zero = lower | (all_nodes - reach)
        for other in sorted(all_nodes):
            value = rsm.value(other)
            if other in expected_zero and value != 0:
                violations.append((other, f"zero-set-at-{node}", value, ZERO))
            if other not in expected_zero and value == 0:
                violations.append((other, f"zero-set-at-{node}", value,
                                   "positive"))
        sub = check_rsm(graph, rsm, restrict=reach)
        for violation in sub.violations:
            violations.append((violation[0], f"{violation[1]}-at-{node}",
                               violation[2], violation[3]))
    return Verdict(not violations, violations)


# ---------------------------------------------------------------------------
# Constructing in-loop RSM certificates
# ---------------------------------------------------------------------------

def _solve_linear(rows: List[List[Fraction]], rhs: List[Fraction]):
    """Gaussian elimination over exact rationals; returns the solution or
    None when the system is singular."""
    size = len(rows)
    a = [list(row) + [rhs[i]] for i, row in enumerate(rows)]
    for col in range(size):
        pivot = next((r for r in range(col, size) if a[r][col] != 0), None)
        if pivot is None:
            return None
        a[col], a[pivot] = a[pivot], a[col]
        inv = a[col][col]
        a[col] = [entry / inv for entry in a[col]]
        for r in range(size):
            if r != col and a[r][col] != 0:
                factor = a[r][col]
                a[r] = [entry - factor * other
                        for entry, other in zip(a[r], a[col])]
    return [a[i][size] for i in range(size)]


class FixpointDiverges(Exception):
    """The region admits a scheduler that never leaves it."""


def _trapped_subregion(graph: StateGraph, region: set) -> set:
    """Largest subset of the region a scheduler can keep forever: greatest
    fixpoint where deterministic nodes stay, nondeterministic nodes can
    choose to stay, and probabilistic nodes stay with both branches."""
    trapped = set(region)
    changed = True
    while changed:
        changed = False
        for node in list(trapped):
            kind = graph.kinds[node]
            edges = graph.edges.get(node, ())
            if kind == "terminal":
                stays = False
            elif kind == "nondet":
                stays = any(e.dst in trapped for e in edges)
            else:  # deterministic or prob: all successors must stay inside
                stays = all(e.dst in trapped for e in edges)
            if not stays:
                trapped.discard(node)
                changed = True
    return trapped


def worst_case_exit_times(graph: StateGraph, region: set) -> Dict[int, Fraction]:
    """Exact least fixpoint of  t = 1 + (max | mixture | successor)  over the
    region, i.e. the scheduler-worst expected number of steps to leave it.

    Solved by policy iteration with exact linear solves; raises
    FixpointDiverges when some scheduler never leaves the region.
    """
    region = set(region)
    for node in region:
        if graph.kinds[node] == "terminal":
            raise FixpointDiverges("terminal state inside the region never exits")
    if _trapped_subregion(graph, region):
        raise FixpointDiverges("region not uniformly exit-bounded")
    order = sorted(region)
    index = {node: i for i, node in enumerate(order)}
    policy = {}
    for node in order:
        if graph.kinds[node] == "nondet":
            policy[node] = graph.edges[node][0].dst

    def solve(current_policy):
        size = len(order)
        rows = [[ZERO] * size for _ in range(size)]
        rhs = [ONE] * size
        for node in order:
            i = index[node]
            rows[i][i] = ONE
            kind = graph.kinds[node]
            if kind == "deterministic":
                succ = graph.edges[node][0].dst
                if succ in index:
                    rows[i][index[succ]] -= ONE
            elif kind == "nondet":
                succ = current_policy[node]
                if succ in index:
                    rows[i][index[succ]] -= ONE
            else:  # prob
                for edge in graph.edges[node]:
                    if edge.dst in index:
                        rows[i][index[edge.dst]] -= edge.prob
        solution = _solve_linear(rows, rhs)
        if solution is None or any(v < 0 for v in solution):
            raise FixpointDiverges("policy evaluation has no finite solution")
        return {node: solution[index[node]] for node in order}

    while True:
        values = solve(policy)

        def val(dst):
            return values[dst] if dst in values else ZERO

        improved = False
        for node in order:
            if graph.kinds[node] != "nondet":
                continue
            best = max(graph.edges[node], key=lambda e: val(e.dst))
            if val(best.dst) > val(policy[node]):
                policy[node] = best.dst
                improved = True
        if not improved:
            return values


def in_loop_rsm_from_bound(graph: StateGraph, region: Iterable[int],
                           bound) -> RsmCert:
    """Build the certificate promised by a known exit-time bound for a loop
    region: h is the exact scheduler-worst expected number of steps to
    leave the region (zero outside), with epsilon 1.

    Fails when the fixpoint diverges (the region is not uniformly
    exit-bounded) or when the computed worst case exceeds the stated bound.
    """
    bound = Fraction(bound)
    region = set(region)
    times = worst_case_exit_times(graph, region)
    worst = max(times.values(), default=ZERO)
    if worst > bound:
        raise CertificateError(
            f"stated bound {bound} is below the worst-case exit time {worst}")
    h = {node: ZERO for node in range(len(graph.states))}
    h.update(times)
    return RsmCert(h, ONE)
