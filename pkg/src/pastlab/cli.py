"""Command-line interface.

Exit codes: 0 success, 1 verdict failure (certificate rejected, semi-check
false, not in normal form), 2 usage, parse, or resource errors.  All
probabilities print as num/den; --decimal adds a clearly labelled
approximate column.  Runs with a fixed --seed are byte-reproducible.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys
from fractions import Fraction

from . import certificates, exploration, hydra, scheduling, transforms
from .syntax import ParseError, parse, print_program, print_rational


class CliError(Exception):
    """Usage-level failure: reported on stderr with exit status 2."""


def _read_program(path: str):
    try:
        with open(path) as handle:
            source = handle.read()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}") from exc
    try:
        return parse(source)
    except ParseError as exc:
        raise CliError(f"{path}: {exc}") from exc


def _read_json(path: str):
    try:
        with open(path) as handle:
            return json.load(handle)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: invalid JSON: {exc}") from exc


def _write_output(text: str, path):
    if path is None or path == "-":
        print(text)
    else:
        with open(path, "w") as handle:
            handle.write(text if text.endswith("\n") else text + "\n")


def _node_cap(args) -> int:
    env = os.environ.get("PASTLAB_NODE_CAP")
    if args.node_cap is not None:
        return args.node_cap
    if env is not None:
        return int(env)
    return exploration.DEFAULT_NODE_CAP


def _scheduler(args):
    try:
        return scheduling.parse_scheduler_spec(args.scheduler, args.seed)
    except ValueError as exc:
        raise CliError(str(exc)) from exc


def _fmt(value: Fraction, args) -> str:
    text = print_rational(value)
    if getattr(args, "decimal", False):
        return f"{text} (~{float(value):.6g})"
    return text


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_parse(args) -> int:
    program = _read_program(args.file)
    if args.format == "json":
        print(json.dumps({"program": print_program(program)}))
    else:
        print(print_program(program))
    return 0


def cmd_run(args) -> int:
    program = _read_program(args.file)
    profile = exploration.run_masses(program, _scheduler(args), args.depth,
                                     node_cap=_node_cap(args))
    terminal = profile.cumulative_hit(args.depth)
    frontier = profile.frontier_mass()
    if args.format == "json":
        print(json.dumps({
            "depth": args.depth,
            "terminal_mass": print_rational(terminal),
            "frontier_mass": print_rational(frontier),
            "frontier_states": [s.to_json() for s in profile.frontier],
        }))
    else:
        print(f"depth: {args.depth}")
        print(f"terminal mass: {_fmt(terminal, args)}")
        print(f"frontier mass: {_fmt(frontier, args)} "
              f"({len(profile.frontier)} states)")
    return 0


def cmd_tree(args) -> int:
    program = _read_program(args.file)
    tree = exploration.build_tree(program, _scheduler(args), args.depth,
                                  node_cap=_node_cap(args))
    if args.format == "json":
        _write_output(json.dumps(tree.to_json(), indent=2), args.output)
    else:
        print(f"nodes: {tree.node_count()}")
        print(f"terminal mass: {_fmt(tree.terminal_mass(), args)}")
        print(f"frontier mass: {_fmt(tree.frontier_mass(), args)}")
    return 0


def cmd_runtime(args) -> int:
    program = _read_program(args.file)
    bounds = exploration.exp_runtime_bounds(program, _scheduler(args),
                                            args.depth,
                                            node_cap=_node_cap(args))
    print(f"lower bound: {_fmt(bounds.lower, args)}")
    print(f"closed: {'true' if bounds.closed else 'false'}")
    if bounds.closed:
        print(f"exact: {_fmt(bounds.exact, args)}")
    return 0


def cmd_ast_check(args) -> int:
    program = _read_program(args.file)
    try:
        verdict = exploration.ast_semicheck(program, Fraction(args.delta),
                                            args.n, query_cap=args.enum_cap,
                                            node_cap=_node_cap(args))
    except scheduling.EnumerationTooLarge as exc:
        raise CliError(str(exc)) from exc
    print(f"every size-{args.n} schedule exceeds {args.delta}: "
          f"{'yes' if verdict else 'no'}")
    return 0 if verdict else 1


def cmd_graph(args) -> int:
    program = _read_program(args.file)
    try:
        graph = exploration.collapse_to_state_graph(program, args.bound)
    except exploration.StateSpaceNotClosed as exc:
        raise CliError(str(exc)) from exc
    _write_output(json.dumps(graph.to_json(), indent=2), args.output)
    return 0


def _load_graph_from_json(path: str, args):
    data = _read_json(path)
    if not data.get("nodes"):
        raise CliError(f"{path}: empty graph")
    try:
        return exploration.StateGraph.from_json(data)
    except (ParseError, KeyError, ValueError) as exc:
        raise CliError(f"{path}: bad graph: {exc}") from exc


def cmd_check_rsm(args) -> int:
    graph = _load_graph_from_json(args.graph, args)
    try:
        cert = certificates.RsmCert.from_json(_read_json(args.cert), graph)
        verdict = certificates.check_rsm(graph, cert)
    except certificates.CertificateError as exc:
        raise CliError(str(exc)) from exc
    if verdict.ok:
        bound = certificates.rsm_bound(cert, graph.initial)
        print(f"OK, bound = {_fmt(bound, args)}")
        return 0
    print("REJECTED")
    print(verdict.describe(graph))
    return 1


def cmd_check_rule(args) -> int:
    graph = _load_graph_from_json(args.graph, args)
    try:
        cert = certificates.RuleCert.from_json(_read_json(args.cert), graph)
        verdict = certificates.check_proof_rule(graph, cert)
    except certificates.CertificateError as exc:
        raise CliError(str(exc)) from exc
    if verdict.ok:
        print("OK")
        return 0
    print("REJECTED")
    print(verdict.describe(graph))
    return 1


def cmd_knievel(args) -> int:
    program = _read_program(args.file)
    if not args.transform:
        normal = transforms.is_knievel(program)
        print("normal form: " + ("yes" if normal else "no"))
        return 0 if normal else 1
    try:
        output = transforms.to_knievel(program, args.horizon)
    except transforms.TransformError as exc:
        raise CliError(str(exc)) from exc
    _write_output(print_program(output), args.output)
    return 0


def _tree_spec(text: str) -> transforms.TreeSpec:
    try:
        if text.strip().startswith("{"):
            return transforms.TreeSpec.from_json(json.loads(text))
        if os.path.exists(text):
            return transforms.TreeSpec.from_json(_read_json(text))
        return transforms.rule_tree(text)
    except (transforms.TransformError, json.JSONDecodeError, ValueError) as exc:
        raise CliError(f"bad tree spec {text!r}: {exc}") from exc


def cmd_emit(args) -> int:
    spec = _tree_spec(args.tree)
    try:
        if args.kind == "reduction":
            program = transforms.emit_tree_reduction(spec)
        else:
            program = transforms.emit_ordinal_program(spec)
    except transforms.TransformError as exc:
        raise CliError(str(exc)) from exc
    _write_output(print_program(program), args.output)
    return 0


# ---------------------------------------------------------------------------
# The Hydra game
# ---------------------------------------------------------------------------

def _render_hydra(state: hydra.HydraState) -> str:
    lines = [f"capacity n = {state.n}"]

    def walk(tree, path, indent):
        label = ".".join(str(i) for i in path) if path else "root"
        kind = "head" if (tree.is_leaf() and path) else "node"
        lines.append("  " * indent + f"{label} ({kind})")
        for i, child in enumerate(tree.children):
            walk(child, path + (i,), indent + 1)

    walk(state.tree, (), 0)
    return "\n".join(lines)


def cmd_hydra(args) -> int:
    if args.action == "rank":
        state = hydra.parse_hydra(args.tree)
        print(hydra.T(state))
        return 0
    if args.action == "compile":
        state = hydra.parse_hydra(args.tree)
        strategy = args.hercules
        if strategy == "interactive":
            strategy = "leftmost-deepest"
        if strategy.startswith("random:"):
            strategy = ("random", int(strategy.split(":")[1]))
        try:
            program = hydra.compile_to_pgcl(state, strategy)
        except hydra.HydraError as exc:
            raise CliError(str(exc)) from exc
        _write_output(print_program(program), args.output)
        return 0
    return _play_hydra(args)


def _play_hydra(args) -> int:
    state = hydra.parse_hydra(args.tree)
    rng = random.Random(args.seed)
    interactive = args.hercules == "interactive"
    if args.hercules == "leftmost-deepest":
        strategy = hydra.LeftmostDeepest()
    elif args.hercules.startswith("random:"):
        strategy = hydra.RandomLeaf(int(args.hercules.split(":")[1]))
    elif not interactive:
        raise CliError(f"unknown hercules strategy {args.hercules!r}")
    round_no = 0
    while True:
        print(_render_hydra(state))
        print(f"T = {hydra.T(state)}")
        if not hydra.leaves(state.tree):
            print("the hydra is dead: Hercules wins")
            return 0
        round_no += 1
        if interactive:
            try:
                raw = input(f"round {round_no}: leaf to chop "
                            f"(e.g. 0 or 0.1)? ").strip()
                leaf = tuple(int(p) for p in raw.split(".") if p != "")
                evolutions = int(input("evolutions? ").strip() or "0")
            except EOFError:
                print("\naborted")
                return 2
            except ValueError:
                print("bad input, try again")
                round_no -= 1
                continue
        else:
            leaf = strategy.choose(state)
            evolutions = args.evolutions
            print(f"round {round_no}: chopping "
                  f"{'.'.join(map(str, leaf)) or 'root'} "
                  f"with {evolutions} evolutions")
        try:
            outcomes = hydra.play_round(state, leaf, evolutions)
        except hydra.HydraError as exc:
            print(f"illegal move: {exc}")
            round_no -= 1
            if not interactive:
                return 2
            continue
        died = False
        for coin in range(evolutions):
            if rng.random() < 0.5:
                print(f"evolution {coin + 1} failed: the hydra implodes, "
                      f"Hercules wins")
                died = True
                break
        if died:
            return 0
        survivor = hydra.surviving(outcomes)
        state = survivor.result
        print(f"survived with probability {print_rational(survivor.prob)}; "
              f"T now {hydra.T(state)}")


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pastlab",
        description="probabilistic-termination analysis workbench")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scheduler=True, depth=True):
        p.add_argument("--seed", type=int, default=0,
                       help="random seed (deterministic default)")
        p.add_argument("--node-cap", type=int, default=None,
                       help="exploration node cap "
                            "(env PASTLAB_NODE_CAP overrides default)")
        p.add_argument("--jobs", type=int, default=1,
                       help="worker count; exploration is deterministic "
                            "and currently runs sequentially")
        p.add_argument("--format", choices=("text", "json"), default="text")
        p.add_argument("--decimal", action="store_true",
                       help="add approximate decimal values")
        if scheduler:
            p.add_argument("--scheduler", default="const:Ln",
                           help="const:Ln | const:Rn | alt | random[:seed] | "
                                "bounded:k:SPEC | interactive")
        if depth:
            p.add_argument("--depth", type=int, default=64)

    p = sub.add_parser("parse", help="parse and pretty-print a program")
    p.add_argument("file")
    common(p, scheduler=False, depth=False)
    p.set_defaults(fn=cmd_parse)

    p = sub.add_parser("run", help="bounded run: terminal and frontier mass")
    p.add_argument("file")
    common(p)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("tree", help="dump the bounded execution tree")
    p.add_argument("file")
    p.add_argument("-o", "--output", default=None)
    common(p)
    p.set_defaults(fn=cmd_tree)

    p = sub.add_parser("runtime", help="expected-runtime series bounds")
    p.add_argument("file")
    common(p)
    p.set_defaults(fn=cmd_runtime)

    p = sub.add_parser("ast-check",
                       help="semi-decision step for almost-sure termination")
    p.add_argument("file")
    p.add_argument("--delta", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--enum-cap", type=int, default=16)
    common(p, scheduler=False, depth=False)
    p.set_defaults(fn=cmd_ast_check)

    p = sub.add_parser("graph", help="collapse to a program-state graph")
    p.add_argument("file")
    p.add_argument("--bound", type=int, default=1000)
    p.add_argument("-o", "--output", default=None)
    common(p, scheduler=False, depth=False)
    p.set_defaults(fn=cmd_graph)

    p = sub.add_parser("check-rsm", help="check a supermartingale certificate")
    p.add_argument("graph")
    p.add_argument("cert")
    common(p, scheduler=False, depth=False)
    p.set_defaults(fn=cmd_check_rsm)

    p = sub.add_parser("check-rule", help="check an ordinal rank certificate")
    p.add_argument("graph")
    p.add_argument("cert")
    common(p, scheduler=False, depth=False)
    p.set_defaults(fn=cmd_check_rule)

    p = sub.add_parser("knievel", help="normal-form test or transformation")
    p.add_argument("file")
    p.add_argument("--transform", action="store_true")
    p.add_argument("--horizon", default="double")
    p.add_argument("-o", "--output", default=None)
    common(p, scheduler=False, depth=False)
    p.set_defaults(fn=cmd_knievel)

    p = sub.add_parser("emit", help="emit a tree-reduction program")
    p.add_argument("kind", choices=("reduction", "ordinal"))
    p.add_argument("--tree", required=True,
                   help="rule name, inline JSON, or a JSON file path")
    p.add_argument("-o", "--output", default=None)
    common(p, scheduler=False, depth=False)
    p.set_defaults(fn=cmd_emit)

    p = sub.add_parser("hydra", help="the stochastic hydra game")
    p.add_argument("action", choices=("play", "rank", "compile"))
    p.add_argument("--tree", required=True,
                   help='nested parentheses, e.g. "((()))"')
    p.add_argument("--hercules", default="interactive",
                   help="interactive | leftmost-deepest | random:SEED")
    p.add_argument("--evolutions", type=int, default=0,
                   help="evolutions per round for scripted strategies")
    p.add_argument("-o", "--output", default=None)
    common(p, scheduler=False, depth=False)
    p.set_defaults(fn=cmd_hydra)

    return parser


def _validate(args):
    if getattr(args, "depth", 1) < 0:
        raise CliError("depth must be non-negative")
    for name in ("node_cap", "enum_cap", "bound", "jobs"):
        value = getattr(args, name, None)
        if value is not None and value <= 0:
            raise CliError(f"{name.replace('_', '-')} must be positive")


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        _validate(args)
        return args.fn(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (exploration.ResourceCapExceeded,
            exploration.StateSpaceNotClosed,
            scheduling.EnumerationTooLarge,
            scheduling.SchedulerAbort) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
