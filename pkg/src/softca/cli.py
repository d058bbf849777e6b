"""Command-line front end.

Subcommands: validate, compose, solve, simulate, reach, patrol-gen.
Exit codes: 0 on success, 1 on diagnostics or semantic failures, 2 on usage
errors (argparse's convention).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional

from . import dsl
from .automata import Automaton, validate as validate_automaton
from .constraints import solve
from .execution import (
    GreedyGlobal,
    Nondet,
    Pareto,
    automaton_to_dot,
    automaton_to_json_obj,
    enabled,
    reachable,
    reachable_to_dot,
    run,
)
from .patrol import PatrolParams, PreferenceConfig, build_agent, patrol_document
from .semiring import value_to_text


def _read_document(path: str) -> dsl.ModelDocument:
    return dsl.parse(Path(path).read_text(encoding="utf-8"))


def _fail(message: str) -> int:
    print(message, file=sys.stderr)
    return 1


def _pick_target(elaboration: dsl.Elaboration, doc: dsl.ModelDocument, target: Optional[str]):
    if target is not None:
        if target not in elaboration.automata:
            raise KeyError(f"no automaton or composition named {target!r}")
        return target, elaboration.automata[target]
    if len(doc.composes) == 1:
        name = doc.composes[0].name
    elif not doc.composes and len(doc.automata) == 1:
        name = doc.automata[0].name
    else:
        raise KeyError("several candidates; pick one with --target")
    return name, elaboration.automata[name]


def _add_patrol_flags(sub: argparse.ArgumentParser):
    sub.add_argument("--K", type=int, default=5, help="path length (>= 2)")
    sub.add_argument("--L", type=int, default=1, help="stray bound (>= 1)")
    sub.add_argument("--M", type=int, default=4, help="battery capacity (>= 1)")
    sub.add_argument("--ell", type=int, default=2, help="recharge threshold in [1, M]")
    sub.add_argument("--cx", type=int, default=2, help="charger path position in [1, K]")
    sub.add_argument("--cy", type=int, default=1, help="charger lateral offset in [-L, L]")


def _patrol_params(args) -> PatrolParams:
    return PatrolParams(k=args.K, l=args.L, m=args.M, ell=args.ell, cx=args.cx, cy=args.cy)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="softca",
        description="Soft constraint automata: validate, compose, solve, simulate.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("validate", help="parse a model file and report diagnostics")
    p.add_argument("file")

    p = subs.add_parser("compose", help="elaborate one target and export it")
    p.add_argument("file")
    p.add_argument("--target", required=True, help="automaton or composition name")
    p.add_argument("--out", required=True, help="output path (.sca, .dot, or .json)")

    p = subs.add_parser("solve", help="solve the transition labels of an automaton")
    p.add_argument("file")
    p.add_argument("--scsp", required=True, help="automaton or composition name")
    p.add_argument("--state", default=None, help="state to inspect (default: initial)")

    p = subs.add_parser("simulate", help="run an automaton under a scheduling policy")
    p.add_argument("file", nargs="?", default=None)
    p.add_argument("--patrol", action="store_true", help="use the built-in patrol agent")
    p.add_argument("--target", default=None)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--policy", choices=["nondet", "pareto", "greedy"], default="greedy")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trace-out", default=None, help="write the trace as JSON")
    _add_patrol_flags(p)

    p = subs.add_parser("reach", help="explore the reachable state space")
    p.add_argument("file", nargs="?", default=None)
    p.add_argument("--patrol", action="store_true", help="use the built-in patrol agent")
    p.add_argument("--target", default=None)
    p.add_argument("--dot", default=None, help="write the reachable graph as DOT")
    _add_patrol_flags(p)

    p = subs.add_parser("patrol-gen", help="emit the patrol scenario as a model file")
    _add_patrol_flags(p)
    p.add_argument("--out", default=None, help="output path (default: stdout)")
    return parser


def _resolve_state(a: Automaton, text: Optional[str]):
    if text is None:
        return a.initial
    if text in a.states:
        return text
    parts = tuple(text.strip("()").split(","))
    if parts in a.states:
        return parts
    raise KeyError(f"no state named {text!r}")


def _automaton_for(args) -> Automaton:
    if getattr(args, "patrol", False):
        return build_agent(_patrol_params(args), PreferenceConfig())
    if args.file is None:
        raise KeyError("give a model file or --patrol")
    doc = _read_document(args.file)
    elaboration = dsl.elaborate(doc)
    _, automaton = _pick_target(elaboration, doc, args.target)
    return automaton


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            return cmd_validate(args)
        if args.command == "compose":
            return cmd_compose(args)
        if args.command == "solve":
            return cmd_solve(args)
        if args.command == "simulate":
            return cmd_simulate(args)
        if args.command == "reach":
            return cmd_reach(args)
        return cmd_patrol_gen(args)
    except dsl.ModelError as err:
        for d in err.diagnostics:
            print(str(d), file=sys.stderr)
        return 1
    except (KeyError, ValueError, OSError) as err:
        return _fail(str(err))


def cmd_validate(args) -> int:
    doc = _read_document(args.file)
    issues = []
    for name, automaton in dsl.elaborate(doc).automata.items():
        issues.extend(f"{name}: {line}" for line in validate_automaton(automaton))
    if issues:
        for line in issues:
            print(line, file=sys.stderr)
        return 1
    counts = (
        f"{len(doc.semirings)} semirings, {len(doc.domains)} domains, "
        f"{len(doc.automata)} automata, {len(doc.composes)} compositions"
    )
    print(f"ok: {counts}")
    return 0


def cmd_compose(args) -> int:
    doc = _read_document(args.file)
    elaboration = dsl.elaborate(doc)
    name, automaton = _pick_target(elaboration, doc, args.target)
    out = Path(args.out)
    if out.suffix == ".sca":
        out.write_text(dsl.serialize(dsl.slice_document(doc, name)), encoding="utf-8")
    elif out.suffix == ".dot":
        out.write_text(automaton_to_dot(automaton, name) + "\n", encoding="utf-8")
    elif out.suffix == ".json":
        out.write_text(
            json.dumps(automaton_to_json_obj(automaton), indent=2) + "\n", encoding="utf-8"
        )
    else:
        return _fail(f"unsupported output extension {out.suffix!r} (use .sca, .dot, .json)")
    print(
        f"{name}: {len(automaton.states)} states, {len(automaton.transitions)} transitions "
        f"-> {out}"
    )
    return 0


def cmd_solve(args) -> int:
    doc = _read_document(args.file)
    elaboration = dsl.elaborate(doc)
    name, automaton = _pick_target(elaboration, doc, args.scsp)
    state = _resolve_state(automaton, args.state)
    pairs = enabled(automaton, state)
    print(f"{name} at {state}: {len(pairs)} enabled steps")
    for t, sol in pairs:
        print(
            f"  -> {t.target} fires {sol.assignment.to_text()} "
            f"pref {value_to_text(sol.preference)}"
        )
    return 0


def cmd_simulate(args) -> int:
    automaton = _automaton_for(args)
    if args.policy == "nondet":
        policy = Nondet(args.seed)
    elif args.policy == "pareto":
        policy = Pareto(args.seed)
    else:
        policy = GreedyGlobal("transition-order", args.seed)
    trace = run(automaton, policy, args.steps)
    for line in trace.to_lines():
        print(line)
    if args.trace_out:
        Path(args.trace_out).write_text(trace.to_json() + "\n", encoding="utf-8")
    return 0


def cmd_reach(args) -> int:
    automaton = _automaton_for(args)
    reach = reachable(automaton)
    print(
        f"{len(reach.states)} reachable of {len(automaton.states)} states, "
        f"{len(reach.edges)} live edges"
    )
    if args.dot:
        Path(args.dot).write_text(reachable_to_dot(automaton) + "\n", encoding="utf-8")
    return 0


def cmd_patrol_gen(args) -> int:
    doc = patrol_document(_patrol_params(args), PreferenceConfig())
    text = dsl.serialize(doc)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        print(text, end="")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
