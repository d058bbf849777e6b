"""Running automata: enabled steps, scheduled traces, languages, reachability.

A step fires one solution of one outgoing transition's label.  The base
relation is nondeterministic; the Policy type makes the run-time choice rule
explicit instead of hiding one in the engine:

* ``Nondet`` picks any enabled step (seeded),
* ``Pareto`` restricts to steps of maximal preference, then picks (seeded),
* ``GreedyGlobal`` restricts to the maximal set and breaks ties
  deterministically.

Deadlock is an outcome recorded on the trace, never an exception.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .semiring import Order, PreferenceValue, value_to_text
from .constraints import Assignment, Solution, solve, sort_key
from .automata import Automaton, StateId, Transition, state_text, state_key, transition_key

_TIEBREAKS = ("transition-order", "assignment-lex", "seeded-random")


@dataclass(frozen=True)
class Nondet:
    seed: int = 0


@dataclass(frozen=True)
class Pareto:
    seed: int = 0


@dataclass(frozen=True)
class GreedyGlobal:
    tiebreak: str = "transition-order"
    seed: int = 0

    def __post_init__(self):
        if self.tiebreak not in _TIEBREAKS:
            raise ValueError(f"tiebreak must be one of {_TIEBREAKS}")


Policy = object  # Nondet | Pareto | GreedyGlobal


@dataclass(frozen=True)
class Step:
    state: StateId
    fired: Assignment
    preference: PreferenceValue
    next_state: StateId

    def to_text(self, number: int) -> str:
        return (
            f"{number}, {state_text(self.state)}, {self.fired.to_text()}, "
            f"{value_to_text(self.preference)}"
        )


@dataclass(frozen=True)
class Trace:
    origin: StateId
    steps: Tuple[Step, ...]
    deadlocked: bool = False

    def to_lines(self) -> List[str]:
        lines = [s.to_text(i) for i, s in enumerate(self.steps)]
        if self.deadlocked:
            lines.append(f"deadlock at {state_text(self.final_state)}")
        return lines

    @property
    def final_state(self) -> StateId:
        return self.steps[-1].next_state if self.steps else self.origin

    def to_json_obj(self) -> dict:
        return {
            "origin": state_text(self.origin),
            "deadlocked": self.deadlocked,
            "steps": [
                {
                    "step": i,
                    "state": state_text(s.state),
                    "fired": {k: _json_value(v) for k, v in s.fired.items()},
                    "preference": value_to_text(s.preference),
                    "next": state_text(s.next_state),
                }
                for i, s in enumerate(self.steps)
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), indent=2)


def _json_value(v):
    if isinstance(v, int) or isinstance(v, str):
        return v
    return str(v)


def enabled(a: Automaton, q: StateId) -> Tuple[Tuple[Transition, Solution], ...]:
    """Every (transition, label solution) pair leaving ``q``, canonically ordered."""
    pairs = []
    for t in a.outgoing(q):
        for sol in solve(t.label):
            pairs.append((t, sol))
    pairs.sort(key=lambda ts: (transition_key(ts[0]), sort_key(ts[1].assignment)))
    return tuple(pairs)


def _maximal_pairs(a: Automaton, pairs: Sequence[Tuple[Transition, Solution]]):
    keep = []
    for t, sol in pairs:
        dominated = any(
            a.semiring.compare(sol.preference, other.preference) == Order.LESS
            for _, other in pairs
        )
        if not dominated:
            keep.append((t, sol))
    return keep


def run(a: Automaton, policy: Policy, steps: int) -> Trace:
    """A trace of at most ``steps`` steps from the initial state under ``policy``."""
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    rng = random.Random(getattr(policy, "seed", 0))
    cache: Dict[StateId, Tuple[Tuple[Transition, Solution], ...]] = {}
    here = a.initial
    collected: List[Step] = []
    deadlocked = False
    for _ in range(steps):
        if here not in cache:
            cache[here] = enabled(a, here)
        pairs = cache[here]
        if not pairs:
            deadlocked = True
            break
        if isinstance(policy, Nondet):
            t, sol = pairs[rng.randrange(len(pairs))]
        elif isinstance(policy, Pareto):
            front = _maximal_pairs(a, pairs)
            t, sol = front[rng.randrange(len(front))]
        elif isinstance(policy, GreedyGlobal):
            front = _maximal_pairs(a, pairs)
            if policy.tiebreak == "transition-order":
                t, sol = front[0]
            elif policy.tiebreak == "assignment-lex":
                t, sol = min(
                    front, key=lambda ts: (sort_key(ts[1].assignment), transition_key(ts[0]))
                )
            else:
                t, sol = front[rng.randrange(len(front))]
        else:
            raise TypeError(f"unknown policy {policy!r}")
        collected.append(Step(here, sol.assignment, sol.preference, t.target))
        here = t.target
    return Trace(a.initial, tuple(collected), deadlocked)


def accepts_prefix(a: Automaton, prefix: Sequence[Assignment]) -> bool:
    """Whether some state stream realizes the given finite assignment stream."""
    frontier = {a.initial}
    for fired in prefix:
        nxt = set()
        for q in frontier:
            for t in a.outgoing(q):
                if t.fired_ports != fired.variables:
                    continue
                if any(sol.assignment == fired for sol in solve(t.label)):
                    nxt.add(t.target)
        if not nxt:
            return False
        frontier = nxt
    return True


@dataclass(frozen=True)
class Reachability:
    states: frozenset
    edges: Tuple[Tuple[StateId, frozenset, StateId], ...]


def reachable(a: Automaton) -> Reachability:
    """Closure from the initial state over transitions with satisfiable labels."""
    seen = {a.initial}
    frontier = [a.initial]
    edges = []
    while frontier:
        q = frontier.pop()
        for t in a.outgoing(q):
            if not solve(t.label):
                continue
            edges.append((q, t.fired_ports, t.target))
            if t.target not in seen:
                seen.add(t.target)
                frontier.append(t.target)
    edges.sort(key=lambda e: (state_key(e[0]), tuple(sorted(e[1])), state_key(e[2])))
    return Reachability(frozenset(seen), tuple(edges))


def reachable_to_dot(a: Automaton, name: str = "automaton") -> str:
    """GraphViz rendering of the reachable fragment, edges tagged by fired ports."""
    reach = reachable(a)
    lines = [f"digraph {name} {{", "  rankdir=LR;"]
    ids = {q: f"q{i}" for i, q in enumerate(sorted(reach.states, key=state_key))}
    for q, node in ids.items():
        shape = "doublecircle" if q == a.initial else "circle"
        lines.append(f'  {node} [label="{state_text(q)}", shape={shape}];')
    grouped: Dict[Tuple[StateId, StateId], set] = {}
    for src, ports, dst in reach.edges:
        grouped.setdefault((src, dst), set()).add("{%s}" % ",".join(sorted(ports)))
    for (src, dst), labels in sorted(
        grouped.items(), key=lambda kv: (state_key(kv[0][0]), state_key(kv[0][1]))
    ):
        text = "\\n".join(sorted(labels))
        lines.append(f'  {ids[src]} -> {ids[dst]} [label="{text}"];')
    lines.append("}")
    return "\n".join(lines)


def automaton_to_json_obj(a: Automaton) -> dict:
    """Plain-data rendering of the full (unpruned) automaton."""
    from .constraints import PredicateConstraint, data_value_text, expr_to_text
    from .automata import transition_key

    def constraint_obj(c):
        if isinstance(c, PredicateConstraint):
            return {
                "scope": sorted(c.scope),
                "predicate": expr_to_text(c.predicate),
                "value": value_to_text(c.value),
            }
        return {
            "scope": sorted(c.scope),
            "table": [
                {"assignment": row.to_text(), "value": value_to_text(v)}
                for row, v in c.entries
            ],
        }

    return {
        "semiring": a.semiring.describe(),
        "initial": state_text(a.initial),
        "states": [state_text(q) for q in sorted(a.states, key=state_key)],
        "ports": sorted(a.ports),
        "transitions": [
            {
                "source": state_text(t.source),
                "target": state_text(t.target),
                "ports": sorted(t.fired_ports),
                "constraints": [c for c in map(constraint_obj, t.label.constraints)],
                "domains": {
                    name: [data_value_text(v) for v in sorted(dom, key=_dom_key)]
                    for name, dom in t.label.domains.items()
                },
            }
            for t in sorted(a.transitions, key=transition_key)
        ],
    }


def _dom_key(v):
    from .constraints import data_value_key

    return data_value_key(v)


def automaton_to_dot(a: Automaton, name: str = "automaton") -> str:
    """GraphViz rendering of the full syntactic graph, edges tagged by fired ports."""
    lines = [f"digraph {name} {{", "  rankdir=LR;"]
    ids = {q: f"q{i}" for i, q in enumerate(sorted(a.states, key=state_key))}
    for q, node in ids.items():
        shape = "doublecircle" if q == a.initial else "circle"
        lines.append(f'  {node} [label="{state_text(q)}", shape={shape}];')
    grouped: Dict[Tuple[StateId, StateId], set] = {}
    for t in a.transitions:
        grouped.setdefault((t.source, t.target), set()).add(
            "{%s}" % ",".join(sorted(t.fired_ports))
        )
    for (src, dst), labels in sorted(
        grouped.items(), key=lambda kv: (state_key(kv[0][0]), state_key(kv[0][1]))
    ):
        text = "\\n".join(sorted(labels))
        lines.append(f'  {ids[src]} -> {ids[dst]} [label="{text}"];')
    lines.append("}")
    return "\n".join(lines)


def step_function(a: Automaton, states: frozenset) -> Dict[Assignment, frozenset]:
    """Determinized step: which assignments can fire from a state set, and where to."""
    moves: Dict[Assignment, set] = {}
    for q in sorted(states, key=state_key):
        for t in a.outgoing(q):
            for sol in solve(t.label):
                moves.setdefault(sol.assignment, set()).add(t.target)
    return {fired: frozenset(targets) for fired, targets in moves.items()}


def bounded_language_equal(a1: Automaton, a2: Automaton, depth: int) -> bool:
    """Whether both automata accept exactly the same assignment streams up to ``depth``."""
    memo1: Dict[frozenset, Dict[Assignment, frozenset]] = {}
    memo2: Dict[frozenset, Dict[Assignment, frozenset]] = {}
    explored: Dict[Tuple[frozenset, frozenset], int] = {}

    def steps(a, memo, states):
        if states not in memo:
            memo[states] = step_function(a, states)
        return memo[states]

    def walk(s1: frozenset, s2: frozenset, remaining: int) -> bool:
        if remaining == 0:
            return True
        key = (s1, s2)
        if explored.get(key, -1) >= remaining:
            return True
        m1 = steps(a1, memo1, s1)
        m2 = steps(a2, memo2, s2)
        if set(m1) != set(m2):
            return False
        explored[key] = remaining
        for fired, targets in m1.items():
            if not walk(targets, m2[fired], remaining - 1):
                return False
        return True

    return walk(frozenset({a1.initial}), frozenset({a2.initial}), depth)


def bounded_language(a: Automaton, depth: int) -> frozenset:
    """All accepted prefixes of length up to ``depth`` (small automata only)."""
    memo: Dict[frozenset, Dict[Assignment, frozenset]] = {}
    out = {()}
    frontier = {(): frozenset({a.initial})}
    for _ in range(depth):
        nxt: Dict[tuple, frozenset] = {}
        for prefix, states in frontier.items():
            if states not in memo:
                memo[states] = step_function(a, states)
            for fired, targets in memo[states].items():
                nxt[prefix + (fired,)] = nxt.get(prefix + (fired,), frozenset()) | targets
        frontier = nxt
        out.update(frontier)
    return frozenset(out)
