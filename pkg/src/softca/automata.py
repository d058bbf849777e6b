"""Automata whose transitions are labeled with soft constraint problems.

Firing a transition means emitting one solution of its label, so the label's
variable set is the set of ports the transition fires.  Composition never
invents independent moves: a component only keeps up with its partner where
it has a transition whose fired ports agree with the partner's on the shared
alphabet.  Modelers who want a component to idle add explicit self-loops.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

from .semiring import Homomorphism, Semiring, NotCancellative, canonical_injection
from .constraints import (
    Problem,
    SemiringMismatch,
    apply_hom,
    compose as compose_problems,
    constraint_key,
)

StateId = Union[str, Tuple[str, ...]]


def state_atoms(q: StateId) -> Tuple[str, ...]:
    if isinstance(q, str):
        return (q,)
    return q


def flatten_states(q1: StateId, q2: StateId) -> Tuple[str, ...]:
    """Composite states are flat tuples, so composition chains associate literally."""
    return state_atoms(q1) + state_atoms(q2)


def state_text(q: StateId) -> str:
    if isinstance(q, str):
        return q
    return "(%s)" % ",".join(q)


def state_key(q: StateId):
    return state_atoms(q)


@dataclass(frozen=True)
class Transition:
    source: StateId
    label: Problem
    target: StateId

    @property
    def fired_ports(self) -> frozenset:
        return self.label.variables


@functools.lru_cache(maxsize=None)
def transition_key(t: Transition):
    """Deterministic total order on transitions (ports, then label, then endpoints)."""
    label = (
        tuple(sorted(t.label.variables)),
        tuple(sorted(constraint_key(c) for c in t.label.constraints)),
    )
    return (tuple(sorted(t.fired_ports)), label, state_key(t.source), state_key(t.target))


@dataclass(frozen=True)
class Automaton:
    states: frozenset
    initial: StateId
    ports: frozenset
    semiring: Semiring
    transitions: frozenset
    _index: Optional[Dict] = field(default=None, init=False, compare=False, repr=False)

    def outgoing(self, q: StateId) -> Tuple[Transition, ...]:
        if self._index is None:
            index: Dict[StateId, list] = {}
            for t in self.transitions:
                index.setdefault(t.source, []).append(t)
            packed = {
                src: tuple(sorted(ts, key=transition_key)) for src, ts in index.items()
            }
            object.__setattr__(self, "_index", packed)
        return self._index.get(q, ())

    def __repr__(self) -> str:
        return (
            f"Automaton({len(self.states)} states, {len(self.transitions)} transitions, "
            f"semiring={self.semiring.describe()})"
        )


def validate(a: Automaton) -> List[str]:
    """Structural check; returns human-readable violations instead of raising."""
    issues = []
    if a.initial not in a.states:
        issues.append(f"initial state {state_text(a.initial)} is not a declared state")
    for t in sorted(a.transitions, key=transition_key):
        where = f"transition {state_text(t.source)} -> {state_text(t.target)}"
        if t.source not in a.states:
            issues.append(f"{where}: source is not a declared state")
        if t.target not in a.states:
            issues.append(f"{where}: target is not a declared state")
        stray = t.label.variables - a.ports
        if stray:
            issues.append(f"{where}: undeclared ports {sorted(stray)}")
        if t.label.semiring != a.semiring:
            issues.append(
                f"{where}: label over {t.label.semiring.describe()}, automaton over "
                f"{a.semiring.describe()}"
            )
    return issues


def is_constraint_automaton(a: Automaton) -> bool:
    """Whether the automaton degenerates to a crisp one (boolean preferences)."""
    return a.semiring.kind == "bool"


def lift_hom(h: Homomorphism, a: Automaton) -> Automaton:
    """Relabel every transition through a semiring homomorphism."""
    if h.source != a.semiring:
        raise SemiringMismatch(
            f"homomorphism from {h.source.describe()} applied to an automaton over "
            f"{a.semiring.describe()}"
        )
    moved = frozenset(
        Transition(t.source, apply_hom(h, t.label), t.target) for t in a.transitions
    )
    return Automaton(a.states, a.initial, a.ports, h.target, moved)


def _product_pair(a1: Automaton, a2: Automaton) -> Automaton:
    if a1.semiring != a2.semiring:
        raise SemiringMismatch(
            f"product of automata over {a1.semiring.describe()} and {a2.semiring.describe()}"
        )
    v1, v2 = a1.ports, a2.ports
    states = frozenset(flatten_states(q1, q2) for q1 in a1.states for q2 in a2.states)
    initial = flatten_states(a1.initial, a2.initial)

    # Transitions pair exactly when their fired ports agree on the partner's
    # alphabet; bucket by that projection so only matching pairs meet.
    buckets = {}
    for t2 in a2.transitions:
        buckets.setdefault(t2.fired_ports & v1, []).append(t2)
    combined = set()
    for t1 in a1.transitions:
        shared = t1.fired_ports & v2
        for t2 in buckets.get(shared, ()):
            label = compose_problems(t1.label, t2.label)
            combined.add(
                Transition(
                    flatten_states(t1.source, t2.source),
                    label,
                    flatten_states(t1.target, t2.target),
                )
            )
    return Automaton(states, initial, v1 | v2, a1.semiring, frozenset(combined))


def product(first: Automaton, second: Automaton, *rest: Automaton) -> Automaton:
    """Synchronous product on shared ports (left-folded when given more than two)."""
    out = _product_pair(first, second)
    for nxt in rest:
        out = _product_pair(out, nxt)
    return out


def join_compose(first: Automaton, second: Automaton, *rest: Automaton) -> Automaton:
    """Product after injecting both operands into the join of their semirings.

    The result ranks composite preferences by the Pareto (componentwise)
    order; both operand semirings must be cancellative.
    """
    out = _inject_and_multiply(first, second, "join")
    for nxt in rest:
        out = _inject_and_multiply(out, nxt, "join")
    return out


def lex_compose(first: Automaton, second: Automaton, *rest: Automaton) -> Automaton:
    """Product after injecting into the lexicographic composite.

    The first operand's preferences dominate; the second breaks ties.  Not
    commutative, by design.
    """
    out = _inject_and_multiply(first, second, "lex")
    for nxt in rest:
        out = _inject_and_multiply(out, nxt, "lex")
    return out


def _inject_and_multiply(a1: Automaton, a2: Automaton, kind: str) -> Automaton:
    h_left = canonical_injection("left", a1.semiring, a2.semiring, kind)
    h_right = canonical_injection("right", a1.semiring, a2.semiring, kind)
    return _product_pair(lift_hom(h_left, a1), lift_hom(h_right, a2))
