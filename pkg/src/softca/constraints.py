"""Soft constraint problems over finite data domains.

An assignment binds port symbols to exact data values (integers, rationals,
or atoms).  A soft constraint scores assignments of its scope with values
from a semiring; a problem bundles constraints over declared finite domains.
Solving enumerates the grid and keeps the nonzero assignments that are
maximal in the semiring's (possibly partial) order; ``solve_bruteforce`` is
the deliberately naive oracle for ``solve``.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple, Union

from .semiring import (
    CarrierViolation,
    Homomorphism,
    Order,
    PreferenceValue,
    Semiring,
    value_to_text,
    rational_text,
)


class UnknownVariable(KeyError):
    """A symbol was used outside the variable set that defines it."""


class Conflict(ValueError):
    """Two assignments disagree on a shared symbol."""

    def __init__(self, symbol: str):
        super().__init__(f"conflicting bindings for {symbol!r}")
        self.symbol = symbol


class DomainViolation(ValueError):
    """A value fell outside a declared domain, or an operation got the wrong kind."""


class SemiringMismatch(ValueError):
    """Two structures that must share a semiring do not."""


class DomainMismatch(ValueError):
    """A shared symbol carries different declared domains."""

    def __init__(self, symbol: str):
        super().__init__(f"incompatible domains declared for {symbol!r}")
        self.symbol = symbol


# ---------------------------------------------------------------------------
# Data values
# ---------------------------------------------------------------------------

DataValue = Union[int, Fraction, str]


def check_data_value(v) -> DataValue:
    if isinstance(v, bool) or not isinstance(v, (int, Fraction, str)):
        raise TypeError(f"data values are ints, Fractions, or atom names: {v!r}")
    return v


def data_value_key(v: DataValue):
    """Total sort key over mixed-kind values (numbers first, then atoms)."""
    if isinstance(v, str):
        return (1, v)
    return (0, Fraction(v))


def data_value_text(v: DataValue) -> str:
    if isinstance(v, str):
        return v
    return rational_text(Fraction(v))


# ---------------------------------------------------------------------------
# Predicate expressions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Lit:
    value: DataValue


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Arith:
    op: str  # '+', '-', '*'
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Compare:
    op: str  # '=', '!=', '<', '<=', '>', '>='
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Member:
    item: "Expr"
    choices: frozenset


@dataclass(frozen=True)
class BoolConst:
    truth: bool


@dataclass(frozen=True)
class Not:
    inner: "Expr"


@dataclass(frozen=True)
class And:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Or:
    left: "Expr"
    right: "Expr"


Expr = Union[Lit, Var, Arith, Compare, Member, BoolConst, Not, And, Or]

ALWAYS = BoolConst(True)
NEVER = BoolConst(False)


def free_variables(e: Expr) -> frozenset:
    if isinstance(e, (Lit, BoolConst)):
        return frozenset()
    if isinstance(e, Var):
        return frozenset({e.name})
    if isinstance(e, Member):
        return free_variables(e.item)
    if isinstance(e, Not):
        return free_variables(e.inner)
    return free_variables(e.left) | free_variables(e.right)


def is_boolean_expr(e: Expr) -> bool:
    return isinstance(e, (Compare, Member, BoolConst, Not, And, Or))


def _eval_term(e: Expr, binding: Mapping[str, DataValue]) -> DataValue:
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, Var):
        if e.name not in binding:
            raise UnknownVariable(e.name)
        return binding[e.name]
    if isinstance(e, Arith):
        a = _eval_term(e.left, binding)
        b = _eval_term(e.right, binding)
        if isinstance(a, str) or isinstance(b, str):
            raise DomainViolation(f"arithmetic on atom values: {a!r} {e.op} {b!r}")
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        return a * b
    raise DomainViolation(f"expected a value expression, got {e!r}")


def evaluate_predicate(e: Expr, binding: Mapping[str, DataValue]) -> bool:
    if isinstance(e, BoolConst):
        return e.truth
    if isinstance(e, Not):
        return not evaluate_predicate(e.inner, binding)
    if isinstance(e, And):
        return evaluate_predicate(e.left, binding) and evaluate_predicate(e.right, binding)
    if isinstance(e, Or):
        return evaluate_predicate(e.left, binding) or evaluate_predicate(e.right, binding)
    if isinstance(e, Member):
        return _eval_term(e.item, binding) in e.choices
    if isinstance(e, Compare):
        a = _eval_term(e.left, binding)
        b = _eval_term(e.right, binding)
        if e.op == "=":
            return a == b
        if e.op == "!=":
            return a != b
        a_atom, b_atom = isinstance(a, str), isinstance(b, str)
        if a_atom != b_atom:
            raise DomainViolation(f"ordering across kinds: {a!r} {e.op} {b!r}")
        if e.op == "<":
            return a < b
        if e.op == "<=":
            return a <= b
        if e.op == ">":
            return a > b
        return a >= b
    raise DomainViolation(f"expected a predicate, got {e!r}")


_PREC = {"or": 1, "and": 2, "not": 3, "cmp": 4, "add": 5, "mul": 6}


def expr_to_text(e: Expr) -> str:
    text, _ = _render(e)
    return text


def _render(e: Expr) -> Tuple[str, int]:
    atom = 7
    if isinstance(e, Lit):
        return data_value_text(e.value), atom
    if isinstance(e, Var):
        return e.name, atom
    if isinstance(e, BoolConst):
        return ("true" if e.truth else "false"), atom
    if isinstance(e, Member):
        inner = _wrap(e.item, _PREC["add"])
        vals = ", ".join(data_value_text(v) for v in sorted(e.choices, key=data_value_key))
        return f"{inner} in {{{vals}}}", _PREC["cmp"]
    if isinstance(e, Compare):
        return (
            f"{_wrap(e.left, _PREC['add'])} {e.op} {_wrap(e.right, _PREC['add'])}",
            _PREC["cmp"],
        )
    if isinstance(e, Not):
        return f"not {_wrap(e.inner, _PREC['not'])}", _PREC["not"]
    if isinstance(e, And):
        lvl = _PREC["and"]
        return f"{_wrap(e.left, lvl)} and {_wrap(e.right, lvl)}", lvl
    if isinstance(e, Or):
        lvl = _PREC["or"]
        return f"{_wrap(e.left, lvl)} or {_wrap(e.right, lvl)}", lvl
    if isinstance(e, Arith):
        lvl = _PREC["add"] if e.op in "+-" else _PREC["mul"]
        # arithmetic is left-associative; insist on parens for a same-level rhs
        left = _wrap(e.left, lvl)
        right = _wrap(e.right, lvl + 1)
        return f"{left} {e.op} {right}", lvl
    raise TypeError(f"not an expression: {e!r}")


def _wrap(e: Expr, minimum: int) -> str:
    text, lvl = _render(e)
    return text if lvl >= minimum else f"({text})"


# ---------------------------------------------------------------------------
# Assignments
# ---------------------------------------------------------------------------


class Assignment:
    """An immutable finite map from port symbols to data values."""

    __slots__ = ("_items", "_hash")

    def __init__(self, bindings: Mapping[str, DataValue] = ()):  # type: ignore[assignment]
        items = []
        for name, value in dict(bindings).items():
            if not isinstance(name, str):
                raise TypeError(f"port symbols are strings: {name!r}")
            items.append((name, check_data_value(value)))
        items.sort(key=lambda kv: kv[0])
        object.__setattr__(self, "_items", tuple(items))
        object.__setattr__(self, "_hash", hash(self._items))

    @property
    def variables(self) -> frozenset:
        return frozenset(name for name, _ in self._items)

    def items(self) -> Tuple[Tuple[str, DataValue], ...]:
        return self._items

    def as_dict(self) -> Dict[str, DataValue]:
        return dict(self._items)

    def value(self, name: str) -> DataValue:
        for key, val in self._items:
            if key == name:
                return val
        raise UnknownVariable(name)

    def __contains__(self, name: str) -> bool:
        return any(key == name for key, _ in self._items)

    def restrict(self, variables: Iterable[str]) -> "Assignment":
        """The unique assignment of ``variables`` agreeing with this one."""
        wanted = frozenset(variables)
        missing = wanted - self.variables
        if missing:
            raise UnknownVariable(sorted(missing)[0])
        return Assignment({k: v for k, v in self._items if k in wanted})

    def merge(self, other: "Assignment") -> "Assignment":
        """The unique assignment of the union agreeing with both operands."""
        combined = dict(self._items)
        for key, val in other._items:
            if key in combined and combined[key] != val:
                raise Conflict(key)
            combined[key] = val
        return Assignment(combined)

    def to_text(self) -> str:
        inner = ", ".join(f"{k}={data_value_text(v)}" for k, v in self._items)
        return "{%s}" % inner

    def __eq__(self, other) -> bool:
        return isinstance(other, Assignment) and self._items == other._items

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"Assignment({self.to_text()})"


EMPTY_ASSIGNMENT = Assignment({})


def sort_key(a: Assignment):
    return tuple((k, data_value_key(v)) for k, v in a.items())


# ---------------------------------------------------------------------------
# Soft data constraints
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PredicateConstraint:
    """Scores assignments of ``scope``: ``value`` where the predicate holds, zero elsewhere."""

    scope: frozenset
    semiring: Semiring
    predicate: Expr
    value: PreferenceValue

    def __post_init__(self):
        loose = free_variables(self.predicate) - self.scope
        if loose:
            raise UnknownVariable(sorted(loose)[0])
        if not self.semiring.contains(self.value):
            raise CarrierViolation(
                f"{self.value!r} is not in the carrier of {self.semiring.describe()}"
            )

    def valuate(self, a: Assignment) -> PreferenceValue:
        if a.variables != self.scope:
            raise UnknownVariable(
                f"constraint over {sorted(self.scope)} applied to {sorted(a.variables)}"
            )
        if evaluate_predicate(self.predicate, a.as_dict()):
            return self.value
        return self.semiring.zero


@dataclass(frozen=True)
class TableConstraint:
    """Scores assignments of ``scope`` by explicit lookup; absent rows score zero."""

    scope: frozenset
    semiring: Semiring
    entries: Tuple[Tuple[Assignment, PreferenceValue], ...]

    def __post_init__(self):
        for key, val in self.entries:
            if key.variables != self.scope:
                raise UnknownVariable(
                    f"table row over {sorted(key.variables)} in constraint over {sorted(self.scope)}"
                )
            if not self.semiring.contains(val):
                raise CarrierViolation(
                    f"{val!r} is not in the carrier of {self.semiring.describe()}"
                )
        canon = tuple(sorted(self.entries, key=lambda kv: sort_key(kv[0])))
        object.__setattr__(self, "entries", canon)

    @classmethod
    def from_mapping(
        cls, scope: Iterable[str], semiring: Semiring, table: Mapping[Assignment, PreferenceValue]
    ) -> "TableConstraint":
        return cls(frozenset(scope), semiring, tuple(table.items()))

    def valuate(self, a: Assignment) -> PreferenceValue:
        if a.variables != self.scope:
            raise UnknownVariable(
                f"constraint over {sorted(self.scope)} applied to {sorted(a.variables)}"
            )
        for key, val in self.entries:
            if key == a:
                return val
        return self.semiring.zero


SoftConstraint = Union[PredicateConstraint, TableConstraint]


@functools.lru_cache(maxsize=None)
def constraint_key(c: SoftConstraint):
    """Deterministic total order over constraints, for canonical iteration."""
    if isinstance(c, PredicateConstraint):
        return (0, tuple(sorted(c.scope)), expr_to_text(c.predicate), value_to_text(c.value))
    rows = tuple((a.to_text(), value_to_text(v)) for a, v in c.entries)
    return (1, tuple(sorted(c.scope)), rows, "")


# ---------------------------------------------------------------------------
# Problems
# ---------------------------------------------------------------------------


class Problem:
    """A finite set of soft constraints over declared per-variable domains."""

    __slots__ = ("variables", "semiring", "constraints", "_domain_items", "_hash")

    def __init__(
        self,
        variables: Iterable[str],
        semiring: Semiring,
        constraints: Iterable[SoftConstraint] = (),
        domains: Mapping[str, Iterable[DataValue]] = (),  # type: ignore[assignment]
    ):
        object.__setattr__(self, "variables", frozenset(variables))
        object.__setattr__(self, "semiring", semiring)
        object.__setattr__(self, "constraints", frozenset(constraints))
        items = []
        for name, values in dict(domains).items():
            domain = frozenset(check_data_value(v) for v in values)
            items.append((name, domain))
        items.sort(key=lambda kv: kv[0])
        object.__setattr__(self, "_domain_items", tuple(items))
        declared = frozenset(name for name, _ in items)
        if declared != self.variables:
            odd = sorted(declared ^ self.variables)
            raise ValueError(f"domains must cover exactly the variables; mismatch on {odd}")
        for name, domain in items:
            if not domain:
                raise ValueError(f"empty domain for {name!r}")
        for c in self.constraints:
            if not c.scope <= self.variables:
                raise UnknownVariable(sorted(c.scope - self.variables)[0])
            if c.semiring != semiring:
                raise SemiringMismatch(
                    f"constraint over {c.semiring.describe()} in a problem over {semiring.describe()}"
                )
        object.__setattr__(
            self, "_hash", hash((self.variables, self.semiring, self.constraints, self._domain_items))
        )

    @classmethod
    def _trusted(
        cls,
        variables: frozenset,
        semiring: Semiring,
        constraints: frozenset,
        domain_items: tuple,
    ) -> "Problem":
        """Internal fast path: inputs are already-validated canonical pieces."""
        self = object.__new__(cls)
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "semiring", semiring)
        object.__setattr__(self, "constraints", constraints)
        object.__setattr__(self, "_domain_items", domain_items)
        object.__setattr__(
            self, "_hash", hash((variables, semiring, constraints, domain_items))
        )
        return self

    @property
    def domains(self) -> Dict[str, frozenset]:
        return dict(self._domain_items)

    def domain_of(self, name: str) -> frozenset:
        for key, dom in self._domain_items:
            if key == name:
                return dom
        raise UnknownVariable(name)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Problem)
            and self.variables == other.variables
            and self.semiring == other.semiring
            and self.constraints == other.constraints
            and self._domain_items == other._domain_items
        )

    def __hash__(self) -> int:
        return self._hash

    def __setattr__(self, name, value):
        raise AttributeError("Problem is immutable")

    def __repr__(self) -> str:
        return (
            f"Problem(vars={sorted(self.variables)}, semiring={self.semiring.describe()}, "
            f"{len(self.constraints)} constraints)"
        )

    # -- evaluation ---------------------------------------------------------

    def check_assignment(self, a: Assignment) -> None:
        if a.variables != self.variables:
            odd = sorted(a.variables ^ self.variables)
            raise UnknownVariable(odd[0] if odd else "?")
        for name, value in a.items():
            if value not in self.domain_of(name):
                raise DomainViolation(f"{name}={data_value_text(value)} outside its domain")

    def preference_of(self, a: Assignment) -> PreferenceValue:
        """Product of all constraint scores at ``a`` (one when unconstrained).

        Iteration order is irrelevant: the product is commutative and all
        arithmetic is exact.
        """
        self.check_assignment(a)
        out = self.semiring.one
        for c in self.constraints:
            out = self.semiring.times(out, c.valuate(a.restrict(c.scope)))
            if out == self.semiring.zero:
                return out
        return out


def empty_problem(semiring: Semiring) -> Problem:
    return Problem((), semiring, (), {})


@dataclass(frozen=True)
class Solution:
    assignment: Assignment
    preference: PreferenceValue


def _grid(problem: Problem, order: Sequence[str]):
    pools = [sorted(problem.domain_of(v), key=data_value_key) for v in order]
    return itertools.product(*pools)


def solve_bruteforce(problem: Problem) -> frozenset:
    """Oracle solver: score the whole grid, then scan for maximal entries.

    No pruning, no scheduling; kept naive on purpose.
    """
    order = sorted(problem.variables)
    zero = problem.semiring.zero
    scored = []
    for choice in _grid(problem, order):
        a = Assignment(dict(zip(order, choice)))
        p = problem.preference_of(a)
        if p != zero:
            scored.append((a, p))
    out = []
    for a, p in scored:
        dominated = any(
            problem.semiring.compare(p, q) == Order.LESS for _, q in scored
        )
        if not dominated:
            out.append(Solution(a, p))
    return frozenset(out)


def solve(problem: Problem) -> frozenset:
    """All nonzero assignments maximal in the induced order (the Pareto set).

    Depth-first over the variable grid; a branch dies as soon as its partial
    score hits zero.  When the order is total, branches strictly below the
    best full score so far are cut as well (scores only shrink under
    composition); with a partial order only the zero cut is sound.
    """
    s = problem.semiring
    zero, one = s.zero, s.one
    order = sorted(problem.variables)
    index = {v: i for i, v in enumerate(order)}

    base = []
    schedule = [[] for _ in order]
    for c in sorted(problem.constraints, key=constraint_key):
        if not c.scope:
            base.append(c)
        else:
            schedule[max(index[v] for v in c.scope)].append(c)

    start = one
    for c in base:
        start = s.times(start, c.valuate(EMPTY_ASSIGNMENT))
    if not order:
        return frozenset() if start == zero else frozenset({Solution(EMPTY_ASSIGNMENT, start)})
    if start == zero:
        return frozenset()

    pools = [sorted(problem.domain_of(v), key=data_value_key) for v in order]
    total = s.total_order
    found = []
    best: Optional[PreferenceValue] = None

    def descend(depth: int, binding: dict, score: PreferenceValue):
        nonlocal best
        for value in pools[depth]:
            binding[order[depth]] = value
            here = score
            dead = False
            for c in schedule[depth]:
                part = Assignment({v: binding[v] for v in c.scope})
                here = s.times(here, c.valuate(part))
                if here == zero:
                    dead = True
                    break
            if not dead and total and best is not None and s.compare(here, best) == Order.LESS:
                dead = True
            if not dead:
                if depth + 1 == len(order):
                    found.append((Assignment(binding), here))
                    if total and (best is None or s.compare(best, here) == Order.LESS):
                        best = here
                else:
                    descend(depth + 1, binding, here)
            del binding[order[depth]]

    descend(0, {}, start)

    maximal = []
    for a, p in found:
        if not any(s.compare(p, q) == Order.LESS for _, q in found):
            maximal.append(Solution(a, p))
    return frozenset(maximal)


# ---------------------------------------------------------------------------
# Composition and relocation
# ---------------------------------------------------------------------------


def compose(p1: Problem, p2: Problem) -> Problem:
    """Union of variables, constraints, and domains (duplicates collapse)."""
    if p1.semiring != p2.semiring:
        raise SemiringMismatch(
            f"{p1.semiring.describe()} composed with {p2.semiring.describe()}"
        )
    domains = p1.domains
    for name, dom in p2.domains.items():
        if name in domains and domains[name] != dom:
            raise DomainMismatch(name)
        domains[name] = dom
    return Problem(
        p1.variables | p2.variables,
        p1.semiring,
        p1.constraints | p2.constraints,
        domains,
    )


def apply_hom(h: Homomorphism, problem: Problem) -> Problem:
    """Relocate a problem along a homomorphism by post-composing every score."""
    if h.source != problem.semiring:
        raise SemiringMismatch(
            f"homomorphism from {h.source.describe()} applied to a problem over "
            f"{problem.semiring.describe()}"
        )
    moved = []
    for c in problem.constraints:
        if isinstance(c, PredicateConstraint):
            moved.append(PredicateConstraint(c.scope, h.target, c.predicate, h.apply(c.value)))
        else:
            moved.append(
                TableConstraint(
                    c.scope, h.target, tuple((a, h.apply(v)) for a, v in c.entries)
                )
            )
    return Problem(problem.variables, h.target, moved, problem.domains)


def reduce_to_table(problem: Problem) -> Problem:
    """Equivalent problem with a single table constraint over the full scope."""
    order = sorted(problem.variables)
    zero = problem.semiring.zero
    rows = {}
    for choice in _grid(problem, order):
        a = Assignment(dict(zip(order, choice)))
        p = problem.preference_of(a)
        if p != zero:
            rows[a] = p
    table = TableConstraint.from_mapping(problem.variables, problem.semiring, rows)
    return Problem(problem.variables, problem.semiring, (table,), problem.domains)
