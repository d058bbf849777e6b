"""Constraint semirings: algebraic preference domains.

A constraint semiring packages a carrier of preference values with a
best-choice sum over finite sets (``big_plus``), a composition product
(``times``), a worst element ``zero`` and a best element ``one``.  The sum
induces a partial order (``a <= b`` iff ``a (+) b == b``) that ranks
preferences; the order need not be total.

Five base carriers are provided (boolean, weighted, probabilistic, set)
together with three combinators (product, join, lexicographic).  Join and
lexicographic composites require cancellative operands: every nonzero
element must multiply injectively.  All numeric values are exact rationals;
infinity in the weighted carrier is a distinguished tag, never a float.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Optional, Union


class CarrierViolation(ValueError):
    """A preference value does not belong to the semiring it was used with."""


class NotCancellative(ValueError):
    """A join/lex combinator was given a non-cancellative operand semiring."""

    def __init__(self, side: str, message: str):
        super().__init__(f"{side} operand: {message}")
        self.side = side


class Order(enum.Enum):
    """Outcome of comparing two values in the induced partial order."""

    LESS = "less"
    EQUAL = "equal"
    GREATER = "greater"
    INCOMPARABLE = "incomparable"


# ---------------------------------------------------------------------------
# Preference values
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoolVal:
    truth: bool

    def __repr__(self) -> str:
        return "top" if self.truth else "bot"


@dataclass(frozen=True)
class WeightVal:
    """A nonnegative rational cost, or the infinite cost (``cost is None``)."""

    cost: Optional[Fraction]

    def __post_init__(self):
        if self.cost is not None:
            if not isinstance(self.cost, Fraction):
                raise TypeError("weight cost must be a Fraction or None")
            if self.cost < 0:
                raise ValueError("weight cost must be nonnegative")

    @property
    def is_infinite(self) -> bool:
        return self.cost is None

    def __repr__(self) -> str:
        return "inf" if self.cost is None else str(self.cost)


@dataclass(frozen=True)
class ProbVal:
    chance: Fraction

    def __post_init__(self):
        if not isinstance(self.chance, Fraction):
            raise TypeError("probability must be a Fraction")
        if not 0 <= self.chance <= 1:
            raise ValueError("probability must lie in [0, 1]")

    def __repr__(self) -> str:
        return str(self.chance)


@dataclass(frozen=True)
class SetVal:
    atoms: frozenset

    def __repr__(self) -> str:
        return "{%s}" % ",".join(sorted(self.atoms))


@dataclass(frozen=True)
class PairVal:
    left: "PreferenceValue"
    right: "PreferenceValue"

    def __repr__(self) -> str:
        return f"<{self.left!r}, {self.right!r}>"


PreferenceValue = Union[BoolVal, WeightVal, ProbVal, SetVal, PairVal]

TOP = BoolVal(True)
BOT = BoolVal(False)
INFINITE_COST = WeightVal(None)


def _exact(x) -> Fraction:
    """Coerce to an exact rational; floats are rejected to avoid binary fuzz."""
    if isinstance(x, float):
        raise TypeError("float rejected; pass an int, Fraction, or decimal string")
    return Fraction(x)


def weight(x) -> WeightVal:
    """Weighted-carrier value from an int, Fraction, or decimal string."""
    return WeightVal(_exact(x))


def prob(x) -> ProbVal:
    """Probabilistic-carrier value from an int, Fraction, or decimal string."""
    return ProbVal(_exact(x))


def pair(left: PreferenceValue, right: PreferenceValue) -> PairVal:
    return PairVal(left, right)


def value_to_text(v: PreferenceValue) -> str:
    """Canonical literal syntax for a value, matching the model language."""
    if isinstance(v, BoolVal):
        return "top" if v.truth else "bot"
    if isinstance(v, WeightVal):
        return "inf" if v.cost is None else rational_text(v.cost)
    if isinstance(v, ProbVal):
        return rational_text(v.chance)
    if isinstance(v, SetVal):
        return "{%s}" % ", ".join(sorted(v.atoms))
    if isinstance(v, PairVal):
        return f"<{value_to_text(v.left)}, {value_to_text(v.right)}>"
    raise TypeError(f"not a preference value: {v!r}")


def rational_text(q: Fraction) -> str:
    """Render a rational exactly: integer, finite decimal, or num/den."""
    if q.denominator == 1:
        return str(q.numerator)
    den = q.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den == 1:
        places = max(twos, fives)
        scaled = q * 10**places
        digits = str(abs(scaled.numerator)).rjust(places + 1, "0")
        sign = "-" if q < 0 else ""
        return f"{sign}{digits[:-places]}.{digits[-places:]}"
    return f"{q.numerator}/{q.denominator}"


# ---------------------------------------------------------------------------
# Semiring instances
# ---------------------------------------------------------------------------

_BOOL, _WEIGHTED, _PROB, _SET, _PRODUCT, _JOIN, _LEX = (
    "bool",
    "weighted",
    "prob",
    "set",
    "product",
    "join",
    "lex",
)


@dataclass(frozen=True)
class Semiring:
    """One preference domain.  Construct via the module-level factories."""

    kind: str
    alphabet: Optional[frozenset] = None
    left: Optional["Semiring"] = None
    right: Optional["Semiring"] = None

    # -- units ------------------------------------------------------------

    @property
    def zero(self) -> PreferenceValue:
        k = self.kind
        if k == _BOOL:
            return BOT
        if k == _WEIGHTED:
            return INFINITE_COST
        if k == _PROB:
            return ProbVal(Fraction(0))
        if k == _SET:
            return SetVal(frozenset())
        return PairVal(self.left.zero, self.right.zero)

    @property
    def one(self) -> PreferenceValue:
        k = self.kind
        if k == _BOOL:
            return TOP
        if k == _WEIGHTED:
            return WeightVal(Fraction(0))
        if k == _PROB:
            return ProbVal(Fraction(1))
        if k == _SET:
            return SetVal(self.alphabet)
        return PairVal(self.left.one, self.right.one)

    # -- carrier ----------------------------------------------------------

    def contains(self, v: PreferenceValue) -> bool:
        k = self.kind
        if k == _BOOL:
            return isinstance(v, BoolVal)
        if k == _WEIGHTED:
            return isinstance(v, WeightVal)
        if k == _PROB:
            return isinstance(v, ProbVal)
        if k == _SET:
            return isinstance(v, SetVal) and v.atoms <= self.alphabet
        if not isinstance(v, PairVal):
            return False
        if not (self.left.contains(v.left) and self.right.contains(v.right)):
            return False
        if k == _PRODUCT:
            return True
        if k == _JOIN:
            both = self.left.is_cancellative(v.left) and self.right.is_cancellative(
                v.right
            )
            return both or v == self.zero
        # lex: second component is pinned to zero when the first cancels nothing
        if self.left.is_cancellative(v.left):
            return True
        return v.right == self.right.zero

    def require(self, v: PreferenceValue) -> None:
        if not self.contains(v):
            raise CarrierViolation(f"{v!r} is not in the carrier of {self.describe()}")

    # -- operators ----------------------------------------------------------

    def big_plus(self, values: Iterable[PreferenceValue]) -> PreferenceValue:
        """Best-choice sum of a finite set of values (empty set gives zero)."""
        vals = set(values)
        for v in vals:
            self.require(v)
        return self._sum(vals)

    def _sum(self, vals: set) -> PreferenceValue:
        k = self.kind
        if not vals:
            return self.zero
        if k == _BOOL:
            return BoolVal(any(v.truth for v in vals))
        if k == _WEIGHTED:
            costs = [v.cost for v in vals if v.cost is not None]
            return WeightVal(min(costs)) if costs else INFINITE_COST
        if k == _PROB:
            return ProbVal(max(v.chance for v in vals))
        if k == _SET:
            return SetVal(frozenset().union(*(v.atoms for v in vals)))
        if k in (_PRODUCT, _JOIN):
            out = PairVal(
                self.left._sum({v.left for v in vals}),
                self.right._sum({v.right for v in vals}),
            )
            if k == _JOIN and not self.contains(out):
                raise CarrierViolation(
                    f"join sum left the carrier of {self.describe()}: {out!r}"
                )
            return out
        # lex: the second slot sums only values co-occurring with the best first
        best = self.left._sum({v.left for v in vals})
        runners = {v.right for v in vals if v.left == best}
        out = PairVal(best, self.right._sum(runners))
        if not self.contains(out):
            raise CarrierViolation(
                f"lex sum left the carrier of {self.describe()}: {out!r}"
            )
        return out

    def times(self, a: PreferenceValue, b: PreferenceValue) -> PreferenceValue:
        self.require(a)
        self.require(b)
        k = self.kind
        if k == _BOOL:
            return BoolVal(a.truth and b.truth)
        if k == _WEIGHTED:
            if a.cost is None or b.cost is None:
                return INFINITE_COST
            return WeightVal(a.cost + b.cost)
        if k == _PROB:
            return ProbVal(a.chance * b.chance)
        if k == _SET:
            return SetVal(a.atoms & b.atoms)
        out = PairVal(self.left.times(a.left, b.left), self.right.times(a.right, b.right))
        if k in (_JOIN, _LEX) and not self.contains(out):
            # cannot happen when the operands are cancellative semirings
            raise CarrierViolation(
                f"componentwise product left the carrier of {self.describe()}: {out!r}"
            )
        return out

    def product_all(self, values: Iterable[PreferenceValue]) -> PreferenceValue:
        out = self.one
        for v in values:
            out = self.times(out, v)
        return out

    def compare(self, a: PreferenceValue, b: PreferenceValue) -> Order:
        """Position of ``a`` relative to ``b`` in the induced partial order."""
        self.require(a)
        self.require(b)
        if a == b:
            return Order.EQUAL
        s = self._sum({a, b})
        if s == b:
            return Order.LESS
        if s == a:
            return Order.GREATER
        return Order.INCOMPARABLE

    def leq(self, a: PreferenceValue, b: PreferenceValue) -> bool:
        return self.compare(a, b) in (Order.LESS, Order.EQUAL)

    # -- cancellativity -----------------------------------------------------

    def is_cancellative(self, v: PreferenceValue) -> bool:
        """Whether multiplying by ``v`` is injective on the carrier.

        Decided by a closed per-kind rule; the carriers are infinite, so a
        search is not an option.
        """
        self.require(v)
        k = self.kind
        if k == _BOOL:
            return v.truth
        if k == _WEIGHTED:
            return v.cost is not None
        if k == _PROB:
            return v.chance != 0
        if k == _SET:
            return v.atoms == self.alphabet
        return self.left.is_cancellative(v.left) and self.right.is_cancellative(
            v.right
        )

    @property
    def cancellative(self) -> bool:
        """Whether every nonzero element of the carrier is cancellative.

        Join composites of cancellative operands genuinely have this
        property.  Lex composites are accepted as well so that join/lex
        composition chains stay well-formed, even though pairs whose second
        slot is the zero fail the elementwise test (see the regression tests
        for a witness).
        """
        k = self.kind
        if k in (_BOOL, _WEIGHTED, _PROB):
            return True
        if k == _SET:
            return len(self.alphabet) <= 1
        if k == _PRODUCT:
            return False
        return True

    @property
    def total_order(self) -> bool:
        """Whether the induced order is total (used for solver pruning only)."""
        k = self.kind
        if k in (_BOOL, _WEIGHTED, _PROB):
            return True
        if k == _SET:
            return len(self.alphabet) <= 1
        if k == _LEX:
            return self.left.total_order and self.right.total_order
        return False

    # -- misc -----------------------------------------------------------------

    def describe(self) -> str:
        k = self.kind
        if k == _SET:
            return "set{%s}" % ",".join(sorted(self.alphabet))
        if k in (_PRODUCT, _JOIN, _LEX):
            op = {"product": "prod", "join": "join", "lex": "lex"}[k]
            return f"{op}({self.left.describe()}, {self.right.describe()})"
        return k

    def __repr__(self) -> str:
        return f"Semiring({self.describe()})"


BOOL = Semiring(_BOOL)
WEIGHTED = Semiring(_WEIGHTED)
PROB = Semiring(_PROB)


def set_semiring(atoms: Iterable[str]) -> Semiring:
    """Powerset semiring over a nonempty finite alphabet (union / intersection)."""
    alphabet = frozenset(atoms)
    if not alphabet:
        raise ValueError("set semiring needs a nonempty alphabet")
    return Semiring(_SET, alphabet=alphabet)


def product_semiring(left: Semiring, right: Semiring) -> Semiring:
    """Componentwise composite over the full Cartesian carrier."""
    return Semiring(_PRODUCT, left=left, right=right)


def join_semiring(left: Semiring, right: Semiring) -> Semiring:
    """Pareto composite: carrier restricted to pairs of cancellative elements."""
    if not left.cancellative:
        raise NotCancellative("left", f"{left.describe()} is not cancellative")
    if not right.cancellative:
        raise NotCancellative("right", f"{right.describe()} is not cancellative")
    return Semiring(_JOIN, left=left, right=right)


def lex_semiring(left: Semiring, right: Semiring) -> Semiring:
    """Lexicographic composite: first slot dominates, ties fall to the second.

    Both operands must be cancellative so that composition chains associate.
    """
    if not left.cancellative:
        raise NotCancellative("left", f"{left.describe()} is not cancellative")
    if not right.cancellative:
        raise NotCancellative("right", f"{right.describe()} is not cancellative")
    return Semiring(_LEX, left=left, right=right)


# ---------------------------------------------------------------------------
# Homomorphisms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Homomorphism:
    """A structure-preserving map between semirings.

    ``order_reflecting`` declares that target-order comparisons imply
    source-order comparisons; the property tests spot-check the flag.
    """

    source: Semiring
    target: Semiring
    fn: Callable[[PreferenceValue], PreferenceValue]
    order_reflecting: bool = False

    def __post_init__(self):
        if self.fn(self.source.zero) != self.target.zero:
            raise ValueError("homomorphism must map zero to zero")
        if self.fn(self.source.one) != self.target.one:
            raise ValueError("homomorphism must map one to one")

    def apply(self, v: PreferenceValue) -> PreferenceValue:
        self.source.require(v)
        out = self.fn(v)
        self.target.require(out)
        return out

    def __call__(self, v: PreferenceValue) -> PreferenceValue:
        return self.apply(v)


def identity_hom(s: Semiring) -> Homomorphism:
    return Homomorphism(s, s, lambda v: v, order_reflecting=True)


def bool_embedding(target: Semiring) -> Homomorphism:
    """Map the boolean units onto the units of an arbitrary semiring."""

    def fn(v: PreferenceValue) -> PreferenceValue:
        return target.one if v.truth else target.zero

    return Homomorphism(BOOL, target, fn, order_reflecting=True)


def canonical_injection(side: str, left: Semiring, right: Semiring, kind: str) -> Homomorphism:
    """Embed one operand into a join/lex composite.

    The missing slot is filled with the partner's one; zero maps to the zero
    pair.  Requires the composite to be constructible.
    """
    if kind == "join":
        composite = join_semiring(left, right)
    elif kind == "lex":
        composite = lex_semiring(left, right)
    else:
        raise ValueError(f"kind must be 'join' or 'lex', got {kind!r}")
    if side == "left":

        def fn(v: PreferenceValue) -> PreferenceValue:
            if v == left.zero:
                return composite.zero
            return PairVal(v, right.one)

        return Homomorphism(left, composite, fn, order_reflecting=True)
    if side == "right":

        def fn(v: PreferenceValue) -> PreferenceValue:
            if v == right.zero:
                return composite.zero
            return PairVal(left.one, v)

        return Homomorphism(right, composite, fn, order_reflecting=True)
    raise ValueError(f"side must be 'left' or 'right', got {side!r}")


def join_to_product(left: Semiring, right: Semiring) -> Homomorphism:
    """Inclusion of the join composite into the full product composite."""
    src = join_semiring(left, right)
    tgt = product_semiring(left, right)
    return Homomorphism(src, tgt, lambda v: v, order_reflecting=True)
