"""Textual model format (``.sca`` files): parser, serializer, elaborator.

A document declares semirings, port domains, homomorphisms, automata, and
composition expressions::

    semiring W = weighted;
    domain forward = {1..5};
    automaton Hop over W {
      states p1, p2;
      init p1;
      trans p1 -> p2 on {forward} where forward = 2 pref 1;
      trans p2 -> p2 on {} pref 0;
    }
    compose Twice = product(Hop, Hop);

Syntax is line-comment ``#``, UTF-8, semicolon-terminated declarations.
``parse`` returns a validated document or raises ``ModelError`` carrying
diagnostics with source spans; ``serialize`` emits canonical text such that
``parse(serialize(doc))`` is structurally equal to ``doc``; ``elaborate``
builds the declared automata and evaluates composition expressions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

from . import semiring as sr
from .semiring import Semiring, Homomorphism, PreferenceValue, rational_text
from .constraints import (
    ALWAYS,
    And,
    Arith,
    Assignment,
    BoolConst,
    Compare,
    DataValue,
    Expr,
    Lit,
    Member,
    Not,
    Or,
    PredicateConstraint,
    Problem,
    Var,
    data_value_key,
    data_value_text,
    expr_to_text,
    free_variables,
    is_boolean_expr,
)
from .automata import Automaton, Transition, join_compose, lex_compose, lift_hom, product

KEYWORDS = frozenset(
    """semiring domain automaton compose hom states init trans on where pref over
       bool weighted prob set join lex prod product identity embed_bool
       join_to_prod inject_left inject_right true false not and or top bot inf in
    """.split()
)

_PUNCT = ("->", "..", "!=", "<=", ">=", "{", "}", "(", ")", "<", ">", ",", ";", "=", "+", "-", "*", "/")


@dataclass(frozen=True)
class Span:
    line: int
    column: int
    end_line: int
    end_column: int

    def __str__(self) -> str:
        return f"{self.line}:{self.column}"


def _merge_spans(a: Span, b: Span) -> Span:
    return Span(a.line, a.column, b.end_line, b.end_column)


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    span: Span

    def __str__(self) -> str:
        return f"{self.span}: {self.code}: {self.message}"


class ModelError(Exception):
    def __init__(self, diagnostics: Sequence[Diagnostic]):
        self.diagnostics = tuple(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))


# ---------------------------------------------------------------------------
# Document structure
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SRef:
    name: str
    span: Span = field(compare=False, repr=False)


@dataclass(frozen=True)
class SBase:
    kind: str  # 'bool' | 'weighted' | 'prob'
    span: Span = field(compare=False, repr=False)


@dataclass(frozen=True)
class SSet:
    atoms: Tuple[str, ...]
    span: Span = field(compare=False, repr=False)


@dataclass(frozen=True)
class SPair:
    op: str  # 'join' | 'lex' | 'prod'
    left: "SExpr"
    right: "SExpr"
    span: Span = field(compare=False, repr=False)


SExpr = Union[SRef, SBase, SSet, SPair]


@dataclass(frozen=True)
class TopLit:
    span: Span = field(compare=False, repr=False)


@dataclass(frozen=True)
class BotLit:
    span: Span = field(compare=False, repr=False)


@dataclass(frozen=True)
class InfLit:
    span: Span = field(compare=False, repr=False)


@dataclass(frozen=True)
class NumLit:
    value: Fraction
    span: Span = field(compare=False, repr=False)


@dataclass(frozen=True)
class SetLit:
    atoms: Tuple[str, ...]
    span: Span = field(compare=False, repr=False)


@dataclass(frozen=True)
class PairLit:
    left: "ValueLit"
    right: "ValueLit"
    span: Span = field(compare=False, repr=False)


ValueLit = Union[TopLit, BotLit, InfLit, NumLit, SetLit, PairLit]


@dataclass(frozen=True)
class CRef:
    name: str
    span: Span = field(compare=False, repr=False)


@dataclass(frozen=True)
class CCall:
    op: str  # 'product' | 'join' | 'lex'
    args: Tuple["CExpr", ...]
    span: Span = field(compare=False, repr=False)


@dataclass(frozen=True)
class CHomApp:
    hom: str
    arg: "CExpr"
    span: Span = field(compare=False, repr=False)


CExpr = Union[CRef, CCall, CHomApp]


@dataclass(frozen=True)
class HomExpr:
    kind: str  # 'inject_left' | 'inject_right' | 'embed_bool' | 'join_to_prod' | 'identity'
    args: Tuple[SExpr, ...]
    variant: Optional[str]  # 'join' | 'lex' for injections
    span: Span = field(compare=False, repr=False)


@dataclass(frozen=True)
class SemiringDecl:
    name: str
    expr: SExpr
    span: Span = field(compare=False, repr=False)


@dataclass(frozen=True)
class DomainDecl:
    port: str
    values: Tuple[DataValue, ...]  # canonically sorted
    span: Span = field(compare=False, repr=False)


@dataclass(frozen=True)
class TransitionDecl:
    source: str
    target: str
    ports: Tuple[str, ...]  # canonically sorted
    predicate: Expr
    pref: Optional[ValueLit]  # None means the semiring's one
    span: Span = field(compare=False, repr=False)


@dataclass(frozen=True)
class AutomatonDecl:
    name: str
    semiring_name: Optional[str]
    states: Tuple[str, ...]
    init: str
    transitions: Tuple[TransitionDecl, ...]
    span: Span = field(compare=False, repr=False)


@dataclass(frozen=True)
class ComposeDecl:
    name: str
    expr: CExpr
    span: Span = field(compare=False, repr=False)


@dataclass(frozen=True)
class HomDecl:
    name: str
    expr: HomExpr
    span: Span = field(compare=False, repr=False)


@dataclass(frozen=True)
class ModelDocument:
    semirings: Tuple[SemiringDecl, ...] = ()
    domains: Tuple[DomainDecl, ...] = ()
    homs: Tuple[HomDecl, ...] = ()
    automata: Tuple[AutomatonDecl, ...] = ()
    composes: Tuple[ComposeDecl, ...] = ()


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Token:
    kind: str  # 'IDENT', 'KW', 'INT', 'DECIMAL', punctuation text, 'EOF'
    text: str
    span: Span


def _tokenize(text: str) -> List[Token]:
    tokens: List[Token] = []
    line, col = 1, 1
    i, n = 0, len(text)

    def span(width: int, l=None, c=None) -> Span:
        sl, sc = (l or line), (c or col)
        return Span(sl, sc, sl, sc + width - 1)

    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch.isalpha() or ch == "_":
            start = i
            while i < n and (text[i].isalnum() or text[i] == "_"):
                i += 1
            word = text[start:i]
            kind = "KW" if word in KEYWORDS else "IDENT"
            tokens.append(Token(kind, word, span(len(word))))
            col += len(word)
            continue
        if ch.isdigit():
            start = i
            while i < n and text[i].isdigit():
                i += 1
            if i + 1 < n and text[i] == "." and text[i + 1].isdigit():
                i += 1
                while i < n and text[i].isdigit():
                    i += 1
                word = text[start:i]
                tokens.append(Token("DECIMAL", word, span(len(word))))
            else:
                word = text[start:i]
                tokens.append(Token("INT", word, span(len(word))))
            col += len(word)
            continue
        matched = None
        for p in _PUNCT:
            if text.startswith(p, i):
                matched = p
                break
        if matched is None:
            raise ModelError(
                [Diagnostic("syntax", f"unexpected character {ch!r}", span(1))]
            )
        tokens.append(Token(matched, matched, span(len(matched))))
        i += len(matched)
        col += len(matched)
    tokens.append(Token("EOF", "", Span(line, col, line, col)))
    return tokens


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


class _Parser:
    def __init__(self, tokens: List[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def take(self) -> Token:
        tok = self.peek()
        self.pos += 1
        return tok

    def fail(self, message: str, tok: Optional[Token] = None):
        tok = tok or self.peek()
        raise ModelError([Diagnostic("syntax", message, tok.span)])

    @staticmethod
    def _shown(tok: Token) -> str:
        return repr(tok.text) if tok.text else "end of input"

    def expect(self, kind: str) -> Token:
        tok = self.peek()
        if tok.kind != kind:
            self.fail(f"expected {kind!r}, found {self._shown(tok)}")
        return self.take()

    def expect_kw(self, word: str) -> Token:
        tok = self.peek()
        if tok.kind != "KW" or tok.text != word:
            self.fail(f"expected {word!r}, found {self._shown(tok)}")
        return self.take()

    def at_kw(self, word: str) -> bool:
        tok = self.peek()
        return tok.kind == "KW" and tok.text == word

    def ident(self, what: str = "name") -> Token:
        tok = self.peek()
        if tok.kind != "IDENT":
            self.fail(f"expected {what}, found {self._shown(tok)}")
        return self.take()

    # -- document -----------------------------------------------------------

    def document(self) -> ModelDocument:
        semirings, domains, homs, automata, composes = [], [], [], [], []
        while self.peek().kind != "EOF":
            tok = self.peek()
            if self.at_kw("semiring"):
                semirings.append(self.semiring_decl())
            elif self.at_kw("domain"):
                domains.append(self.domain_decl())
            elif self.at_kw("hom"):
                homs.append(self.hom_decl())
            elif self.at_kw("automaton"):
                automata.append(self.automaton_decl())
            elif self.at_kw("compose"):
                composes.append(self.compose_decl())
            else:
                self.fail(
                    "expected a declaration (semiring, domain, hom, automaton, compose)",
                    tok,
                )
        return make_document(semirings, domains, homs, automata, composes)

    def semiring_decl(self) -> SemiringDecl:
        start = self.expect_kw("semiring")
        name = self.ident("semiring name")
        self.expect("=")
        expr = self.semiring_expr()
        end = self.expect(";")
        return SemiringDecl(name.text, expr, _merge_spans(start.span, end.span))

    def semiring_expr(self) -> SExpr:
        tok = self.peek()
        if tok.kind == "KW" and tok.text in ("bool", "weighted", "prob"):
            self.take()
            return SBase(tok.text, tok.span)
        if tok.kind == "KW" and tok.text == "set":
            self.take()
            self.expect("{")
            atoms = [self.ident("atom").text]
            while self.peek().kind == ",":
                self.take()
                atoms.append(self.ident("atom").text)
            end = self.expect("}")
            return SSet(tuple(sorted(set(atoms))), _merge_spans(tok.span, end.span))
        if tok.kind == "KW" and tok.text in ("join", "lex", "prod"):
            self.take()
            self.expect("(")
            left = self.semiring_expr()
            self.expect(",")
            right = self.semiring_expr()
            end = self.expect(")")
            return SPair(tok.text, left, right, _merge_spans(tok.span, end.span))
        if tok.kind == "IDENT":
            self.take()
            return SRef(tok.text, tok.span)
        self.fail("expected a semiring expression")

    def domain_decl(self) -> DomainDecl:
        start = self.expect_kw("domain")
        port = self.ident("port name")
        self.expect("=")
        self.expect("{")
        values = self.domain_values()
        self.expect("}")
        end = self.expect(";")
        return DomainDecl(
            port.text,
            tuple(sorted(set(values), key=data_value_key)),
            _merge_spans(start.span, end.span),
        )

    def domain_values(self) -> List[DataValue]:
        values = [*self.domain_item()]
        while self.peek().kind == ",":
            self.take()
            values.extend(self.domain_item())
        return values

    def domain_item(self) -> List[DataValue]:
        first = self.number_or_atom()
        if self.peek().kind == "..":
            dots = self.take()
            second = self.number_or_atom()
            if not isinstance(first, int) or not isinstance(second, int):
                self.fail("ranges need integer endpoints", dots)
            if second < first:
                self.fail("empty range", dots)
            return list(range(first, second + 1))
        return [first]

    def number_or_atom(self) -> DataValue:
        tok = self.peek()
        if tok.kind == "IDENT":
            self.take()
            return tok.text
        return self.number()

    def number(self) -> Union[int, Fraction]:
        negative = False
        if self.peek().kind == "-":
            self.take()
            negative = True
        tok = self.peek()
        if tok.kind == "INT":
            self.take()
            value: Union[int, Fraction] = int(tok.text)
            if self.peek().kind == "/":
                self.take()
                den = self.expect("INT")
                value = Fraction(int(tok.text), int(den.text))
        elif tok.kind == "DECIMAL":
            self.take()
            value = Fraction(tok.text)
        else:
            self.fail("expected a number")
        return -value if negative else value

    # -- automata -------------------------------------------------------------

    def automaton_decl(self) -> AutomatonDecl:
        start = self.expect_kw("automaton")
        name = self.ident("automaton name")
        semiring_name = None
        if self.at_kw("over"):
            self.take()
            semiring_name = self.ident("semiring name").text
        self.expect("{")
        states: List[str] = []
        init: Optional[str] = None
        transitions: List[TransitionDecl] = []
        while self.peek().kind != "}":
            if self.at_kw("states"):
                self.take()
                states.extend(self.state_list())
                self.expect(";")
            elif self.at_kw("init"):
                self.take()
                init = self.ident("state name").text
                self.expect(";")
            elif self.at_kw("trans"):
                transitions.append(self.transition_decl())
            else:
                self.fail("expected states, init, or trans")
        end = self.expect("}")
        if init is None:
            self.fail("automaton is missing an init declaration", end)
        span = _merge_spans(start.span, end.span)
        return make_automaton_decl(name.text, semiring_name, states, init, transitions, span)

    def state_list(self) -> List[str]:
        names = [*self.state_item()]
        while self.peek().kind == ",":
            self.take()
            names.extend(self.state_item())
        return names

    def state_item(self) -> List[str]:
        first = self.ident("state name")
        if self.peek().kind != "..":
            return [first.text]
        dots = self.take()
        second = self.ident("state name")
        p1, n1 = _split_suffix(first.text)
        p2, n2 = _split_suffix(second.text)
        if p1 != p2 or n1 is None or n2 is None or n2 < n1:
            self.fail("state ranges need a shared prefix and increasing integer suffixes", dots)
        return [f"{p1}{i}" for i in range(n1, n2 + 1)]

    def transition_decl(self) -> TransitionDecl:
        start = self.expect_kw("trans")
        source = self.ident("state name")
        self.expect("->")
        target = self.ident("state name")
        self.expect_kw("on")
        self.expect("{")
        ports: List[str] = []
        if self.peek().kind != "}":
            ports.append(self.ident("port name").text)
            while self.peek().kind == ",":
                self.take()
                ports.append(self.ident("port name").text)
        self.expect("}")
        predicate: Expr = ALWAYS
        if self.at_kw("where"):
            where = self.take()
            predicate = self.expression()
            if not is_boolean_expr(predicate):
                self.fail("where-clause must be a predicate, not a value", where)
        pref: Optional[ValueLit] = None
        if self.at_kw("pref"):
            self.take()
            pref = self.value_literal()
        end = self.expect(";")
        return TransitionDecl(
            source.text,
            target.text,
            tuple(sorted(set(ports))),
            predicate,
            pref,
            _merge_spans(start.span, end.span),
        )

    # -- predicate expressions ------------------------------------------------

    def expression(self) -> Expr:
        return self.or_expr()

    def or_expr(self) -> Expr:
        left = self.and_expr()
        while self.at_kw("or"):
            op = self.take()
            right = self.and_expr()
            self._want_bool(left, op)
            self._want_bool(right, op)
            left = Or(left, right)
        return left

    def and_expr(self) -> Expr:
        left = self.not_expr()
        while self.at_kw("and"):
            op = self.take()
            right = self.not_expr()
            self._want_bool(left, op)
            self._want_bool(right, op)
            left = And(left, right)
        return left

    def not_expr(self) -> Expr:
        if self.at_kw("not"):
            op = self.take()
            inner = self.not_expr()
            self._want_bool(inner, op)
            return Not(inner)
        return self.comparison()

    def comparison(self) -> Expr:
        left = self.sum_expr()
        tok = self.peek()
        if tok.kind in ("=", "!=", "<", "<=", ">", ">="):
            self.take()
            right = self.sum_expr()
            self._want_value(left, tok)
            self._want_value(right, tok)
            nxt = self.peek()
            if nxt.kind in ("=", "!=", "<", "<=", ">", ">="):
                self.fail("comparisons do not chain; use 'and'", nxt)
            return Compare(tok.text, left, right)
        if tok.kind == "KW" and tok.text == "in":
            self.take()
            self._want_value(left, tok)
            self.expect("{")
            choices = self.domain_values()
            self.expect("}")
            return Member(left, frozenset(choices))
        return left

    def sum_expr(self) -> Expr:
        left = self.term_expr()
        while self.peek().kind in ("+", "-"):
            op = self.take()
            right = self.term_expr()
            self._want_value(left, op)
            self._want_value(right, op)
            left = Arith(op.kind, left, right)
        return left

    def term_expr(self) -> Expr:
        left = self.factor()
        while self.peek().kind == "*":
            op = self.take()
            right = self.factor()
            self._want_value(left, op)
            self._want_value(right, op)
            left = Arith("*", left, right)
        return left

    def factor(self) -> Expr:
        tok = self.peek()
        if tok.kind == "(":
            self.take()
            inner = self.expression()
            self.expect(")")
            return inner
        if tok.kind == "KW" and tok.text == "true":
            self.take()
            return BoolConst(True)
        if tok.kind == "KW" and tok.text == "false":
            self.take()
            return BoolConst(False)
        if tok.kind == "IDENT":
            self.take()
            return Var(tok.text)
        if tok.kind in ("INT", "DECIMAL", "-"):
            return Lit(self.number())
        self.fail("expected a value or predicate")

    def _want_bool(self, e: Expr, tok: Token):
        if not is_boolean_expr(e):
            self.fail("operand must be a predicate", tok)

    def _want_value(self, e: Expr, tok: Token):
        if is_boolean_expr(e):
            self.fail("operand must be a value, not a predicate", tok)

    # -- preference literals ----------------------------------------------------

    def value_literal(self) -> ValueLit:
        tok = self.peek()
        if tok.kind == "KW" and tok.text == "top":
            self.take()
            return TopLit(tok.span)
        if tok.kind == "KW" and tok.text == "bot":
            self.take()
            return BotLit(tok.span)
        if tok.kind == "KW" and tok.text == "inf":
            self.take()
            return InfLit(tok.span)
        if tok.kind == "{":
            self.take()
            atoms = []
            if self.peek().kind != "}":
                atoms.append(self.ident("atom").text)
                while self.peek().kind == ",":
                    self.take()
                    atoms.append(self.ident("atom").text)
            end = self.expect("}")
            return SetLit(tuple(sorted(set(atoms))), _merge_spans(tok.span, end.span))
        if tok.kind == "<":
            self.take()
            left = self.value_literal()
            self.expect(",")
            right = self.value_literal()
            end = self.expect(">")
            return PairLit(left, right, _merge_spans(tok.span, end.span))
        if tok.kind in ("INT", "DECIMAL", "-"):
            value = self.number()
            return NumLit(Fraction(value), tok.span)
        self.fail("expected a preference literal")

    # -- compositions and homomorphisms ------------------------------------------

    def compose_decl(self) -> ComposeDecl:
        start = self.expect_kw("compose")
        name = self.ident("composition name")
        self.expect("=")
        expr = self.comp_expr()
        end = self.expect(";")
        return ComposeDecl(name.text, expr, _merge_spans(start.span, end.span))

    def comp_expr(self) -> CExpr:
        tok = self.peek()
        if tok.kind == "KW" and tok.text in ("product", "join", "lex"):
            self.take()
            self.expect("(")
            args = [self.comp_expr()]
            while self.peek().kind == ",":
                self.take()
                args.append(self.comp_expr())
            end = self.expect(")")
            if len(args) < 2:
                self.fail(f"{tok.text} needs at least two operands", tok)
            return CCall(tok.text, tuple(args), _merge_spans(tok.span, end.span))
        if tok.kind == "IDENT":
            self.take()
            if self.peek().kind == "(":
                self.take()
                arg = self.comp_expr()
                end = self.expect(")")
                return CHomApp(tok.text, arg, _merge_spans(tok.span, end.span))
            return CRef(tok.text, tok.span)
        self.fail("expected a composition expression")

    def hom_decl(self) -> HomDecl:
        start = self.expect_kw("hom")
        name = self.ident("homomorphism name")
        self.expect("=")
        tok = self.peek()
        if tok.kind != "KW" or tok.text not in (
            "inject_left",
            "inject_right",
            "embed_bool",
            "join_to_prod",
            "identity",
        ):
            self.fail("expected a homomorphism constructor")
        self.take()
        self.expect("(")
        args = [self.semiring_expr()]
        variant = None
        if tok.text in ("inject_left", "inject_right", "join_to_prod"):
            self.expect(",")
            args.append(self.semiring_expr())
            if tok.text != "join_to_prod":
                self.expect(",")
                vtok = self.peek()
                if vtok.kind == "KW" and vtok.text in ("join", "lex"):
                    self.take()
                    variant = vtok.text
                else:
                    self.fail("expected 'join' or 'lex'")
        close = self.expect(")")
        end = self.expect(";")
        expr = HomExpr(tok.text, tuple(args), variant, _merge_spans(tok.span, close.span))
        return HomDecl(name.text, expr, _merge_spans(start.span, end.span))


def _split_suffix(name: str) -> Tuple[str, Optional[int]]:
    i = len(name)
    while i > 0 and name[i - 1].isdigit():
        i -= 1
    if i == len(name):
        return name, None
    return name[:i], int(name[i:])


def _state_sort_key(name: str):
    prefix, num = _split_suffix(name)
    return (prefix, num if num is not None else -1, name)


DUMMY_SPAN = Span(0, 0, 0, 0)


def make_automaton_decl(
    name: str,
    semiring_name: Optional[str],
    states: Sequence[str],
    init: str,
    transitions: Sequence[TransitionDecl],
    span: Span = DUMMY_SPAN,
) -> AutomatonDecl:
    """Canonicalized declaration (sorted states and transitions)."""
    canon = tuple(
        sorted(
            transitions,
            key=lambda t: (
                _state_sort_key(t.source),
                _state_sort_key(t.target),
                t.ports,
                expr_to_text(t.predicate),
                _literal_text(t.pref) if t.pref is not None else "",
            ),
        )
    )
    return AutomatonDecl(
        name, semiring_name, tuple(sorted(set(states), key=_state_sort_key)), init, canon, span
    )


def make_document(
    semirings: Sequence[SemiringDecl] = (),
    domains: Sequence[DomainDecl] = (),
    homs: Sequence[HomDecl] = (),
    automata: Sequence[AutomatonDecl] = (),
    composes: Sequence[ComposeDecl] = (),
) -> ModelDocument:
    """Canonicalized document (declarations sorted by name)."""
    return ModelDocument(
        tuple(sorted(semirings, key=lambda d: d.name)),
        tuple(sorted(domains, key=lambda d: d.port)),
        tuple(sorted(homs, key=lambda d: d.name)),
        tuple(sorted(automata, key=lambda d: d.name)),
        tuple(sorted(composes, key=lambda d: d.name)),
    )


def value_to_literal(v: PreferenceValue) -> ValueLit:
    """Inverse of ``literal_to_value`` up to carrier interpretation."""
    if isinstance(v, sr.BoolVal):
        return TopLit(DUMMY_SPAN) if v.truth else BotLit(DUMMY_SPAN)
    if isinstance(v, sr.WeightVal):
        return InfLit(DUMMY_SPAN) if v.cost is None else NumLit(v.cost, DUMMY_SPAN)
    if isinstance(v, sr.ProbVal):
        return NumLit(v.chance, DUMMY_SPAN)
    if isinstance(v, sr.SetVal):
        return SetLit(tuple(sorted(v.atoms)), DUMMY_SPAN)
    if isinstance(v, sr.PairVal):
        return PairLit(value_to_literal(v.left), value_to_literal(v.right), DUMMY_SPAN)
    raise TypeError(f"not a preference value: {v!r}")


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


class _Checker:
    def __init__(self, doc: ModelDocument):
        self.doc = doc
        self.diagnostics: List[Diagnostic] = []
        self.semirings: Dict[str, Semiring] = {}
        self.homs: Dict[str, Homomorphism] = {}
        self.automaton_semirings: Dict[str, Semiring] = {}
        self.domains: Dict[str, frozenset] = {}

    def report(self, code: str, message: str, span: Span):
        self.diagnostics.append(Diagnostic(code, message, span))

    def run(self):
        self.check_names()
        self.resolve_semirings()
        self.resolve_domains()
        self.resolve_homs()
        self.check_automata()
        self.check_composes()

    def check_names(self):
        for decls, what in (
            (self.doc.semirings, "semiring"),
            (self.doc.domains, "domain"),
            (self.doc.homs, "hom"),
        ):
            seen = set()
            for d in decls:
                name = d.port if what == "domain" else d.name
                if name in seen:
                    self.report("duplicate-name", f"duplicate {what} {name!r}", d.span)
                seen.add(name)
        seen = set()
        for d in (*self.doc.automata, *self.doc.composes):
            if d.name in seen:
                self.report("duplicate-name", f"duplicate automaton {d.name!r}", d.span)
            seen.add(d.name)

    # -- semirings ---------------------------------------------------------

    def resolve_semirings(self):
        exprs = {d.name: d.expr for d in self.doc.semirings}
        resolving: List[str] = []

        def build(e: SExpr) -> Optional[Semiring]:
            if isinstance(e, SBase):
                return {"bool": sr.BOOL, "weighted": sr.WEIGHTED, "prob": sr.PROB}[e.kind]
            if isinstance(e, SSet):
                return sr.set_semiring(e.atoms)
            if isinstance(e, SRef):
                if e.name in self.semirings:
                    return self.semirings[e.name]
                if e.name in resolving:
                    self.report("unresolved-name", f"semiring {e.name!r} refers to itself", e.span)
                    return None
                if e.name not in exprs:
                    self.report("unresolved-name", f"unknown semiring {e.name!r}", e.span)
                    return None
                resolving.append(e.name)
                built = build(exprs[e.name])
                resolving.pop()
                if built is not None:
                    self.semirings[e.name] = built
                return built
            left = build(e.left)
            right = build(e.right)
            if left is None or right is None:
                return None
            if e.op == "prod":
                return sr.product_semiring(left, right)
            factory = sr.join_semiring if e.op == "join" else sr.lex_semiring
            try:
                return factory(left, right)
            except sr.NotCancellative as exc:
                self.report("cancellativity-required", str(exc), e.span)
                return None

        for d in self.doc.semirings:
            if d.name not in self.semirings:
                built = build(SRef(d.name, d.span))
                if built is not None:
                    self.semirings[d.name] = built

        self.build_semiring = build

    def resolve_domains(self):
        for d in self.doc.domains:
            self.domains[d.port] = frozenset(d.values)

    def resolve_homs(self):
        for d in self.doc.homs:
            e = d.expr
            parts = [self.build_semiring(a) for a in e.args]
            if any(p is None for p in parts):
                continue
            try:
                if e.kind == "identity":
                    hom = sr.identity_hom(parts[0])
                elif e.kind == "embed_bool":
                    hom = sr.bool_embedding(parts[0])
                elif e.kind == "join_to_prod":
                    hom = sr.join_to_product(parts[0], parts[1])
                else:
                    side = "left" if e.kind == "inject_left" else "right"
                    hom = sr.canonical_injection(side, parts[0], parts[1], e.variant)
            except sr.NotCancellative as exc:
                self.report("cancellativity-required", str(exc), e.span)
                continue
            self.homs[d.name] = hom

    # -- automata ------------------------------------------------------------

    def automaton_semiring(self, d: AutomatonDecl) -> Optional[Semiring]:
        if d.semiring_name is not None:
            if d.semiring_name not in self.semirings:
                self.report(
                    "unresolved-name", f"unknown semiring {d.semiring_name!r}", d.span
                )
                return None
            return self.semirings[d.semiring_name]
        if len(self.doc.semirings) == 1:
            only = self.doc.semirings[0].name
            return self.semirings.get(only)
        self.report(
            "unresolved-name",
            f"automaton {d.name!r} needs an explicit 'over' clause",
            d.span,
        )
        return None

    def check_automata(self):
        for d in self.doc.automata:
            s = self.automaton_semiring(d)
            if s is not None:
                self.automaton_semirings[d.name] = s
            states = set(d.states)
            if d.init not in states:
                self.report("unresolved-name", f"unknown init state {d.init!r}", d.span)
            for t in d.transitions:
                for endpoint in (t.source, t.target):
                    if endpoint not in states:
                        self.report(
                            "unresolved-name", f"unknown state {endpoint!r}", t.span
                        )
                scope = frozenset(t.ports)
                loose = free_variables(t.predicate) - scope
                if loose:
                    self.report(
                        "unresolved-name",
                        f"predicate mentions {sorted(loose)} outside the fired ports",
                        t.span,
                    )
                for port in t.ports:
                    if port not in self.domains:
                        self.report(
                            "missing-domain", f"port {port!r} has no domain declaration", t.span
                        )
                if s is not None and t.pref is not None:
                    try:
                        literal_to_value(t.pref, s)
                    except _LiteralMismatch as exc:
                        self.report("carrier-mismatch", str(exc), exc.span)

    # -- compositions ---------------------------------------------------------

    def check_composes(self):
        table: Dict[str, Optional[Semiring]] = dict(self.automaton_semirings)
        exprs = {d.name: d.expr for d in self.doc.composes}
        resolving: List[str] = []

        def semiring_of(e: CExpr) -> Optional[Semiring]:
            if isinstance(e, CRef):
                if e.name in table:
                    return table[e.name]
                if e.name in resolving:
                    self.report(
                        "unresolved-name", f"composition {e.name!r} refers to itself", e.span
                    )
                    return None
                if e.name not in exprs:
                    self.report("unresolved-name", f"unknown automaton {e.name!r}", e.span)
                    return None
                resolving.append(e.name)
                out = semiring_of(exprs[e.name])
                resolving.pop()
                table[e.name] = out
                return out
            if isinstance(e, CHomApp):
                if e.hom not in self.homs:
                    self.report("unresolved-name", f"unknown hom {e.hom!r}", e.span)
                    semiring_of(e.arg)
                    return None
                hom = self.homs[e.hom]
                inner = semiring_of(e.arg)
                if inner is not None and inner != hom.source:
                    self.report(
                        "semiring-mismatch",
                        f"hom {e.hom!r} expects {hom.source.describe()}, got {inner.describe()}",
                        e.span,
                    )
                    return None
                return hom.target
            parts = [semiring_of(arg) for arg in e.args]
            if any(p is None for p in parts):
                return None
            if e.op == "product":
                first = parts[0]
                for p in parts[1:]:
                    if p != first:
                        self.report(
                            "semiring-mismatch",
                            "product operands must share one semiring",
                            e.span,
                        )
                        return None
                return first
            out = parts[0]
            factory = sr.join_semiring if e.op == "join" else sr.lex_semiring
            for p in parts[1:]:
                try:
                    out = factory(out, p)
                except sr.NotCancellative as exc:
                    self.report("cancellativity-required", str(exc), e.span)
                    return None
            return out

        for d in self.doc.composes:
            if d.name not in table:
                resolving.append(d.name)
                table[d.name] = semiring_of(d.expr)
                resolving.pop()


class _LiteralMismatch(ValueError):
    def __init__(self, message: str, span: Span):
        super().__init__(message)
        self.span = span


def literal_to_value(lit: ValueLit, s: Semiring) -> PreferenceValue:
    """Interpret a literal in a semiring's carrier (raises on shape/range mismatch)."""
    k = s.kind
    if isinstance(lit, TopLit):
        if k != "bool":
            raise _LiteralMismatch(f"'top' is a boolean literal, not {s.describe()}", lit.span)
        return sr.TOP
    if isinstance(lit, BotLit):
        if k != "bool":
            raise _LiteralMismatch(f"'bot' is a boolean literal, not {s.describe()}", lit.span)
        return sr.BOT
    if isinstance(lit, InfLit):
        if k != "weighted":
            raise _LiteralMismatch(f"'inf' is a weighted literal, not {s.describe()}", lit.span)
        return sr.INFINITE_COST
    if isinstance(lit, NumLit):
        if k == "weighted":
            if lit.value < 0:
                raise _LiteralMismatch("weights are nonnegative", lit.span)
            return sr.WeightVal(lit.value)
        if k == "prob":
            if not 0 <= lit.value <= 1:
                raise _LiteralMismatch("probabilities lie in [0, 1]", lit.span)
            return sr.ProbVal(lit.value)
        raise _LiteralMismatch(f"numeric literal does not fit {s.describe()}", lit.span)
    if isinstance(lit, SetLit):
        if k != "set":
            raise _LiteralMismatch(f"set literal does not fit {s.describe()}", lit.span)
        stray = set(lit.atoms) - s.alphabet
        if stray:
            raise _LiteralMismatch(f"atoms {sorted(stray)} outside the alphabet", lit.span)
        return sr.SetVal(frozenset(lit.atoms))
    if isinstance(lit, PairLit):
        if k not in ("product", "join", "lex"):
            raise _LiteralMismatch(f"pair literal does not fit {s.describe()}", lit.span)
        value = sr.PairVal(
            literal_to_value(lit.left, s.left), literal_to_value(lit.right, s.right)
        )
        if not s.contains(value):
            raise _LiteralMismatch(
                f"{sr.value_to_text(value)} is outside the carrier of {s.describe()}", lit.span
            )
        return value
    raise TypeError(f"not a literal: {lit!r}")


def parse(text: str) -> ModelDocument:
    """Parse and validate; raises ModelError with source-span diagnostics."""
    doc = _Parser(_tokenize(text)).document()
    checker = _Checker(doc)
    checker.run()
    if checker.diagnostics:
        raise ModelError(checker.diagnostics)
    return doc


# ---------------------------------------------------------------------------
# Serializer
# ---------------------------------------------------------------------------


def _sexpr_text(e: SExpr) -> str:
    if isinstance(e, SBase):
        return e.kind
    if isinstance(e, SRef):
        return e.name
    if isinstance(e, SSet):
        return "set{%s}" % ", ".join(e.atoms)
    return f"{e.op}({_sexpr_text(e.left)}, {_sexpr_text(e.right)})"


def _literal_text(lit: ValueLit) -> str:
    if isinstance(lit, TopLit):
        return "top"
    if isinstance(lit, BotLit):
        return "bot"
    if isinstance(lit, InfLit):
        return "inf"
    if isinstance(lit, NumLit):
        return rational_text(lit.value)
    if isinstance(lit, SetLit):
        return "{%s}" % ", ".join(lit.atoms)
    return f"<{_literal_text(lit.left)}, {_literal_text(lit.right)}>"


def _domain_text(values: Tuple[DataValue, ...]) -> str:
    if (
        len(values) >= 2
        and all(isinstance(v, int) for v in values)
        and values[-1] - values[0] == len(values) - 1
    ):
        return f"{{{values[0]}..{values[-1]}}}"
    return "{%s}" % ", ".join(data_value_text(v) for v in values)


def _cexpr_text(e: CExpr) -> str:
    if isinstance(e, CRef):
        return e.name
    if isinstance(e, CHomApp):
        return f"{e.hom}({_cexpr_text(e.arg)})"
    return f"{e.op}({', '.join(_cexpr_text(a) for a in e.args)})"


def _hom_text(e: HomExpr) -> str:
    inner = ", ".join(_sexpr_text(a) for a in e.args)
    if e.variant is not None:
        inner += f", {e.variant}"
    return f"{e.kind}({inner})"


def serialize(doc: ModelDocument) -> str:
    """Canonical text: sorted declarations, one style; re-parses to an equal document."""
    lines: List[str] = []
    for d in doc.semirings:
        lines.append(f"semiring {d.name} = {_sexpr_text(d.expr)};")
    if doc.semirings and doc.domains:
        lines.append("")
    for d in doc.domains:
        lines.append(f"domain {d.port} = {_domain_text(d.values)};")
    for d in doc.homs:
        if lines and lines[-1] != "":
            lines.append("")
        lines.append(f"hom {d.name} = {_hom_text(d.expr)};")
    for d in doc.automata:
        if lines:
            lines.append("")
        over = f" over {d.semiring_name}" if d.semiring_name is not None else ""
        lines.append(f"automaton {d.name}{over} {{")
        lines.append(f"  states {', '.join(d.states)};")
        lines.append(f"  init {d.init};")
        for t in d.transitions:
            piece = f"  trans {t.source} -> {t.target} on {{{', '.join(t.ports)}}}"
            if t.predicate != ALWAYS:
                piece += f" where {expr_to_text(t.predicate)}"
            if t.pref is not None:
                piece += f" pref {_literal_text(t.pref)}"
            lines.append(piece + ";")
        lines.append("}")
    for d in doc.composes:
        if lines and lines[-1] != "":
            lines.append("")
        lines.append(f"compose {d.name} = {_cexpr_text(d.expr)};")
    return "\n".join(lines) + "\n"


def slice_document(doc: ModelDocument, target: str) -> ModelDocument:
    """The sub-document a single automaton or composition actually depends on."""
    automata = {d.name: d for d in doc.automata}
    composes = {d.name: d for d in doc.composes}
    homs = {d.name: d for d in doc.homs}
    semirings = {d.name: d for d in doc.semirings}

    keep_autos: Dict[str, AutomatonDecl] = {}
    keep_comps: Dict[str, ComposeDecl] = {}
    keep_homs: Dict[str, HomDecl] = {}
    keep_srs: Dict[str, SemiringDecl] = {}

    def need_semiring(e: SExpr):
        if isinstance(e, SRef):
            if e.name in semirings and e.name not in keep_srs:
                keep_srs[e.name] = semirings[e.name]
                need_semiring(semirings[e.name].expr)
        elif isinstance(e, SPair):
            need_semiring(e.left)
            need_semiring(e.right)

    def need_name(name: str):
        if name in keep_autos or name in keep_comps:
            return
        if name in automata:
            d = automata[name]
            keep_autos[name] = d
            if d.semiring_name is not None:
                need_semiring(SRef(d.semiring_name, d.span))
        elif name in composes:
            d = composes[name]
            keep_comps[name] = d
            need_cexpr(d.expr)
        else:
            raise KeyError(f"unknown automaton {name!r}")

    def need_cexpr(e: CExpr):
        if isinstance(e, CRef):
            need_name(e.name)
        elif isinstance(e, CHomApp):
            if e.hom in homs and e.hom not in keep_homs:
                keep_homs[e.hom] = homs[e.hom]
                for arg in homs[e.hom].expr.args:
                    need_semiring(arg)
            need_cexpr(e.arg)
        else:
            for arg in e.args:
                need_cexpr(arg)

    need_name(target)
    ports = set()
    for d in keep_autos.values():
        for t in d.transitions:
            ports.update(t.ports)
    # an implicit sole-semiring default must survive the slice
    for d in keep_autos.values():
        if d.semiring_name is None and len(doc.semirings) == 1:
            keep_srs[doc.semirings[0].name] = doc.semirings[0]
    keep_doms = [d for d in doc.domains if d.port in ports]
    return make_document(
        list(keep_srs.values()),
        keep_doms,
        list(keep_homs.values()),
        list(keep_autos.values()),
        list(keep_comps.values()),
    )


# ---------------------------------------------------------------------------
# Elaboration
# ---------------------------------------------------------------------------


@dataclass
class Elaboration:
    semirings: Dict[str, Semiring]
    homs: Dict[str, Homomorphism]
    automata: Dict[str, Automaton]


def elaborate(doc: ModelDocument) -> Elaboration:
    """Build every declared automaton and evaluate every composition expression.

    Self-loops are never inserted implicitly; the document must spell out
    every transition it wants.
    """
    checker = _Checker(doc)
    checker.run()
    if checker.diagnostics:
        raise ModelError(checker.diagnostics)

    domains = checker.domains
    automata: Dict[str, Automaton] = {}
    for d in doc.automata:
        s = checker.automaton_semirings[d.name]
        transitions = []
        for t in d.transitions:
            scope = frozenset(t.ports)
            value = s.one if t.pref is None else literal_to_value(t.pref, s)
            constraints = []
            if not (t.predicate == ALWAYS and value == s.one):
                constraints.append(PredicateConstraint(scope, s, t.predicate, value))
            label = Problem(
                scope, s, constraints, {p: domains[p] for p in t.ports}
            )
            transitions.append(Transition(t.source, label, t.target))
        ports = frozenset().union(*(frozenset(t.ports) for t in d.transitions)) if d.transitions else frozenset()
        automata[d.name] = Automaton(
            frozenset(d.states), d.init, ports, s, frozenset(transitions)
        )

    exprs = {d.name: d.expr for d in doc.composes}

    def evaluate(name: str) -> Automaton:
        if name in automata:
            return automata[name]
        out = eval_expr(exprs[name])
        automata[name] = out
        return out

    def eval_expr(e: CExpr) -> Automaton:
        if isinstance(e, CRef):
            return evaluate(e.name)
        if isinstance(e, CHomApp):
            return lift_hom(checker.homs[e.hom], eval_expr(e.arg))
        parts = [eval_expr(a) for a in e.args]
        op = {"product": product, "join": join_compose, "lex": lex_compose}[e.op]
        return op(*parts)

    for d in doc.composes:
        evaluate(d.name)

    return Elaboration(dict(checker.semirings), dict(checker.homs), automata)
