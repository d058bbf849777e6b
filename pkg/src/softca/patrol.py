"""Builders for the bundled patrolling-agent case study.

A robot walks a path of K positions back and forth, may stray up to L cells
sideways, and runs on a battery of M units with a charger at path position
``cx``, ``cy`` cells to the right.  Crisp automata describe what moves exist;
preference automata rank them.  Everything composes into one agent:

* patrolling beats staying put beats backtracking (path axis),
* staying on the path beats deviating, but moving beats standing still
  (lateral axis, subordinate to the path axis),
* once the level read off the battery drops below ``ell``, a second
  preference regime takes over and steers toward the charger.

Port values carry the data: movement ports report the position being entered,
battery ports the new energy level.  All preference costs live in the
weighted semiring (smaller cost = more preferred).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, Optional, Sequence, Tuple

from .semiring import (
    BOOL,
    Order,
    PairVal,
    Semiring,
    WEIGHTED,
    WeightVal,
    bool_embedding,
    join_to_product,
    lex_semiring,
    product_semiring,
    weight,
)
from .constraints import (
    ALWAYS,
    And,
    Compare,
    Expr,
    Lit,
    PredicateConstraint,
    Problem,
    Var,
)
from .automata import Automaton, Transition, join_compose, lex_compose, lift_hom, product
from . import dsl

PORTS_PATH = ("forward", "backward", "stay_p", "turn")
PORTS_LATERAL = ("left", "right", "stay_d")
PORTS_BATTERY = ("charge", "discharge", "rest", "energy")


@dataclass(frozen=True)
class PatrolParams:
    """Scenario shape: path length, stray bound, battery size, charger site."""

    k: int = 5
    l: int = 1
    m: int = 4
    ell: int = 2
    cx: int = 2
    cy: int = 1
    initial_energy: Optional[int] = None  # defaults to a full battery

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("path needs at least two positions")
        if self.l < 1:
            raise ValueError("stray bound must be at least 1")
        if self.m < 1:
            raise ValueError("battery needs at least one unit")
        if not 1 <= self.ell <= self.m:
            raise ValueError("recharge threshold must lie in [1, M]")
        if not 1 <= self.cx <= self.k:
            raise ValueError("charger path position must lie in [1, K]")
        if not -self.l <= self.cy <= self.l:
            raise ValueError("charger offset must lie in [-L, L]")
        if self.initial_energy is not None and not 0 <= self.initial_energy <= self.m:
            raise ValueError("initial energy must lie in [0, M]")

    @property
    def start_energy(self) -> int:
        return self.m if self.initial_energy is None else self.initial_energy


def _w(x) -> WeightVal:
    return weight(x)


@dataclass(frozen=True)
class PreferenceConfig:
    """Weighted costs for both preference regimes (smaller = preferred).

    Construction enforces the orderings the model depends on; see
    ``__post_init__``.
    """

    turn_cost: Fraction = Fraction(1)
    progress_cost: Fraction = Fraction(1)
    stay_path_cost: Fraction = Fraction(3)
    backtrack_cost: Fraction = Fraction(5)
    converge_cost: Fraction = Fraction(1)
    stay_lateral_cost: Fraction = Fraction(2)
    diverge_cost: Fraction = Fraction(3)
    toward_cost: Fraction = Fraction(1)
    stay_return_cost: Fraction = Fraction(2)
    away_cost: Fraction = Fraction(3)

    def __post_init__(self):
        for name in (
            "turn_cost",
            "progress_cost",
            "stay_path_cost",
            "backtrack_cost",
            "converge_cost",
            "stay_lateral_cost",
            "diverge_cost",
            "toward_cost",
            "stay_return_cost",
            "away_cost",
        ):
            object.__setattr__(self, name, Fraction(getattr(self, name)))

        def below(a, b, what):
            if WEIGHTED.compare(_w(a), _w(b)) != Order.LESS:
                raise ValueError(f"cost ordering violated: {what}")

        below(self.backtrack_cost, self.stay_path_cost, "backtrack must rank below staying")
        below(self.stay_path_cost, self.turn_cost, "staying must rank below turning")
        below(self.stay_path_cost, self.progress_cost, "staying must rank below progressing")
        below(self.diverge_cost, self.stay_lateral_cost, "diverging must rank below holding")
        below(self.stay_lateral_cost, self.converge_cost, "holding must rank below converging")
        below(
            self.stay_lateral_cost + self.stay_lateral_cost,
            self.diverge_cost,
            "standing fully still must rank below diverging",
        )
        below(self.away_cost, self.stay_return_cost, "retreating must rank below waiting")
        below(self.stay_return_cost, self.toward_cost, "waiting must rank below approaching")


def port_domains(params: PatrolParams) -> Dict[str, frozenset]:
    k, l, m = params.k, params.l, params.m
    positions = frozenset(range(1, k + 1))
    lateral = frozenset(range(-l, l + 1))
    return {
        "forward": positions,
        "backward": positions,
        "stay_p": positions,
        "turn": positions,
        "left": lateral,
        "right": lateral,
        "stay_d": lateral,
        "charge": frozenset(range(1, m + 1)),
        "discharge": frozenset(range(0, m)),
        "rest": frozenset(range(0, m + 1)),
        "energy": frozenset(range(0, m + 1)),
    }


def _automaton(
    semiring: Semiring,
    states: Iterable[str],
    initial: str,
    specs: Sequence[Tuple[str, str, Tuple[str, ...], Expr, Optional[WeightVal]]],
    domains: Dict[str, frozenset],
) -> Automaton:
    """Assemble an automaton from (source, target, ports, predicate, value) rows.

    The trivially satisfied unit-preference constraint is dropped, matching
    how the model language elaborates transitions.
    """
    transitions = []
    ports = set()
    for source, target, fired, predicate, value in specs:
        scope = frozenset(fired)
        ports |= scope
        val = semiring.one if value is None else value
        constraints = []
        if not (predicate == ALWAYS and val == semiring.one):
            constraints.append(PredicateConstraint(scope, semiring, predicate, val))
        label = Problem(scope, semiring, constraints, {p: domains[p] for p in fired})
        transitions.append(Transition(source, label, target))
    return Automaton(
        frozenset(states), initial, frozenset(ports), semiring, frozenset(transitions)
    )


def _eq(port: str, value: int) -> Expr:
    return Compare("=", Var(port), Lit(value))


# ---------------------------------------------------------------------------
# Crisp environment automata
# ---------------------------------------------------------------------------


def build_path(params: PatrolParams) -> Automaton:
    """Positions 1..K; forward/backward step between neighbours, stay idles."""
    k = params.k
    dom = port_domains(params)
    specs = []
    for n in range(1, k):
        specs.append((f"p{n}", f"p{n + 1}", ("forward",), _eq("forward", n + 1), None))
        specs.append((f"p{n + 1}", f"p{n}", ("backward",), _eq("backward", n), None))
    for n in range(1, k + 1):
        specs.append((f"p{n}", f"p{n}", ("stay_p",), _eq("stay_p", n), None))
    return _automaton(BOOL, [f"p{n}" for n in range(1, k + 1)], "p1", specs, dom)


def build_turn_p(params: PatrolParams) -> Automaton:
    """Turning is possible only at the endpoints, and only while staying put."""
    k = params.k
    dom = port_domains(params)
    specs = [
        ("e", "e", ("stay_p", "turn"), And(_eq("stay_p", 1), _eq("turn", 1)), None),
        ("e", "e", ("stay_p", "turn"), And(_eq("stay_p", k), _eq("turn", k)), None),
        ("e", "e", ("stay_p",), ALWAYS, None),
        ("e", "e", (), ALWAYS, None),
    ]
    return _automaton(BOOL, ["e"], "e", specs, dom)


def build_stray(params: PatrolParams) -> Automaton:
    """Lateral offset -L..L; left/right step between neighbours, stay idles."""
    l = params.l
    dom = port_domains(params)

    def name(j: int) -> str:
        if j == 0:
            return "r0"
        return f"rp{j}" if j > 0 else f"rm{-j}"

    specs = []
    for j in range(-l, l):
        specs.append((name(j), name(j + 1), ("right",), _eq("right", j + 1), None))
        specs.append((name(j + 1), name(j), ("left",), _eq("left", j), None))
    for j in range(-l, l + 1):
        specs.append((name(j), name(j), ("stay_d",), _eq("stay_d", j), None))
    return _automaton(BOOL, [name(j) for j in range(-l, l + 1)], "r0", specs, dom)


def build_turn_d(params: PatrolParams, turn_on_path: bool = False) -> Automaton:
    """Turning requires holding the lateral offset (optionally: offset zero)."""
    dom = port_domains(params)
    guard = _eq("stay_d", 0) if turn_on_path else ALWAYS
    specs = [
        ("e", "e", ("stay_d", "turn"), guard, None),
        ("e", "e", ("stay_d",), ALWAYS, None),
        ("e", "e", (), ALWAYS, None),
    ]
    return _automaton(BOOL, ["e"], "e", specs, dom)


def build_battery(params: PatrolParams) -> Automaton:
    """Energy level 0..M; charge/discharge step by one, rest holds.

    Port values report the level being entered.  Starts full unless the
    parameters say otherwise; an empty battery simply has no discharging
    transition.
    """
    m = params.m
    dom = port_domains(params)
    specs = []
    for i in range(m):
        specs.append((f"t{i}", f"t{i + 1}", ("charge",), _eq("charge", i + 1), None))
        specs.append((f"t{i + 1}", f"t{i}", ("discharge",), _eq("discharge", i), None))
    for i in range(m + 1):
        specs.append((f"t{i}", f"t{i}", ("rest",), _eq("rest", i), None))
    return _automaton(
        BOOL,
        [f"t{i}" for i in range(m + 1)],
        f"t{params.start_energy}",
        specs,
        dom,
    )


def build_usage(params: PatrolParams) -> Automaton:
    """Every moving or turning step costs one battery unit.

    The empty self-loop lets battery-neutral steps (resting, charging)
    happen at all; without it nothing could fire while standing still.
    """
    dom = port_domains(params)
    consuming = [
        ("forward",),
        ("backward",),
        ("right",),
        ("left",),
        ("right", "forward"),
        ("right", "backward"),
        ("left", "forward"),
        ("left", "backward"),
        ("turn",),
    ]
    specs = [
        ("e", "e", tuple(sorted(ports + ("discharge",))), ALWAYS, None)
        for ports in consuming
    ]
    specs.append(("e", "e", (), ALWAYS, None))
    return _automaton(BOOL, ["e"], "e", specs, dom)


def build_charge(params: PatrolParams) -> Automaton:
    """Charging happens only while parked exactly at the charger."""
    dom = port_domains(params)
    at_charger = And(_eq("stay_p", params.cx), _eq("stay_d", params.cy))
    specs = [
        ("e", "e", ("stay_p", "stay_d", "charge"), at_charger, None),
        ("e", "e", ("stay_p", "stay_d"), ALWAYS, None),
        ("e", "e", (), ALWAYS, None),
    ]
    return _automaton(BOOL, ["e"], "e", specs, dom)


def build_energy(params: PatrolParams) -> Automaton:
    """Mirrors whichever battery port fires onto the shared ``energy`` port."""
    dom = port_domains(params)
    specs = [
        (
            "e",
            "e",
            ("energy", source),
            Compare("=", Var("energy"), Var(source)),
            None,
        )
        for source in ("charge", "discharge", "rest")
    ]
    specs.append(("e", "e", (), ALWAYS, None))
    return _automaton(BOOL, ["e"], "e", specs, dom)


# ---------------------------------------------------------------------------
# Preference automata
# ---------------------------------------------------------------------------


def build_patrol(params: PatrolParams, cfg: PreferenceConfig) -> Automaton:
    """Two-direction patrolling mood: progress is cheap, backtracking dear.

    The turn transitions fire ``stay_p`` together with ``turn``: the turning
    automaton only ever fires them jointly, and a transition that fired
    ``turn`` alone could never synchronize with it.
    """
    k = params.k
    dom = port_domains(params)
    specs = []
    for state, fwd_cost, bwd_cost in (
        ("qf", cfg.progress_cost, cfg.backtrack_cost),
        ("qb", cfg.backtrack_cost, cfg.progress_cost),
    ):
        specs.append((state, state, ("stay_p",), ALWAYS, _w(cfg.stay_path_cost)))
        specs.append((state, state, ("forward",), ALWAYS, _w(fwd_cost)))
        specs.append((state, state, ("backward",), ALWAYS, _w(bwd_cost)))
    specs.append(("qf", "qb", ("stay_p", "turn"), _eq("turn", k), _w(cfg.turn_cost)))
    specs.append(("qb", "qf", ("stay_p", "turn"), _eq("turn", 1), _w(cfg.turn_cost)))
    return _automaton(WEIGHTED, ["qf", "qb"], "qf", specs, dom)


def build_center(params: PatrolParams, cfg: PreferenceConfig) -> Automaton:
    """Prefer hugging the path: converging beats holding beats diverging."""
    dom = port_domains(params)
    specs = [
        ("st", "sr", ("right",), _eq("right", 1), _w(cfg.diverge_cost)),
        ("sr", "st", ("left",), _eq("left", 0), _w(cfg.converge_cost)),
        ("sl", "st", ("right",), _eq("right", 0), _w(cfg.converge_cost)),
        ("st", "sl", ("left",), _eq("left", -1), _w(cfg.diverge_cost)),
        ("sl", "sl", ("left",), ALWAYS, _w(cfg.diverge_cost)),
        ("sl", "sl", ("right",), ALWAYS, _w(cfg.converge_cost)),
        ("sr", "sr", ("left",), ALWAYS, _w(cfg.converge_cost)),
        ("sr", "sr", ("right",), ALWAYS, _w(cfg.diverge_cost)),
    ]
    for state in ("sl", "st", "sr"):
        specs.append((state, state, ("stay_d",), ALWAYS, _w(cfg.stay_lateral_cost)))
    return _automaton(WEIGHTED, ["sl", "st", "sr"], "st", specs, dom)


def build_drive(params: PatrolParams, cfg: PreferenceConfig) -> Automaton:
    """Penalize standing fully still (both stay ports at once); all else free."""
    dom = port_domains(params)
    specs = [
        ("e", "e", ("stay_p", "stay_d"), ALWAYS, _w(cfg.stay_lateral_cost)),
        ("e", "e", ("stay_p",), ALWAYS, None),
        ("e", "e", ("stay_d",), ALWAYS, None),
        ("e", "e", (), ALWAYS, None),
    ]
    return _automaton(WEIGHTED, ["e"], "e", specs, dom)


def _axis_tracker(
    params: PatrolParams,
    cfg: PreferenceConfig,
    states: Tuple[str, str, str],
    toward_port: str,
    away_port: str,
    hold_port: str,
    target: int,
    start: int,
) -> Automaton:
    """Three-state tracker of one axis relative to the charger coordinate.

    ``below/at/above`` states follow the sign of (coordinate - target) from
    the values fired on the axis ports; approaching the target is cheapest.
    """
    below, at, above = states
    dom = port_domains(params)
    toward = _w(cfg.toward_cost)
    away = _w(cfg.away_cost)
    hold = _w(cfg.stay_return_cost)
    lt = Compare("<", Var(toward_port), Lit(target))
    gt = Compare(">", Var(away_port), Lit(target))
    specs = [
        (below, below, (toward_port,), lt, toward),
        (below, at, (toward_port,), _eq(toward_port, target), toward),
        (below, below, (away_port,), ALWAYS, away),
        (at, above, (toward_port,), ALWAYS, away),
        (at, below, (away_port,), ALWAYS, away),
        (above, above, (away_port,), gt, toward),
        (above, at, (away_port,), _eq(away_port, target), toward),
        (above, above, (toward_port,), ALWAYS, away),
    ]
    for state in states:
        specs.append((state, state, (hold_port,), ALWAYS, hold))
    if start < target:
        initial = below
    elif start == target:
        initial = at
    else:
        initial = above
    return _automaton(WEIGHTED, list(states), initial, specs, dom)


def build_return_path_axis(params: PatrolParams, cfg: PreferenceConfig) -> Automaton:
    return _axis_tracker(
        params, cfg, ("ub", "ua", "uf"), "forward", "backward", "stay_p", params.cx, 1
    )


def build_return_lateral_axis(params: PatrolParams, cfg: PreferenceConfig) -> Automaton:
    return _axis_tracker(
        params, cfg, ("vl", "va", "vr"), "right", "left", "stay_d", params.cy, 0
    )


def build_return(params: PatrolParams, cfg: PreferenceConfig) -> Automaton:
    """Charger-seeking mood: the product of the two axis trackers (9 states)."""
    return product(
        build_return_path_axis(params, cfg), build_return_lateral_axis(params, cfg)
    )


def patrol_pair_semiring() -> Semiring:
    """Path-axis preferences dominate lateral ones: lex(weighted, weighted)."""
    return lex_semiring(WEIGHTED, WEIGHTED)


def select_semiring() -> Semiring:
    """Both regimes side by side: prod(weighted, lex(weighted, weighted))."""
    return product_semiring(WEIGHTED, patrol_pair_semiring())


def build_select(params: PatrolParams) -> Automaton:
    """Silence one regime per step, depending on the energy level just reached.

    When the battery port values stay at or above the threshold, the
    charger-seeking slot is multiplied by its zero (muting it); below the
    threshold the patrolling slot is muted instead.
    """
    s = select_semiring()
    ret, pat = s.left, s.right
    dom = port_domains(params)
    keep_patrolling = PairVal(ret.zero, pat.one)
    keep_returning = PairVal(ret.one, pat.zero)
    specs = [
        ("e", "e", ("energy",), Compare(">=", Var("energy"), Lit(params.ell)), keep_patrolling),
        ("e", "e", ("energy",), Compare("<", Var("energy"), Lit(params.ell)), keep_returning),
        ("e", "e", (), ALWAYS, None),
    ]
    return _automaton(s, ["e"], "e", specs, dom)


# ---------------------------------------------------------------------------
# Composition
# ---------------------------------------------------------------------------


def _lift_crisp(a: Automaton) -> Automaton:
    return lift_hom(bool_embedding(WEIGHTED), a)


def build_move(params: PatrolParams, cfg: PreferenceConfig) -> Automaton:
    """Path, turn points, and patrolling preferences in one weighted automaton."""
    return product(
        _lift_crisp(build_path(params)),
        _lift_crisp(build_turn_p(params)),
        build_patrol(params, cfg),
    )


def build_deviate(
    params: PatrolParams, cfg: PreferenceConfig, turn_on_path: bool = False
) -> Automaton:
    """Straying, its turn constraint, and the lateral preferences."""
    return product(
        _lift_crisp(build_stray(params)),
        _lift_crisp(build_turn_d(params, turn_on_path)),
        build_center(params, cfg),
        build_drive(params, cfg),
    )


def build_motion(
    params: PatrolParams, cfg: PreferenceConfig, turn_on_path: bool = False
) -> Automaton:
    """Patrolling dominates lateral concerns: lex composition of move and deviate."""
    return lex_compose(build_move(params, cfg), build_deviate(params, cfg, turn_on_path))


def build_support(params: PatrolParams, cfg: PreferenceConfig) -> Automaton:
    """Charger-seeking preferences plus all battery bookkeeping, over one semiring."""
    return product(
        build_return(params, cfg),
        _lift_crisp(build_battery(params)),
        _lift_crisp(build_usage(params)),
        _lift_crisp(build_charge(params)),
        _lift_crisp(build_energy(params)),
    )


def build_position(
    params: PatrolParams, cfg: PreferenceConfig, turn_on_path: bool = False
) -> Automaton:
    """Both preference regimes side by side (Pareto), neither silenced yet."""
    return join_compose(build_support(params, cfg), build_motion(params, cfg, turn_on_path))


def build_agent(
    params: PatrolParams, cfg: Optional[PreferenceConfig] = None, turn_on_path: bool = False
) -> Automaton:
    """The full agent: the selector gates which regime's preferences matter."""
    cfg = cfg or PreferenceConfig()
    position = build_position(params, cfg, turn_on_path)
    widened = lift_hom(join_to_product(WEIGHTED, patrol_pair_semiring()), position)
    return product(build_select(params), widened)


def agent_state_count(params: PatrolParams) -> int:
    """Closed form for the syntactic state count of the composed agent."""
    return 54 * params.k * (2 * params.l + 1) * (params.m + 1)


# ---------------------------------------------------------------------------
# Model-language document
# ---------------------------------------------------------------------------


def _decl_of(name: str, semiring_name: str, a: Automaton) -> dsl.AutomatonDecl:
    """Surface declaration of a base (single-constraint-per-label) automaton."""
    decls = []
    for t in a.transitions:
        constraints = list(t.label.constraints)
        if not constraints:
            predicate, pref = ALWAYS, None
        else:
            (c,) = constraints
            predicate = c.predicate
            pref = None if c.value == a.semiring.one else dsl.value_to_literal(c.value)
        decls.append(
            dsl.TransitionDecl(
                t.source,
                t.target,
                tuple(sorted(t.label.variables)),
                predicate,
                pref,
                dsl.DUMMY_SPAN,
            )
        )
    states = sorted(a.states)
    return dsl.make_automaton_decl(name, semiring_name, states, a.initial, decls)


def patrol_document(
    params: PatrolParams,
    cfg: Optional[PreferenceConfig] = None,
    turn_on_path: bool = False,
) -> dsl.ModelDocument:
    """The whole scenario as a model document; elaborating it rebuilds the agent."""
    cfg = cfg or PreferenceConfig()
    span = dsl.DUMMY_SPAN
    w = dsl.SRef("W", span)
    ep = dsl.SRef("EP", span)
    semirings = [
        dsl.SemiringDecl("B", dsl.SBase("bool", span), span),
        dsl.SemiringDecl("W", dsl.SBase("weighted", span), span),
        dsl.SemiringDecl("EP", dsl.SPair("lex", w, w, span), span),
        dsl.SemiringDecl("ES", dsl.SPair("prod", w, ep, span), span),
    ]
    domains = [
        dsl.DomainDecl(port, tuple(sorted(values)), span)
        for port, values in port_domains(params).items()
    ]
    homs = [
        dsl.HomDecl("embed", dsl.HomExpr("embed_bool", (w,), None, span), span),
        dsl.HomDecl("widen", dsl.HomExpr("join_to_prod", (w, ep), None, span), span),
    ]
    automata = [
        _decl_of("Path", "B", build_path(params)),
        _decl_of("TurnP", "B", build_turn_p(params)),
        _decl_of("Stray", "B", build_stray(params)),
        _decl_of("TurnD", "B", build_turn_d(params, turn_on_path)),
        _decl_of("Battery", "B", build_battery(params)),
        _decl_of("Usage", "B", build_usage(params)),
        _decl_of("Charge", "B", build_charge(params)),
        _decl_of("Energy", "B", build_energy(params)),
        _decl_of("Patrol", "W", build_patrol(params, cfg)),
        _decl_of("Center", "W", build_center(params, cfg)),
        _decl_of("Drive", "W", build_drive(params, cfg)),
        _decl_of("ReturnP", "W", build_return_path_axis(params, cfg)),
        _decl_of("ReturnD", "W", build_return_lateral_axis(params, cfg)),
        _decl_of("Select", "ES", build_select(params)),
    ]

    def ref(name: str) -> dsl.CExpr:
        return dsl.CRef(name, span)

    def embed(name: str) -> dsl.CExpr:
        return dsl.CHomApp("embed", ref(name), span)

    def call(op: str, *args: dsl.CExpr) -> dsl.CExpr:
        return dsl.CCall(op, tuple(args), span)

    composes = [
        dsl.ComposeDecl("Move", call("product", embed("Path"), embed("TurnP"), ref("Patrol")), span),
        dsl.ComposeDecl(
            "Deviate",
            call("product", embed("Stray"), embed("TurnD"), ref("Center"), ref("Drive")),
            span,
        ),
        dsl.ComposeDecl("Motion", call("lex", ref("Move"), ref("Deviate")), span),
        dsl.ComposeDecl("Return", call("product", ref("ReturnP"), ref("ReturnD")), span),
        dsl.ComposeDecl(
            "Support",
            call(
                "product",
                ref("Return"),
                embed("Battery"),
                embed("Usage"),
                embed("Charge"),
                embed("Energy"),
            ),
            span,
        ),
        dsl.ComposeDecl("Position", call("join", ref("Support"), ref("Motion")), span),
        dsl.ComposeDecl(
            "Agent",
            call("product", ref("Select"), dsl.CHomApp("widen", ref("Position"), span)),
            span,
        ),
    ]
    return dsl.make_document(semirings, domains, homs, automata, composes)
