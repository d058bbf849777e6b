"""Soft constraint automata toolkit.

Preference algebra (constraint semirings), soft constraint problems over
finite domains with an enumerating solver, automata labeled by such problems
with product/join/lexicographic composition, a trace engine with explicit
scheduling policies, a textual model format, and a worked patrolling-agent
case study.
"""

from .semiring import (
    BOOL,
    BOT,
    INFINITE_COST,
    PROB,
    TOP,
    WEIGHTED,
    BoolVal,
    CarrierViolation,
    Homomorphism,
    NotCancellative,
    Order,
    PairVal,
    ProbVal,
    Semiring,
    SetVal,
    WeightVal,
    bool_embedding,
    canonical_injection,
    identity_hom,
    join_semiring,
    join_to_product,
    lex_semiring,
    pair,
    prob,
    product_semiring,
    set_semiring,
    weight,
)
from .constraints import (
    ALWAYS,
    NEVER,
    And,
    Arith,
    Assignment,
    BoolConst,
    Compare,
    Conflict,
    DomainMismatch,
    DomainViolation,
    EMPTY_ASSIGNMENT,
    Lit,
    Member,
    Not,
    Or,
    PredicateConstraint,
    Problem,
    SemiringMismatch,
    Solution,
    TableConstraint,
    UnknownVariable,
    Var,
    apply_hom,
    compose,
    empty_problem,
    evaluate_predicate,
    expr_to_text,
    free_variables,
    reduce_to_table,
    solve,
    solve_bruteforce,
)
from .automata import (
    Automaton,
    Transition,
    is_constraint_automaton,
    join_compose,
    lex_compose,
    lift_hom,
    product,
    validate,
)
from .execution import (
    GreedyGlobal,
    Nondet,
    Pareto,
    Reachability,
    Step,
    Trace,
    accepts_prefix,
    bounded_language,
    bounded_language_equal,
    enabled,
    reachable,
    run,
)
from .patrol import (
    PatrolParams,
    PreferenceConfig,
    agent_state_count,
    build_agent,
    build_move,
    build_motion,
    patrol_document,
)
from .dsl import ModelDocument, ModelError, elaborate, parse, serialize

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
