"""Recursive quantitative evaluation of strategy-logic formulas.

The evaluator implements the six semantic clauses: atoms read the weight
function; the bounded existential quantifier maximises over strategies
enumerated from a declared guard pool; bindings rebind agents to variable
or registered strategies; function applications evaluate pointwise; next
looks one step into the unique outcome play; until reduces the supremum
over an infinite play to a maximum over one lasso unrolling.

Plays are unrolled by stepping a joint configuration: the current state
plus, for every recall strategy in the assignment, the subset states of
all its guard automata.  The play is eventually periodic exactly when a
configuration repeats; state repetition alone would not be sound for
recall strategies.  Subformulas of temporal operators are evaluated at
play states with the same assignment and a fresh history, which is the
state-based reading of the semantics clauses.

A value of exactly 1 is the top of the satisfaction order for any formula
whose functions stay inside [-1, 1]; for such formulas max-loops stop
early once 1 is reached, and F-shaped untils scan the lasso backwards so
convergence properties are cheap on long transients.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional, Sequence, Union

from . import formulas as fm
from .errors import (
    KindMismatchError,
    NatcheckError,
    NotASentenceError,
    ParseError,
    UnresolvedStrategyNameError,
)
from .guards import WeEvaluator
from .strategies import (
    MEMORYLESS,
    RECALL,
    NatStrategy,
    StrategyRun,
    enumerate_strategies,
    promote_to_recall,
)
from .values import MINUS_ONE, ONE, RANGE_PRESERVING, format_rational
from .wcgs import WCGS

IR = "ir"
IR_RECALL = "iR"
SEMANTICS = (IR, IR_RECALL)


@dataclass
class Lasso:
    """Finite presentation prefix . cycle^omega of an outcome play.

    ``configs`` holds the joint configuration at every stored position;
    the configuration at the cycle start equals the one reached after the
    cycle, which is what guarantees genuine periodicity under recall.
    """

    prefix: list
    cycle: list
    configs: list

    def states(self) -> list:
        return self.prefix + self.cycle

    def state_at(self, i: int) -> str:
        if i < len(self.prefix):
            return self.prefix[i]
        j = (i - len(self.prefix)) % len(self.cycle)
        return self.cycle[j]

    def expand(self, n: int) -> list:
        return [self.state_at(i) for i in range(n)]


@dataclass
class CheckReport:
    value: Fraction
    predicate: str
    holds: bool
    semantics: str
    formula: str
    state: str
    pool: str
    flags: list = field(default_factory=list)
    witness: Optional[str] = None
    states_visited: int = 0
    strategies_enumerated: int = 0
    wall_time_s: float = 0.0
    schema: str = "natcheck.report/1"

    def to_dict(self) -> dict:
        # wall time stays off the wire so identical inputs give
        # byte-identical reports
        return {
            "schema": self.schema,
            "value": format_rational(self.value),
            "predicate": self.predicate,
            "holds": self.holds,
            "semantics": self.semantics,
            "formula": self.formula,
            "state": self.state,
            "pool": self.pool,
            "flags": list(self.flags),
            "witness": self.witness,
            "stats": {
                "states_visited": self.states_visited,
                "strategies_enumerated": self.strategies_enumerated,
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


# -- predicates ---------------------------------------------------------------


@dataclass(frozen=True)
class Predicate:
    """Membership test for satisfaction values: =, >=, <=, >, <, in [a,b]."""

    text: str
    kind: str
    lo: Optional[Fraction] = None
    hi: Optional[Fraction] = None

    def contains(self, v: Fraction) -> bool:
        if self.kind == "=":
            return v == self.lo
        if self.kind == ">=":
            return v >= self.lo
        if self.kind == "<=":
            return v <= self.lo
        if self.kind == ">":
            return v > self.lo
        if self.kind == "<":
            return v < self.lo
        return self.lo <= v <= self.hi


def parse_predicate(text: str) -> Predicate:
    from .values import parse_rational

    stripped = text.strip()
    if stripped.startswith("in"):
        body = stripped[2:].strip()
        if not (body.startswith("[") and body.endswith("]")):
            raise ParseError(f"interval predicate must look like 'in [a, b]', got {text!r}")
        parts = body[1:-1].split(",")
        if len(parts) != 2:
            raise ParseError(f"interval predicate needs two bounds, got {text!r}")
        return Predicate(stripped, "in", parse_rational(parts[0].strip()), parse_rational(parts[1].strip()))
    for op in (">=", "<=", "=", ">", "<"):
        if stripped.startswith(op):
            return Predicate(stripped, op, parse_rational(stripped[len(op):].strip()))
    raise ParseError(f"cannot parse predicate {text!r}")


# -- assignment ----------------------------------------------------------------


def default_assignment(m: WCGS, kind: str) -> dict:
    """A total assignment mapping every agent to a constant strategy.

    Sentences do not depend on the incoming assignment, but every
    evaluation needs a total one to unroll plays.
    """
    from .guards import Top
    from .strategies import TOP_STAR

    chi = {}
    for a in m.agents:
        act = next(
            act for act in m.actions
            if all(act in m.legal_actions(a, q) for q in m.states)
        )
        if kind == MEMORYLESS:
            chi[a] = NatStrategy(agent=a, kind=MEMORYLESS, pairs=((Top(), act),))
        else:
            chi[a] = NatStrategy(agent=a, kind=RECALL, pairs=((TOP_STAR, act),))
    return chi


class Evaluator:
    """Evaluation context for one model, semantics and guard pool."""

    def __init__(
        self,
        m: WCGS,
        semantics: str = IR,
        pool: Optional[Sequence] = None,
        registry: Optional[Mapping[str, NatStrategy]] = None,
        promote: bool = False,
        pool_name: str = "<none>",
    ):
        if semantics not in SEMANTICS:
            raise NatcheckError(f"semantics must be one of {SEMANTICS}, got {semantics!r}")
        self.m = m
        self.semantics = semantics
        self.kind = MEMORYLESS if semantics == IR else RECALL
        self.pool = list(pool) if pool else []
        self.pool_name = pool_name
        self.registry = dict(registry or {})
        self.promote = promote
        self.we = WeEvaluator(m)
        self.flags: set = set()
        self.states_visited: set = set()
        self.strategies_enumerated = 0
        self._lasso_cache: dict = {}
        self._next_cache: dict = {}
        self._bounded_cache: dict = {}
        self._state_formula_cache: dict = {}
        self._sf_cache: dict = {}
        self._promote_cache: dict = {}

    # -- strategy plumbing ----------------------------------------------

    def _coerce(self, s: NatStrategy, context: str) -> NatStrategy:
        if self.kind == RECALL and s.kind == MEMORYLESS:
            if self.promote:
                promoted = self._promote_cache.get(s)
                if promoted is None:
                    promoted = promote_to_recall(s)
                    self._promote_cache[s] = promoted
                return promoted
            raise KindMismatchError(
                f"{context}: memoryless strategy under recall semantics "
                f"(pass promote=True to embed it)"
            )
        if self.kind == MEMORYLESS and s.kind == RECALL:
            raise KindMismatchError(f"{context}: recall strategy under memoryless semantics")
        return s

    def _profile_key(self, chi: Mapping) -> tuple:
        # structural keys: enumerated strategies are short-lived objects,
        # so identity-based keys could be reused after collection
        return tuple(chi[a] for a in self.m.agents)

    # -- outcome plays ----------------------------------------------------

    def outcome_lasso(self, chi: Mapping, q: str) -> Lasso:
        key = (self._profile_key(chi), q)
        hit = self._lasso_cache.get(key)
        if hit is not None:
            return hit
        runs = {a: StrategyRun(self.m, chi[a], self.we) for a in self.m.agents}
        states: list = []
        configs: list = []
        seen: dict = {}
        state = q
        while True:
            for a in self.m.agents:
                runs[a].feed(state)
            config = (state, tuple(runs[a].config() for a in self.m.agents))
            if config in seen:
                start = seen[config]
                lasso = Lasso(prefix=states[:start], cycle=states[start:], configs=configs)
                self._lasso_cache[key] = lasso
                return lasso
            seen[config] = len(states)
            states.append(state)
            configs.append(config)
            self.states_visited.add(state)
            profile = tuple(runs[a].action() for a in self.m.agents)
            state = self.m.successor(state, profile)

    def step_once(self, chi: Mapping, q: str) -> str:
        key = (self._profile_key(chi), q)
        hit = self._next_cache.get(key)
        if hit is not None:
            return hit
        runs = {a: StrategyRun(self.m, chi[a], self.we) for a in self.m.agents}
        for a in self.m.agents:
            runs[a].feed(q)
        profile = tuple(runs[a].action() for a in self.m.agents)
        nxt = self.m.successor(q, profile)
        self._next_cache[key] = nxt
        self.states_visited.add(q)
        self.states_visited.add(nxt)
        return nxt

    # -- range analysis ---------------------------------------------------

    def is_bounded(self, node) -> bool:
        """True when the formula's value provably stays within [-1, 1];
        justifies stopping a maximisation at the value 1."""
        hit = self._bounded_cache.get(node)
        if hit is not None:
            return hit
        if isinstance(node, fm.Atom):
            out = True
        elif isinstance(node, fm.Lit):
            out = MINUS_ONE <= node.value <= ONE
        elif isinstance(node, fm.Fun):
            if node.name in ("eq", "lt", "gt", "geq", "pref"):
                out = True
            else:
                out = node.name in RANGE_PRESERVING and all(self.is_bounded(a) for a in node.args)
        elif isinstance(node, fm.Exists):
            out = self.is_bounded(node.body)
        elif isinstance(node, fm.Bind):
            out = self.is_bounded(node.body)
        elif isinstance(node, fm.Next):
            out = self.is_bounded(node.body)
        elif isinstance(node, fm.Until):
            out = self.is_bounded(node.left) and self.is_bounded(node.right)
        else:
            out = False
        self._bounded_cache[node] = out
        return out

    def _is_state_formula(self, node) -> bool:
        """Formulas built only from atoms, literals and functions; their
        value depends on the state alone, so it can be memoised globally."""
        hit = self._sf_cache.get(node)
        if hit is not None:
            return hit
        if isinstance(node, (fm.Atom, fm.Lit)):
            out = True
        elif isinstance(node, fm.Fun):
            out = all(self._is_state_formula(a) for a in node.args)
        else:
            out = False
        self._sf_cache[node] = out
        return out

    # -- the semantics clauses --------------------------------------------

    def eval(self, chi: Mapping, q: str, node) -> Fraction:
        self.states_visited.add(q)
        if isinstance(node, fm.Atom):
            return self.m.weight(q, node.prop)
        if isinstance(node, fm.Lit):
            return node.value
        if isinstance(node, fm.Fun):
            if self._is_state_formula(node):
                key = (q, node)
                hit = self._state_formula_cache.get(key)
                if hit is not None:
                    return hit
                value = self.m.lib.apply(node.name, [self.eval(chi, q, a) for a in node.args])
                self._state_formula_cache[key] = value
                return value
            return self.m.lib.apply(node.name, [self.eval(chi, q, a) for a in node.args])
        if isinstance(node, fm.Exists):
            return self._eval_exists(chi, q, node)
        if isinstance(node, fm.Bind):
            return self._eval_bind(chi, q, node)
        if isinstance(node, fm.Next):
            nxt = self.step_once(chi, q)
            return self.eval(chi, nxt, node.body)
        if isinstance(node, fm.Until):
            return self._eval_until(chi, q, node)
        raise TypeError(f"not a formula node: {node!r}")

    def _eval_exists(self, chi: Mapping, q: str, node: fm.Exists) -> Fraction:
        # candidates are independent and combined by max, which is
        # order-free over exact rationals, so they may be farmed out to
        # workers without affecting the reported value
        best = None
        best_strategy = None
        early = self.is_bounded(node.body)
        for s in enumerate_strategies(
            self.m, node.agent, node.bound, self.pool, kind=self.kind, we=self.we
        ):
            self.strategies_enumerated += 1
            chi2 = dict(chi)
            chi2[node.var] = s
            v = self.eval(chi2, q, node.body)
            if best is None or v > best:
                best, best_strategy = v, s
            if early and best == ONE:
                break
        if best is None:
            self.flags.add("vacuous-quantifier")
            return MINUS_ONE
        self.last_witness = best_strategy
        return best

    def _eval_bind(self, chi: Mapping, q: str, node: fm.Bind) -> Fraction:
        if node.var is not None:
            s = chi.get(node.var)
            if s is None:
                raise UnresolvedStrategyNameError(node.var)
        else:
            s = self.registry.get(node.named)
            if s is None:
                raise UnresolvedStrategyNameError(node.named)
            s = self._coerce(s, f"bind({node.agent}, @{node.named})")
        if s.agent != node.agent:
            raise KindMismatchError(
                f"strategy for agent {s.agent!r} bound to agent {node.agent!r}"
            )
        chi2 = dict(chi)
        chi2[node.agent] = s
        return self.eval(chi2, q, node.body)

    def _eval_until(self, chi: Mapping, q: str, node: fm.Until) -> Fraction:
        lasso = self.outcome_lasso(chi, q)
        positions = lasso.states()
        n = len(positions)
        left_is_top = node.left == fm.TOP or (
            isinstance(node.left, fm.Lit) and node.left.value == ONE
        )
        early = self.is_bounded(node.right)
        if left_is_top:
            # F-shape: the prefix minimum is constantly 1, terms reduce to
            # the right value; scan backwards so converged tails hit the
            # early exit first.
            best = None
            for i in range(n - 1, -1, -1):
                v = self.eval(chi, positions[i], node.right)
                if best is None or v > best:
                    best = v
                if early and best == ONE:
                    return best
            return best
        best = None
        prefix_min = None  # min over left values strictly before i
        for i, state in enumerate(positions):
            right_v = self.eval(chi, state, node.right)
            term = right_v if prefix_min is None else min(right_v, prefix_min)
            if best is None or term > best:
                best = term
            if early and best == ONE:
                return best
            left_v = self.eval(chi, state, node.left)
            prefix_min = left_v if prefix_min is None else min(prefix_min, left_v)
        return best


def outcome_lasso(m: WCGS, chi: Mapping, q: str, semantics: Optional[str] = None) -> Lasso:
    """Standalone lasso computation for a total assignment."""
    if semantics is None:
        semantics = IR if all(s.kind == MEMORYLESS for s in chi.values()) else IR_RECALL
    ev = Evaluator(m, semantics=semantics)
    return ev.outcome_lasso(chi, q)


def eval_formula(
    m: WCGS,
    semantics: str,
    chi: Optional[Mapping],
    q: str,
    formula,
    pool: Optional[Sequence] = None,
    registry: Optional[Mapping[str, NatStrategy]] = None,
    promote: bool = False,
) -> Fraction:
    """One-shot evaluation of a formula at a state."""
    ev = Evaluator(m, semantics=semantics, pool=pool, registry=registry, promote=promote)
    if chi is None:
        chi = default_assignment(m, ev.kind)
    return ev.eval(chi, q, formula)


def check(
    m: WCGS,
    formula,
    at: str = "init",
    predicate: Union[str, Predicate] = "=1",
    semantics: str = IR,
    pool: Optional[Sequence] = None,
    registry: Optional[Mapping[str, NatStrategy]] = None,
    promote: bool = False,
    pool_name: Optional[str] = None,
) -> CheckReport:
    """Model-checking entry point: sentence value vs. predicate membership.

    ``at`` is a state name or "init"; the init mode takes the minimum over
    all initial states.
    """
    if isinstance(formula, str):
        formula = fm.parse_formula(formula, lib=m.lib)
    free = fm.free_names(formula, m.agents)
    if free:
        raise NotASentenceError(free)
    if isinstance(predicate, str):
        predicate = parse_predicate(predicate)
    ev = Evaluator(
        m, semantics=semantics, pool=pool, registry=registry, promote=promote,
        pool_name=pool_name or ("<none>" if not pool else f"{len(pool)} guards"),
    )
    chi = default_assignment(m, ev.kind)
    t0 = time.perf_counter()
    if at == "init":
        value = min(ev.eval(chi, q, formula) for q in m.initial)
        where = "init"
    else:
        if at not in m.states:
            raise NatcheckError(f"unknown state {at!r}")
        value = ev.eval(chi, at, formula)
        where = at
    elapsed = time.perf_counter() - t0
    witness = None
    if isinstance(formula, fm.Exists) and getattr(ev, "last_witness", None) is not None:
        witness = ev.last_witness.describe()
    if not (MINUS_ONE <= value <= ONE):
        raise NatcheckError(
            f"top-level satisfaction value {value} escapes [-1, 1]; "
            f"the formula applies range-escaping functions at the top level"
        )
    return CheckReport(
        value=value,
        predicate=predicate.text,
        holds=predicate.contains(value),
        semantics=semantics,
        formula=str(formula),
        state=where,
        pool=ev.pool_name,
        flags=sorted(ev.flags),
        witness=witness,
        states_visited=len(ev.states_visited),
        strategies_enumerated=ev.strategies_enumerated,
        wall_time_s=elapsed,
    )
