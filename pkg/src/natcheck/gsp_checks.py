"""Named verification checks for auction games.

Each check pairs a claimed property with an executable test over a built
game and returns a structured outcome with the underlying satisfaction
values and, where relevant, witnesses (a non-converging cycle trace, a
deviating strategy, a violating board).

Check names:

    lefe-implies-ne        envy-free boards are one-shot stable
    vcg-implies-lefe       truthful-reference boards are envy-free
    revenue-bound          envy-free boards collect at least reference revenue
    bb-fixed-point-bids    at reference boards, matched bids are the stable bids
    bb-converges-m2        balanced bidding settles at the reference outcome
    bb-diverges-m3         shipped instance where balanced bidding cycles
    rbb-converges          restricted balanced bidding settles
    kbb-price-bound        knowledge-capped bids never raise prices
    bbr-converges          the recall variant settles
    bbr-one-step-utility   when the recall variant deviates from the
                           restricted rule, its next-round utility is higher
"""

from __future__ import annotations

import dataclasses
import itertools
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Optional

from . import formulas as fm
from .checker import IR, IR_RECALL, Evaluator, default_assignment
from .errors import UnknownCheckError
from .gsp import (
    GspGame,
    SimTrace,
    build_gsp,
    build_profile,
    constant_strategy,
    equilibrium_bid,
    rank,
    simulate,
)
from .gsp_formulas import (
    build_convergence_formula,
    build_lefe_formula,
    build_ne_formula,
    build_price_bound_formula,
    build_revenue_formula,
    build_vcg_formula,
    util_formula,
)
from .guards import Atom, Know, Top
from .strategies import MEMORYLESS, RECALL
from .values import ZERO, format_rational

ONE_F = Fraction(1)


@dataclass
class CheckOutcome:
    name: str
    passed: bool
    details: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)
    witness_trace: Optional[SimTrace] = None
    wall_time_s: float = 0.0

    def to_dict(self) -> dict:
        # wall time is reported on the object only, keeping the JSON
        # byte-identical across runs
        out = {
            "schema": "natcheck.check/1",
            "check": self.name,
            "passed": self.passed,
            "details": self.details,
            "violations": self.violations[:50],
        }
        if self.witness_trace is not None:
            out["witness_rows"] = self.witness_trace.rows()
        return out


def _register(game: GspGame, label: str, profile: Mapping) -> tuple:
    names = {a: f"{label}_{a}" for a in game.spec.agents}
    registry = {names[a]: profile[a] for a in game.spec.agents}
    return names, registry


def default_deviation_pool(game: GspGame) -> list:
    """Small shared pool: the catch-all plus one own-knowledge guard per
    agent ("I currently hold the top slot")."""
    from .gsp import alloc_prop

    pool: list = [Top()]
    for a in game.spec.agents:
        pool.append(Know(a, Atom(alloc_prop(a, 1))))
    return pool


def rational_constant_profiles(game: GspGame):
    """All constant-bid profiles where nobody bids above her valuation.

    Boards produced by bids above valuation can be envy-free without being
    stable (a bidder paying more than her value gains by dropping out), so
    the stability claim is checked over individually rational constants.
    """
    spec = game.spec
    per_agent = []
    for i, a in enumerate(spec.agents):
        vmax = max(spec.valuations[a])
        per_agent.append([b for b in game.grid if b <= vmax])
    for combo in itertools.product(*per_agent):
        yield {
            a: constant_strategy(game, a, b)
            for a, b in zip(spec.agents, combo)
        }, combo


def _profiles_under_test(game: GspGame, include_bb: bool = False):
    yield "rbb", build_profile(game, "rbb")
    if include_bb:
        yield "bb", build_profile(game, "bb")
    for i, (profile, combo) in enumerate(rational_constant_profiles(game)):
        label = "const_" + "_".join(format_rational(b) for b in combo)
        yield label, profile


def check_lefe_implies_ne(game: GspGame, k: int = 2, pool: Optional[list] = None) -> CheckOutcome:
    """Wherever a profile produces an envy-free board, no bounded unilateral
    deviation improves next-round utility."""
    t0 = time.perf_counter()
    pool = pool if pool is not None else default_deviation_pool(game)
    violations = []
    states_checked = 0
    lefe_states = 0
    reachable = game.reachable()
    for label, profile in _profiles_under_test(game):
        names, registry = _register(game, label, profile)
        ev = Evaluator(game.model, semantics=IR, pool=pool, registry=registry)
        chi = default_assignment(game.model, MEMORYLESS)
        lefe = build_lefe_formula(game, names)
        ne = build_ne_formula(game, names, k)
        for q in reachable:
            states_checked += 1
            if ev.eval(chi, q, lefe) != ONE_F:
                continue
            lefe_states += 1
            ne_value = ev.eval(chi, q, ne)
            if ne_value != ONE_F:
                violations.append({"profile": label, "state": q, "ne_value": format_rational(ne_value)})
    return CheckOutcome(
        name="lefe-implies-ne",
        passed=not violations,
        details={
            "profiles": "rbb + individually rational constants",
            "states_checked": states_checked,
            "envy_free_cases": lefe_states,
            "deviation_budget": k,
            "pool_size": len(pool),
        },
        violations=violations,
        wall_time_s=time.perf_counter() - t0,
    )


def check_vcg_implies_lefe(game: GspGame) -> CheckOutcome:
    """Wherever a profile produces the truthful reference board, that board
    is envy-free."""
    t0 = time.perf_counter()
    violations = []
    vcg_states = 0
    for label, profile in _profiles_under_test(game, include_bb=True):
        names, registry = _register(game, label, profile)
        ev = Evaluator(game.model, semantics=IR, registry=registry)
        chi = default_assignment(game.model, MEMORYLESS)
        vcg = build_vcg_formula(game, names)
        lefe = build_lefe_formula(game, names)
        for q in game.reachable():
            if ev.eval(chi, q, vcg) != ONE_F:
                continue
            vcg_states += 1
            lefe_value = ev.eval(chi, q, lefe)
            if lefe_value != ONE_F:
                violations.append({"profile": label, "state": q, "lefe_value": format_rational(lefe_value)})
    return CheckOutcome(
        name="vcg-implies-lefe",
        passed=not violations,
        details={"reference_cases": vcg_states},
        violations=violations,
        wall_time_s=time.perf_counter() - t0,
    )


def check_revenue_bound(game: GspGame) -> CheckOutcome:
    """Envy-free boards collect at least the truthful reference revenue
    (prices read in the produced state)."""
    t0 = time.perf_counter()
    violations = []
    for label, profile in _profiles_under_test(game, include_bb=True):
        names, registry = _register(game, label, profile)
        ev = Evaluator(game.model, semantics=IR, registry=registry)
        chi = default_assignment(game.model, MEMORYLESS)
        revenue = build_revenue_formula(game, names)
        for q in game.reachable():
            v = ev.eval(chi, q, revenue)
            if v != ONE_F:
                violations.append({"profile": label, "state": q, "value": format_rational(v)})
    return CheckOutcome(
        name="revenue-bound",
        passed=not violations,
        details={"profiles": "bb, rbb + individually rational constants"},
        violations=violations,
        wall_time_s=time.perf_counter() - t0,
    )


def _matched_bid(game: GspGame, strategy, q: str, we) -> Fraction:
    from .strategies import StrategyRun

    run = StrategyRun(game.model, strategy, we)
    run.feed(q)
    return Fraction(run.action())


def check_fixed_point_bids(game: GspGame) -> CheckOutcome:
    """At every reachable state whose successor under the profile is the
    truthful reference board, matched bids equal the stable bids: position
    x > 1 bids exactly its stable bid and the top bidder exceeds the
    second stable bid.  Checked for all three bidding rules."""
    t0 = time.perf_counter()
    spec = game.spec
    violations = []
    cases = 0
    for label, semantics in (("bb", IR), ("rbb", IR), ("bbr", IR_RECALL)):
        profile = build_profile(game, label)
        names, registry = _register(game, label, profile)
        ev = Evaluator(game.model, semantics=semantics, registry=registry)
        kind = MEMORYLESS if semantics == IR else RECALL
        chi = default_assignment(game.model, kind)
        vcg = build_vcg_formula(game, names)
        for q in game.reachable():
            if ev.eval(chi, q, vcg) != ONE_F:
                continue
            cases += 1
            st = game.state(q)
            ranked = rank(spec, st.vals)
            for x in range(1, spec.n + 1):
                agent = ranked[x - 1]
                bid = _matched_bid(game, profile[agent], q, ev.we)
                if x == 1:
                    floor = equilibrium_bid(spec, st.vals, 2)
                    if not bid > floor:
                        violations.append({
                            "profile": label, "state": q, "position": x,
                            "bid": format_rational(bid), "needs": f"> {format_rational(floor)}",
                        })
                else:
                    expected = equilibrium_bid(spec, st.vals, x)
                    if bid != expected:
                        violations.append({
                            "profile": label, "state": q, "position": x,
                            "bid": format_rational(bid), "needs": format_rational(expected),
                        })
    return CheckOutcome(
        name="bb-fixed-point-bids",
        passed=not violations,
        details={"reference_cases": cases},
        violations=violations,
        wall_time_s=time.perf_counter() - t0,
    )


def _convergence_value(game: GspGame, label: str, semantics: str):
    profile = build_profile(game, label)
    names, registry = _register(game, label, profile)
    ev = Evaluator(game.model, semantics=semantics, registry=registry)
    kind = MEMORYLESS if semantics == IR else RECALL
    chi = default_assignment(game.model, kind)
    inner = build_vcg_formula(game, names)
    formula = build_convergence_formula(game, names, inner)
    values = {}
    for q in game.model.initial:
        values[q] = ev.eval(chi, q, formula)
    return values, profile


def check_bb_converges(game: GspGame) -> CheckOutcome:
    t0 = time.perf_counter()
    values, _ = _convergence_value(game, "bb", IR)
    bad = {q: format_rational(v) for q, v in values.items() if v != ONE_F}
    return CheckOutcome(
        name="bb-converges-m2",
        passed=not bad,
        details={"initial_values": {q: format_rational(v) for q, v in values.items()}},
        violations=[{"state": q, "value": v} for q, v in bad.items()],
        wall_time_s=time.perf_counter() - t0,
    )


def check_bb_diverges(game: GspGame) -> CheckOutcome:
    """Passes when balanced bidding does NOT settle: the eventually-always
    value differs from 1 at some initial state; the witness is the cycling
    trace."""
    t0 = time.perf_counter()
    values, profile = _convergence_value(game, "bb", IR)
    diverging = [q for q, v in values.items() if v != ONE_F]
    witness = None
    if diverging:
        trace = simulate(game, profile, rounds=40, start=diverging[0])
        witness = trace
    return CheckOutcome(
        name="bb-diverges-m3",
        passed=bool(diverging),
        details={
            "initial_values": {q: format_rational(v) for q, v in values.items()},
            "cycle_start": witness.cycle_start if witness else None,
            "cycle_length": witness.cycle_length if witness else None,
        },
        witness_trace=witness,
        wall_time_s=time.perf_counter() - t0,
    )


def check_rbb_converges(game: GspGame) -> CheckOutcome:
    t0 = time.perf_counter()
    values, _ = _convergence_value(game, "rbb", IR)
    bad = {q: format_rational(v) for q, v in values.items() if v != ONE_F}
    return CheckOutcome(
        name="rbb-converges",
        passed=not bad,
        details={"initial_values": {q: format_rational(v) for q, v in values.items()}},
        violations=[{"state": q, "value": v} for q, v in bad.items()],
        wall_time_s=time.perf_counter() - t0,
    )


def check_bbr_converges(game: GspGame) -> CheckOutcome:
    t0 = time.perf_counter()
    values, _ = _convergence_value(game, "bbr", IR_RECALL)
    bad = {q: format_rational(v) for q, v in values.items() if v != ONE_F}
    return CheckOutcome(
        name="bbr-converges",
        passed=not bad,
        details={"initial_values": {q: format_rational(v) for q, v in values.items()}},
        violations=[{"state": q, "value": v} for q, v in bad.items()],
        wall_time_s=time.perf_counter() - t0,
    )


def check_kbb_price_bound(game: GspGame) -> CheckOutcome:
    """Two halves.  With everyone's valuations public, next-state prices
    under knowledge-capped bidding never exceed those under the restricted
    rule, at any reachable state.  With default observation the knowledge
    guards either cannot fire or select the restricted bid, so both rules
    trace identically from every initial state."""
    t0 = time.perf_counter()
    spec = game.spec
    public_spec = dataclasses.replace(spec, public_valuations=frozenset(spec.agents))
    public_game = build_gsp(public_spec)

    violations = []
    kbb_pub = build_profile(public_game, "kbb")
    rbb_pub = build_profile(public_game, "rbb")
    names_k, reg_k = _register(public_game, "kbb", kbb_pub)
    names_r, reg_r = _register(public_game, "rbb", rbb_pub)
    registry = {**reg_k, **reg_r}
    ev = Evaluator(public_game.model, semantics=IR, registry=registry)
    chi = default_assignment(public_game.model, MEMORYLESS)
    bound = build_price_bound_formula(public_game, names_k, names_r)
    for q in public_game.reachable():
        v = ev.eval(chi, q, bound)
        if v != ONE_F:
            violations.append({"half": "public", "state": q, "value": format_rational(v)})

    kbb = build_profile(game, "kbb")
    rbb = build_profile(game, "rbb")
    identical = True
    for q0 in game.model.initial:
        t_k = simulate(game, kbb, rounds=1, start=q0)
        t_r = simulate(game, rbb, rounds=1, start=q0)
        horizon = max(t_k.cycle_start + t_k.cycle_length, t_r.cycle_start + t_r.cycle_length) + 2
        t_k = simulate(game, kbb, rounds=horizon, start=q0)
        t_r = simulate(game, rbb, rounds=horizon, start=q0)
        if t_k.states != t_r.states or t_k.bids != t_r.bids:
            identical = False
            violations.append({"half": "default-obs", "initial": q0})
    return CheckOutcome(
        name="kbb-price-bound",
        passed=not violations,
        details={
            "public_states_checked": len(public_game.reachable()),
            "default_traces_identical": identical,
        },
        violations=violations,
        wall_time_s=time.perf_counter() - t0,
    )


def check_bbr_one_step_utility(game: GspGame) -> CheckOutcome:
    """When opponents repeat their last bids and the recall rule's matched
    bid differs from the restricted rule's, the recall rule's next-round
    utility must be strictly greater.

    The next board is a function of the bid profile alone, so the cases
    are exactly the bid profiles.  Failures are reported with both
    utilities; see the check report for the boards where the climb to a
    better slot is priced above its estimate.
    """
    t0 = time.perf_counter()
    spec = game.spec
    from .gsp import GSPState, gsp_successor

    bbr = build_profile(game, "bbr")
    rbb = build_profile(game, "rbb")
    ev_l = Evaluator(game.model, semantics=IR_RECALL)
    ev_r = Evaluator(game.model, semantics=IR)
    consts: dict = {}

    def const(agent: str, bid, kind: str):
        key = (agent, bid, kind)
        if key not in consts:
            consts[key] = constant_strategy(game, agent, bid, kind=kind)
        return consts[key]

    violations = []
    differing = 0
    targets = {a: fm.Next(util_formula(game, a)) for a in spec.agents}
    for vals_profile in itertools.product(*(spec.valuations[a] for a in spec.agents)):
        base = GSPState(alloc=(None,) * spec.slots, prices=(ZERO,) * spec.slots,
                        vals=tuple(vals_profile))
        for bids in itertools.product(game.grid, repeat=spec.n):
            pi = gsp_successor(spec, base, bids).name()
            for i, agent in enumerate(spec.agents):
                bid_bbr = _matched_bid(game, bbr[agent], pi, ev_l.we)
                bid_rbb = _matched_bid(game, rbb[agent], pi, ev_l.we)
                if bid_bbr == bid_rbb:
                    continue
                differing += 1
                chi_l = {
                    b: const(b, bids[j], RECALL)
                    for j, b in enumerate(spec.agents) if b != agent
                }
                chi_l[agent] = bbr[agent]
                chi_r = {
                    b: const(b, bids[j], MEMORYLESS)
                    for j, b in enumerate(spec.agents) if b != agent
                }
                chi_r[agent] = rbb[agent]
                u_l = ev_l.eval(chi_l, pi, targets[agent])
                u_r = ev_r.eval(chi_r, pi, targets[agent])
                if not u_l > u_r:
                    violations.append({
                        "state": pi,
                        "agent": agent,
                        "frozen_bids": [format_rational(b) for b in bids],
                        "recall_bid": format_rational(bid_bbr),
                        "restricted_bid": format_rational(bid_rbb),
                        "recall_utility": format_rational(u_l),
                        "restricted_utility": format_rational(u_r),
                    })
    return CheckOutcome(
        name="bbr-one-step-utility",
        passed=not violations,
        details={"differing_cases": differing},
        violations=violations,
        wall_time_s=time.perf_counter() - t0,
    )


CHECKS: dict[str, Callable[[GspGame], CheckOutcome]] = {
    "lefe-implies-ne": check_lefe_implies_ne,
    "vcg-implies-lefe": check_vcg_implies_lefe,
    "revenue-bound": check_revenue_bound,
    "bb-fixed-point-bids": check_fixed_point_bids,
    "bb-converges-m2": check_bb_converges,
    "bb-diverges-m3": check_bb_diverges,
    "rbb-converges": check_rbb_converges,
    "kbb-price-bound": check_kbb_price_bound,
    "bbr-converges": check_bbr_converges,
    "bbr-one-step-utility": check_bbr_one_step_utility,
}


def run_check(game: GspGame, name: str) -> CheckOutcome:
    fn = CHECKS.get(name)
    if fn is None:
        raise UnknownCheckError(name, CHECKS)
    return fn(game)
