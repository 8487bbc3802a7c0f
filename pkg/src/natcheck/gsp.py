"""Repeated generalized second-price keyword auctions as weighted games.

The generator builds the full auction structure: one state per (slot
allocation, slot prices, valuation profile), bids as actions on a uniform
price grid, the deterministic rank-and-pay transition, crisp allocation
propositions plus rational price and valuation propositions, one initial
state per valuation profile, and observation classes that reveal the
public board plus the agent's own valuation (optionally everyone's, for
agents with public valuation information).

Also here: the reference VCG outcome, recursive equilibrium bids, and the
four bidding behaviours (balanced bidding, its restricted variant, the
knowledge-grounded variant and the recall variant that switches to the
restricted rule once the board repeats) rendered as natural strategies.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional, Sequence

from .errors import (
    NatcheckError,
    ParseError,
    PositionOutOfRangeError,
    SpecInvariantError,
    StateCapExceededError,
)
from .guards import Atom, Fun, Know, Lit, Top, WEFormula
from .strategies import Concat, Letter, MEMORYLESS, NatStrategy, RECALL, TOP_STAR
from .values import ONE, ZERO, FuncLib, STANDARD_LIB, format_rational, parse_rational, snap_to_grid
from .wcgs import WCGS

NONE_SLOT = "-"

VCG_PER_CLICK = "per-click"
VCG_TOTAL = "total"
CASES_SWAPPED = "swapped"
CASES_AS_PRINTED = "as-printed"


@dataclass(frozen=True)
class AuctionSpec:
    """Parameters of a repeated keyword auction at desk scale."""

    agents: tuple
    slots: int
    ctr: tuple  # click-through rates, strictly decreasing, in (0, 1]
    increment: Fraction
    valuations: Mapping[str, tuple]  # per agent, all on the bid grid
    public_valuations: frozenset = frozenset()
    vcg_convention: str = VCG_PER_CLICK
    bid_cases: str = CASES_SWAPPED
    state_cap: int = 200_000

    def validate(self):
        if not self.agents:
            raise SpecInvariantError("auction needs at least one agent")
        if self.slots < 1:
            raise SpecInvariantError("auction needs at least one slot")
        if len(self.ctr) != self.slots:
            raise SpecInvariantError(f"need {self.slots} click-through rates, got {len(self.ctr)}")
        for t in self.ctr:
            if not (ZERO < t <= ONE):
                raise SpecInvariantError(f"click-through rate {t} outside (0, 1]")
        for hi, lo in zip(self.ctr, self.ctr[1:]):
            if not hi > lo:
                raise SpecInvariantError("click-through rates must be strictly decreasing")
        if not (ZERO < self.increment <= ONE):
            raise SpecInvariantError(f"increment {self.increment} outside (0, 1]")
        if (ONE / self.increment).denominator != 1:
            raise SpecInvariantError(f"1/increment must be integral, got {self.increment}")
        seen = {}
        for a in self.agents:
            vals = self.valuations.get(a)
            if not vals:
                raise SpecInvariantError(f"agent {a!r} has no valuations")
            for v in vals:
                if not (ZERO <= v <= ONE):
                    raise SpecInvariantError(f"valuation {v} of agent {a!r} outside [0, 1]")
                if (v / self.increment).denominator != 1:
                    raise SpecInvariantError(f"valuation {v} of agent {a!r} is off the bid grid")
                if v in seen and seen[v] != a:
                    raise SpecInvariantError(
                        f"valuation {v} shared by agents {seen[v]!r} and {a!r}; "
                        f"valuations must be pairwise distinct across agents"
                    )
                seen[v] = a
        for a in self.public_valuations:
            if a not in self.agents:
                raise SpecInvariantError(f"public_valuations names unknown agent {a!r}")
        if self.vcg_convention not in (VCG_PER_CLICK, VCG_TOTAL):
            raise SpecInvariantError(f"vcg_convention must be per-click or total")
        if self.bid_cases not in (CASES_SWAPPED, CASES_AS_PRINTED):
            raise SpecInvariantError(f"bid_cases must be swapped or as-printed")

    @property
    def n(self) -> int:
        return len(self.agents)

    def grid(self) -> tuple:
        steps = int(ONE / self.increment)
        return tuple(i * self.increment for i in range(steps + 1))


@dataclass(frozen=True)
class GSPState:
    """Slot allocation, per-slot prices and the fixed valuation profile."""

    alloc: tuple  # per slot: agent name or None
    prices: tuple  # per slot: Fraction
    vals: tuple  # per agent (declaration order): Fraction

    def name(self) -> str:
        alloc = ",".join(a if a is not None else NONE_SLOT for a in self.alloc)
        prices = ",".join(format_rational(p) for p in self.prices)
        vals = ",".join(format_rational(v) for v in self.vals)
        return f"{alloc}|{prices}|{vals}"


def rank(spec: AuctionSpec, bids: Sequence[Fraction]) -> tuple:
    """Agents in descending bid order; draws resolved by declaration order."""
    order = sorted(range(spec.n), key=lambda i: (-bids[i], i))
    return tuple(spec.agents[i] for i in order)


def gsp_successor(spec: AuctionSpec, state: GSPState, bids: Sequence[Fraction]) -> GSPState:
    """One auction round: slots by rank, each price the next-ranked bid."""
    ranked = rank(spec, bids)
    bid_of = dict(zip(spec.agents, bids))
    alloc = []
    prices = []
    for s in range(1, spec.slots + 1):
        alloc.append(ranked[s - 1] if s <= spec.n else None)
        prices.append(bid_of[ranked[s]] if s + 1 <= spec.n else ZERO)
    return GSPState(alloc=tuple(alloc), prices=tuple(prices), vals=state.vals)


def vcg_outcome(spec: AuctionSpec, vals: Sequence[Fraction]):
    """Truthful VCG reference: (allocation, total payments, per-click payments).

    Payments follow the bottom-up recursion; the per-click form divides the
    slot total by its click-through rate so it is comparable with the
    per-click prices stored in auction states.
    """
    ranked = rank(spec, vals)
    val_of = dict(zip(spec.agents, vals))
    m, n = spec.slots, spec.n
    alloc = tuple(ranked[s - 1] if s <= n else None for s in range(1, m + 1))
    totals = [ZERO] * (m + 1)
    if m + 1 <= n:
        totals[m] = spec.ctr[m - 1] * val_of[ranked[m]]
    for s in range(m - 1, 0, -1):
        nxt_val = val_of[ranked[s]] if s + 1 <= n else ZERO
        totals[s] = (spec.ctr[s - 1] - spec.ctr[s]) * nxt_val + totals[s + 1]
    totals = tuple(totals[1 : m + 1])
    per_click = tuple(t / spec.ctr[s] for s, t in enumerate(totals))
    return alloc, totals, per_click


def vcg_payment(spec: AuctionSpec, vals: Sequence[Fraction], slot: int,
                convention: Optional[str] = None) -> Fraction:
    _, totals, per_click = vcg_outcome(spec, vals)
    convention = convention or spec.vcg_convention
    return per_click[slot - 1] if convention == VCG_PER_CLICK else totals[slot - 1]


def equilibrium_bid(spec: AuctionSpec, vals: Sequence[Fraction], x: int,
                    cases: Optional[str] = None) -> Fraction:
    """Stable bid of the agent with the x-th highest valuation, snapped to
    the grid.

    The ``swapped`` case split uses the recursion for slot winners
    (2 <= x <= slots) and the bare valuation from position slots+1 down;
    positions beyond the number of agents bid 0.  The ``as-printed`` split
    applies the recursion from position slots+1 upward instead, which
    needs the undefined click-through rate of a nonexistent slot and is
    kept only to document the divergence.
    """
    cases = cases or spec.bid_cases
    if not (2 <= x <= spec.n):
        raise PositionOutOfRangeError(x, spec.n)
    ranked = rank(spec, vals)
    val_of = dict(zip(spec.agents, vals))

    def exact(pos: int) -> Fraction:
        if pos > spec.n:
            return ZERO
        v = val_of[ranked[pos - 1]]
        if cases == CASES_SWAPPED:
            if pos >= spec.slots + 1:
                return v
            ratio = spec.ctr[pos - 1] / spec.ctr[pos - 2]
            return ratio * exact(pos + 1) + (1 - ratio) * v
        # as printed: valuation for slot winners, recursion from slots+1 up,
        # which needs the click-through rate of a slot that does not exist
        if 2 <= pos <= spec.slots:
            return v
        raise NatcheckError(
            f"as-printed equilibrium bid of position {pos} needs the click-through "
            f"rate of slot {pos}, but there are only {spec.slots} slots"
        )

    return snap_to_grid(exact(x), spec.increment)


# -- proposition names --------------------------------------------------------


def alloc_prop(agent: str, slot: int) -> str:
    return f"alloc_{agent}_{slot}"


def price_prop(slot: int) -> str:
    return f"price_{slot}"


def val_prop(agent: str) -> str:
    return f"val_{agent}"


# -- model construction -------------------------------------------------------


@dataclass
class GspGame:
    """A built auction: the weighted game plus lookup tables."""

    spec: AuctionSpec
    model: WCGS
    states_by_name: dict
    grid: tuple
    _reachable: Optional[tuple] = None

    def state(self, name: str) -> GSPState:
        return self.states_by_name[name]

    def reachable(self) -> tuple:
        """States reachable from the initial states.

        The auction transition depends only on the bids and the carried
        valuations, never on the current board, so the reachable set is
        the initial states plus every one-round outcome; no fixpoint
        iteration is needed.
        """
        if self._reachable is None:
            seen = dict.fromkeys(self.model.initial)
            for init in self.model.initial:
                st = self.states_by_name[init]
                for bids in itertools.product(self.grid, repeat=self.spec.n):
                    seen[gsp_successor(self.spec, st, bids).name()] = None
            order = {q: i for i, q in enumerate(self.model.states)}
            self._reachable = tuple(sorted(seen, key=order.__getitem__))
        return self._reachable

    def reachable_outcomes(self) -> list:
        """Distinct (allocation, prices) boards among reachable states."""
        seen = []
        seen_set = set()
        for name in self.reachable():
            st = self.states_by_name[name]
            key = (st.alloc, st.prices)
            if key not in seen_set:
                seen_set.add(key)
                seen.append(key)
        return seen


def _alloc_tuples(spec: AuctionSpec):
    slots = spec.slots
    options = list(spec.agents) + [None]

    def rec(i, used):
        if i == slots:
            yield ()
            return
        for opt in options:
            if opt is not None and opt in used:
                continue
            for rest in rec(i + 1, used | {opt} if opt is not None else used):
                yield (opt,) + rest

    yield from rec(0, frozenset())


def estimate_states(spec: AuctionSpec) -> int:
    n_alloc = sum(1 for _ in _alloc_tuples(spec))
    n_prices = (int(ONE / spec.increment) + 1) ** spec.slots
    n_profiles = 1
    for a in spec.agents:
        n_profiles *= len(spec.valuations[a])
    return n_alloc * n_prices * n_profiles


def build_gsp(spec: AuctionSpec) -> GspGame:
    """Construct the full auction structure behind a validated spec."""
    spec.validate()
    estimate = estimate_states(spec)
    if estimate > spec.state_cap:
        raise StateCapExceededError(estimate, spec.state_cap)

    grid = spec.grid()
    act_names = tuple(format_rational(b) for b in grid)
    act_value = dict(zip(act_names, grid))
    m, n = spec.slots, spec.n

    val_profiles = list(itertools.product(*(spec.valuations[a] for a in spec.agents)))
    states: list[GSPState] = []
    for vals in val_profiles:
        for alloc in _alloc_tuples(spec):
            for prices in itertools.product(grid, repeat=m):
                states.append(GSPState(alloc=alloc, prices=prices, vals=vals))
    names = [st.name() for st in states]
    by_name = dict(zip(names, states))

    props = []
    for a in spec.agents:
        for s in range(1, m + 1):
            props.append(alloc_prop(a, s))
    props += [price_prop(s) for s in range(1, m + 1)]
    props += [val_prop(a) for a in spec.agents]

    weights = {}
    for name, st in by_name.items():
        for s in range(1, m + 1):
            for a in spec.agents:
                weights[(name, alloc_prop(a, s))] = ONE if st.alloc[s - 1] == a else ZERO
            weights[(name, price_prop(s))] = st.prices[s - 1]
        for i, a in enumerate(spec.agents):
            weights[(name, val_prop(a))] = st.vals[i]

    legal = {}
    for a in spec.agents:
        for name in names:
            legal[(a, name)] = act_names

    obs = {}
    for i, a in enumerate(spec.agents):
        groups: dict = {}
        for name, st in by_name.items():
            if a in spec.public_valuations:
                key = (st.alloc, st.prices, st.vals)
            else:
                key = (st.alloc, st.prices, st.vals[i])
            groups.setdefault(key, []).append(name)
        obs[a] = [frozenset(g) for g in groups.values()]

    initial = [
        GSPState(alloc=(None,) * m, prices=(ZERO,) * m, vals=vals).name()
        for vals in val_profiles
    ]

    def transition_fn(name: str, profile) -> str:
        st = by_name[name]
        bids = [act_value[act] for act in profile]
        return gsp_successor(spec, st, bids).name()

    lib = STANDARD_LIB.copy()
    _register_vcg_functions(lib, spec)

    model = WCGS(
        agents=spec.agents, actions=act_names, states=names, legal=legal,
        transitions=None, transition_fn=transition_fn, weights=weights,
        props=props, initial=initial, obs=obs, lib=lib,
    )
    return GspGame(spec=spec, model=model, states_by_name=by_name, grid=grid)


def _register_vcg_functions(lib: FuncLib, spec: AuctionSpec):
    """Expose the truthful reference outcome as interpreted functions of
    the valuation propositions, so formulas adapt to each profile."""
    n = spec.n

    def payment_fn(slot: int):
        def fn(*vals):
            return vcg_payment(spec, vals, slot)

        return fn

    def alloc_fn(agent: str, slot: int):
        def fn(*vals):
            alloc, _, _ = vcg_outcome(spec, vals)
            return ONE if alloc[slot - 1] == agent else ZERO

        return fn

    for s in range(1, spec.slots + 1):
        lib.register(f"vcgp_{s}", n, payment_fn(s))
        for a in spec.agents:
            lib.register(f"vcgalloc_{a}_{s}", n, alloc_fn(a, s))


# -- guard building blocks ------------------------------------------------------


def _conj_we(parts) -> WEFormula:
    parts = list(parts)
    if not parts:
        return Top()
    out = parts[0]
    for p in parts[1:]:
        out = Fun("and", (out, p))
    return out


def _util_we(spec: AuctionSpec, agent: str, slot: int) -> WEFormula:
    theta = spec.ctr[slot - 1]
    return Fun("mul", (Lit(theta), Fun("sub", (Atom(val_prop(agent)), Atom(price_prop(slot))))))


def _cur_slot_we(spec: AuctionSpec, agent: str) -> WEFormula:
    """Current slot of the agent as a formula; unallocated counts as the
    last slot (the only slot she may target under the restricted rule)."""
    m = spec.slots
    terms = [Fun("mul", (Lit(Fraction(s)), Atom(alloc_prop(agent, s)))) for s in range(1, m + 1)]
    alloc_sum = Fun("sum", tuple(Atom(alloc_prop(agent, s)) for s in range(1, m + 1)))
    terms.append(Fun("mul", (Lit(Fraction(m)), Fun("sub", (Lit(ONE), alloc_sum)))))
    return Fun("sum", tuple(terms))


def _masked_utils_we(spec: AuctionSpec, agent: str) -> list:
    """Per-slot utilities with slots above the agent's current slot masked
    by distinct sentinels below -1, so the argmax can only land inside the
    allowed range."""
    cur = _cur_slot_we(spec, agent)
    out = []
    for s in range(1, spec.slots + 1):
        inside = Fun(
            "rdiv",
            (Fun("sum", (Fun("geq", (Lit(Fraction(s)), cur)), Lit(ONE))), Lit(Fraction(2))),
        )
        masked = Fun(
            "sum",
            (
                Fun("mul", (inside, _util_we(spec, agent, s))),
                Fun("mul", (Fun("sub", (Lit(ONE), inside)), Lit(Fraction(-2 - s)))),
            ),
        )
        out.append(masked)
    return out


def _snap(term: WEFormula, spec: AuctionSpec) -> WEFormula:
    return Fun("snap", (term, Lit(spec.increment)))


def _top_slot_bid(spec: AuctionSpec, agent: str) -> WEFormula:
    # midpoint between own valuation and the current top price
    half = Fun("rdiv", (Fun("sum", (Atom(val_prop(agent)), Atom(price_prop(1)))), Lit(Fraction(2))))
    return _snap(half, spec)


def _lower_slot_bid(spec: AuctionSpec, agent: str, slot: int) -> WEFormula:
    # indifference between slot at its current price and slot-1 at bid price
    theta_above = spec.ctr[slot - 2]
    bid = Fun(
        "sub",
        (Atom(val_prop(agent)), Fun("rdiv", (_util_we(spec, agent, slot), Lit(theta_above)))),
    )
    return _snap(bid, spec)


def bb_condition(spec: AuctionSpec, agent: str, b: Fraction, slot: int = 1,
                 restricted: bool = False) -> WEFormula:
    """Unwrapped balanced-bidding condition: the bid equation for the
    targeted slot plus the requirement that this slot maximises utility
    (over all slots, or over no-better slots for the restricted rule)."""
    utils = _masked_utils_we(spec, agent) if restricted else [
        _util_we(spec, agent, s) for s in range(1, spec.slots + 1)
    ]
    target = Fun("eq", (Fun("argmax", tuple(utils)), Lit(Fraction(slot))))
    bid_term = _top_slot_bid(spec, agent) if slot == 1 else _lower_slot_bid(spec, agent, slot)
    bid_eq = Fun("eq", (Lit(b), bid_term))
    return Fun("and", (bid_eq, target))


def build_bb(game: GspGame, agent: str) -> NatStrategy:
    """Balanced bidding: target the utility-maximising slot at current
    prices; bid midway to the top price for slot 1, otherwise the
    indifference bid against the slot above."""
    return _build_memoryless(game, agent, restricted=False, name=f"BB_{agent}")


def build_rbb(game: GspGame, agent: str) -> NatStrategy:
    """Restricted balanced bidding: as balanced bidding but only targeting
    slots no better than the current one (losers target the last slot)."""
    return _build_memoryless(game, agent, restricted=True, name=f"RBB_{agent}")


def _build_memoryless(game: GspGame, agent: str, restricted: bool, name: str) -> NatStrategy:
    spec = game.spec
    pairs = []
    for b in game.grid:
        cond = bb_condition(spec, agent, b, slot=1, restricted=restricted)
        pairs.append((Know(agent, cond), format_rational(b)))
    for slot in range(2, spec.slots + 1):
        for b in game.grid:
            cond = bb_condition(spec, agent, b, slot=slot, restricted=restricted)
            pairs.append((Know(agent, cond), format_rational(b)))
    pairs.append((Top(), format_rational(ZERO)))
    return NatStrategy(agent=agent, kind=MEMORYLESS, pairs=tuple(pairs), name=name)


def build_kbb(game: GspGame, agent: str) -> NatStrategy:
    """Knowledge-grounded restricted bidding: when the agent knows the
    valuation of the occupant of her target slot, she caps her restricted
    bid by it; otherwise she falls back to the restricted rule."""
    spec = game.spec
    pairs = []
    others = [b for b in spec.agents if b != agent]
    for b in game.grid:
        for c in game.grid:
            for other in others:
                inner = _conj_we([
                    bb_condition(spec, agent, b, slot=1, restricted=True),
                    Fun("eq", (Atom(alloc_prop(other, 1)), Lit(ONE))),
                    Fun("eq", (Lit(c), Fun("min", (Atom(val_prop(other)), Lit(b))))),
                ])
                pairs.append((Know(agent, inner), format_rational(c)))
    for slot in range(2, spec.slots + 1):
        for b in game.grid:
            for c in game.grid:
                for other in others:
                    inner = _conj_we([
                        bb_condition(spec, agent, b, slot=slot, restricted=True),
                        Fun("eq", (Atom(alloc_prop(other, slot)), Lit(ONE))),
                        Fun("eq", (Lit(c), Fun("min", (Atom(val_prop(other)), Lit(b))))),
                    ])
                    pairs.append((Know(agent, inner), format_rational(c)))
    rbb = build_rbb(game, agent)
    pairs.extend(rbb.pairs)
    return NatStrategy(agent=agent, kind=MEMORYLESS, pairs=tuple(pairs), name=f"KBB_{agent}")


def outcome_condition(spec: AuctionSpec, alloc: tuple, prices: tuple) -> WEFormula:
    """Board fingerprint: exact prices and full allocation bits per slot."""
    parts = []
    for s in range(1, spec.slots + 1):
        parts.append(Fun("eq", (Atom(price_prop(s)), Lit(prices[s - 1]))))
        for a in spec.agents:
            bit = ONE if alloc[s - 1] == a else ZERO
            parts.append(Fun("eq", (Atom(alloc_prop(a, s)), Lit(bit))))
    return _conj_we(parts)


def build_bbr(game: GspGame, agent: str) -> NatStrategy:
    """Balanced bidding with recall: play balanced bidding while the board
    is fresh; once the current board already occurred earlier in the play,
    switch to the restricted rule.

    Board conditions are instantiated over the boards reachable in this
    game only; unreachable fingerprints could never fire.
    """
    spec = game.spec
    boards = game.reachable_outcomes()
    pairs = []

    def repeat_guard(psi: WEFormula, cond: WEFormula):
        return Concat(
            Concat(Concat(TOP_STAR, Letter(Know(agent, psi))), TOP_STAR),
            Letter(Know(agent, Fun("and", (psi, cond)))),
        )

    for alloc, prices in boards:
        psi = outcome_condition(spec, alloc, prices)
        for b in game.grid:
            cond = bb_condition(spec, agent, b, slot=1, restricted=True)
            pairs.append((repeat_guard(psi, cond), format_rational(b)))
    for alloc, prices in boards:
        psi = outcome_condition(spec, alloc, prices)
        for slot in range(2, spec.slots + 1):
            for b in game.grid:
                cond = bb_condition(spec, agent, b, slot=slot, restricted=True)
                pairs.append((repeat_guard(psi, cond), format_rational(b)))
    for b in game.grid:
        cond = bb_condition(spec, agent, b, slot=1, restricted=False)
        pairs.append((Concat(TOP_STAR, Letter(Know(agent, cond))), format_rational(b)))
    for slot in range(2, spec.slots + 1):
        for b in game.grid:
            cond = bb_condition(spec, agent, b, slot=slot, restricted=False)
            pairs.append((Concat(TOP_STAR, Letter(Know(agent, cond))), format_rational(b)))
    pairs.append((TOP_STAR, format_rational(ZERO)))
    return NatStrategy(agent=agent, kind=RECALL, pairs=tuple(pairs), name=f"BBR_{agent}")


def constant_strategy(game: GspGame, agent: str, bid: Fraction,
                      kind: str = MEMORYLESS) -> NatStrategy:
    act = format_rational(bid)
    if kind == MEMORYLESS:
        return NatStrategy(agent=agent, kind=MEMORYLESS, pairs=((Top(), act),),
                           name=f"const_{agent}_{act}")
    return NatStrategy(agent=agent, kind=RECALL, pairs=((TOP_STAR, act),),
                       name=f"const_{agent}_{act}")


PROFILE_BUILDERS = {
    "bb": build_bb,
    "rbb": build_rbb,
    "kbb": build_kbb,
    "bbr": build_bbr,
}


def build_profile(game: GspGame, which: str) -> dict:
    """Named strategy profile: bb, rbb, kbb, bbr or constant:<bid>."""
    if which.startswith("constant:"):
        bid = parse_rational(which.split(":", 1)[1])
        return {a: constant_strategy(game, a, bid) for a in game.spec.agents}
    builder = PROFILE_BUILDERS.get(which)
    if builder is None:
        raise NatcheckError(
            f"unknown profile {which!r}; use bb, rbb, kbb, bbr or constant:<bid>"
        )
    return {a: builder(game, a) for a in game.spec.agents}


# -- simulation -----------------------------------------------------------------


@dataclass
class SimTrace:
    """Deterministic unrolling of a strategy profile with lasso annotation."""

    spec: AuctionSpec
    states: list  # GSPState per round
    bids: list  # per round: tuple of Fractions in agent order
    cycle_start: int
    cycle_length: int

    def rows(self) -> list:
        out = []
        for i, (st, bids) in enumerate(zip(self.states, self.bids)):
            row = {"round": i}
            for s in range(1, self.spec.slots + 1):
                row[f"alloc_{s}"] = st.alloc[s - 1] if st.alloc[s - 1] else NONE_SLOT
            for s in range(1, self.spec.slots + 1):
                row[f"price_{s}"] = format_rational(st.prices[s - 1])
            for a, b in zip(self.spec.agents, bids):
                row[f"bid_{a}"] = format_rational(b)
            row["cycle_start"] = 1 if i == self.cycle_start else 0
            out.append(row)
        return out

    def header(self) -> list:
        out = ["round"]
        out += [f"alloc_{s}" for s in range(1, self.spec.slots + 1)]
        out += [f"price_{s}" for s in range(1, self.spec.slots + 1)]
        out += [f"bid_{a}" for a in self.spec.agents]
        out.append("cycle_start")
        return out


def simulate(game: GspGame, profile: Mapping[str, NatStrategy], rounds: int,
             start: Optional[str] = None) -> SimTrace:
    """Unroll the outcome play from an initial state for ``rounds`` rounds."""
    from .guards import WeEvaluator
    from .strategies import StrategyRun

    m = game.model
    if start is None:
        start = m.initial[0]
    we = WeEvaluator(m)
    runs = {a: StrategyRun(m, profile[a], we) for a in m.agents}
    value_of = dict(zip(m.actions, game.grid))

    states: list[GSPState] = []
    bids: list[tuple] = []
    seen: dict = {}
    cycle_start = -1
    cycle_length = 0
    q = start
    for i in range(max(rounds, 1)):
        for a in m.agents:
            runs[a].feed(q)
        config = (q, tuple(runs[a].config() for a in m.agents))
        if config in seen and cycle_start < 0:
            cycle_start = seen[config]
            cycle_length = i - cycle_start
        if config not in seen:
            seen[config] = i
        profile_actions = tuple(runs[a].action() for a in m.agents)
        states.append(game.states_by_name[q])
        bids.append(tuple(value_of[act] for act in profile_actions))
        q = m.successor(q, profile_actions)
    # keep stepping to find the cycle if the requested window was too short
    extra = 0
    while cycle_start < 0 and extra < 100_000:
        for a in m.agents:
            runs[a].feed(q)
        config = (q, tuple(runs[a].config() for a in m.agents))
        if config in seen:
            cycle_start = seen[config]
            cycle_length = len(seen) - cycle_start
            break
        seen[config] = len(seen)
        profile_actions = tuple(runs[a].action() for a in m.agents)
        q = m.successor(q, profile_actions)
        extra += 1
    return SimTrace(spec=game.spec, states=states, bids=bids,
                    cycle_start=cycle_start, cycle_length=max(cycle_length, 1))


# -- auction spec text format -----------------------------------------------------


def parse_auction_spec(text: str, source: Optional[str] = None) -> AuctionSpec:
    """Flat key/value auction format with dotted valuation keys::

        agents: 1 2 3
        slots: 2
        ctr: 1 1/2
        increment: 1/4
        valuations.1: 1
        valuations.2: 1/2
        valuations.3: 0
        public_valuations: 1 2   # optional
        vcg_convention: per-click
        bid_cases: swapped
        state_cap: 200000
    """
    fields: dict = {"valuations": {}}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" not in line:
            raise ParseError(f"expected 'key: value', got {raw!r}", line=lineno, source=source)
        key, rest = line.split(":", 1)
        key = key.strip()
        rest = rest.strip()
        if key.startswith("valuations."):
            agent = key[len("valuations."):]
            fields["valuations"][agent] = tuple(parse_rational(v, source, lineno) for v in rest.split())
        elif key in ("agents", "public_valuations"):
            fields[key] = tuple(rest.split())
        elif key in ("slots", "state_cap"):
            try:
                fields[key] = int(rest)
            except ValueError:
                raise ParseError(f"{key} must be an integer", line=lineno, source=source)
        elif key == "ctr":
            fields[key] = tuple(parse_rational(v, source, lineno) for v in rest.split())
        elif key == "increment":
            fields[key] = parse_rational(rest, source, lineno)
        elif key in ("vcg_convention", "bid_cases"):
            fields[key] = rest
        else:
            raise ParseError(f"unknown key {key!r}", line=lineno, source=source)
    for required in ("agents", "slots", "ctr", "increment"):
        if required not in fields:
            raise ParseError(f"missing key {required!r}", source=source)
    spec = AuctionSpec(
        agents=tuple(fields["agents"]),
        slots=fields["slots"],
        ctr=fields["ctr"],
        increment=fields["increment"],
        valuations=fields["valuations"],
        public_valuations=frozenset(fields.get("public_valuations", ())),
        vcg_convention=fields.get("vcg_convention", VCG_PER_CLICK),
        bid_cases=fields.get("bid_cases", CASES_SWAPPED),
        state_cap=fields.get("state_cap", 200_000),
    )
    spec.validate()
    return spec


def load_auction_spec(path: str) -> AuctionSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_auction_spec(fh.read(), source=path)


def serialize_auction_spec(spec: AuctionSpec) -> str:
    out = [
        "agents: " + " ".join(spec.agents),
        f"slots: {spec.slots}",
        "ctr: " + " ".join(format_rational(t) for t in spec.ctr),
        f"increment: {format_rational(spec.increment)}",
    ]
    for a in spec.agents:
        out.append(f"valuations.{a}: " + " ".join(format_rational(v) for v in spec.valuations[a]))
    if spec.public_valuations:
        out.append("public_valuations: " + " ".join(sorted(spec.public_valuations)))
    out.append(f"vcg_convention: {spec.vcg_convention}")
    out.append(f"bid_cases: {spec.bid_cases}")
    out.append(f"state_cap: {spec.state_cap}")
    return "\n".join(out) + "\n"


# -- bundled desk instances --------------------------------------------------------


def desk_spec() -> AuctionSpec:
    """Three bidders, two slots, quarter-unit grid; the valuation triple is
    chosen so the balanced-bidding dynamics settle at the truthful
    reference outcome on this grid."""
    return AuctionSpec(
        agents=("1", "2", "3"),
        slots=2,
        ctr=(Fraction(1), Fraction(1, 2)),
        increment=Fraction(1, 4),
        valuations={"1": (Fraction(1),), "2": (Fraction(1, 2),), "3": (Fraction(0),)},
    )


def bb_divergent_spec() -> AuctionSpec:
    """Three-slot instance on which plain balanced bidding cycles.

    Found by grid search (scripts/find_bb_divergence.py): from the initial
    state the balanced-bidding play enters a two-round price cycle and
    never reaches the truthful reference board, while the restricted rule
    settles there, and the recall rule's own play settles there after its
    first board repetition.
    """
    return AuctionSpec(
        agents=("1", "2", "3"),
        slots=3,
        ctr=(Fraction(1), Fraction(2, 3), Fraction(1, 2)),
        increment=Fraction(1, 4),
        valuations={"1": (Fraction(1),), "2": (Fraction(3, 4),), "3": (Fraction(0),)},
    )


def desk_spec_multi(public: bool = False) -> AuctionSpec:
    """Desk spec variant with several possible opponent valuations, so that
    knowledge of valuations is genuinely partial under default observation."""
    return AuctionSpec(
        agents=("1", "2", "3"),
        slots=2,
        ctr=(Fraction(1), Fraction(1, 2)),
        increment=Fraction(1, 4),
        valuations={
            "1": (Fraction(1),),
            "2": (Fraction(1, 2), Fraction(3, 4)),
            "3": (Fraction(0), Fraction(1, 4)),
        },
        public_valuations=frozenset(("1", "2", "3")) if public else frozenset(),
    )
