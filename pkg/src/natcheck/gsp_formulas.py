"""Solution-concept formulas for auction games.

Builders produce core formula ASTs over the auction propositions.  Bound
strategies are referenced by registry name, so the same formula text can
be re-evaluated against different profiles; callers register the profile
under the names used here (``<label>_<agent>``).

The price comparisons of the truthful-reference check and of the revenue
bound are lifted under the next operator: prices are read in the state
the profile produces, not in the state where the formula is evaluated.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Mapping

from . import formulas as fm
from .gsp import GspGame, alloc_prop, price_prop, val_prop

ONE_LIT = fm.Lit(Fraction(1))
ZERO_LIT = fm.Lit(Fraction(0))


def util_slot_formula(game: GspGame, agent: str, slot: int) -> fm.Formula:
    """Utility of the agent if she held the slot at its current price."""
    theta = game.spec.ctr[slot - 1]
    return fm.Fun(
        "mul",
        (fm.Lit(theta), fm.Fun("sub", (fm.Atom(val_prop(agent)), fm.Atom(price_prop(slot))))),
    )


def util_formula(game: GspGame, agent: str) -> fm.Formula:
    """Realised utility: allocation-weighted sum of per-slot utilities."""
    terms = tuple(
        fm.Fun("mul", (fm.Atom(alloc_prop(agent, s)), util_slot_formula(game, agent, s)))
        for s in range(1, game.spec.slots + 1)
    )
    return fm.Fun("sum", terms)


def bind_all(game: GspGame, names: Mapping[str, str], body: fm.Formula) -> fm.Formula:
    out = body
    for agent in reversed(game.spec.agents):
        out = fm.Bind(agent=agent, var=None, named=names[agent], body=out)
    return out


def build_ne_formula(game: GspGame, names: Mapping[str, str], k: int) -> fm.Formula:
    """No agent can improve her next-round utility by a unilateral switch
    to any strategy within the complexity budget."""
    conjuncts = []
    for agent in game.spec.agents:
        deviate = fm.Next(util_formula(game, agent))
        for other in reversed(game.spec.agents):
            if other == agent:
                deviate = fm.Bind(agent=agent, var=f"t_{agent}", body=deviate)
            else:
                deviate = fm.Bind(agent=other, var=None, named=names[other], body=deviate)
        stay = bind_all(game, names, fm.Next(util_formula(game, agent)))
        body = fm.Fun("pref", (deviate, stay))
        conjuncts.append(
            fm.neg(fm.Exists(var=f"t_{agent}", agent=agent, bound=k, body=fm.neg(body)))
        )
    return fm.conj(conjuncts)


def build_lefe_formula(game: GspGame, names: Mapping[str, str]) -> fm.Formula:
    """Local envy-freeness in the produced state: slot winners do not
    prefer the slot right above at current prices, losers do not prefer
    the last slot."""
    spec = game.spec
    conjuncts = []
    for agent in spec.agents:
        lef = fm.conj(
            fm.Fun(
                "or",
                (
                    fm.neg(fm.Fun("eq", (fm.Atom(alloc_prop(agent, s)), ONE_LIT))),
                    fm.Fun(
                        "geq",
                        (util_slot_formula(game, agent, s), util_slot_formula(game, agent, s - 1)),
                    ),
                ),
            )
            for s in range(2, spec.slots + 1)
        )
        unallocated = fm.conj(
            fm.Fun("eq", (fm.Atom(alloc_prop(agent, s)), ZERO_LIT))
            for s in range(1, spec.slots + 1)
        )
        loser = fm.Fun(
            "or",
            (fm.neg(unallocated), fm.Fun("geq", (ZERO_LIT, util_slot_formula(game, agent, spec.slots)))),
        )
        conjuncts.append(bind_all(game, names, fm.Next(fm.Fun("and", (lef, loser)))))
    return fm.conj(conjuncts)


def build_vcg_formula(game: GspGame, names: Mapping[str, str]) -> fm.Formula:
    """The next state carries exactly the truthful reference allocation and
    payments (in the convention the game was built with)."""
    spec = game.spec
    val_atoms = tuple(fm.Atom(val_prop(a)) for a in spec.agents)
    parts = []
    for s in range(1, spec.slots + 1):
        parts.append(
            fm.Fun("eq", (fm.Atom(price_prop(s)), fm.Fun(f"vcgp_{s}", val_atoms)))
        )
        for a in spec.agents:
            parts.append(
                fm.Fun("eq", (fm.Atom(alloc_prop(a, s)), fm.Fun(f"vcgalloc_{a}_{s}", val_atoms)))
            )
    return bind_all(game, names, fm.Next(fm.conj(parts)))


def build_convergence_formula(game: GspGame, names: Mapping[str, str],
                              inner: fm.Formula) -> fm.Formula:
    """Eventually-always of the inner condition under the bound profile."""
    g_inner = fm.neg(fm.Until(fm.TOP, fm.neg(inner)))
    return bind_all(game, names, fm.Until(fm.TOP, g_inner))


def build_revenue_formula(game: GspGame, names: Mapping[str, str]) -> fm.Formula:
    """If the profile produces a locally envy-free state, total prices
    there weakly dominate the truthful reference revenue."""
    spec = game.spec
    val_atoms = tuple(fm.Atom(val_prop(a)) for a in spec.agents)
    price_sum = fm.Fun("sum", tuple(fm.Atom(price_prop(s)) for s in range(1, spec.slots + 1)))
    vcg_sum = fm.Fun("sum", tuple(fm.Fun(f"vcgp_{s}", val_atoms) for s in range(1, spec.slots + 1)))
    bound = bind_all(game, names, fm.Next(fm.Fun("geq", (price_sum, vcg_sum))))
    lefe = build_lefe_formula(game, names)
    return fm.Fun("or", (fm.neg(lefe), bound))


def build_price_bound_formula(game: GspGame, names_a: Mapping[str, str],
                              names_b: Mapping[str, str]) -> fm.Formula:
    """Per-slot: the next-state price under profile A is at most the
    next-state price under profile B."""
    parts = []
    for s in range(1, game.spec.slots + 1):
        lhs = bind_all(game, names_a, fm.Next(fm.Atom(price_prop(s))))
        rhs = bind_all(game, names_b, fm.Next(fm.Atom(price_prop(s))))
        parts.append(fm.Fun("pref", (lhs, rhs)))
    return fm.conj(parts)
