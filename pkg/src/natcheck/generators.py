"""Seeded random generators for models, strategies and sentences.

Everything here is driven by an explicit ``random.Random`` instance so
property runs are reproducible from a single integer seed.  Generated
models always give every agent at least one action that is legal in every
state (so constant strategies exist), and generated sentences only use
range-preserving functions so their top-level values stay in [-1, 1].
"""

from __future__ import annotations

import random
from fractions import Fraction
from typing import Sequence

from . import formulas as fm
from .guards import Atom, Know, Top, WEFormula
from .strategies import MEMORYLESS, NatStrategy
from .wcgs import WCGS

WEIGHT_CHOICES = [Fraction(-1), Fraction(-1, 4), Fraction(0), Fraction(1, 2), Fraction(1)]


def random_wcgs(
    rng: random.Random,
    max_states: int = 6,
    n_agents: int = 2,
    max_actions: int = 3,
    n_props: int = 2,
) -> WCGS:
    """A small random structure with deterministic shape per seed."""
    n_states = rng.randint(2, max_states)
    states = tuple(f"q{i}" for i in range(n_states))
    agents = tuple(str(i + 1) for i in range(n_agents))
    n_actions = rng.randint(1, max_actions)
    actions = tuple(f"a{i}" for i in range(n_actions))
    props = tuple(f"p{i}" for i in range(n_props))

    legal = {}
    for a in agents:
        for q in states:
            subset = [act for act in actions if act == "a0" or rng.random() < 0.7]
            legal[(a, q)] = tuple(subset)

    transitions = {}
    for q in states:
        choices = [legal[(a, q)] for a in agents]

        def profiles(parts):
            if not parts:
                yield ()
                return
            for head in parts[0]:
                for tail in profiles(parts[1:]):
                    yield (head,) + tail

        for profile in profiles(choices):
            transitions[(q, profile)] = rng.choice(states)

    weights = {}
    for q in states:
        for p in props:
            weights[(q, p)] = rng.choice(WEIGHT_CHOICES)

    obs = {}
    for a in agents:
        blocks: list[list[str]] = []
        for q in states:
            placed = False
            if blocks and rng.random() < 0.3:
                # only merge states with identical legality to keep uniformity
                candidates = [b for b in blocks if legal[(a, b[0])] == legal[(a, q)]]
                if candidates:
                    rng.choice(candidates).append(q)
                    placed = True
            if not placed:
                blocks.append([q])
        obs[a] = [frozenset(b) for b in blocks]

    initial = (rng.choice(states),)
    return WCGS(
        agents=agents, actions=actions, states=states, legal=legal,
        transitions=transitions, weights=weights, props=props,
        initial=initial, obs=obs,
    )


def random_guard(rng: random.Random, m: WCGS, agent: str) -> WEFormula:
    """A small uniform guard for the given agent: top or own-knowledge."""
    if rng.random() < 0.25:
        return Top()
    prop = rng.choice(m.props)
    return Know(agent, Atom(prop))


def random_memoryless_strategy(rng: random.Random, m: WCGS, agent: str) -> NatStrategy:
    """A random uniform memoryless strategy with 0-2 leading guards."""
    universal = [
        act for act in m.actions
        if all(act in m.legal_actions(agent, q) for q in m.states)
    ]
    pairs = []
    used = set()
    for _ in range(rng.randint(0, 2)):
        g = random_guard(rng, m, agent)
        if isinstance(g, Top) or g in used:
            continue
        used.add(g)
        pairs.append((g, rng.choice(universal)))
    pairs.append((Top(), rng.choice(universal)))
    return NatStrategy(agent=agent, kind=MEMORYLESS, pairs=tuple(pairs))


def random_assignment(rng: random.Random, m: WCGS) -> dict:
    return {a: random_memoryless_strategy(rng, m, a) for a in m.agents}


def random_state_formula(rng: random.Random, props: Sequence[str], depth: int = 2) -> fm.Formula:
    """Random boolean-suite formula over atoms; value stays in [-1, 1]."""
    if depth == 0 or rng.random() < 0.3:
        return fm.Atom(rng.choice(list(props)))
    op = rng.choice(["neg", "and", "or", "min", "max"])
    if op == "neg":
        return fm.Fun("neg", (random_state_formula(rng, props, depth - 1),))
    return fm.Fun(
        op,
        (
            random_state_formula(rng, props, depth - 1),
            random_state_formula(rng, props, depth - 1),
        ),
    )


def random_temporal_formula(rng: random.Random, props: Sequence[str], depth: int = 2) -> fm.Formula:
    """Random formula mixing temporal operators over state formulas."""
    roll = rng.random()
    if depth == 0 or roll < 0.25:
        return random_state_formula(rng, props, 1)
    if roll < 0.45:
        return fm.Next(random_temporal_formula(rng, props, depth - 1))
    if roll < 0.65:
        return fm.Until(
            random_state_formula(rng, props, 1),
            random_temporal_formula(rng, props, depth - 1),
        )
    if roll < 0.8:
        # F-shape
        return fm.Until(fm.TOP, random_temporal_formula(rng, props, depth - 1))
    if roll < 0.9:
        # G-shape
        return fm.neg(fm.Until(fm.TOP, fm.neg(random_temporal_formula(rng, props, depth - 1))))
    return fm.Fun(
        rng.choice(["and", "or"]),
        (
            random_temporal_formula(rng, props, depth - 1),
            random_temporal_formula(rng, props, depth - 1),
        ),
    )


def random_sentence(rng: random.Random, m: WCGS, max_bound: int = 2) -> fm.Formula:
    """A random closed formula: quantify one variable per agent, bind all
    agents, then a random temporal body."""
    body = random_temporal_formula(rng, m.props, depth=2)
    bind_order = list(m.agents)
    rng.shuffle(bind_order)
    for a in bind_order:
        body = fm.Bind(agent=a, var=f"x{a}", body=body)
    out = body
    quantifier_order = list(m.agents)
    rng.shuffle(quantifier_order)
    for a in quantifier_order:
        k = rng.randint(1, max_bound)
        if rng.random() < 0.5:
            out = fm.Exists(var=f"x{a}", agent=a, bound=k, body=out)
        else:
            out = fm.neg(fm.Exists(var=f"x{a}", agent=a, bound=k, body=fm.neg(out)))
    return out
