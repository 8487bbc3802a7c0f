"""Bundled expressivity fixture models G1, G1', G2, G2'.

G1 is a two-step turn game: agent 1 picks one of five branch states, agent
2 then decides between the winning sink q3 and the losing sink q4.  The
proposition p marks the branch states where playing a2 wins.  G1' differs
only in that p no longer holds at q1''.  G2/G2' form a matching-pennies
shape; G2' additionally makes q1 and q2 indistinguishable for agent 1.

All propositions are crisp: weight 1 where listed, -1 elsewhere.  Both
fixture families declare the same propositions {p, win} so that guard
pools can be shared across them.
"""

from __future__ import annotations

from fractions import Fraction

from .errors import UnknownFixtureError
from .wcgs import WCGS

FIXTURE_NAMES = ("G1", "G1'", "G2", "G2'")

_ONE = Fraction(1)


def _build_g1(p_states: tuple[str, ...]) -> WCGS:
    agents = ("1", "2")
    a1_acts = ("a1", "b1", "c1", "d1", "e1")
    a2_acts = ("a2", "b2")
    states = ("q0", "q1", "q1'", "q1''", "q2'", "q2", "q3", "q4")
    legal = {("1", q): a1_acts for q in states}
    legal.update({("2", q): a2_acts for q in states})

    transitions = {}
    branch = {"a1": "q1", "b1": "q1'", "c1": "q1''", "d1": "q2'", "e1": "q2"}
    for x1, target in branch.items():
        for y2 in a2_acts:
            transitions[("q0", (x1, y2))] = target
    # q1 and its copies: a2 wins, b2 loses; q2 and its copy: reversed
    for q in ("q1", "q1'", "q1''"):
        for x1 in a1_acts:
            transitions[(q, (x1, "a2"))] = "q3"
            transitions[(q, (x1, "b2"))] = "q4"
    for q in ("q2'", "q2"):
        for x1 in a1_acts:
            transitions[(q, (x1, "a2"))] = "q4"
            transitions[(q, (x1, "b2"))] = "q3"
    for q in ("q3", "q4"):
        for x1 in a1_acts:
            for y2 in a2_acts:
                transitions[(q, (x1, y2))] = q

    weights = {(q, "p"): _ONE for q in p_states}
    weights[("q3", "win")] = _ONE
    obs = {a: [frozenset([q]) for q in states] for a in agents}
    return WCGS(
        agents=agents, actions=a1_acts + a2_acts, states=states, legal=legal,
        transitions=transitions, weights=weights, props=("p", "win"),
        initial=("q0",), obs=obs,
    )


def _build_g2(merge_q1_q2: bool) -> WCGS:
    agents = ("1", "2")
    a1_acts = ("a1", "b1")
    a2_acts = ("a2", "b2")
    states = ("q0", "q1", "q2", "q3", "q4")
    legal = {("1", q): a1_acts for q in states}
    legal.update({("2", q): a2_acts for q in states})

    transitions = {}
    for y2 in a2_acts:
        transitions[("q0", ("a1", y2))] = "q1"
        transitions[("q0", ("b1", y2))] = "q2"
    for x1 in a1_acts:
        transitions[("q1", (x1, "a2"))] = "q3"
        transitions[("q1", (x1, "b2"))] = "q4"
        transitions[("q2", (x1, "a2"))] = "q4"
        transitions[("q2", (x1, "b2"))] = "q3"
    for q in ("q3", "q4"):
        for x1 in a1_acts:
            for y2 in a2_acts:
                transitions[(q, (x1, y2))] = q

    weights = {("q3", "win"): _ONE}
    obs1 = [frozenset(["q0"]), frozenset(["q3"]), frozenset(["q4"])]
    if merge_q1_q2:
        obs1.append(frozenset(["q1", "q2"]))
    else:
        obs1 += [frozenset(["q1"]), frozenset(["q2"])]
    obs = {"1": obs1, "2": [frozenset([q]) for q in states]}
    return WCGS(
        agents=agents, actions=a1_acts + a2_acts, states=states, legal=legal,
        transitions=transitions, weights=weights, props=("p", "win"),
        initial=("q0",), obs=obs,
    )


def load_fixture(name: str) -> WCGS:
    """Return one of the bundled models by name: G1, G1', G2 or G2'."""
    if name == "G1":
        return _build_g1(("q1", "q1'", "q1''"))
    if name == "G1'":
        return _build_g1(("q1", "q1'"))
    if name == "G2":
        return _build_g2(merge_q1_q2=False)
    if name == "G2'":
        return _build_g2(merge_q1_q2=True)
    raise UnknownFixtureError(name)
