from fractions import Fraction

import pytest

from natcheck.errors import (
    IllegalActionError,
    ModelError,
    NonUniformLegalityError,
    ParseError,
    UnknownFixtureError,
    WeightOutOfRangeError,
)
from natcheck.fixtures import FIXTURE_NAMES, load_fixture
from natcheck.wcgs import parse_model, serialize_model

TINY = """
# one agent walking between two states
agents: 1
actions: go stay
states: q0 q1
init: q0
legal: 1 q0 go stay
legal: 1 q1 go stay
trans: q0 (go) -> q1
trans: q0 (stay) -> q0
trans: q1 (_) -> q1
weight: q0 p 1/2
"""


def test_parse_round_trip():
    m = parse_model(TINY)
    assert len(m.states) == 2
    assert m.successor("q0", ("go",)) == "q1"
    assert m.successor("q1", ("go",)) == "q1"  # wildcard expanded
    assert m.weight("q0", "p") == Fraction(1, 2)
    assert m.weight("q1", "p") == Fraction(-1)  # default
    again = parse_model(serialize_model(m))
    assert again.states == m.states
    assert again.weights == m.weights
    assert {k: tuple(v) for k, v in again.legal.items()} == m.legal


def test_nonuniform_legality_rejected():
    text = TINY.replace("legal: 1 q1 go stay", "legal: 1 q1 go") + "obs: 1 {q0 q1}\n"
    with pytest.raises(NonUniformLegalityError):
        parse_model(text)


def test_weight_out_of_range():
    with pytest.raises(WeightOutOfRangeError):
        parse_model(TINY.replace("weight: q0 p 1/2", "weight: q0 p 3/2"))


def test_partial_transition():
    with pytest.raises(ModelError):
        parse_model(TINY.replace("trans: q0 (stay) -> q0\n", ""))


def test_conflicting_transition():
    with pytest.raises(ParseError):
        parse_model(TINY + "trans: q0 (go) -> q0\n")


def test_syntax_error_carries_line():
    try:
        parse_model("agents: 1\nwhat is this\n")
    except ParseError as exc:
        assert exc.line == 2
    else:
        raise AssertionError("expected a parse error")


def test_illegal_action():
    m = parse_model(TINY)
    with pytest.raises(IllegalActionError):
        m.successor("q0", ("nope",))


def test_successor_on_g2():
    g2 = load_fixture("G2")
    assert g2.successor("q0", ("a1", "a2")) == "q1"
    assert g2.successor("q1", ("a1", "a2")) == "q3"
    for profile in g2.legal_profiles("q3"):
        assert g2.successor("q3", profile) == "q3"


def test_obs_classes():
    g2 = load_fixture("G2")
    g2p = load_fixture("G2'")
    assert g2p.obs_class("1", "q1") == frozenset({"q1", "q2"})
    assert g2.obs_class("1", "q1") == frozenset({"q1"})
    assert g2.obs_class("2", "q0") == frozenset({"q0"})


def test_fixture_weights():
    g1 = load_fixture("G1")
    g1p = load_fixture("G1'")
    assert g1.weight("q1''", "p") == 1
    assert g1p.weight("q1''", "p") == -1
    assert g1.weight("q3", "win") == 1
    assert g1.weight("q4", "win") == -1


def test_unknown_fixture():
    with pytest.raises(UnknownFixtureError):
        load_fixture("G99")


@pytest.mark.parametrize("name", FIXTURE_NAMES)
def test_obs_is_partition(name):
    m = load_fixture(name)
    for agent in m.agents:
        union = set()
        for cls in m.obs[agent]:
            assert not (union & cls)
            union |= cls
        assert union == set(m.states)


@pytest.mark.parametrize("name", ["G1", "G1'"])
def test_two_step_absorption(name):
    # every play from q0 lands in a sink within 2 steps and stays there
    m = load_fixture(name)
    for p1 in m.legal_profiles("q0"):
        mid = m.successor("q0", p1)
        for p2 in m.legal_profiles(mid):
            sink = m.successor(mid, p2)
            assert sink in ("q3", "q4")
            for p3 in m.legal_profiles(sink):
                assert m.successor(sink, p3) == sink


@pytest.mark.parametrize("name", FIXTURE_NAMES)
def test_transitions_total_and_deterministic(name):
    m = load_fixture(name)
    for q in m.states:
        for profile in m.legal_profiles(q):
            assert m.successor(q, profile) in m.states


@pytest.mark.parametrize("name", FIXTURE_NAMES)
def test_fixture_text_round_trip(name):
    m = load_fixture(name)
    again = parse_model(serialize_model(m))
    assert again.states == m.states
    assert again.props == m.props
    assert again.initial == m.initial
    for q in m.states:
        for p in m.props:
            assert again.weight(q, p) == m.weight(q, p)
        for profile in m.legal_profiles(q):
            assert again.successor(q, profile) == m.successor(q, profile)
    for a in m.agents:
        for q in m.states:
            assert again.obs_class(a, q) == m.obs_class(a, q)
