from fractions import Fraction
from itertools import combinations

import pytest

from natcheck.errors import (
    ArityMismatchError,
    GrammarLayerError,
    ParseError,
    UnknownPropositionError,
)
from natcheck.fixtures import FIXTURE_NAMES, load_fixture
from natcheck.guards import (
    Atom,
    Fun,
    Know,
    Lit,
    Top,
    WeEvaluator,
    eval_we,
    parse_we,
    we_size,
)
from natcheck.wcgs import parse_model

F = Fraction

TWO_CLASS = """
agents: 1
actions: a
states: q0 q1
init: q0
legal: 1 q0 a
legal: 1 q1 a
trans: q0 (a) -> q1
trans: q1 (a) -> q0
weight: q0 p 1/2
weight: q1 p -1/4
obs: 1 {q0 q1}
"""


def test_parse_knowledge():
    f = parse_we("K[1](p)")
    assert f == Know("1", Atom("p"))


def test_parse_function_of_psi_terms():
    f = parse_we("and(K[1](p), top)")
    assert f == Fun("and", (Know("1", Atom("p")), Top()))


def test_bare_atom_rejected_at_top_layer():
    with pytest.raises(GrammarLayerError):
        parse_we("p")
    with pytest.raises(GrammarLayerError):
        parse_we("max(p, top)")


def test_atom_allowed_below_knowledge():
    f = parse_we("K[1](max(p, q))")
    assert f == Know("1", Fun("max", (Atom("p"), Atom("q"))))


def test_nested_knowledge_in_inner_layer():
    f = parse_we("K[1](K[2](p))")
    assert f == Know("1", Know("2", Atom("p")))


def test_literals_as_nullary_functions():
    f = parse_we("geq(K[1](p), 1/2)")
    assert f == Fun("geq", (Know("1", Atom("p")), Lit(F(1, 2))))


def test_parse_errors():
    with pytest.raises(ParseError):
        parse_we("and(top")
    with pytest.raises(ParseError):
        parse_we("")
    with pytest.raises(ArityMismatchError):
        parse_we("neg(top, top)")


def test_eval_singleton_class():
    m = parse_model(TWO_CLASS.replace("obs: 1 {q0 q1}", ""))
    assert eval_we(m, "q0", parse_we("K[1](p)")) == F(1, 2)


def test_eval_min_over_class():
    m = parse_model(TWO_CLASS)
    assert eval_we(m, "q0", parse_we("K[1](p)")) == F(-1, 4)
    assert eval_we(m, "q1", parse_we("K[1](p)")) == F(-1, 4)


def test_eval_function_composition():
    # max(K[1](p), neg(K[1](p))) with class values {1/2, -1/4}: K gives -1/4
    m = parse_model(TWO_CLASS)
    f = parse_we("max(K[1](p), neg(K[1](p)))")
    assert eval_we(m, "q0", f) == F(1, 4)


def test_eval_unknown_proposition():
    m = parse_model(TWO_CLASS)
    with pytest.raises(UnknownPropositionError):
        eval_we(m, "q0", parse_we("K[1](nope)"))


def test_eval_unknown_agent():
    from natcheck.errors import NatcheckError

    m = parse_model(TWO_CLASS)
    with pytest.raises(NatcheckError):
        eval_we(m, "q0", parse_we("K[9](p)"))


def test_we_size():
    assert we_size(Top()) == 1
    assert we_size(Fun("and", (Top(), Top()))) == 5
    assert we_size(Atom("p")) == 1
    assert we_size(Lit(F(1, 2))) == 1
    # the knowledge wrapper itself is free; budgets are calibrated to
    # guards written without it
    assert we_size(Know("1", Atom("p"))) == 1
    assert we_size(Know("1", Fun("eq", (Atom("p"), Lit(F(1)))))) == 5


@pytest.mark.parametrize("name", FIXTURE_NAMES)
def test_knowledge_lower_bound(name):
    # the knowledge of a formula never exceeds the formula's value
    m = load_fixture(name)
    we = WeEvaluator(m)
    bodies = [Atom("p"), Atom("win"), Fun("max", (Atom("p"), Atom("win")))]
    for agent in m.agents:
        for body in bodies:
            for q in m.states:
                assert we.value(q, Know(agent, body)) <= we.value(q, body)


@pytest.mark.parametrize("name", FIXTURE_NAMES)
def test_observation_invariance(name):
    # guards built from top and own-knowledge subterms agree on states the
    # agent cannot distinguish; this is what makes strategies uniform
    m = load_fixture(name)
    we = WeEvaluator(m)
    for agent in m.agents:
        guards = [
            Top(),
            Know(agent, Atom("p")),
            Know(agent, Atom("win")),
            Fun("max", (Know(agent, Atom("p")), Know(agent, Atom("win")))),
            Fun("neg", (Know(agent, Atom("p")),)),
        ]
        for cls in m.obs[agent]:
            for q1, q2 in combinations(sorted(cls), 2):
                for g in guards:
                    assert we.value(q1, g) == we.value(q2, g)


def test_eval_deterministic():
    m = parse_model(TWO_CLASS)
    f = parse_we("min(K[1](p), 1/3)")
    assert eval_we(m, "q0", f) == eval_we(m, "q0", f)


def test_print_parse_round_trip():
    for text in ("top", "K[1](p)", "and(K[1](p), top)", "geq(K[2](sum(p, q)), 1/2)"):
        f = parse_we(text)
        assert parse_we(str(f)) == f
