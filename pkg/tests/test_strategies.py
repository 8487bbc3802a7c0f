from fractions import Fraction
from itertools import product

import pytest

from natcheck.errors import EmptyPoolError, StrategyError
from natcheck.fixtures import load_fixture
from natcheck.guards import Atom, Know, Top, WeEvaluator
from natcheck.strategies import (
    Concat,
    Choice,
    Letter,
    MEMORYLESS,
    NatStrategy,
    RECALL,
    Star,
    StrategyRun,
    TOP_STAR,
    compile_guard,
    compl,
    consistent,
    enumerate_strategies,
    match_index,
    parse_pool,
    parse_regex,
    parse_strategies,
    promote_to_recall,
    regex_size,
    select_action,
    serialize_strategies,
    validate_strategy,
)
from natcheck.wcgs import parse_model

F = Fraction

PING = """
agents: 1
actions: a b
states: q0 q1
init: q0
legal: 1 q0 a b
legal: 1 q1 a b
trans: q0 (a) -> q1
trans: q1 (a) -> q0
trans: q0 (b) -> q0
trans: q1 (b) -> q1
weight: q1 p 1
weight: q0 m 9/10
"""

TOP_L = Letter(Top())
P1 = Know("1", Atom("p"))


def live_subsets(auto, always_true=()):
    """Determinised states reachable after at least one letter, over letter
    sets that include the given always-true letters."""
    from itertools import combinations

    mandatory = frozenset(i for i, f in enumerate(auto.letters) if f in always_true)
    optional = [i for i in range(len(auto.letters)) if i not in mandatory]
    seen = set()
    frontier = [auto.initial]
    while frontier:
        s = frontier.pop()
        for k in range(len(optional) + 1):
            for extra in combinations(optional, k):
                t = auto.step(s, mandatory | frozenset(extra))
                if t not in seen:
                    seen.add(t)
                    frontier.append(t)
    return seen


def test_compile_top_star():
    auto = compile_guard(Star(TOP_L))
    assert auto.is_accepting(auto.initial)
    live = live_subsets(auto, always_true=[Top()])
    assert len(live) == 1 and all(auto.is_accepting(s) for s in live)
    assert auto.accepts_word([Top()] * 5)
    assert auto.accepts_word([])


def test_compile_ends_with_letter():
    regex = Concat(Star(TOP_L), Letter(P1))
    auto = compile_guard(regex)
    # with the catch-all letter always true, two live determinised states:
    # "just saw the letter" (accepting) and "did not"
    live = live_subsets(auto, always_true=[Top()])
    assert len(live) == 2
    assert sorted(auto.is_accepting(s) for s in live) == [False, True]
    assert auto.accepts_word([P1])
    assert auto.accepts_word([Top(), Top(), P1])
    assert not auto.accepts_word([P1, Top()])
    assert not auto.accepts_word([Top()])


def test_compile_choice_of_letters():
    p2 = Know("1", Atom("q"))
    auto = compile_guard(Choice(Letter(P1), Letter(p2)))
    assert auto.accepts_word([P1])
    assert auto.accepts_word([p2])
    assert not auto.accepts_word([])
    assert not auto.accepts_word([P1, p2])


def test_consistency_requires_value_exactly_one():
    m = parse_model(PING)
    assert consistent(m, ["q0", "q1"], Star(TOP_L))
    assert consistent(m, ["q0", "q1"], Concat(TOP_L, Letter(P1)))
    assert not consistent(m, ["q1", "q0"], Concat(TOP_L, Letter(P1)))
    # m has value 9/10 at q0: close to true is not true
    assert not consistent(m, ["q0"], Letter(Know("1", Atom("m"))))


def test_match_index_memoryless():
    m = parse_model(PING)
    s = NatStrategy(agent="1", kind=MEMORYLESS, pairs=((P1, "a"), (Top(), "b")))
    assert match_index(m, ["q1"], s) == 1
    assert match_index(m, ["q0"], s) == 2  # value 9/10 on m, -1 on p
    assert select_action(m, ["q0", "q1"], s) == "a"
    assert select_action(m, ["q1", "q0"], s) == "b"
    # memoryless matching only looks at the final state
    assert select_action(m, ["q0", "q1", "q0", "q1"], s) == select_action(m, ["q1"], s)


def test_match_index_recall_two_sightings():
    m = parse_model(PING)
    twice = Concat(Concat(Concat(Star(TOP_L), Letter(P1)), Star(TOP_L)), Letter(P1))
    s = NatStrategy(agent="1", kind=RECALL, pairs=((twice, "a"), (TOP_STAR, "b")))
    assert match_index(m, ["q0", "q1"], s) == 2
    assert match_index(m, ["q0", "q1", "q0", "q1"], s) == 1
    assert match_index(m, ["q1", "q1"], s) == 1


def test_mandatory_final_pair():
    with pytest.raises(StrategyError):
        NatStrategy(agent="1", kind=MEMORYLESS, pairs=((P1, "a"),))
    with pytest.raises(StrategyError):
        NatStrategy(agent="1", kind=RECALL, pairs=((Letter(Top()), "a"),))
    with pytest.raises(StrategyError):
        NatStrategy(agent="1", kind=MEMORYLESS, pairs=((Star(TOP_L), "a"), (Top(), "b")))


def test_compl():
    s1 = NatStrategy(agent="1", kind=MEMORYLESS, pairs=((Top(), "a"),))
    assert compl(s1) == 1
    s2 = NatStrategy(agent="1", kind=MEMORYLESS, pairs=((P1, "a"), (Top(), "b")))
    assert compl(s2) == 2  # guard size 1 plus catch-all
    s3 = NatStrategy(
        agent="1", kind=RECALL,
        pairs=((Concat(Star(TOP_L), Letter(P1)), "a"), (TOP_STAR, "b")),
    )
    # top, star, concat, letter then top, star
    assert compl(s3) == 6
    assert regex_size(Concat(Star(TOP_L), Letter(P1))) == 4


def test_compl_monotone_under_pair_removal():
    pairs = ((P1, "a"), (Know("1", Atom("m")), "b"), (Top(), "b"))
    s = NatStrategy(agent="1", kind=MEMORYLESS, pairs=pairs)
    smaller = NatStrategy(agent="1", kind=MEMORYLESS, pairs=pairs[1:])
    assert compl(smaller) <= compl(s)


def test_promotion_preserves_behaviour():
    m = parse_model(PING)
    s = NatStrategy(agent="1", kind=MEMORYLESS, pairs=((P1, "a"), (Top(), "b")))
    r = promote_to_recall(s)
    assert r.kind == RECALL
    histories = [["q0"], ["q1"], ["q0", "q1"], ["q1", "q0", "q1"], ["q0", "q0", "q0"]]
    for h in histories:
        assert select_action(m, h, s) == select_action(m, h, r)


def test_incremental_matches_whole_history():
    # run the compiled automata letter by letter and compare against
    # recomputing consistency from scratch, over all histories up to 6
    for name in ("G2", "G2'"):
        m = load_fixture(name)
        we = WeEvaluator(m)
        win = Know("2", Atom("win"))
        twice = Concat(Concat(Concat(Star(TOP_L), Letter(win)), Star(TOP_L)), Letter(win))
        s = NatStrategy(
            agent="2", kind=RECALL,
            pairs=((twice, "a2"), (Concat(Star(TOP_L), Letter(win)), "b2"), (TOP_STAR, "a2")),
        )
        histories = [[q] for q in m.states]
        for _ in range(5):
            histories = [
                h + [m.successor(h[-1], pr)]
                for h in histories
                for pr in set(m.legal_profiles(h[-1]))
            ]
            seen = set()
            for h in histories:
                key = tuple(h)
                if key in seen:
                    continue
                seen.add(key)
                run = StrategyRun(m, s, we)
                for q in h:
                    run.feed(q)
                assert run.action() == select_action(m, h, s, we=we)
            histories = [list(h) for h in seen]


def test_uniformity_on_merged_states():
    # on the model where agent 1 cannot tell q1 from q2, any grammar-legal
    # strategy picks the same action at histories ending in either state
    m = load_fixture("G2'")
    we = WeEvaluator(m)
    guards = [Know("1", Atom("win")), Know("1", Atom("p"))]
    for g, act1, act2 in product(guards, ("a1", "b1"), ("a1", "b1")):
        s = NatStrategy(agent="1", kind=MEMORYLESS, pairs=((g, act1), (Top(), act2)))
        assert select_action(m, ["q0", "q1"], s, we=we) == select_action(m, ["q0", "q2"], s, we=we)


def test_validate_rejects_foreign_knowledge():
    m = load_fixture("G2")
    s = NatStrategy(agent="1", kind=MEMORYLESS, pairs=((Know("2", Atom("p")), "a1"), (Top(), "b1")))
    with pytest.raises(StrategyError):
        validate_strategy(m, s)


def test_validate_rejects_illegal_matching_action():
    text = PING.replace("legal: 1 q1 a b", "legal: 1 q1 b") + "obs: 1 {q0} {q1}\n"
    text = text.replace("trans: q1 (a) -> q0\n", "")
    m = parse_model(text)
    s = NatStrategy(agent="1", kind=MEMORYLESS, pairs=((P1, "a"), (Top(), "b")))
    with pytest.raises(StrategyError):
        validate_strategy(m, s)  # a is not legal at q1 where the guard fires


def test_enumeration_counts():
    m = parse_model(PING)
    pool = [Top()]
    constants = list(enumerate_strategies(m, "1", 1, pool, kind=MEMORYLESS))
    assert len(constants) == 2
    assert all(len(s.pairs) == 1 for s in constants)

    pool = [Top(), P1]
    six = list(enumerate_strategies(m, "1", 2, pool, kind=MEMORYLESS))
    assert len(six) == 6
    assert len(list(enumerate_strategies(m, "1", 0, pool, kind=MEMORYLESS))) == 0

    # the recall space mirrors the memoryless one: embedded guards and the
    # star catch-all are billed like their memoryless counterparts
    six_recall = list(enumerate_strategies(m, "1", 2, pool, kind=RECALL))
    assert len(six_recall) == 6
    assert all(s.kind == RECALL for s in six_recall)


def test_enumeration_unique_and_deterministic():
    m = parse_model(PING)
    pool = [Top(), P1, Know("1", Atom("m"))]
    first = [s.describe() for s in enumerate_strategies(m, "1", 3, pool, kind=MEMORYLESS)]
    second = [s.describe() for s in enumerate_strategies(m, "1", 3, pool, kind=MEMORYLESS)]
    assert first == second
    assert len(first) == len(set(first))


def test_enumeration_filters_foreign_guards():
    m = load_fixture("G2")
    pool = [Top(), Know("2", Atom("p"))]
    for s in enumerate_strategies(m, "1", 5, pool, kind=MEMORYLESS):
        assert len(s.pairs) == 1  # the foreign guard is unusable for agent 1


def test_enumeration_empty_pool():
    m = parse_model(PING)
    with pytest.raises(EmptyPoolError):
        list(enumerate_strategies(m, "1", 2, [], kind=MEMORYLESS))


def test_regex_parsing():
    r = parse_regex("{top}*.{K[1](p)}")
    assert r == Concat(Star(TOP_L), Letter(P1))
    r2 = parse_regex("({K[1](p)}|{top}).{top}*")
    assert r2 == Concat(Choice(Letter(P1), TOP_L), Star(TOP_L))
    assert parse_regex(str(r)) == r
    assert parse_regex(str(r2)) == r2


def test_strategy_file_round_trip():
    m = parse_model(PING)
    text = """
strategy walker for 1 kind memoryless:
guard K[1](p) -> a
guard top -> b

strategy patient for 1 kind recall:
guard {top}*.{K[1](p)} -> a
guard {top}* -> b
"""
    bundle = parse_strategies(text)
    assert set(bundle) == {"walker", "patient"}
    assert bundle["walker"].kind == MEMORYLESS
    assert bundle["patient"].kind == RECALL
    again = parse_strategies(serialize_strategies(bundle.values()))
    for name in bundle:
        assert again[name].pairs == bundle[name].pairs


def test_pool_file():
    pool = parse_pool("top\nK[1](p)\n{top}*.{K[1](p)}\n")
    assert pool[0] == Top()
    assert pool[1] == P1
    assert pool[2] == Concat(Star(TOP_L), Letter(P1))
    with pytest.raises(EmptyPoolError):
        parse_pool("# nothing\n")
