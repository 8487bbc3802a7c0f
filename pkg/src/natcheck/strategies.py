"""Natural strategies: guarded action lists, regex guards and enumeration.

A natural strategy is an ordered list of (guard, action) pairs ending in a
catch-all pair.  Memoryless strategies guard with plain weighted epistemic
formulas evaluated at the current state; recall strategies guard with
regular expressions over such formulas, checked against the whole history.

History consistency follows the regular-language reading: a history h is
consistent with a regex r iff some letter word of length |h| in L(r) has
every letter evaluate to exactly 1 at its position.  Because several
letters may hold at the same state, the runtime feeds the *set* of true
letters into a nondeterministic automaton and advances all branches at
once; subset states are memoised so repeated runs are cheap and usable as
lasso configurations.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Sequence, Union

from .errors import EmptyPoolError, ParseError, StrategyError
from .guards import (
    Atom,
    Fun,
    Know,
    Lit,
    Top,
    WEFormula,
    WeEvaluator,
    cached_hash,
    knowledge_agents_at_top,
    parse_we,
    we_size,
)
from .values import FuncLib, STANDARD_LIB
from .wcgs import WCGS


# -- guard regexes ----------------------------------------------------------


@cached_hash
@dataclass(frozen=True)
class Letter:
    formula: WEFormula

    def __str__(self):
        return "{" + str(self.formula) + "}"


@cached_hash
@dataclass(frozen=True)
class Concat:
    left: "GuardRegex"
    right: "GuardRegex"

    def __str__(self):
        return f"{_wrap(self.left, (Choice,))}.{_wrap(self.right, (Choice, Concat))}"


@cached_hash
@dataclass(frozen=True)
class Choice:
    left: "GuardRegex"
    right: "GuardRegex"

    def __str__(self):
        return f"{self.left}|{_wrap(self.right, (Choice,))}"


@cached_hash
@dataclass(frozen=True)
class Star:
    body: "GuardRegex"

    def __str__(self):
        return f"{_wrap(self.body, (Choice, Concat))}*"


GuardRegex = Union[Letter, Concat, Choice, Star]

TOP_STAR = Star(Letter(Top()))


def _wrap(r: GuardRegex, grouped: tuple) -> str:
    text = str(r)
    return f"({text})" if isinstance(r, grouped) else text


def regex_size(r: GuardRegex) -> int:
    """Symbol count: letters by their guard size, each operator counts 1."""
    if isinstance(r, Letter):
        return we_size(r.formula)
    if isinstance(r, Star):
        return 1 + regex_size(r.body)
    if isinstance(r, (Concat, Choice)):
        return 1 + regex_size(r.left) + regex_size(r.right)
    raise TypeError(f"not a guard regex: {r!r}")


def regex_letters(r: GuardRegex) -> list:
    """Distinct letter formulas in structural order of first occurrence."""
    out: list = []

    def walk(node):
        if isinstance(node, Letter):
            if node.formula not in out:
                out.append(node.formula)
        elif isinstance(node, Star):
            walk(node.body)
        else:
            walk(node.left)
            walk(node.right)

    walk(r)
    return out


def parse_regex(text: str, lib: Optional[FuncLib] = None, source: Optional[str] = None) -> GuardRegex:
    """Parse ``{we}`` letters combined with ``.`` (concat), ``|`` (choice),
    postfix ``*`` and parentheses."""
    lib = lib or STANDARD_LIB
    pos = 0
    n = len(text)

    def skip_ws(i):
        while i < n and text[i].isspace():
            i += 1
        return i

    def parse_choice(i):
        i, left = parse_concat(i)
        i = skip_ws(i)
        while i < n and text[i] == "|":
            i, right = parse_concat(i + 1)
            left = Choice(left, right)
            i = skip_ws(i)
        return i, left

    def parse_concat(i):
        i, left = parse_star(i)
        i = skip_ws(i)
        while i < n and text[i] == ".":
            i, right = parse_star(i + 1)
            left = Concat(left, right)
            i = skip_ws(i)
        return i, left

    def parse_star(i):
        i, node = parse_atom(i)
        i = skip_ws(i)
        while i < n and text[i] == "*":
            node = Star(node)
            i = skip_ws(i + 1)
        return i, node

    def parse_atom(i):
        i = skip_ws(i)
        if i >= n:
            raise ParseError("unexpected end of regex", col=i + 1, source=source)
        ch = text[i]
        if ch == "{":
            depth = 1
            j = i + 1
            while j < n and depth:
                if text[j] == "{":
                    depth += 1
                elif text[j] == "}":
                    depth -= 1
                j += 1
            if depth:
                raise ParseError("unbalanced '{' in regex", col=i + 1, source=source)
            inner = text[i + 1 : j - 1]
            return j, Letter(parse_we(inner, lib=lib, source=source))
        if ch == "(":
            j, node = parse_choice(i + 1)
            j = skip_ws(j)
            if j >= n or text[j] != ")":
                raise ParseError("unbalanced '(' in regex", col=i + 1, source=source)
            return j + 1, node
        raise ParseError(f"unexpected character {ch!r} in regex", col=i + 1, source=source)

    i, node = parse_choice(0)
    i = skip_ws(i)
    if i != n:
        raise ParseError(f"trailing regex input {text[i:]!r}", col=i + 1, source=source)
    return node


# -- automata ---------------------------------------------------------------


class GuardAutomaton:
    """Automaton over letter identifiers recognising a guard regex.

    Built as a Thompson-style NFA; at run time the current subset of NFA
    states is advanced by the union over all letters that evaluate to 1 at
    the current history position.  Transitions on (subset, true-letter-set)
    pairs are memoised, which makes the run deterministic in the subset
    construction sense and the subset states usable as configuration
    components for lasso detection.
    """

    def __init__(self, regex: GuardRegex):
        self.regex = regex
        self.letters = regex_letters(regex)
        self._letter_index = {f: i for i, f in enumerate(self.letters)}
        self._edges: list[tuple[int, int, int]] = []  # (src, letter, dst)
        self._eps: list[tuple[int, int]] = []
        self._n_states = 0
        start, accept = self._build(regex)
        self.accept_state = accept
        self._out: dict[int, list[tuple[int, int]]] = {}
        for src, letter, dst in self._edges:
            self._out.setdefault(src, []).append((letter, dst))
        self._eps_map: dict[int, list[int]] = {}
        for src, dst in self._eps:
            self._eps_map.setdefault(src, []).append(dst)
        self._eps_closure_cache: dict = {}
        self._step_cache: dict = {}
        self.initial = self._closure(frozenset([start]))

    def _new_state(self) -> int:
        self._n_states += 1
        return self._n_states - 1

    def _build(self, r: GuardRegex) -> tuple[int, int]:
        if isinstance(r, Letter):
            s, t = self._new_state(), self._new_state()
            self._edges.append((s, self._letter_index[r.formula], t))
            return s, t
        if isinstance(r, Concat):
            s1, t1 = self._build(r.left)
            s2, t2 = self._build(r.right)
            self._eps.append((t1, s2))
            return s1, t2
        if isinstance(r, Choice):
            s, t = self._new_state(), self._new_state()
            s1, t1 = self._build(r.left)
            s2, t2 = self._build(r.right)
            self._eps += [(s, s1), (s, s2), (t1, t), (t2, t)]
            return s, t
        if isinstance(r, Star):
            s, t = self._new_state(), self._new_state()
            s1, t1 = self._build(r.body)
            self._eps += [(s, s1), (t1, s1), (s, t), (t1, t)]
            return s, t
        raise TypeError(f"not a guard regex: {r!r}")

    def _closure(self, states: frozenset) -> frozenset:
        hit = self._eps_closure_cache.get(states)
        if hit is not None:
            return hit
        seen = set(states)
        stack = list(states)
        while stack:
            s = stack.pop()
            for dst in self._eps_map.get(s, ()):
                if dst not in seen:
                    seen.add(dst)
                    stack.append(dst)
        out = frozenset(seen)
        self._eps_closure_cache[states] = out
        return out

    def step(self, subset: frozenset, true_letters: frozenset) -> frozenset:
        """Advance by one history position given the set of true letter ids."""
        key = (subset, true_letters)
        hit = self._step_cache.get(key)
        if hit is not None:
            return hit
        nxt = set()
        for s in subset:
            for letter, dst in self._out.get(s, ()):
                if letter in true_letters:
                    nxt.add(dst)
        out = self._closure(frozenset(nxt))
        self._step_cache[key] = out
        return out

    def is_accepting(self, subset: frozenset) -> bool:
        return self.accept_state in subset

    def run(self, true_letter_sets: Iterable[frozenset]) -> frozenset:
        subset = self.initial
        for tl in true_letter_sets:
            subset = self.step(subset, tl)
        return subset

    def accepts_word(self, word: Sequence[WEFormula]) -> bool:
        """Membership of an explicit letter word (used for language tests)."""
        subset = self.initial
        for f in word:
            if f not in self._letter_index:
                return False
            subset = self.step(subset, frozenset([self._letter_index[f]]))
        return self.is_accepting(subset)

    def live_states(self) -> int:
        """Number of distinct reachable subset states over all letter sets."""
        seen = {self.initial}
        frontier = [self.initial]
        all_sets = [
            frozenset(c) for k in range(len(self.letters) + 1)
            for c in itertools.combinations(range(len(self.letters)), k)
        ]
        while frontier:
            s = frontier.pop()
            for tl in all_sets:
                t = self.step(s, tl)
                if t not in seen:
                    seen.add(t)
                    frontier.append(t)
        return len(seen)


_automaton_cache: dict = {}


def compile_guard(r: GuardRegex) -> GuardAutomaton:
    """Compile a regex guard; structurally equal regexes share automata."""
    auto = _automaton_cache.get(r)
    if auto is None:
        auto = GuardAutomaton(r)
        _automaton_cache[r] = auto
    return auto


def consistent(m: WCGS, history: Sequence[str], r: GuardRegex, we: Optional[WeEvaluator] = None) -> bool:
    """True iff some letter word of L(r) of length |history| holds positionwise."""
    we = we or WeEvaluator(m)
    auto = compile_guard(r)
    subset = auto.initial
    for q in history:
        true_letters = frozenset(
            i for i, f in enumerate(auto.letters) if we.value(q, f) == 1
        )
        subset = auto.step(subset, true_letters)
    return auto.is_accepting(subset)


# -- strategies ---------------------------------------------------------------

MEMORYLESS = "memoryless"
RECALL = "recall"


@cached_hash
@dataclass(frozen=True)
class NatStrategy:
    """Ordered guarded action list for one agent.

    ``pairs`` holds (guard, action) with WE-formula guards for memoryless
    strategies and regex guards for recall strategies.  The final pair is
    the mandated catch-all: (top, act) respectively (top*, act).
    """

    agent: str
    kind: str
    pairs: tuple
    name: Optional[str] = None

    def __post_init__(self):
        if self.kind not in (MEMORYLESS, RECALL):
            raise StrategyError(f"unknown strategy kind {self.kind!r}")
        if not self.pairs:
            raise StrategyError("strategy needs at least the final catch-all pair")
        final_guard = self.pairs[-1][0]
        if self.kind == MEMORYLESS:
            for g, _ in self.pairs:
                if not isinstance(g, (Top, Atom, Lit, Know, Fun)):
                    raise StrategyError("memoryless guards must be plain WE formulas")
            if not isinstance(final_guard, Top):
                raise StrategyError("memoryless strategies must end with the pair (top, act)")
        else:
            for g, _ in self.pairs:
                if not isinstance(g, (Letter, Concat, Choice, Star)):
                    raise StrategyError("recall guards must be regexes over WE formulas")
            if final_guard != TOP_STAR:
                raise StrategyError("recall strategies must end with the pair (top*, act)")

    def describe(self) -> str:
        lines = [f"strategy {self.name or '<anonymous>'} for {self.agent} kind {self.kind}:"]
        for g, act in self.pairs:
            lines.append(f"guard {g} -> {act}")
        return "\n".join(lines)


def compl(s: NatStrategy) -> int:
    """Complexity of a strategy: total symbol count of its guards."""
    if s.kind == MEMORYLESS:
        return sum(we_size(g) for g, _ in s.pairs)
    return sum(regex_size(g) for g, _ in s.pairs)


def promote_to_recall(s: NatStrategy) -> NatStrategy:
    """Embed a memoryless strategy as the equivalent recall strategy.

    Each leading guard g becomes top*.{g} ("the current state satisfies g")
    and the final pair becomes (top*, act); behaviour is unchanged.
    """
    if s.kind == RECALL:
        return s
    new_pairs = []
    for g, act in s.pairs[:-1]:
        new_pairs.append((Concat(TOP_STAR, Letter(g)), act))
    new_pairs.append((TOP_STAR, s.pairs[-1][1]))
    return NatStrategy(agent=s.agent, kind=RECALL, pairs=tuple(new_pairs), name=s.name)


def validate_strategy(m: WCGS, s: NatStrategy, we: Optional[WeEvaluator] = None) -> None:
    """Check a strategy against a model: uniform guards and legal actions.

    Guards may only test the owner's knowledge at the outer layer; this is
    what guarantees identical decisions on observationally equivalent
    histories.  The final action must be legal in every state; a leading
    pair's action must be legal wherever its guard can complete a match.
    """
    we = we or WeEvaluator(m)
    for g, _ in s.pairs:
        formulas = [g] if s.kind == MEMORYLESS else regex_letters(g)
        for f in formulas:
            foreign = knowledge_agents_at_top(f) - {s.agent}
            if foreign:
                raise StrategyError(
                    f"guard {f} tests knowledge of {sorted(foreign)} at the outer layer; "
                    f"only agent {s.agent!r} may appear there"
                )
    final_action = s.pairs[-1][1]
    for q in m.states:
        if final_action not in m.legal_actions(s.agent, q):
            raise StrategyError(
                f"final action {final_action!r} is not legal at state {q!r}"
            )
    if s.kind == MEMORYLESS:
        for g, act in s.pairs[:-1]:
            for q in m.states:
                if we.value(q, g) == 1 and act not in m.legal_actions(s.agent, q):
                    raise StrategyError(
                        f"action {act!r} of guard {g} is not legal at matching state {q!r}"
                    )
    else:
        for g, act in s.pairs[:-1]:
            for q in _match_end_states(m, g, we):
                if act not in m.legal_actions(s.agent, q):
                    raise StrategyError(
                        f"action {act!r} of guard {g} is not legal at matching state {q!r}"
                    )


def _match_end_states(m: WCGS, r: GuardRegex, we: WeEvaluator) -> set:
    """States at which some history consistent with r can end.

    Product reachability of (automaton subset x model state); histories may
    start at any state.
    """
    auto = compile_guard(r)
    true_sets = {
        q: frozenset(i for i, f in enumerate(auto.letters) if we.value(q, f) == 1)
        for q in m.states
    }
    seen = set()
    frontier = []
    for q in m.states:
        cfg = (auto.step(auto.initial, true_sets[q]), q)
        if cfg not in seen:
            seen.add(cfg)
            frontier.append(cfg)
    ends = set()
    while frontier:
        subset, q = frontier.pop()
        if auto.is_accepting(subset):
            ends.add(q)
        for profile in m.legal_profiles(q):
            q2 = m.successor(q, profile)
            cfg = (auto.step(subset, true_sets[q2]), q2)
            if cfg not in seen:
                seen.add(cfg)
                frontier.append(cfg)
    return ends


def match_index(m: WCGS, history: Sequence[str], s: NatStrategy, we: Optional[WeEvaluator] = None) -> int:
    """1-based index of the first pair whose guard is consistent with the
    history and whose action is legal at the final state."""
    we = we or WeEvaluator(m)
    last = history[-1]
    for i, (g, act) in enumerate(s.pairs, start=1):
        if act not in m.legal_actions(s.agent, last):
            continue
        if s.kind == MEMORYLESS:
            if we.value(last, g) == 1:
                return i
        else:
            if consistent(m, history, g, we=we):
                return i
    raise StrategyError("no pair matched; the final catch-all should make this impossible")


def select_action(m: WCGS, history: Sequence[str], s: NatStrategy, we: Optional[WeEvaluator] = None) -> str:
    return s.pairs[match_index(m, history, s, we=we) - 1][1]


class StrategyRun:
    """Incremental matcher used while unrolling plays.

    Feeds each visited state to all pair automata of a recall strategy (or
    just remembers the current state for memoryless ones) and reports the
    matched action.  The tuple of automaton subsets is the strategy's
    contribution to a play configuration.
    """

    def __init__(self, m: WCGS, s: NatStrategy, we: WeEvaluator):
        self.m = m
        self.s = s
        self.we = we
        self.current: Optional[str] = None
        if s.kind == RECALL:
            self.autos = [compile_guard(g) for g, _ in s.pairs]
            self.subsets = [a.initial for a in self.autos]
            self._true_cache: dict = {}
        else:
            self.autos = []
            self.subsets = []
            self._action_cache: dict = {}

    def feed(self, q: str):
        self.current = q
        if self.s.kind == RECALL:
            new_subsets = []
            for auto, subset in zip(self.autos, self.subsets):
                key = (id(auto), q)
                true = self._true_cache.get(key)
                if true is None:
                    true = frozenset(
                        i for i, f in enumerate(auto.letters) if self.we.value(q, f) == 1
                    )
                    self._true_cache[key] = true
                new_subsets.append(auto.step(subset, true))
            self.subsets = new_subsets

    def config(self):
        if self.s.kind == RECALL:
            return tuple(self.subsets)
        return ()

    def action(self) -> str:
        q = self.current
        if self.s.kind == MEMORYLESS:
            hit = self._action_cache.get(q)
            if hit is not None:
                return hit
            act = None
            legal = self.m.legal_actions(self.s.agent, q)
            for g, a in self.s.pairs:
                if a in legal and self.we.value(q, g) == 1:
                    act = a
                    break
            if act is None:
                raise StrategyError("memoryless strategy failed to match")
            self._action_cache[q] = act
            return act
        legal = self.m.legal_actions(self.s.agent, q)
        for (g, a), auto, subset in zip(self.s.pairs, self.autos, self.subsets):
            if a in legal and auto.is_accepting(subset):
                return a
        raise StrategyError("recall strategy failed to match")


# -- enumeration --------------------------------------------------------------


def enumerate_strategies(
    m: WCGS,
    agent: str,
    k: int,
    pool: Sequence,
    kind: str = MEMORYLESS,
    we: Optional[WeEvaluator] = None,
) -> Iterator[NatStrategy]:
    """All strategies with guards from the pool and complexity budget k.

    The pool is an ordered list of WE formulas (plus, for recall, optional
    explicit regexes).  Pool guards testing another agent's knowledge at
    the outer layer are skipped: they could not produce uniform strategies
    for this agent.  Guard lists never repeat an entry (a later copy would
    be unreachable), and each emitted strategy is unique.

    Budget accounting charges a WE guard its formula size under both kinds:
    under recall the guard is embedded as top*.{g} and the catch-all as
    (top*, act), and this mechanical dressing is not billed, so the recall
    quantifier ranges over exactly the embeddings of the memoryless space
    (explicit regex pool entries are billed structurally).  The emitted
    order is deterministic: by number of leading pairs, then pool order,
    then action order.
    """
    if not pool:
        raise EmptyPoolError()
    if k < 1:
        return
    we = we or WeEvaluator(m)

    entries = []  # (guard-for-kind, cost, fire_states)
    seen_entries = set()
    for entry in pool:
        if entry in seen_entries:
            continue
        seen_entries.add(entry)
        if isinstance(entry, (Letter, Concat, Choice, Star)):
            if kind != RECALL or entry == TOP_STAR:
                continue
            letters = regex_letters(entry)
            if any(knowledge_agents_at_top(f) - {agent} for f in letters):
                continue
            entries.append((entry, regex_size(entry), _match_end_states(m, entry, we)))
        else:
            if isinstance(entry, Top):
                continue  # the catch-all covers it; a leading copy would shadow it
            if knowledge_agents_at_top(entry) - {agent}:
                continue
            cost = we_size(entry)
            fire = {q for q in m.states if we.value(q, entry) == 1}
            if kind == RECALL:
                entries.append((Concat(TOP_STAR, Letter(entry)), cost, fire))
            else:
                entries.append((entry, cost, fire))

    final_actions = [
        a for a in m.actions
        if all(a in m.legal_actions(agent, q) for q in m.states)
    ]
    final_guard = TOP_STAR if kind == RECALL else Top()

    def actions_for(fire_states):
        return [
            a for a in m.actions
            if all(a in m.legal_actions(agent, q) for q in fire_states)
        ]

    per_entry_actions = [actions_for(fire) for _, _, fire in entries]

    max_leading = len(entries)
    for n_leading in range(0, max_leading + 1):
        for idxs in itertools.permutations(range(len(entries)), n_leading):
            cost = 1 + sum(entries[i][1] for i in idxs)
            if cost > k:
                continue
            action_spaces = [per_entry_actions[i] for i in idxs]
            for acts in itertools.product(*action_spaces):
                for final_act in final_actions:
                    pairs = tuple(
                        (entries[i][0], a) for i, a in zip(idxs, acts)
                    ) + ((final_guard, final_act),)
                    yield NatStrategy(agent=agent, kind=kind, pairs=pairs)


# -- text formats --------------------------------------------------------------


def parse_pool(text: str, lib: Optional[FuncLib] = None, source: Optional[str] = None) -> list:
    """Guard pool file: one guard per line, WE formula or regex syntax."""
    lib = lib or STANDARD_LIB
    pool = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if any(ch in line for ch in "{}|*"):
            pool.append(parse_regex(line, lib=lib, source=source))
        else:
            pool.append(parse_we(line, lib=lib, source=source))
    if not pool:
        raise EmptyPoolError()
    return pool


def parse_strategies(text: str, lib: Optional[FuncLib] = None, source: Optional[str] = None) -> dict:
    """Strategy bundle file.

    Blocks of the form::

        strategy <name> for <agent> kind <memoryless|recall>:
        guard <we-or-regex> -> <action>
        ...
    """
    lib = lib or STANDARD_LIB
    strategies: dict[str, NatStrategy] = {}
    current: Optional[dict] = None

    def finish():
        nonlocal current
        if current is None:
            return
        if not current["pairs"]:
            raise ParseError(f"strategy {current['name']!r} has no guard lines", source=source)
        strategies[current["name"]] = NatStrategy(
            agent=current["agent"], kind=current["kind"],
            pairs=tuple(current["pairs"]), name=current["name"],
        )
        current = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("strategy "):
            finish()
            head = line[len("strategy "):].rstrip(":").split()
            if len(head) != 5 or head[1] != "for" or head[3] != "kind":
                raise ParseError(
                    "expected: strategy <name> for <agent> kind <memoryless|recall>:",
                    line=lineno, source=source,
                )
            name, _, agent, _, kind = head
            if kind not in (MEMORYLESS, RECALL):
                raise ParseError(f"unknown kind {kind!r}", line=lineno, source=source)
            current = {"name": name, "agent": agent, "kind": kind, "pairs": []}
        elif line.startswith("guard "):
            if current is None:
                raise ParseError("guard line outside a strategy block", line=lineno, source=source)
            body = line[len("guard "):]
            if "->" not in body:
                raise ParseError("guard line needs '-> <action>'", line=lineno, source=source)
            guard_text, action = body.rsplit("->", 1)
            guard_text = guard_text.strip()
            action = action.strip()
            if not action:
                raise ParseError("missing action after '->'", line=lineno, source=source)
            if current["kind"] == MEMORYLESS:
                guard = parse_we(guard_text, lib=lib, source=source)
            else:
                guard = parse_regex(guard_text, lib=lib, source=source)
            current["pairs"].append((guard, action))
        else:
            raise ParseError(f"unexpected line {raw!r}", line=lineno, source=source)
    finish()
    return strategies


def serialize_strategies(strategies: Iterable[NatStrategy]) -> str:
    return "\n\n".join(s.describe() for s in strategies) + "\n"
