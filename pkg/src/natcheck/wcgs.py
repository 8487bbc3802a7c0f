"""Weighted concurrent game structures: storage, validation and text format.

A structure holds a finite set of states, per-agent legal actions, a
deterministic transition function over joint action profiles, rational
proposition weights in [-1, 1], a nonempty set of initial states and one
observation partition per agent.  Structures are immutable after
construction and safe to share between concurrent evaluations.

The text format is line oriented::

    # comment
    agents: 1 2
    actions: a1 b1 a2 b2
    states: q0 q1 q2
    init: q0
    legal: 1 q0 a1 b1
    trans: q0 (a1,a2) -> q1        # `_` in a slot matches any legal action
    weight: q1 p 1                 # omitted pairs default to -1
    obs: 1 {q1 q2}                 # unlisted states form singleton classes

Identifiers may use any characters except whitespace, ``(){}#``.
"""

from __future__ import annotations

import re
from fractions import Fraction
from itertools import product
from typing import Callable, Iterable, Mapping, Optional, Sequence

from .errors import (
    IllegalActionError,
    ModelError,
    NonUniformLegalityError,
    ParseError,
    PartialTransitionError,
    UnknownPropositionError,
    WeightOutOfRangeError,
)
from .values import MINUS_ONE, STANDARD_LIB, FuncLib, format_rational, parse_rational

Profile = tuple  # actions in agent declaration order

_NAME_RE = re.compile(r"^[^\s(){}#]+$")
_TRANS_RE = re.compile(r"^(\S+)\s*\(([^)]*)\)\s*->\s*(\S+)$")


class WCGS:
    """Immutable weighted concurrent game structure."""

    def __init__(
        self,
        agents: Sequence[str],
        actions: Sequence[str],
        states: Sequence[str],
        legal: Mapping[tuple[str, str], Sequence[str]],
        transitions: Optional[Mapping[tuple[str, Profile], str]],
        weights: Mapping[tuple[str, str], Fraction],
        props: Sequence[str],
        initial: Sequence[str],
        obs: Mapping[str, Sequence[frozenset]],
        transition_fn: Optional[Callable[[str, Profile], str]] = None,
        lib: Optional[FuncLib] = None,
        validate: bool = True,
    ):
        self.agents = tuple(agents)
        self.actions = tuple(actions)
        self.states = tuple(states)
        self.legal = {k: tuple(v) for k, v in legal.items()}
        self.transitions = dict(transitions) if transitions is not None else None
        self.transition_fn = transition_fn
        self.weights = dict(weights)
        self.props = tuple(props)
        self.initial = tuple(initial)
        self.obs = {a: tuple(classes) for a, classes in obs.items()}
        self.lib = lib if lib is not None else STANDARD_LIB
        self._obs_of = {
            (a, q): cls for a, classes in self.obs.items() for cls in classes for q in cls
        }
        self._state_set = frozenset(self.states)
        if validate:
            self._validate()

    # -- validation ------------------------------------------------------

    def _validate(self):
        if not self.states:
            raise ModelError("model has no states")
        if not self.agents:
            raise ModelError("model has no agents")
        if not self.initial:
            raise ModelError("model has no initial states")
        for q in self.initial:
            if q not in self._state_set:
                raise ModelError(f"initial state {q!r} is not a declared state")
        for a in self.agents:
            for q in self.states:
                acts = self.legal.get((a, q))
                if not acts:
                    raise ModelError(f"no legal actions declared for agent {a!r} at state {q!r}")
                for act in acts:
                    if act not in self.actions:
                        raise ModelError(f"legal action {act!r} of agent {a!r} is undeclared")
        self._validate_obs()
        for (q, p), w in self.weights.items():
            if not (MINUS_ONE <= w <= 1):
                raise WeightOutOfRangeError(q, p, w)
        if self.transitions is not None:
            for q in self.states:
                for profile in self.legal_profiles(q):
                    if (q, profile) not in self.transitions:
                        raise PartialTransitionError(q, profile)
            for (q, profile), q2 in self.transitions.items():
                if q2 not in self._state_set:
                    raise ModelError(f"transition target {q2!r} is not a declared state")

    def _validate_obs(self):
        for a in self.agents:
            classes = self.obs.get(a)
            if classes is None:
                raise ModelError(f"no observation partition for agent {a!r}")
            seen = set()
            for cls in classes:
                if seen & cls:
                    raise ModelError(f"observation classes of agent {a!r} overlap")
                seen |= cls
                legal_sets = {self.legal.get((a, q)) for q in cls}
                if len(legal_sets) > 1:
                    raise NonUniformLegalityError(a, cls)
            if seen != self._state_set:
                missing = self._state_set - seen
                raise ModelError(f"observation partition of agent {a!r} misses states {sorted(missing)}")

    # -- queries ---------------------------------------------------------

    def legal_actions(self, agent: str, q: str) -> tuple:
        return self.legal[(agent, q)]

    def legal_profiles(self, q: str) -> Iterable[Profile]:
        return product(*(self.legal[(a, q)] for a in self.agents))

    def successor(self, q: str, profile) -> str:
        """Deterministic successor of q under a joint action profile.

        ``profile`` is either a tuple in agent declaration order or a
        mapping from agent to action.
        """
        if isinstance(profile, Mapping):
            profile = tuple(profile[a] for a in self.agents)
        else:
            profile = tuple(profile)
        for a, act in zip(self.agents, profile):
            if act not in self.legal[(a, q)]:
                raise IllegalActionError(a, act, q)
        if self.transitions is not None:
            try:
                return self.transitions[(q, profile)]
            except KeyError:
                raise PartialTransitionError(q, profile)
        return self.transition_fn(q, profile)

    def obs_class(self, agent: str, q: str) -> frozenset:
        """The block of ``agent``'s observation partition containing q."""
        return self._obs_of[(agent, q)]

    def weight(self, q: str, prop: str) -> Fraction:
        if prop not in self.props:
            raise UnknownPropositionError(prop)
        return self.weights.get((q, prop), MINUS_ONE)

    def reachable_states(self) -> tuple:
        """States reachable from some initial state via legal profiles."""
        seen = dict.fromkeys(self.initial)
        frontier = list(self.initial)
        while frontier:
            q = frontier.pop()
            for profile in self.legal_profiles(q):
                q2 = self.successor(q, profile)
                if q2 not in seen:
                    seen[q2] = None
                    frontier.append(q2)
        order = {q: i for i, q in enumerate(self.states)}
        return tuple(sorted(seen, key=order.__getitem__))


def is_history(m: WCGS, states: Sequence[str]) -> bool:
    """True iff consecutive states are connected by some legal profile."""
    if not states:
        return False
    for q, q2 in zip(states, states[1:]):
        if not any(m.successor(q, pr) == q2 for pr in m.legal_profiles(q)):
            return False
    return True


# -- text format ----------------------------------------------------------


def parse_model(text: str, source: Optional[str] = None) -> WCGS:
    """Parse and validate a model file; raises located diagnostics."""
    sections: dict[str, list[tuple[int, str]]] = {
        "agents": [], "actions": [], "states": [], "init": [],
        "legal": [], "trans": [], "weight": [], "obs": [],
    }
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" not in line:
            raise ParseError(f"expected 'section: ...', got {raw!r}", line=lineno, source=source)
        key, rest = line.split(":", 1)
        key = key.strip()
        if key not in sections:
            raise ParseError(f"unknown section {key!r}", line=lineno, source=source)
        sections[key].append((lineno, rest.strip()))

    def single_list(name: str) -> tuple[int, list[str]]:
        entries = sections[name]
        if not entries:
            raise ParseError(f"missing '{name}:' line", source=source)
        if len(entries) > 1:
            raise ParseError(f"duplicate '{name}:' line", line=entries[1][0], source=source)
        lineno, rest = entries[0]
        names = rest.split()
        for n in names:
            if not _NAME_RE.match(n):
                raise ParseError(f"bad identifier {n!r}", line=lineno, source=source)
        if len(set(names)) != len(names):
            raise ParseError(f"duplicate names in '{name}:'", line=lineno, source=source)
        return lineno, names

    _, agents = single_list("agents")
    _, actions = single_list("actions")
    _, states = single_list("states")
    init_line, init = single_list("init")
    state_set = set(states)
    for q in init:
        if q not in state_set:
            raise ParseError(f"initial state {q!r} undeclared", line=init_line, source=source)

    legal: dict[tuple[str, str], list[str]] = {}
    for lineno, rest in sections["legal"]:
        parts = rest.split()
        if len(parts) < 3:
            raise ParseError("legal line needs: <agent> <state> <action...>", line=lineno, source=source)
        agent, q, acts = parts[0], parts[1], parts[2:]
        if agent not in agents:
            raise ParseError(f"unknown agent {agent!r}", line=lineno, source=source)
        if q not in state_set:
            raise ParseError(f"unknown state {q!r}", line=lineno, source=source)
        for act in acts:
            if act not in actions:
                raise ParseError(f"unknown action {act!r}", line=lineno, source=source)
        legal.setdefault((agent, q), [])
        for act in acts:
            if act not in legal[(agent, q)]:
                legal[(agent, q)].append(act)

    transitions: dict[tuple[str, Profile], str] = {}
    trans_lines: dict[tuple[str, Profile], int] = {}
    for lineno, rest in sections["trans"]:
        m = _TRANS_RE.match(rest)
        if not m:
            raise ParseError("trans line needs: <state> (<act>,...) -> <state>", line=lineno, source=source)
        q, profile_text, q2 = m.group(1), m.group(2), m.group(3)
        if q not in state_set or q2 not in state_set:
            raise ParseError(f"unknown state in transition {rest!r}", line=lineno, source=source)
        slots = [s.strip() for s in profile_text.split(",")]
        if len(slots) != len(agents):
            raise ParseError(
                f"profile has {len(slots)} slots for {len(agents)} agents", line=lineno, source=source
            )
        choices = []
        for agent, slot in zip(agents, slots):
            if slot == "_":
                acts = legal.get((agent, q))
                if not acts:
                    raise ParseError(
                        f"wildcard needs legal actions of agent {agent!r} at {q!r} declared first",
                        line=lineno, source=source,
                    )
                choices.append(tuple(acts))
            else:
                if slot not in actions:
                    raise ParseError(f"unknown action {slot!r}", line=lineno, source=source)
                choices.append((slot,))
        for profile in product(*choices):
            prev = transitions.get((q, profile))
            if prev is not None and prev != q2:
                raise ParseError(
                    f"conflicting transition for {q!r} {profile} (also line {trans_lines[(q, profile)]})",
                    line=lineno, source=source,
                )
            transitions[(q, profile)] = q2
            trans_lines[(q, profile)] = lineno

    weights: dict[tuple[str, str], Fraction] = {}
    props: list[str] = []
    for lineno, rest in sections["weight"]:
        parts = rest.split()
        if len(parts) != 3:
            raise ParseError("weight line needs: <state> <prop> <rational>", line=lineno, source=source)
        q, p, lit = parts
        if q not in state_set:
            raise ParseError(f"unknown state {q!r}", line=lineno, source=source)
        if not _NAME_RE.match(p):
            raise ParseError(f"bad proposition name {p!r}", line=lineno, source=source)
        w = parse_rational(lit, source=source, line=lineno)
        if not (MINUS_ONE <= w <= 1):
            raise WeightOutOfRangeError(q, p, w)
        if p not in props:
            props.append(p)
        weights[(q, p)] = w

    obs: dict[str, list[frozenset]] = {}
    for lineno, rest in sections["obs"]:
        parts = rest.split(None, 1)
        if len(parts) != 2:
            raise ParseError("obs line needs: <agent> {<states>} ...", line=lineno, source=source)
        agent, blocks_text = parts
        if agent not in agents:
            raise ParseError(f"unknown agent {agent!r}", line=lineno, source=source)
        blocks = re.findall(r"\{([^}]*)\}", blocks_text)
        if not blocks or re.sub(r"\{[^}]*\}|\s", "", blocks_text):
            raise ParseError("obs classes must be brace-delimited state lists", line=lineno, source=source)
        for block in blocks:
            members = block.split()
            for q in members:
                if q not in state_set:
                    raise ParseError(f"unknown state {q!r} in obs class", line=lineno, source=source)
            if members:
                obs.setdefault(agent, []).append(frozenset(members))

    # default weights to -1, unlisted obs states to singleton classes
    full_weights = {}
    for q in states:
        for p in props:
            full_weights[(q, p)] = weights.get((q, p), MINUS_ONE)
    full_obs = {}
    for agent in agents:
        classes = list(obs.get(agent, []))
        covered = set().union(*classes) if classes else set()
        for q in states:
            if q not in covered:
                classes.append(frozenset([q]))
        full_obs[agent] = classes

    return WCGS(
        agents=agents, actions=actions, states=states, legal=legal,
        transitions=transitions, weights=full_weights, props=props,
        initial=init, obs=full_obs,
    )


def load_model(path: str) -> WCGS:
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read(), source=path)


def serialize_model(m: WCGS) -> str:
    """Render a structure in the model text format (inverse of parse_model)."""
    out = []
    out.append("agents: " + " ".join(m.agents))
    out.append("actions: " + " ".join(m.actions))
    out.append("states: " + " ".join(m.states))
    out.append("init: " + " ".join(m.initial))
    for a in m.agents:
        for q in m.states:
            out.append(f"legal: {a} {q} " + " ".join(m.legal[(a, q)]))
    for q in m.states:
        for profile in m.legal_profiles(q):
            out.append(f"trans: {q} ({','.join(profile)}) -> {m.successor(q, profile)}")
    for p in m.props:
        lines = [
            (q, m.weights.get((q, p), MINUS_ONE))
            for q in m.states
            if m.weights.get((q, p), MINUS_ONE) != MINUS_ONE
        ]
        if not lines:
            # keep the proposition declared even when false everywhere
            lines = [(m.states[0], MINUS_ONE)]
        for q, w in lines:
            out.append(f"weight: {q} {p} {format_rational(w)}")
    for a in m.agents:
        blocks = [cls for cls in m.obs[a] if len(cls) > 1]
        if blocks:
            rendered = " ".join("{" + " ".join(sorted(cls)) + "}" for cls in blocks)
            out.append(f"obs: {a} {rendered}")
    return "\n".join(out) + "\n"
