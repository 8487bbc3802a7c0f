"""Weighted epistemic guard formulas: AST, parser, size and fuzzy evaluation.

Guards follow a two-layer grammar.  The outer (psi) layer describes what
the acting agent can verify: the constant top, knowledge operators, and
interpreted functions of psi-terms.  Bare propositions live only in the
inner (phi) layer underneath a knowledge operator, where further nested
knowledge about other agents is also allowed.  This layering is what makes
guarded strategies uniform: every observable condition is filtered through
the owner's knowledge.

Concrete syntax::

    psi ::= 'top' | 'K' '[' AGENT ']' '(' phi ')' | FUNC '(' psi {',' psi} ')' | LITERAL
    phi ::= PROP | FUNC '(' phi {',' phi} ')' | 'K' '[' AGENT ']' '(' phi ')' | LITERAL

Rational and decimal literals act as 0-ary functions.

Size measure: top, propositions and literals count 1; an n-ary function
application counts n+1 plus its arguments.  The knowledge operator itself
is free: it is the wrapper that written guards conventionally omit, and
complexity budgets in the quantifier semantics are calibrated to guards
written without it.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

from .errors import GrammarLayerError, NatcheckError, ParseError
from .values import FuncLib, STANDARD_LIB, format_rational, parse_rational
from .wcgs import WCGS


def cached_hash(cls):
    """Memoise the structural hash of a frozen AST node.

    Formula trees serve as memo-table keys throughout the evaluator, and
    recomputing a deep hash on every lookup would dominate the run time.
    """
    base_hash = cls.__hash__

    def __hash__(self):
        h = self.__dict__.get("_hash")
        if h is None:
            h = base_hash(self)
            object.__setattr__(self, "_hash", h)
        return h

    cls.__hash__ = __hash__
    return cls


@cached_hash
@dataclass(frozen=True)
class Top:
    def __str__(self):
        return "top"


@cached_hash
@dataclass(frozen=True)
class Atom:
    prop: str

    def __str__(self):
        return self.prop


@cached_hash
@dataclass(frozen=True)
class Lit:
    value: Fraction

    def __str__(self):
        return format_rational(self.value)


@cached_hash
@dataclass(frozen=True)
class Know:
    agent: str
    body: "WEFormula"

    def __str__(self):
        return f"K[{self.agent}]({self.body})"


@cached_hash
@dataclass(frozen=True)
class Fun:
    name: str
    args: tuple

    def __str__(self):
        return f"{self.name}({', '.join(map(str, self.args))})"


WEFormula = Union[Top, Atom, Lit, Know, Fun]


def we_size(f: WEFormula) -> int:
    """Symbol count of a guard, parentheses excluded."""
    if isinstance(f, (Top, Atom, Lit)):
        return 1
    if isinstance(f, Know):
        return we_size(f.body)
    if isinstance(f, Fun):
        return len(f.args) + 1 + sum(we_size(a) for a in f.args)
    raise TypeError(f"not a WE formula: {f!r}")


def knowledge_agents_at_top(f: WEFormula) -> set:
    """Agents whose knowledge operators occur at the outer guard layer."""
    if isinstance(f, Know):
        return {f.agent}
    if isinstance(f, Fun):
        out = set()
        for a in f.args:
            out |= knowledge_agents_at_top(a)
        return out
    return set()


def eval_we(m: WCGS, q: str, f: WEFormula, _cache: Optional[dict] = None) -> Fraction:
    """Satisfaction value of a guard at a state.

    Atoms read the weight function, knowledge takes the minimum over the
    agent's observation class, and functions apply pointwise.  Exact
    rational arithmetic throughout.
    """
    cache = _cache if _cache is not None else {}
    return _eval_we(m, q, f, cache)


def _eval_we(m: WCGS, q: str, f: WEFormula, cache: dict) -> Fraction:
    key = (q, f)
    hit = cache.get(key)
    if hit is not None:
        return hit
    if isinstance(f, Top):
        value = Fraction(1)
    elif isinstance(f, Lit):
        value = f.value
    elif isinstance(f, Atom):
        value = m.weight(q, f.prop)
    elif isinstance(f, Know):
        if f.agent not in m.agents:
            raise NatcheckError(f"knowledge operator names unknown agent {f.agent!r}")
        value = min(_eval_we(m, q2, f.body, cache) for q2 in m.obs_class(f.agent, q))
    elif isinstance(f, Fun):
        value = m.lib.apply(f.name, [_eval_we(m, q, a, cache) for a in f.args])
    else:
        raise TypeError(f"not a WE formula: {f!r}")
    cache[key] = value
    return value


class WeEvaluator:
    """Guard evaluator with a per-model memo table keyed on (state, guard)."""

    def __init__(self, m: WCGS):
        self.m = m
        self.cache: dict = {}

    def value(self, q: str, f: WEFormula) -> Fraction:
        return _eval_we(self.m, q, f, self.cache)

    def holds(self, q: str, f: WEFormula) -> bool:
        return self.value(q, f) == 1


# -- parser ----------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>-?\d+(?:\.\d+)?(?:/\d+)?)|(?P<name>[A-Za-z_][A-Za-z0-9_']*)|(?P<punct>[\[\](),]))"
)


def tokenize(text: str, source: Optional[str] = None):
    """Split guard/formula text into (kind, value, position) tokens."""
    pos = 0
    out = []
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m or m.end() == pos:
            rest = text[pos:].strip()
            if not rest:
                break
            raise ParseError(f"unexpected character {rest[0]!r}", col=pos + 1, source=source)
        if m.group("num"):
            out.append(("num", m.group("num"), m.start("num")))
        elif m.group("name"):
            out.append(("name", m.group("name"), m.start("name")))
        else:
            out.append(("punct", m.group("punct"), m.start("punct")))
        pos = m.end()
    return out


class _GuardParser:
    def __init__(self, tokens, lib: FuncLib, source=None):
        self.tokens = tokens
        self.i = 0
        self.lib = lib
        self.source = source

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else ("eof", "", -1)

    def take(self, kind=None, value=None):
        tok = self.peek()
        if tok[0] == "eof":
            raise ParseError("unexpected end of guard", source=self.source)
        if kind and tok[0] != kind or value and tok[1] != value:
            raise ParseError(f"expected {value or kind}, got {tok[1]!r}", col=tok[2] + 1, source=self.source)
        self.i += 1
        return tok

    def parse(self) -> WEFormula:
        f = self.psi()
        tok = self.peek()
        if tok[0] != "eof":
            raise ParseError(f"trailing input {tok[1]!r}", col=tok[2] + 1, source=self.source)
        return f

    def psi(self) -> WEFormula:
        kind, value, pos = self.peek()
        if kind == "num":
            self.take()
            return Lit(parse_rational(value, source=self.source))
        if kind == "name":
            if value == "top":
                self.take()
                return Top()
            if value == "K":
                return self.knowledge()
            if self.lib.has(value) and self._next_is_call():
                return self.call(value, self.psi)
            self.take()
            raise GrammarLayerError(
                f"bare proposition {value!r} at the knowledge layer; wrap it as K[agent]({value})",
                col=pos + 1, source=self.source,
            )
        raise ParseError(f"unexpected token {value!r}", col=pos + 1, source=self.source)

    def phi(self) -> WEFormula:
        kind, value, pos = self.peek()
        if kind == "num":
            self.take()
            return Lit(parse_rational(value, source=self.source))
        if kind == "name":
            if value == "top":
                self.take()
                return Top()
            if value == "K":
                return self.knowledge()
            if self.lib.has(value) and self._next_is_call():
                return self.call(value, self.phi)
            self.take()
            return Atom(value)
        raise ParseError(f"unexpected token {value!r}", col=pos + 1, source=self.source)

    def _next_is_call(self) -> bool:
        nxt = self.tokens[self.i + 1] if self.i + 1 < len(self.tokens) else None
        return bool(nxt and nxt[0] == "punct" and nxt[1] == "(")

    def knowledge(self) -> Know:
        self.take("name", "K")
        self.take("punct", "[")
        tok = self.take()
        if tok[0] not in ("name", "num"):
            raise ParseError(f"expected agent name, got {tok[1]!r}", col=tok[2] + 1, source=self.source)
        agent = tok[1]
        self.take("punct", "]")
        self.take("punct", "(")
        body = self.phi()
        self.take("punct", ")")
        return Know(agent, body)

    def call(self, name: str, sub) -> Fun:
        self.take("name", name)
        self.take("punct", "(")
        args = []
        if not (self.peek()[0] == "punct" and self.peek()[1] == ")"):
            args.append(sub())
            while self.peek()[:2] == ("punct", ","):
                self.take()
                args.append(sub())
        self.take("punct", ")")
        self.lib.check_arity(name, len(args))
        return Fun(name, tuple(args))


def parse_we(text: str, lib: Optional[FuncLib] = None, source: Optional[str] = None) -> WEFormula:
    """Parse a guard in the concrete syntax, enforcing the two-layer grammar."""
    lib = lib or STANDARD_LIB
    tokens = tokenize(text, source=source)
    if not tokens:
        raise ParseError("empty guard", source=source)
    return _GuardParser(tokens, lib, source=source).parse()
