"""Strategy-logic formulas over natural strategies: AST, parser, free names.

Core connectives: atoms, the bounded existential strategy quantifier
``E x:a <= k . body``, strategy binding ``bind(a, x)`` / ``bind(a, @name)``,
interpreted function application, next ``X`` and until ``U(a, b)``.
Everything else is sugar expanded at parse time:

    F p          ->  U(top(), p)
    G p          ->  neg(U(top(), neg(p)))
    A x:a<=k . p ->  neg(E x:a<=k . neg(p))
    not/implies  ->  neg / or(neg(.), .)
    and/or       ->  the min/max functions from the table

A formula is a sentence when it has no free variable and no free agent; an
agent is free when some temporal operator is not under a binding for it.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

from .errors import ParseError
from .guards import cached_hash
from .values import FuncLib, STANDARD_LIB, format_rational, parse_rational


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
class Exists:
    var: str
    agent: str
    bound: int
    body: "Formula"

    def __str__(self):
        return f"E {self.var}:{self.agent} <= {self.bound} . {self.body}"


@cached_hash
@dataclass(frozen=True)
class Bind:
    agent: str
    var: Optional[str]  # strategy variable, or None when named
    named: Optional[str] = None  # registered strategy name

    body: "Formula" = None

    def __str__(self):
        target = self.var if self.var is not None else f"@{self.named}"
        return f"bind({self.agent}, {target}) {self.body}"


@cached_hash
@dataclass(frozen=True)
class Fun:
    name: str
    args: tuple

    def __str__(self):
        return f"{self.name}({', '.join(map(str, self.args))})"


@cached_hash
@dataclass(frozen=True)
class Next:
    body: "Formula"

    def __str__(self):
        return f"X {self.body}"


@cached_hash
@dataclass(frozen=True)
class Until:
    left: "Formula"
    right: "Formula"

    def __str__(self):
        return f"U({self.left}, {self.right})"


Formula = Union[Atom, Lit, Exists, Bind, Fun, Next, Until]

TOP = Fun("top", ())


def neg(f: Formula) -> Fun:
    return Fun("neg", (f,))


def conj(parts) -> Formula:
    """min-conjunction of a list; the empty conjunction is top."""
    parts = list(parts)
    if not parts:
        return TOP
    out = parts[0]
    for p in parts[1:]:
        out = Fun("and", (out, p))
    return out


def free_names(f: Formula, agents) -> set:
    """Free strategy variables plus free agents of a formula.

    A variable is free when it is used (bound to an agent) outside any
    quantifier for it; an agent is free when a temporal operator occurs
    outside any binding for that agent.
    """
    agents = tuple(agents)

    def walk(node) -> set:
        if isinstance(node, (Atom, Lit)):
            return set()
        if isinstance(node, Fun):
            out = set()
            for a in node.args:
                out |= walk(a)
            return out
        if isinstance(node, (Next, Until)):
            all_agents = set(agents)
            if isinstance(node, Next):
                return walk(node.body) | all_agents
            return walk(node.left) | walk(node.right) | all_agents
        if isinstance(node, Bind):
            inner = walk(node.body) - {node.agent}
            if node.var is not None:
                inner |= {node.var}
            return inner
        if isinstance(node, Exists):
            return walk(node.body) - {node.var}
        raise TypeError(f"not a formula node: {node!r}")

    return walk(f)


def is_sentence(f: Formula, agents) -> bool:
    return not free_names(f, agents)


# -- parser ------------------------------------------------------------------

_KEYWORDS = {"E", "A", "X", "U", "F", "G", "bind", "not", "and", "or", "implies", "top"}


class _FormulaParser:
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
            raise ParseError("unexpected end of formula", source=self.source)
        if (kind and tok[0] != kind) or (value and tok[1] != value):
            raise ParseError(
                f"expected {value or kind}, got {tok[1]!r}", col=tok[2] + 1, source=self.source
            )
        self.i += 1
        return tok

    def parse(self):
        f = self.formula()
        tok = self.peek()
        if tok[0] != "eof":
            raise ParseError(f"trailing input {tok[1]!r}", col=tok[2] + 1, source=self.source)
        return f

    def formula(self) -> Formula:
        kind, value, pos = self.peek()
        if kind == "num":
            self.take()
            return Lit(parse_rational(value, source=self.source))
        if kind == "punct" and value == "(":
            self.take()
            inner = self.formula()
            self.take("punct", ")")
            return inner
        if kind != "name":
            raise ParseError(f"unexpected token {value!r}", col=pos + 1, source=self.source)
        if value in ("E", "A"):
            return self.quantifier(value)
        if value == "bind":
            return self.binding()
        if value == "X":
            self.take()
            return Next(self.formula())
        if value == "F":
            self.take()
            return Until(TOP, self.formula())
        if value == "G":
            self.take()
            return neg(Until(TOP, neg(self.formula())))
        if value == "U":
            self.take()
            self.take("punct", "(")
            left = self.formula()
            self.take("punct", ",")
            right = self.formula()
            self.take("punct", ")")
            return Until(left, right)
        if value == "not":
            self.take()
            self.take("punct", "(")
            inner = self.formula()
            self.take("punct", ")")
            return neg(inner)
        if value == "implies":
            self.take()
            self.take("punct", "(")
            left = self.formula()
            self.take("punct", ",")
            right = self.formula()
            self.take("punct", ")")
            return Fun("or", (neg(left), right))
        if value == "top" and not self._next_is_call():
            self.take()
            return TOP
        if self.lib.has(value) and self._next_is_call():
            return self.call(value)
        self.take()
        return Atom(value)

    def _next_is_call(self) -> bool:
        nxt = self.tokens[self.i + 1] if self.i + 1 < len(self.tokens) else None
        return bool(nxt and nxt[0] == "punct" and nxt[1] == "(")

    def call(self, name: str) -> Fun:
        self.take("name", name)
        self.take("punct", "(")
        args = []
        if not (self.peek()[:2] == ("punct", ")")):
            args.append(self.formula())
            while self.peek()[:2] == ("punct", ","):
                self.take()
                args.append(self.formula())
        self.take("punct", ")")
        self.lib.check_arity(name, len(args))
        return Fun(name, tuple(args))

    def quantifier(self, which: str) -> Formula:
        self.take("name", which)
        var = self._name_or_num("strategy variable")
        self._expect_colon()
        agent = self._name_or_num("agent")
        self._expect_leq()
        bound_tok = self.take("num")
        try:
            bound = int(bound_tok[1])
        except ValueError:
            raise ParseError(
                f"complexity bound must be a natural number, got {bound_tok[1]!r}",
                col=bound_tok[2] + 1, source=self.source,
            )
        if bound < 0:
            raise ParseError("complexity bound must be nonnegative", source=self.source)
        self.take("punct", ".")
        body = self.formula()
        if which == "A":
            return neg(Exists(var=var, agent=agent, bound=bound, body=neg(body)))
        return Exists(var=var, agent=agent, bound=bound, body=body)

    def binding(self) -> Bind:
        self.take("name", "bind")
        self.take("punct", "(")
        agent = self._name_or_num("agent")
        self.take("punct", ",")
        tok = self.peek()
        named = None
        var = None
        if tok[:2] == ("punct", "@"):
            self.take()
            named = self._name_or_num("strategy name")
        else:
            var = self._name_or_num("strategy variable")
        self.take("punct", ")")
        body = self.formula()
        return Bind(agent=agent, var=var, named=named, body=body)

    def _name_or_num(self, what: str) -> str:
        tok = self.take()
        if tok[0] not in ("name", "num"):
            raise ParseError(f"expected {what}, got {tok[1]!r}", col=tok[2] + 1, source=self.source)
        return tok[1]

    def _expect_colon(self):
        tok = self.take("punct")
        if tok[1] != ":":
            raise ParseError(f"expected ':', got {tok[1]!r}", col=tok[2] + 1, source=self.source)

    def _expect_leq(self):
        tok = self.take("punct")
        if tok[1] != "<":
            raise ParseError(f"expected '<=', got {tok[1]!r}", col=tok[2] + 1, source=self.source)
        tok = self.take("punct")
        if tok[1] != "=":
            raise ParseError(f"expected '<=', got {tok[1]!r}", col=tok[2] + 1, source=self.source)


def parse_formula(text: str, lib: Optional[FuncLib] = None, source: Optional[str] = None) -> Formula:
    """Parse a formula, expanding all sugar to the core connectives."""
    lib = lib or STANDARD_LIB
    tokens = _tokenize_formula(text, source)
    if not tokens:
        raise ParseError("empty formula", source=source)
    return _FormulaParser(tokens, lib, source=source).parse()


def _tokenize_formula(text: str, source):
    # reuse the guard tokenizer and extend its punctuation set
    import re

    token_re = re.compile(
        r"\s*(?:(?P<num>-?\d+(?:\.\d+)?(?:/\d+)?)"
        r"|(?P<name>[A-Za-z_][A-Za-z0-9_']*)"
        r"|(?P<punct>[\[\](),.:<=@]))"
    )
    pos = 0
    out = []
    while pos < len(text):
        m = token_re.match(text, pos)
        if not m or m.end() == pos:
            rest = text[pos:].strip()
            if not rest:
                break
            raise ParseError(f"unexpected character {rest[0]!r}", col=pos + 1, source=source)
        for kind in ("num", "name", "punct"):
            if m.group(kind):
                out.append((kind, m.group(kind), m.start(kind)))
                break
        pos = m.end()
    return out
