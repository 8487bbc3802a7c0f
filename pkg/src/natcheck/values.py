"""Exact satisfaction-value arithmetic and the interpreted function table.

Satisfaction values, proposition weights and guard arithmetic all live in
the rationals.  Guard matching fires only on the value exactly 1, so the
whole pipeline is float-free: two evaluations of the same term always give
the identical fraction.

Function evaluation is deliberately closed over all rationals.  Only
proposition weights and top-level satisfaction values are confined to
[-1, 1]; intermediate results (sums, slot indices from ``argmax``) may
leave the interval and are compared or re-scaled by the surrounding
formula.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Callable, Optional, Sequence

from .errors import (
    ArityMismatchError,
    EvaluationDomainError,
    ParseError,
    UnknownFunctionError,
)

Value = Fraction

ONE = Fraction(1)
ZERO = Fraction(0)
MINUS_ONE = Fraction(-1)


def value_in_unit_interval(v: Fraction) -> bool:
    """True iff v lies in the satisfaction-value interval [-1, 1]."""
    return MINUS_ONE <= v <= ONE


def crisp(b: bool) -> Fraction:
    """Map a boolean to the crisp satisfaction values 1 / -1."""
    return ONE if b else MINUS_ONE


def parse_rational(text: str, source: Optional[str] = None, line: Optional[int] = None) -> Fraction:
    """Parse ``p/q``, integer or decimal literals exactly.

    Decimal literals convert without rounding (``0.25`` becomes 1/4).
    """
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ParseError(f"bad rational literal {text!r}: {exc}", line=line, source=source)


def format_rational(v: Fraction) -> str:
    """Canonical text form: integers bare, otherwise ``p/q``."""
    return str(v)


def snap_to_grid(x: Fraction, inc: Fraction) -> Fraction:
    """Round x to the nearest multiple of ``inc`` inside [0, 1], ties toward 0.

    Used to project bid equations with no exact grid solution onto the
    discrete action grid.
    """
    if inc <= 0:
        raise EvaluationDomainError(f"snap increment must be positive, got {inc}")
    steps = x / inc
    # ceil(steps - 1/2) rounds to nearest with ties going down
    half = steps - Fraction(1, 2)
    k = -((-half.numerator) // half.denominator)  # ceil for Fractions
    k = max(0, min(k, int(ONE / inc)))
    return k * inc


def _argmax(*args: Fraction) -> Fraction:
    """1-based index of the maximum; ties go to the smallest index."""
    best = args[0]
    best_i = 0
    for i, v in enumerate(args[1:], start=1):
        if v > best:
            best, best_i = v, i
    return Fraction(best_i + 1)


def _rdiv(x: Fraction, y: Fraction) -> Fraction:
    if y == 0:
        raise EvaluationDomainError("division by zero in rdiv")
    return x / y


class FuncLib:
    """Table of interpreted functions usable in guards and formulas.

    Each entry maps a name to (arity, evaluator); arity ``None`` accepts any
    positive number of arguments.  The comparison family (eq, lt, gt, geq,
    pref) always returns the crisp values 1 or -1.
    """

    def __init__(self):
        self.table: dict[str, tuple[Optional[int], Callable[..., Fraction]]] = {}
        self._install_standard()

    def _install_standard(self):
        std: dict[str, tuple[Optional[int], Callable[..., Fraction]]] = {
            "top": (0, lambda: ONE),
            "neg": (1, lambda x: -x),
            "or": (2, lambda x, y: max(x, y)),
            "and": (2, lambda x, y: min(x, y)),
            "sum": (None, lambda *xs: sum(xs, ZERO)),
            "sub": (2, lambda x, y: x - y),
            "mul": (None, lambda *xs: _product(xs)),
            "rdiv": (2, _rdiv),
            "min": (None, lambda *xs: min(xs)),
            "max": (None, lambda *xs: max(xs)),
            "argmax": (None, _argmax),
            "eq": (2, lambda x, y: crisp(x == y)),
            "lt": (2, lambda x, y: crisp(x < y)),
            "gt": (2, lambda x, y: crisp(x > y)),
            "geq": (2, lambda x, y: crisp(x >= y)),
            "pref": (2, lambda x, y: crisp(x <= y)),
            "snap": (2, snap_to_grid),
        }
        self.table.update(std)

    def register(self, name: str, arity: Optional[int], fn: Callable[..., Fraction]):
        """Install an additional interpreted function (e.g. a reference
        payment rule baked into a generated model)."""
        self.table[name] = (arity, fn)

    def has(self, name: str) -> bool:
        return name in self.table

    def arity(self, name: str) -> Optional[int]:
        if name not in self.table:
            raise UnknownFunctionError(name)
        return self.table[name][0]

    def check_arity(self, name: str, n: int):
        if name not in self.table:
            raise UnknownFunctionError(name)
        arity = self.table[name][0]
        if arity is None:
            if n < 1:
                raise ArityMismatchError(name, "at least 1", n)
        elif arity != n:
            raise ArityMismatchError(name, arity, n)

    def apply(self, name: str, args: Sequence[Fraction]) -> Fraction:
        self.check_arity(name, len(args))
        return self.table[name][1](*args)

    def copy(self) -> "FuncLib":
        clone = FuncLib.__new__(FuncLib)
        clone.table = dict(self.table)
        return clone


def _product(xs: Sequence[Fraction]) -> Fraction:
    out = ONE
    for x in xs:
        out *= x
    return out


#: Shared library with the standard table only.  Models that need extra
#: interpreted functions carry their own extended copy.
STANDARD_LIB = FuncLib()


def apply_func(name: str, args: Sequence[Fraction], lib: Optional[FuncLib] = None) -> Fraction:
    """Apply a registered function to rational arguments."""
    return (lib or STANDARD_LIB).apply(name, args)


# Function names whose result is guaranteed to stay inside [-1, 1] whenever
# all arguments do.  Used by the evaluator to justify early exits in sup/inf
# loops (a running maximum of 1 cannot be beaten).
RANGE_PRESERVING = frozenset(
    {"top", "neg", "or", "and", "min", "max", "mul", "eq", "lt", "gt", "geq", "pref", "snap"}
)
