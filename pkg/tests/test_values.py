from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from natcheck.errors import ArityMismatchError, EvaluationDomainError, UnknownFunctionError
from natcheck.values import (
    STANDARD_LIB,
    apply_func,
    format_rational,
    parse_rational,
    snap_to_grid,
    value_in_unit_interval,
)

F = Fraction

rationals = st.fractions(min_value=-2, max_value=2, max_denominator=64)


def test_neg_flips_sign():
    assert apply_func("neg", [F(1, 2)]) == F(-1, 2)


def test_pref_is_weak_le():
    assert apply_func("pref", [F(1, 4), F(1, 2)]) == 1
    assert apply_func("pref", [F(1, 2), F(1, 4)]) == -1
    assert apply_func("pref", [F(1, 2), F(1, 2)]) == 1


def test_argmax_one_based_tie_to_smallest():
    assert apply_func("argmax", [F(1, 4), F(3, 4), F(1, 2)]) == 2
    assert apply_func("argmax", [F(1, 2), F(1, 2)]) == 1
    assert apply_func("argmax", [F(0)]) == 1


def test_value_in_unit_interval():
    assert value_in_unit_interval(F(1))
    assert value_in_unit_interval(F(-1))
    assert not value_in_unit_interval(F(5, 4))


def test_arithmetic_family():
    assert apply_func("sum", [F(1, 2), F(1, 3), F(1, 6)]) == 1
    assert apply_func("sub", [F(1, 2), F(3, 4)]) == F(-1, 4)
    assert apply_func("mul", [F(2, 3), F(3, 4)]) == F(1, 2)
    assert apply_func("rdiv", [F(1), F(3)]) == F(1, 3)
    assert apply_func("min", [F(1), F(0), F(1, 2)]) == 0
    assert apply_func("max", [F(-1), F(0)]) == 0
    assert apply_func("or", [F(-1, 4), F(1, 4)]) == F(1, 4)
    assert apply_func("and", [F(-1, 4), F(1, 4)]) == F(-1, 4)
    assert apply_func("top", []) == 1


def test_errors():
    with pytest.raises(UnknownFunctionError):
        apply_func("nope", [])
    with pytest.raises(ArityMismatchError):
        apply_func("neg", [F(1), F(2)])
    with pytest.raises(ArityMismatchError):
        apply_func("min", [])
    with pytest.raises(EvaluationDomainError):
        apply_func("rdiv", [F(1), F(0)])


@given(rationals, rationals)
def test_comparisons_are_crisp(x, y):
    for name in ("eq", "lt", "gt", "geq", "pref"):
        assert apply_func(name, [x, y]) in (F(1), F(-1))


@given(rationals)
def test_double_negation(x):
    assert apply_func("neg", [apply_func("neg", [x])]) == x


@given(rationals, rationals)
def test_de_morgan_duality(x, y):
    lhs = apply_func("max", [x, y])
    rhs = apply_func(
        "neg", [apply_func("min", [apply_func("neg", [x]), apply_func("neg", [y])])]
    )
    assert lhs == rhs


@given(rationals, rationals)
def test_evaluation_is_reproducible(x, y):
    assert apply_func("sum", [x, y]) == apply_func("sum", [x, y])


def test_snap_nearest_with_ties_toward_zero():
    inc = F(1, 4)
    assert snap_to_grid(F(5, 8), inc) == F(1, 2)  # exact tie rounds down
    assert snap_to_grid(F(3, 8), inc) == F(1, 4)
    assert snap_to_grid(F(9, 16), inc) == F(1, 2)
    assert snap_to_grid(F(11, 16), inc) == F(3, 4)
    assert snap_to_grid(F(-1, 8), inc) == 0  # clamped into [0, 1]
    assert snap_to_grid(F(9, 8), inc) == 1


@given(st.fractions(min_value=0, max_value=1, max_denominator=32))
def test_snap_is_idempotent_on_grid(x):
    inc = F(1, 8)
    snapped = snap_to_grid(x, inc)
    assert snap_to_grid(snapped, inc) == snapped
    assert 0 <= snapped <= 1
    assert (snapped / inc).denominator == 1


def test_literal_parsing_exact():
    assert parse_rational("3/4") == F(3, 4)
    assert parse_rational("0.25") == F(1, 4)
    assert parse_rational("-1") == F(-1)
    assert format_rational(F(3, 4)) == "3/4"
    assert format_rational(F(2)) == "2"


def test_library_copy_is_independent():
    lib = STANDARD_LIB.copy()
    lib.register("twice", 1, lambda x: 2 * x)
    assert lib.apply("twice", [F(1, 3)]) == F(2, 3)
    assert not STANDARD_LIB.has("twice")
