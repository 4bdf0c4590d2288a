import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kcontract.expressions import IntervalError, ParseError, parse_expression


def test_basic_arithmetic():
    e = parse_expression("x1*(x1^2 - 0.25)", 1)
    assert e.eval([0.5]) == pytest.approx(0.0)
    assert e.eval([1.0]) == pytest.approx(0.75)


def test_trig_and_unary_minus():
    e = parse_expression("-sin(x1) + cos(x2)", 2)
    assert e.eval([math.pi / 2, 0.0]) == pytest.approx(0.0)


def test_double_star_power():
    e = parse_expression("x1**3", 1)
    assert e.eval([2.0]) == pytest.approx(8.0)


def test_parse_error_position():
    with pytest.raises(ParseError) as err:
        parse_expression("x1 + $", 1)
    assert "position" in str(err.value)


def test_unknown_variable():
    with pytest.raises(ParseError):
        parse_expression("x3 + 1", 2)


def test_non_integer_exponent_rejected():
    with pytest.raises(ParseError):
        parse_expression("x1^1.5", 1)


def test_trailing_garbage():
    with pytest.raises(ParseError):
        parse_expression("x1 x1", 1)


def test_interval_square():
    e = parse_expression("x1^2", 1)
    assert e.interval([(-2.0, 2.0)]) == (0.0, 4.0)


def test_interval_trig():
    e = parse_expression("sin(x1)", 1)
    lo, hi = e.interval([(-0.2, 1.0)])
    assert lo == pytest.approx(math.sin(-0.2))
    assert hi == pytest.approx(math.sin(1.0))
    e = parse_expression("cos(x1)", 1)
    lo, hi = e.interval([(-0.2, 1.0)])
    assert lo == pytest.approx(math.cos(1.0))
    assert hi == pytest.approx(1.0)


def test_interval_division_by_zero_crossing():
    e = parse_expression("1/x1", 1)
    with pytest.raises(IntervalError):
        e.interval([(-1.0, 1.0)])


@given(st.integers(min_value=0, max_value=10 ** 6))
@settings(max_examples=80, deadline=None)
def test_interval_soundness(seed):
    # interval bound must contain every sampled value
    rng = np.random.default_rng(seed)
    exprs = ["x1*(x1^2 - 0.25)", "sin(x1)*cos(x2)", "x1*x2 - 2*x2^3",
             "0.5*((x1 - x1^3) - x2)"]
    text = exprs[seed % len(exprs)]
    e = parse_expression(text, 2)
    lo = rng.uniform(-3, 0, 2)
    hi = lo + rng.uniform(0.1, 3, 2)
    ivlo, ivhi = e.interval([(lo[0], hi[0]), (lo[1], hi[1])])
    for _ in range(50):
        x = lo + rng.random(2) * (hi - lo)
        v = e.eval(x)
        assert ivlo - 1e-9 <= v <= ivhi + 1e-9


def test_eval_batch_matches_scalar():
    e = parse_expression("sin(x1)*x2 - x2^2/(2 + cos(x1))", 2)
    rng = np.random.default_rng(0)
    X = rng.standard_normal((40, 2))
    batch = e.eval_batch(X)
    for i in range(40):
        assert batch[i] == pytest.approx(e.eval(X[i]), rel=1e-12)


def test_variables_collected():
    e = parse_expression("x1 + cos(x3)", 3)
    assert e.variables() == {0, 2}
