import numpy as np
import pytest
from hypothesis import given, strategies as st

from convcool.sources import EXAMPLES, ExpressionError, example_source, parse_expression

PI = np.pi
X = np.linspace(0, 1, 7)
Y = np.linspace(1, 0, 7) ** 2

REFERENCE = {
    1: lambda x, y: 2 * PI**2 * np.sin(PI * x) * np.sin(PI * y),
    2: lambda x, y: 1000 * ((x - 0.5) ** 2 + (y - 0.75) ** 2) * x * (1 - x) * y * (1 - y),
    3: lambda x, y: 100 * np.exp(-100 * (x - 0.75) ** 2 - 100 * (y - 0.75) ** 2),
    4: lambda x, y: (75 * np.exp(-(9 * x - 2) ** 2 / 4 - (9 * y - 2) ** 2 / 4)
                     - 75 * np.exp(-(9 * x - 4) ** 2 / 4 - (9 * y - 7) ** 2 / 4)),
}


@pytest.mark.parametrize("k", sorted(EXAMPLES))
def test_catalog_matches_reference_formulas(k):
    assert np.allclose(example_source(k)(X, Y), REFERENCE[k](X, Y), rtol=1e-14, atol=1e-12)


def test_unknown_example():
    with pytest.raises(ValueError):
        example_source(5)


@pytest.mark.parametrize("text, value", [
    ("1+2*3", 7.0), ("(1+2)*3", 9.0), ("2^3^2", 512.0), ("-2^2", -4.0), ("2^-1", 0.5),
    ("8/4/2", 1.0), ("1-2-3", -4.0), ("--3", 3.0), ("+x", 0.25), ("pi", PI),
    ("cos(0)+exp(0)+sin(0)", 2.0), ("1.5e2 + .5", 150.5), ("x*y", 0.25 * 0.5),
])
def test_expression_values(text, value):
    assert parse_expression(text)(np.array(0.25), np.array(0.5)) == pytest.approx(value, rel=1e-15)


@pytest.mark.parametrize("text", ["", "   ", "1+", "(1", "1)", "sin 1", "z", "2 3", "1 $ 2",
                                  "sin()", "foo(1)", "*2"])
def test_expression_errors(text):
    with pytest.raises(ExpressionError):
        parse_expression(text)


def test_error_reports_position():
    with pytest.raises(ExpressionError) as info:
        parse_expression("1 + z")
    assert info.value.pos == 4


def test_constant_broadcasts():
    out = parse_expression("3")(np.zeros((2, 5)), np.zeros((2, 5)))
    assert out.shape == (2, 5) and np.all(out == 3)


small = st.floats(-5, 5, allow_nan=False).map(lambda v: round(v, 3))


@given(small, small, small)
def test_arithmetic_agrees_with_python(a, b, c):
    text = f"({a})*x + ({b}) - ({c})*y*y"
    got = parse_expression(text)(np.array(0.3), np.array(0.7))
    assert got == pytest.approx(a * 0.3 + b - c * 0.49, abs=1e-12)
