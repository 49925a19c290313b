import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from diffcore import (Dual, ScalarField, differentiate, fd_gradient_oracle, grad, jacobian,
                      second_derivatives)
from errors import ConfigError, DomainError
from exprdsl import primal

coords = st.floats(min_value=-2.0, max_value=2.0, allow_nan=False, allow_infinity=False)


def test_gradient_of_polynomial():
    f = ScalarField.from_text("x^3*y + 2*y", ("x", "y"))
    assert np.allclose(grad(f, {"x": 2.0, "y": 3.0}), [36.0, 10.0])


def test_params_are_constants():
    f = ScalarField.from_text("k*x^2", ("x",), {"k": 3.0})
    assert grad(f, [2.0])[0] == pytest.approx(12.0)


def test_nested_passes_give_mixed_partials():
    value, g, hess = second_derivatives(lambda b: b["x"] ** 2 * b["y"] + math.e, {"x": 1.5, "y": -2.0}, ("x", "y"))
    assert value == pytest.approx(1.5 ** 2 * -2.0 + math.e)
    assert np.allclose(g, [2 * 1.5 * -2.0, 1.5 ** 2])
    assert np.allclose(hess, [[-4.0, 3.0], [3.0, 0.0]])


def test_lower_tag_dual_is_constant_in_inner_pass():
    def outer(b):
        _, d = differentiate(lambda m: m["x"] * m["y"], b, ("y",))
        return d[0]

    _, d = differentiate(outer, {"x": 3.0, "y": 5.0}, ("x",))
    assert primal(d[0]) == 1.0


def test_constant_function_has_zero_gradient():
    value, d = differentiate(lambda b: 4.0, {"x": 1.0}, ("x",))
    assert value == 4.0 and d == [0.0]


def test_dual_domain_errors():
    with pytest.raises(DomainError):
        Dual(0.0, (1.0,), 1).sqrt()
    with pytest.raises(DomainError):
        ScalarField.from_text("log(x)", ("x",)).evaluate([-1.0])


def test_frame_must_cover_variables():
    with pytest.raises(ConfigError):
        ScalarField.from_text("x + z", ("x",))


def test_jacobian_rows():
    fs = [ScalarField.from_text("x*y", ("x", "y")), ScalarField.from_text("sin(x) + y", ("x", "y"))]
    jac = jacobian(fs, [0.0, 2.0])
    assert np.allclose(jac, [[2.0, 0.0], [1.0, 1.0]])


@settings(max_examples=50, deadline=None)
@given(coords, coords, coords)
def test_ad_matches_finite_differences(x, y, z):
    f = ScalarField.from_text("exp(0.3*x)*cos(y) + sqrt(1 + z^2)*atan2(y, 2 + x^2) + sinh(x*z)", ("x", "y", "z"))
    ad = grad(f, [x, y, z])
    fd = fd_gradient_oracle(f, [x, y, z])
    assert np.max(np.abs(ad - fd)) <= 1e-6 * max(1.0, float(np.max(np.abs(ad))))


@given(coords, coords)
def test_product_rule(x, y):
    f = ScalarField.from_text("sin(x)*y", ("x", "y"))
    g = ScalarField.from_text("x^2 + y", ("x", "y"))
    fg = ScalarField.from_text("sin(x)*y*(x^2 + y)", ("x", "y"))
    at = [x, y]
    expected = f.evaluate(at) * grad(g, at) + g.evaluate(at) * grad(f, at)
    assert np.allclose(grad(fg, at), expected, atol=1e-12)
