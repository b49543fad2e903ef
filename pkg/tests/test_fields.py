from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _support import fd_gradient, fd_laplacian
from spk2d.fields import (
    DomainError,
    HarmonicExpansion,
    PointPolar,
    ScalarExpression,
    SchemaError,
    evaluate,
    gradient,
    laplacian,
    wirtinger,
)

radii = st.floats(min_value=0.05, max_value=0.9)
angles = st.floats(min_value=0.0, max_value=2 * math.pi, exclude_max=True)
coeffs = st.floats(min_value=-2.0, max_value=2.0, allow_nan=False)
powers = st.integers(min_value=-3, max_value=3)


@st.composite
def expressions(draw):
    e = ScalarExpression.constant(draw(coeffs))
    e = e + ScalarExpression.log_r(draw(coeffs))
    e = e + ScalarExpression.log_neg_log_r(draw(coeffs))
    for _ in range(draw(st.integers(0, 3))):
        e = e + ScalarExpression.re_pow(draw(powers), draw(coeffs))
        e = e + ScalarExpression.im_pow(draw(powers), draw(coeffs))
    return e


@st.composite
def harmonics(draw):
    lau = {}
    for _ in range(draw(st.integers(0, 3))):
        j = draw(powers)
        c = complex(draw(coeffs), 0.0 if j == 0 else draw(coeffs))
        lau[j] = c
    return HarmonicExpansion(draw(coeffs), lau)


# -- points -----------------------------------------------------------------


def test_point_reduces_angle_and_round_trips():
    p = PointPolar(0.5, -math.pi / 2)
    assert p.theta == pytest.approx(1.5 * math.pi)
    q = PointPolar.from_xy(p.x, p.y)
    assert (q.r, q.theta) == pytest.approx((p.r, p.theta))
    assert p.rho == pytest.approx(math.log(0.5))
    assert p.z == pytest.approx(complex(p.x, p.y))


@pytest.mark.parametrize("r", [0.0, 1.0, -0.1, 1.5, float("nan")])
def test_point_rejects_radii_outside_disk(r):
    with pytest.raises(DomainError):
        PointPolar(r, 0.0)


# -- scalar expressions -------------------------------------------------------


def test_basis_values_against_direct_formulas():
    x, y = 0.3, -0.2
    z = complex(x, y)
    r = abs(z)
    assert ScalarExpression.log_r(2.0).value_xy(x, y) == pytest.approx(2 * math.log(r))
    assert ScalarExpression.log_neg_log_r(-1.0).value_xy(x, y) == pytest.approx(-math.log(-math.log(r)))
    assert ScalarExpression.re_pow(-2, 1.5).value_xy(x, y) == pytest.approx(1.5 * (z**-2).real)
    assert ScalarExpression.im_pow(3).value_xy(x, y) == pytest.approx((z**3).imag)


def test_normalisation_merges_and_drops_terms():
    e = ScalarExpression.log_r(1.0) + ScalarExpression.log_r(-1.0) + ScalarExpression.im_pow(0, 5.0)
    assert e.terms == ()
    e = ScalarExpression.re_pow(0, 2.0) + ScalarExpression.constant(1.0)
    assert e.coefficient("const") == 3.0
    assert (e - e).terms == ()
    assert (2.0 * ScalarExpression.log_r()).coefficient("log_r") == 2.0


def test_pinned_laplacian_of_log_log_term():
    # Laplacian of -log(-log r) is 1 / (r log r)^2; at r = 1/2 that is 4 / (log 2)^2 = 8.325476...
    e = ScalarExpression.log_neg_log_r(-1.0)
    assert e.laplacian_xy(0.5, 0.0) == pytest.approx(8.325476, rel=1e-6)
    assert laplacian(e, PointPolar(0.5, 1.0)) == pytest.approx(1 / (0.5 * math.log(0.5)) ** 2)


@settings(max_examples=60, deadline=None)
@given(expressions(), radii, angles)
def test_gradient_matches_finite_differences(e, r, th):
    x, y = r * math.cos(th), r * math.sin(th)
    gx, gy = e.gradient_xy(x, y)
    fx, fy = fd_gradient(e.value_xy, x, y, 1e-6 * r)
    scale = 1 + abs(gx) + abs(gy)
    assert abs(gx - fx) <= 1e-5 * scale
    assert abs(gy - fy) <= 1e-5 * scale


@settings(max_examples=60, deadline=None)
@given(expressions(), radii, angles)
def test_laplacian_matches_stencil_and_hessian_trace(e, r, th):
    x, y = r * math.cos(th), r * math.sin(th)
    lap = e.laplacian_xy(x, y)
    hxx, hxy, hyy = e.hessian_xy(x, y)
    assert hxx + hyy == pytest.approx(lap, rel=1e-9, abs=1e-9)
    ref = fd_laplacian(e.value_xy, x, y, 1e-3 * r)
    # truncation error of the stencil grows like the size of the pole terms,
    # and like (log r)^-4 for the log|log r| term near the rim
    size = 1 + sum(abs(t.coeff) * r ** -abs(t.power) for t in e.terms)
    size += abs(e.coefficient("log_neg_log_r")) / math.log(r) ** 4
    assert abs(lap - ref) <= 1e-4 * size / r**2


@settings(max_examples=40, deadline=None)
@given(expressions(), radii, angles)
def test_exp_agrees_with_exp_of_value(e, r, th):
    x, y = r * math.cos(th), r * math.sin(th)
    v = e.value_xy(x, y)
    if abs(v) < 200:
        assert e.exp_xy(x, y, 1.0) == pytest.approx(math.exp(v), rel=1e-12)
        assert e.exp_xy(x, y, -1.0) == pytest.approx(math.exp(-v), rel=1e-12)


def test_vectorised_evaluation_matches_scalar():
    e = ScalarExpression.log_r(1.0) + ScalarExpression.re_pow(-1, 0.5) + ScalarExpression.log_neg_log_r(-1.0)
    xs = np.array([0.1, 0.2, -0.4])
    ys = np.array([0.3, -0.1, 0.05])
    vec = e.value_xy(xs, ys)
    assert np.allclose(vec, [e.value_xy(a, b) for a, b in zip(xs, ys)], rtol=1e-15)


@settings(max_examples=40, deadline=None)
@given(expressions())
def test_scalar_json_round_trip(e):
    assert ScalarExpression.from_json(e.to_json()) == e


@pytest.mark.parametrize(
    "bad",
    [
        {"terms": [{"kind": "sin", "coeff": 1.0}]},
        {"terms": [{"kind": "re_pow", "coeff": 1.0, "power": 1.5}]},
        {"nope": []},
        [],
    ],
)
def test_scalar_schema_errors(bad):
    with pytest.raises(SchemaError):
        ScalarExpression.from_json(bad)


# -- harmonic expansions -------------------------------------------------------


@settings(max_examples=50, deadline=None)
@given(harmonics(), radii, angles)
def test_harmonic_is_harmonic_and_gradient_consistent(h, r, th):
    x, y = r * math.cos(th), r * math.sin(th)
    assert h.laplacian_xy(x, y) == 0.0
    size = 1 + abs(h.log_coeff) + sum(abs(c) * r ** -abs(j) for j, c in h.laurent)
    assert abs(fd_laplacian(h.value_xy, x, y, 1e-3 * r)) <= 1e-4 * size / r**2
    gx, gy = h.gradient_xy(x, y)
    fx, fy = fd_gradient(h.value_xy, x, y, 1e-6 * r)
    assert abs(gx - fx) <= 1e-5 * (1 + abs(gx))
    assert abs(gy - fy) <= 1e-5 * (1 + abs(gy))
    w = h.wirtinger_xy(x, y)
    assert w == pytest.approx(0.5 * complex(fx, -fy), rel=1e-5, abs=1e-5)


def test_harmonic_expression_agrees_with_direct_value():
    h = HarmonicExpansion(0.7, {-2: 1 - 2j, 0: 0.25, 3: 0.5j})
    x, y = 0.2, 0.35
    z = complex(x, y)
    direct = 0.7 * math.log(abs(z)) + ((1 - 2j) * z**-2).real + 0.25 + (0.5j * z**3).real
    assert h.value_xy(x, y) == pytest.approx(direct, rel=1e-14)
    assert h.to_expression().value_xy(x, y) == pytest.approx(direct, rel=1e-14)
    p = PointPolar.from_xy(x, y)
    assert evaluate(h, p) == pytest.approx(direct)
    assert gradient(h, p) == pytest.approx(h.gradient_xy(x, y))
    assert wirtinger(h, p) == pytest.approx(h.wirtinger_xy(x, y))


def test_harmonic_rejects_complex_constant():
    with pytest.raises(ValueError):
        HarmonicExpansion(0.0, {0: 1 + 1j})


@settings(max_examples=40, deadline=None)
@given(harmonics())
def test_harmonic_json_round_trip(h):
    assert HarmonicExpansion.from_json(h.to_json()) == h


def test_harmonic_schema_errors():
    with pytest.raises(SchemaError):
        HarmonicExpansion.from_json({"log_coeff": 0.0, "extra": 1})
    with pytest.raises(SchemaError):
        HarmonicExpansion.from_json({"log_coeff": 0.0, "laurent": [[1, 0.0]]})
