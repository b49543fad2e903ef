from __future__ import annotations

import cmath
import math
from fractions import Fraction

import numpy as np
import pytest

from _support import CONE_BETAS, LOG_KS, ORDER_CASES, brute_force_order
from spk2d import analysis
from spk2d.analysis import (
    ELLIPTIC,
    IDENTITY,
    MINUS_IDENTITY,
    PARABOLIC_MINUS,
    PARABOLIC_PLUS,
    asymptotic_fit,
    classify_from_beta,
    classify_holonomy,
    cubic_form,
    cubic_order_rule,
    darboux_residual,
    flatness_residual_dp,
    is_integral,
    kodaira_compatible,
    kodaira_json,
    normalizing_basepoint,
    order_of_h,
    reference_holonomy,
    special_coordinates,
)
from spk2d.connection import connection_form
from spk2d.fields import DomainError, HarmonicExpansion, PointPolar, ScalarExpression
from spk2d.models import ModelSpec, SpecialKahlerData, flat_cone, fundamental_example, log_model
from spk2d.transport import ArcSegment, Path, RadialSegment, holonomy_circle


def rot(a):
    return np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])


# -- classification -----------------------------------------------------------


def test_classify_rotation_is_elliptic():
    cls = classify_holonomy(rot(0.3 * math.pi))
    assert cls.tag == ELLIPTIC
    assert cls.trace == pytest.approx(2 * math.cos(0.3 * math.pi))
    assert cls.beta_mod == pytest.approx((0.3, 1.7))
    assert cls.to_json()["beta_mod"] == pytest.approx([0.3, 1.7])


@pytest.mark.parametrize(
    "m, tag",
    [
        (np.eye(2), IDENTITY),
        (-np.eye(2), MINUS_IDENTITY),
        (np.array([[1.0, 0.5], [0.0, 1.0]]), PARABOLIC_PLUS),
        (np.array([[-1.0, 0.0], [2.0, -1.0]]), PARABOLIC_MINUS),
        (np.eye(2) + 1e-9, IDENTITY),
    ],
)
def test_classify_boundary_cases(m, tag):
    assert classify_holonomy(m).tag == tag


def test_classify_rejects_hyperbolic_and_non_unimodular():
    with pytest.raises(ValueError):
        classify_holonomy(np.diag([2.0, 0.5]))
    with pytest.raises(ValueError):
        classify_holonomy(2 * np.eye(2))
    with pytest.raises(ValueError):
        classify_holonomy(np.eye(3))


def test_classify_from_beta():
    assert [c.tag for c in classify_from_beta(2.0)] == [IDENTITY, PARABOLIC_PLUS]
    assert [c.tag for c in classify_from_beta(-1.0)] == [MINUS_IDENTITY, PARABOLIC_MINUS]
    assert [c.tag for c in classify_from_beta(3.0, conical=True)] == [MINUS_IDENTITY]
    (c,) = classify_from_beta(1.5)
    assert c.tag == ELLIPTIC and c.trace == pytest.approx(0.0, abs=1e-15)


def test_is_integral_on_rational_grid():
    for q in range(1, 13):
        for p in range(-3 * q, 3 * q + 1):
            beta = Fraction(p, q)
            expected = (2 * beta).denominator == 1 or (3 * beta).denominator == 1
            assert is_integral(float(beta), "beta") == expected, beta
            trace = 2 * math.cos(math.pi * float(beta))
            assert is_integral(trace, "trace", 1e-9) == expected, beta


def test_is_integral_rejects_unknown_kind():
    with pytest.raises(ValueError):
        is_integral(1.0, "order")


# -- cubic form ---------------------------------------------------------------


@pytest.mark.parametrize("k", LOG_KS)
def test_cubic_form_of_log_models(k):
    xi = cubic_form(log_model(k, 1.0, 1.0))
    assert xi.coeffs == {k - 1: -0.25j}
    assert xi.order == k - 1


@pytest.mark.parametrize("beta", CONE_BETAS)
def test_cubic_form_of_cones_vanishes(beta):
    xi = cubic_form(flat_cone(beta))
    assert xi.coeffs == {} and xi.order == math.inf


def test_cubic_form_of_fundamental_example():
    assert cubic_form(fundamental_example()).coeffs == {-2: -0.25j}


@pytest.mark.parametrize("h, a", ORDER_CASES)
def test_order_rule_against_brute_force(h, a):
    expected = brute_force_order(h, a)
    assert cubic_order_rule(h, a) == expected
    assert cubic_form(SpecialKahlerData(h, ScalarExpression(), a)).order == expected


def test_order_of_h():
    assert order_of_h(HarmonicExpansion(0.0, {-2: 1.0, 3: 1.0})) == -2
    assert order_of_h(HarmonicExpansion(2.0, {3: 1.0})) == 0
    assert order_of_h(HarmonicExpansion(0.0, {0: 5.0, 2: 1.0})) == 2
    with pytest.raises(ValueError):
        order_of_h(HarmonicExpansion(0.0, {0: 1.0}))


# -- asymptotic fit -------------------------------------------------------------


def ladder(d, n=12, rmin=1e-6, rmax=1e-2):
    r = np.geomspace(rmax, rmin, n)
    return [(float(x), float(d.u.value_xy(x, 0.0))) for x in r]


@pytest.mark.parametrize("beta", CONE_BETAS)
@pytest.mark.parametrize("C", [1.0, 2.0])
def test_fit_recovers_cones(beta, C):
    fit = asymptotic_fit(ladder(flat_cone(beta, C)))
    assert fit.kind == "conical"
    assert fit.beta == pytest.approx(beta, abs=1e-6)
    assert fit.C == pytest.approx(C, rel=1e-3)


@pytest.mark.parametrize("k", LOG_KS)
@pytest.mark.parametrize("C", [1.0, 2.0])
def test_fit_recovers_log_models(k, C):
    fit = asymptotic_fit(ladder(log_model(k, C, 1j)), n_hint=k - 1)
    assert fit.kind == "logarithmic"
    assert fit.n_plus_1 == k
    assert fit.C == pytest.approx(C, rel=1e-3)
    assert fit.order_consistent is True
    assert fit.residual < fit.alternative_residual


def test_fit_recovers_fundamental_example():
    fit = asymptotic_fit(ladder(fundamental_example()))
    assert (fit.kind, fit.n_plus_1) == ("logarithmic", -1)
    assert fit.C == pytest.approx(1.0, rel=1e-3)


@pytest.mark.parametrize(
    "d",
    [log_model(k, C, b) for k in (-3, -1, 0, 2) for C in (1.0, 2.5) for b in (1.0, cmath.exp(0.7j))]
    + [fundamental_example()],
)
def test_remainder_at_origin_matches_leading_cubic_coefficient(d):
    # for u = -(n+1) log r - log|log r| + v~, the value v~(0) is -2 log 2 - log|Xi~_0(0)|
    fit = asymptotic_fit(ladder(d))
    xi = cubic_form(d)
    lead = abs(xi.coeffs[xi.order])
    assert fit.n_plus_1 == xi.order + 1
    assert -math.log(fit.C) == pytest.approx(-2 * math.log(2) - math.log(lead), abs=1e-9)


def test_fit_with_noise_stays_discriminating():
    rng = np.random.default_rng(3)
    samples = [(r, u + 1e-4 * rng.standard_normal()) for r, u in ladder(log_model(2), n=30)]
    fit = asymptotic_fit(samples)
    assert fit.kind == "logarithmic" and fit.n_plus_1 == 2


@pytest.mark.parametrize(
    "samples",
    [
        [(1e-3, 0.0)] * 3,
        [(r, 0.0) for r in np.geomspace(0.4, 0.3, 10)],
        [(r, 0.0) for r in np.geomspace(0.9, 1e-3, 10)],
    ],
)
def test_fit_rejects_bad_input(samples):
    with pytest.raises(ValueError):
        asymptotic_fit(samples)


# -- special coordinates --------------------------------------------------------

SC_MODELS = [
    ModelSpec("flat_cone", beta=-2.0),
    ModelSpec("flat_cone", beta=0.0),
    ModelSpec("flat_cone", beta=1.0, C=2.0),
    ModelSpec("log_model", k=-2),
    ModelSpec("log_model", k=-1),
    ModelSpec("log_model", k=1, C=3.0),
    ModelSpec("fundamental"),
]


@pytest.mark.parametrize("model", SC_MODELS, ids=str)
def test_darboux_residual(model):
    for r, th in [(0.3, 0.5), (0.05, 3.0), (0.8, 6.0)]:
        assert darboux_residual(model, PointPolar(r, th)) <= 1e-6


@pytest.mark.parametrize("model", SC_MODELS, ids=str)
@pytest.mark.parametrize("which", ["p", "q"])
def test_flat_coordinates_are_parallel(model, which):
    path = Path((RadialSegment(0.5, 0.6, 0.1), ArcSegment(0.1, 0.5, 5.5)))
    assert flatness_residual_dp(model, path, which=which) <= 1e-6


def test_special_coordinates_branch_cut_and_unsupported():
    with pytest.raises(DomainError):
        special_coordinates(ModelSpec("fundamental"), PointPolar(0.5, 0.0))
    with pytest.raises(DomainError):
        flatness_residual_dp(ModelSpec("fundamental"), Path((ArcSegment(0.5, 6.0, 6.5),)))
    with pytest.raises(ValueError):
        special_coordinates(ModelSpec("log_model", k=1, b=1j), PointPolar(0.5, 1.0))


def test_custom_models_have_no_closed_form_coordinates():
    wrong = ModelSpec("custom", data=log_model(1))
    with pytest.raises(ValueError):
        darboux_residual(wrong, PointPolar(0.3, 1.0))


# -- reference holonomies -------------------------------------------------------


@pytest.mark.parametrize("k", [-3, -2, -1, 0, 1, 2, 3])
@pytest.mark.parametrize("b", [1.0, 1j, cmath.exp(2.0j)])
@pytest.mark.parametrize("theta0", [0.0, 1.3])
def test_reference_holonomy_matches_integration(k, b, theta0):
    spec = ModelSpec("log_model", k=k, C=2.0, b=b)
    m = holonomy_circle(connection_form(spec.build()), 0.4, theta0=theta0).matrix
    assert np.allclose(m, reference_holonomy(spec, 0.4, theta0), atol=1e-7)


def test_normalizing_basepoint_gives_the_standard_holonomy():
    for k in (-3, -1, 2):
        th = normalizing_basepoint(k, 1j)
        assert cmath.exp(1j * k * th) * 1j == pytest.approx(1.0)
        ref = reference_holonomy(ModelSpec("log_model", k=k, b=1j), 0.5, th)
        std = (-1) ** k * np.array([[1.0, 2 * math.pi / math.log(0.5)], [0.0, 1.0]])
        assert np.allclose(ref, std, atol=1e-12)
    with pytest.raises(ValueError):
        normalizing_basepoint(0, 1j)
    assert reference_holonomy(ModelSpec("custom", data=log_model(1)), 0.5) is None


# -- Kodaira table --------------------------------------------------------------


def test_kodaira_json_shape():
    rows = kodaira_compatible("conical", 1.5)
    assert kodaira_json(rows, "conical") == [
        {"kodaira_type": "III", "condition": "beta = 1/2 + k"},
        {"kodaira_type": "III*", "condition": "beta = 1/2 + k"},
    ]
    with pytest.raises(ValueError):
        kodaira_compatible("cusp", 1.0)


def test_kodaira_order_bound():
    assert kodaira_compatible("conical", 1.5, n=0) == []
    assert [r.kodaira_type for r in kodaira_compatible("conical", 1.5, n=3)] == ["III", "III*"]
    assert kodaira_compatible("logarithmic", 2, n=3) == []
    assert [r.kodaira_type for r in kodaira_compatible("logarithmic", 2, n=1)] == ["I0", "Ib"]


def test_table_has_ten_rows():
    assert [r.kodaira_type for r in analysis.KODAIRA_TABLE] == [
        "I0", "I0*", "Ib", "Ib*", "II", "II*", "III", "III*", "IV", "IV*",
    ]
