"""Model special Kähler structures on the punctured disk and the
coordinate-change, rescaling and pull-back constructions relating them.

A structure is stored as a triple ``(h, u, a)``: metric ``exp(-u)|dz|^2`` and
connection form assembled from ``dh + a*phi`` with ``phi = -dtheta`` (see
:mod:`spk2d.connection`).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .fields import HarmonicExpansion, ScalarExpression, SchemaError, Term

UNIT_TOL = 1e-12


@dataclass(frozen=True)
class SpecialKahlerData:
    h: HarmonicExpansion
    u: ScalarExpression
    a: float = 0.0
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "a", float(self.a))

    def metric_xy(self, x, y):
        """Conformal factor ``w = exp(-u)`` of the metric."""
        return self.u.exp_xy(x, y, -1.0)

    def to_json(self) -> dict:
        return {"h": self.h.to_json(), "u": self.u.to_json(), "a": self.a, "label": self.label}

    @classmethod
    def from_json(cls, obj) -> "SpecialKahlerData":
        if not isinstance(obj, Mapping):
            raise SchemaError("custom data must be a JSON object")
        unknown = set(obj) - {"h", "u", "a", "label"}
        if unknown or "h" not in obj or "u" not in obj:
            raise SchemaError("custom data needs keys 'h', 'u' and optionally 'a', 'label'")
        try:
            a = float(obj.get("a", 0.0))
        except (TypeError, ValueError) as exc:
            raise SchemaError("'a' must be a number") from exc
        return cls(
            HarmonicExpansion.from_json(obj["h"]),
            ScalarExpression.from_json(obj["u"]),
            a,
            str(obj.get("label", "custom")),
        )


def _check_unit(b: complex, what: str = "b") -> complex:
    b = complex(b)
    if abs(abs(b) - 1.0) > UNIT_TOL:
        raise ValueError(f"{what} must have unit modulus, got |{what}| = {abs(b)!r}")
    return b


def _check_positive(C: float) -> float:
    C = float(C)
    if not C > 0.0:
        raise ValueError(f"C must be positive, got {C!r}")
    return C


# --------------------------------------------------------------------------
# catalog
# --------------------------------------------------------------------------


def flat_cone(beta: float, C: float = 1.0) -> SpecialKahlerData:
    """Flat cone ``C r^beta |dz|^2`` with connection equal to Levi-Civita."""
    C = _check_positive(C)
    beta = float(beta)
    u = ScalarExpression.log_r(-beta) + ScalarExpression.constant(-math.log(C))
    return SpecialKahlerData(HarmonicExpansion(), u, 0.0, f"flat_cone(beta={beta!r}, C={C!r})")


def log_model(k: int, C: float = 1.0, b: complex = 1.0) -> SpecialKahlerData:
    """Logarithmic model with metric ``-C r^k log r |dz|^2``."""
    if int(k) != k:
        raise ValueError(f"k must be an integer, got {k!r}")
    k = int(k)
    C = _check_positive(C)
    b = _check_unit(b)
    u = (
        ScalarExpression.log_r(-k)
        + ScalarExpression.log_neg_log_r(-1.0)
        + ScalarExpression.constant(-math.log(C))
    )
    if k == 0:
        h = HarmonicExpansion(C * b.real)
        a = C * b.imag
    else:
        h = HarmonicExpansion(0.0, {k: C * b / k})
        a = 0.0
    return SpecialKahlerData(h, u, a, f"log_model(k={k}, C={C!r}, b={b!r})")


def fundamental_example() -> SpecialKahlerData:
    """``u = log r - log|log r|``, ``h = -Re(1/z)``, ``a = 0``."""
    u = ScalarExpression.log_r(1.0) + ScalarExpression.log_neg_log_r(-1.0)
    h = HarmonicExpansion(0.0, {-1: -1.0})
    return SpecialKahlerData(h, u, 0.0, "fundamental")


# --------------------------------------------------------------------------
# transformations
# --------------------------------------------------------------------------


def _rotate_monomials(u: ScalarExpression, factor) -> ScalarExpression:
    """Substitute ``z -> factor(j) * z`` in the ``Re z^j``/``Im z^j`` terms of ``u``.

    ``factor`` maps the power ``j`` to the complex number multiplying ``z^j``.
    """
    terms = []
    for t in u.terms:
        if t.kind == "re_pow":
            g = t.coeff * factor(t.power)
        elif t.kind == "im_pow":
            g = -1j * t.coeff * factor(t.power)
        else:
            terms.append(t)
            continue
        # Re(g z^j) = Re(g) Re(z^j) - Im(g) Im(z^j)
        terms.append(Term("re_pow", g.real, t.power))
        terms.append(Term("im_pow", -g.imag, t.power))
    return ScalarExpression(tuple(terms))


def change_coordinate(d: SpecialKahlerData, lam: complex) -> SpecialKahlerData:
    """Rewrite ``d`` in the rotated coordinate ``w`` with ``z = lam * w``.

    Laurent coefficients map as ``c_j -> lam**(j + 2) c_j``, the pair
    ``(log_coeff, a)`` as ``log_coeff + i a -> lam**2 (log_coeff + i a)``, and
    ``u`` is the same function expressed in ``w``.
    """
    lam = _check_unit(lam, "lambda")
    lam2 = lam * lam
    laurent = {}
    for j, c in d.h.laurent:
        if j == 0:
            laurent[0] = (lam2 * c).real
        else:
            laurent[j] = lam ** (j + 2) * c
    ba = lam2 * complex(d.h.log_coeff, d.a)
    h = HarmonicExpansion(ba.real, laurent)
    u = _rotate_monomials(d.u, lambda j: lam**j)
    return SpecialKahlerData(h, u, ba.imag, f"{d.label} | change_coordinate({lam!r})")


def rescale_structure(d: SpecialKahlerData, C: float) -> SpecialKahlerData:
    """``(h, u, a) -> (C h, u - log C, C a)``: metric times ``C``, same connection."""
    C = _check_positive(C)
    u = d.u + ScalarExpression.constant(-math.log(C))
    return SpecialKahlerData(d.h.scaled(C), u, C * d.a, f"{d.label} | rescale_structure({C!r})")


def rescale_coordinate(d: SpecialKahlerData, lam: float) -> SpecialKahlerData:
    """Rewrite ``d`` in the coordinate ``w = lam * z`` with ``lam > 0``.

    ``u`` gains ``+2 log lam``; ``h`` and ``a`` pick up the factor ``lam**-2``
    needed to keep the connection form unchanged.  ``log|log r|`` terms have no
    representation after the substitution and are rejected.
    """
    lam = float(lam)
    if not lam > 0.0:
        raise ValueError(f"lambda must be positive, got {lam!r}")
    if d.u.coefficient("log_neg_log_r") != 0.0:
        raise ValueError("rescale_coordinate cannot represent log|log r| after rescaling")
    log_lam = math.log(lam)
    s = lam**-2
    laurent = {j: s * c * lam ** (-j) for j, c in d.h.laurent}
    # b log(r_w / lam) = b log r_w - b log lam
    laurent[0] = laurent.get(0, 0.0) - s * d.h.log_coeff * log_lam
    h = HarmonicExpansion(s * d.h.log_coeff, {j: c for j, c in laurent.items()})
    u = _rotate_monomials(d.u, lambda j: lam ** (-j))
    u = u + ScalarExpression.constant(2.0 * log_lam - d.u.coefficient("log_r") * log_lam)
    return SpecialKahlerData(h, u, s * d.a, f"{d.label} | rescale_coordinate({lam!r})")


# --------------------------------------------------------------------------
# pull-back of the fundamental example
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PullbackReport:
    k: int
    factor: float
    metric_deviation: float
    cubic_deviation: float
    n_points: int


def _fundamental_metric(zeta):
    """``-|zeta|^-1 log|zeta|``, continued to ``|zeta| >= 1`` as a formula."""
    m = np.abs(zeta)
    return -np.log(m) / m


def pullback_log_check(k: int, n_r: int = 24, n_theta: int = 24) -> PullbackReport:
    """Compare the pull-back of the fundamental example by ``z -> z**(k+2)``
    with ``(k+2)**3`` times the logarithmic model of index ``k``.

    Both the metric coefficient and the cubic form are compared on a polar
    grid; deviations are maximum relative errors.
    """
    from .analysis import cubic_form

    if int(k) != k:
        raise ValueError(f"k must be an integer, got {k!r}")
    k = int(k)
    if k == -2:
        raise ValueError("k = -2 has no pull-back description")
    factor = float((k + 2) ** 3)

    r = np.geomspace(1e-2, 0.9, n_r)
    th = 2.0 * np.pi * (np.arange(n_theta) + 0.5) / n_theta
    R, TH = np.meshgrid(r, th, indexing="ij")
    z = R * np.exp(1j * TH)
    zeta = z ** (k + 2)
    dzeta = (k + 2) * z ** (k + 1)

    pulled = _fundamental_metric(zeta) * np.abs(dzeta) ** 2
    target = factor * log_model(k).metric_xy(z.real, z.imag)
    metric_dev = float(np.max(np.abs(pulled - target) / np.abs(target)))

    xi_fund = cubic_form(fundamental_example())
    pulled_xi = xi_fund.evaluate(zeta) * dzeta**3
    target_xi = -factor * 0.25j * z ** (k - 1)
    cubic_dev = float(np.max(np.abs(pulled_xi - target_xi) / np.abs(target_xi)))
    return PullbackReport(k, factor, metric_dev, cubic_dev, int(z.size))


# --------------------------------------------------------------------------
# ModelSpec
# --------------------------------------------------------------------------

KINDS = ("flat_cone", "log_model", "fundamental", "custom")


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    beta: float = 0.0
    k: int = 0
    C: float = 1.0
    b: complex = 1.0
    data: SpecialKahlerData | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown model kind {self.kind!r}")
        _check_positive(self.C)
        _check_unit(self.b)
        if self.kind == "custom" and self.data is None:
            raise SchemaError("custom model needs data")

    def build(self) -> SpecialKahlerData:
        if self.kind == "flat_cone":
            return flat_cone(self.beta, self.C)
        if self.kind == "log_model":
            return log_model(self.k, self.C, self.b)
        if self.kind == "fundamental":
            return fundamental_example()
        return self.data

    def to_json(self) -> dict:
        if self.kind == "flat_cone":
            return {"kind": "flat_cone", "beta": self.beta, "C": self.C}
        if self.kind == "log_model":
            b = complex(self.b)
            return {"kind": "log_model", "k": self.k, "C": self.C, "b": [b.real, b.imag]}
        if self.kind == "fundamental":
            return {"kind": "fundamental"}
        return {"kind": "custom", "data": self.data.to_json()}

    @classmethod
    def from_json(cls, obj) -> "ModelSpec":
        if not isinstance(obj, Mapping) or "kind" not in obj:
            raise SchemaError("model spec must be an object with a 'kind' key")
        kind = obj["kind"]
        allowed = {
            "flat_cone": {"kind", "beta", "C"},
            "log_model": {"kind", "k", "C", "b"},
            "fundamental": {"kind"},
            "custom": {"kind", "data"},
        }
        if kind not in allowed:
            raise SchemaError(f"unknown model kind {kind!r}")
        extra = set(obj) - allowed[kind]
        if extra:
            raise SchemaError(f"unexpected keys for {kind}: {sorted(extra)}")
        try:
            if kind == "flat_cone":
                return cls("flat_cone", beta=float(obj["beta"]), C=float(obj.get("C", 1.0)))
            if kind == "log_model":
                k = obj["k"]
                if isinstance(k, bool) or int(k) != k:
                    raise SchemaError("k must be an integer")
                b = obj.get("b", [1.0, 0.0])
                re, im = b
                return cls("log_model", k=int(k), C=float(obj.get("C", 1.0)), b=complex(float(re), float(im)))
            if kind == "fundamental":
                return cls("fundamental")
            return cls("custom", data=SpecialKahlerData.from_json(obj["data"]))
        except SchemaError:
            raise
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed {kind} spec: {exc}") from exc


def unit_phase(b: complex) -> float:
    """Argument of a unit complex number in ``[0, 2*pi)``."""
    return cmath.phase(b) % (2.0 * math.pi)
