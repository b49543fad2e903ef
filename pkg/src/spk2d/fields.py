"""Scalar fields on the punctured unit disk with exact derivatives.

Two representations are provided:

* :class:`HarmonicExpansion` -- ``b*log r + sum_j Re(c_j z^j)``, the form every
  single-valued harmonic function with finite Laurent data takes on the disk.
* :class:`ScalarExpression` -- a real linear combination over the basis
  ``{1, log r, log|log r|, Re z^j, Im z^j}``.  This houses the conformal
  factor ``u`` of ``g = exp(-u)|dz|^2``.

All evaluators are vectorised over numpy arrays of Cartesian coordinates
(``*_xy`` methods); the module-level functions take a :class:`PointPolar`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

TWO_PI = 2.0 * math.pi

BASIS_IDS = ("const", "log_r", "log_neg_log_r", "re_pow", "im_pow")


class DomainError(ValueError):
    """A point lies outside the punctured unit disk."""


class SchemaError(ValueError):
    """Malformed serialized input."""


@dataclass(frozen=True)
class PointPolar:
    """Point of the punctured disk in polar coordinates.

    ``theta`` is reduced to ``[0, 2*pi)`` on construction.
    """

    r: float
    theta: float = 0.0

    def __post_init__(self):
        r = float(self.r)
        if not (0.0 < r < 1.0) or not math.isfinite(r):
            raise DomainError(f"radius {self.r!r} outside (0, 1)")
        theta = math.fmod(float(self.theta), TWO_PI)
        if theta < 0.0:
            theta += TWO_PI
        if theta >= TWO_PI:
            theta = 0.0
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "theta", theta)

    @classmethod
    def from_xy(cls, x: float, y: float) -> "PointPolar":
        return cls(math.hypot(x, y), math.atan2(y, x))

    @property
    def rho(self) -> float:
        return math.log(self.r)

    @property
    def x(self) -> float:
        return self.r * math.cos(self.theta)

    @property
    def y(self) -> float:
        return self.r * math.sin(self.theta)

    @property
    def z(self) -> complex:
        return complex(self.x, self.y)


def _radius_sq(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r2 = x * x + y * y
    if np.any(r2 <= 0.0) or np.any(r2 >= 1.0):
        raise DomainError("point outside the punctured unit disk")
    return x, y, r2


# --------------------------------------------------------------------------
# ScalarExpression
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Term:
    kind: str
    coeff: float
    power: int = 0

    def __post_init__(self):
        if self.kind not in BASIS_IDS:
            raise SchemaError(f"unknown basis id {self.kind!r}")
        object.__setattr__(self, "coeff", float(self.coeff))
        object.__setattr__(self, "power", int(self.power))


def _normalize(terms: Iterable[Term]) -> tuple[Term, ...]:
    acc: dict[tuple[str, int], float] = {}
    for t in terms:
        kind, power = t.kind, t.power
        if kind in ("re_pow", "im_pow") and power == 0:
            # Re z^0 = 1, Im z^0 = 0
            if kind == "im_pow":
                continue
            kind = "const"
        if kind not in ("re_pow", "im_pow"):
            power = 0
        acc[(kind, power)] = acc.get((kind, power), 0.0) + t.coeff
    order = {k: i for i, k in enumerate(BASIS_IDS)}
    keys = sorted(acc, key=lambda kp: (order[kp[0]], kp[1]))
    return tuple(Term(k, acc[(k, p)], p) for k, p in keys if acc[(k, p)] != 0.0)


@dataclass(frozen=True)
class ScalarExpression:
    """Finite real combination of the basis functions listed in ``BASIS_IDS``.

    ``log_neg_log_r`` denotes ``log|log r|``; ``re_pow``/``im_pow`` carry an
    integer power ``j``.  Terms are merged and sorted on construction, so two
    equal expressions compare equal.
    """

    terms: tuple[Term, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "terms", _normalize(self.terms))

    # constructors -------------------------------------------------------
    @classmethod
    def constant(cls, c: float) -> "ScalarExpression":
        return cls((Term("const", c),))

    @classmethod
    def log_r(cls, c: float = 1.0) -> "ScalarExpression":
        return cls((Term("log_r", c),))

    @classmethod
    def log_neg_log_r(cls, c: float = 1.0) -> "ScalarExpression":
        return cls((Term("log_neg_log_r", c),))

    @classmethod
    def re_pow(cls, j: int, c: float = 1.0) -> "ScalarExpression":
        return cls((Term("re_pow", c, j),))

    @classmethod
    def im_pow(cls, j: int, c: float = 1.0) -> "ScalarExpression":
        return cls((Term("im_pow", c, j),))

    # algebra ------------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = ScalarExpression.constant(other)
        if not isinstance(other, ScalarExpression):
            return NotImplemented
        return ScalarExpression(self.terms + other.terms)

    __radd__ = __add__

    def __mul__(self, s):
        if not isinstance(s, (int, float)):
            return NotImplemented
        return ScalarExpression(tuple(Term(t.kind, s * t.coeff, t.power) for t in self.terms))

    __rmul__ = __mul__

    def __neg__(self):
        return -1.0 * self

    def __sub__(self, other):
        return self + (-other)

    def coefficient(self, kind: str, power: int = 0) -> float:
        for t in self.terms:
            if t.kind == kind and t.power == power:
                return t.coeff
        return 0.0

    # evaluation ---------------------------------------------------------
    def value_xy(self, x, y):
        x, y, r2 = _radius_sq(x, y)
        out = np.zeros_like(r2)
        z = x + 1j * y
        for t in self.terms:
            if t.kind == "const":
                out = out + t.coeff
            elif t.kind == "log_r":
                out = out + t.coeff * 0.5 * np.log(r2)
            elif t.kind == "log_neg_log_r":
                out = out + t.coeff * np.log(-0.5 * np.log(r2))
            elif t.kind == "re_pow":
                out = out + t.coeff * (z**t.power).real
            else:
                out = out + t.coeff * (z**t.power).imag
        return out

    def exp_xy(self, x, y, sign: float = 1.0):
        """``exp(sign * expr)`` evaluated factor by factor.

        Powers of ``r`` and ``|log r|`` are taken directly instead of
        exponentiating a large logarithm, which keeps the relative error at a
        few ulp even where ``expr`` itself is large.
        """
        x, y, r2 = _radius_sq(x, y)
        r = np.sqrt(r2)
        neg_rho = -np.log(r)
        z = x + 1j * y
        out = np.ones_like(r2)
        lin = np.zeros_like(r2)
        for t in self.terms:
            c = sign * t.coeff
            if t.kind == "const":
                lin = lin + c
            elif t.kind == "log_r":
                out = out * r**c
            elif t.kind == "log_neg_log_r":
                out = out * neg_rho**c
            elif t.kind == "re_pow":
                lin = lin + c * (z**t.power).real
            else:
                lin = lin + c * (z**t.power).imag
        return out * np.exp(lin)

    def gradient_xy(self, x, y):
        x, y, r2 = _radius_sq(x, y)
        gx = np.zeros_like(r2)
        gy = np.zeros_like(r2)
        z = x + 1j * y
        for t in self.terms:
            c, j = t.coeff, t.power
            if t.kind == "const":
                continue
            if t.kind == "log_r":
                gx = gx + c * x / r2
                gy = gy + c * y / r2
            elif t.kind == "log_neg_log_r":
                rho = 0.5 * np.log(r2)
                gx = gx + c * x / (r2 * rho)
                gy = gy + c * y / (r2 * rho)
            else:
                d = j * z ** (j - 1)
                if t.kind == "re_pow":
                    gx = gx + c * d.real
                    gy = gy - c * d.imag
                else:
                    gx = gx + c * d.imag
                    gy = gy + c * d.real
        return gx, gy

    def hessian_xy(self, x, y):
        """Return ``(f_xx, f_xy, f_yy)``."""
        x, y, r2 = _radius_sq(x, y)
        hxx = np.zeros_like(r2)
        hxy = np.zeros_like(r2)
        hyy = np.zeros_like(r2)
        z = x + 1j * y
        r4 = r2 * r2
        for t in self.terms:
            c, j = t.coeff, t.power
            if t.kind == "const":
                continue
            if t.kind in ("log_r", "log_neg_log_r"):
                lxx = (y * y - x * x) / r4
                lyy = (x * x - y * y) / r4
                lxy = -2.0 * x * y / r4
                if t.kind == "log_r":
                    hxx, hxy, hyy = hxx + c * lxx, hxy + c * lxy, hyy + c * lyy
                else:
                    rho = 0.5 * np.log(r2)
                    px, py = x / r2, y / r2
                    hxx = hxx + c * (lxx / rho - px * px / rho**2)
                    hxy = hxy + c * (lxy / rho - px * py / rho**2)
                    hyy = hyy + c * (lyy / rho - py * py / rho**2)
            else:
                d2 = j * (j - 1) * z ** (j - 2)
                if t.kind == "re_pow":
                    hxx, hxy, hyy = hxx + c * d2.real, hxy - c * d2.imag, hyy - c * d2.real
                else:
                    hxx, hxy, hyy = hxx + c * d2.imag, hxy + c * d2.real, hyy - c * d2.imag
        return hxx, hxy, hyy

    def laplacian_xy(self, x, y):
        x, y, r2 = _radius_sq(x, y)
        out = np.zeros_like(r2)
        for t in self.terms:
            if t.kind == "log_neg_log_r":
                rho = 0.5 * np.log(r2)
                out = out - t.coeff / (r2 * rho * rho)
        return out

    # serialization -------------------------------------------------------
    def to_json(self) -> dict:
        out = []
        for t in self.terms:
            if t.kind in ("re_pow", "im_pow"):
                out.append([t.kind, t.power, t.coeff])
            else:
                out.append([t.kind, t.coeff])
        return {"terms": out}

    @classmethod
    def from_json(cls, obj) -> "ScalarExpression":
        if not isinstance(obj, Mapping) or set(obj) != {"terms"}:
            raise SchemaError("expression must be an object with a single 'terms' key")
        terms = []
        for item in obj["terms"]:
            if not isinstance(item, (list, tuple)) or not item:
                raise SchemaError(f"bad term {item!r}")
            kind = item[0]
            if kind not in BASIS_IDS:
                raise SchemaError(f"unknown basis id {kind!r}")
            try:
                if kind in ("re_pow", "im_pow"):
                    _, j, c = item
                    if isinstance(j, bool) or int(j) != j:
                        raise SchemaError(f"non-integer power in {item!r}")
                    terms.append(Term(kind, float(c), int(j)))
                else:
                    _, c = item
                    terms.append(Term(kind, float(c)))
            except (TypeError, ValueError) as exc:
                if isinstance(exc, SchemaError):
                    raise
                raise SchemaError(f"bad term {item!r}") from exc
        return cls(tuple(terms))


# --------------------------------------------------------------------------
# HarmonicExpansion
# --------------------------------------------------------------------------


def _laurent_tuple(laurent) -> tuple[tuple[int, complex], ...]:
    items = laurent.items() if isinstance(laurent, Mapping) else laurent
    acc: dict[int, complex] = {}
    for j, c in items:
        if isinstance(j, bool) or int(j) != j:
            raise SchemaError(f"non-integer exponent {j!r}")
        j = int(j)
        acc[j] = acc.get(j, 0j) + complex(c)
    if 0 in acc:
        if acc[0].imag != 0.0:
            raise ValueError("the z^0 coefficient must be real")
    return tuple(sorted((j, c) for j, c in acc.items() if c != 0))


@dataclass(frozen=True)
class HarmonicExpansion:
    """``log_coeff * log r + sum_j Re(c_j z^j)`` on the punctured disk.

    ``laurent`` accepts a mapping ``{j: c_j}`` and is stored as a sorted tuple of
    ``(j, complex)`` pairs with zero entries dropped.
    """

    log_coeff: float = 0.0
    laurent: tuple[tuple[int, complex], ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "log_coeff", float(self.log_coeff))
        object.__setattr__(self, "laurent", _laurent_tuple(self.laurent))

    @property
    def coefficients(self) -> dict[int, complex]:
        return dict(self.laurent)

    def is_zero(self) -> bool:
        return self.log_coeff == 0.0 and not self.laurent

    def to_expression(self) -> ScalarExpression:
        terms = [Term("log_r", self.log_coeff)]
        for j, c in self.laurent:
            # Re(c z^j) = Re(c) Re(z^j) - Im(c) Im(z^j)
            terms.append(Term("re_pow", c.real, j))
            terms.append(Term("im_pow", -c.imag, j))
        return ScalarExpression(tuple(terms))

    def scaled(self, s: float) -> "HarmonicExpansion":
        return HarmonicExpansion(s * self.log_coeff, {j: s * c for j, c in self.laurent})

    def value_xy(self, x, y):
        x, y, r2 = _radius_sq(x, y)
        z = x + 1j * y
        out = self.log_coeff * 0.5 * np.log(r2)
        for j, c in self.laurent:
            out = out + (c * z**j).real
        return out

    def wirtinger_xy(self, x, y):
        """Holomorphic derivative ``dh/dz``."""
        x, y, _ = _radius_sq(x, y)
        z = x + 1j * y
        out = self.log_coeff / (2.0 * z)
        for j, c in self.laurent:
            if j != 0:
                out = out + 0.5 * j * c * z ** (j - 1)
        return out

    def gradient_xy(self, x, y):
        w = self.wirtinger_xy(x, y)
        return 2.0 * w.real, -2.0 * w.imag

    def laplacian_xy(self, x, y):
        _, _, r2 = _radius_sq(x, y)
        return np.zeros_like(r2)

    def hessian_xy(self, x, y):
        return self.to_expression().hessian_xy(x, y)

    def exp_xy(self, x, y, sign: float = 1.0):
        return np.exp(sign * self.value_xy(x, y))

    def to_json(self) -> dict:
        return {
            "log_coeff": self.log_coeff,
            "laurent": [[j, c.real, c.imag] for j, c in self.laurent],
        }

    @classmethod
    def from_json(cls, obj) -> "HarmonicExpansion":
        if not isinstance(obj, Mapping) or set(obj) - {"log_coeff", "laurent"}:
            raise SchemaError("harmonic expansion must have keys 'log_coeff', 'laurent'")
        try:
            b = float(obj.get("log_coeff", 0.0))
            pairs = []
            for item in obj.get("laurent", []):
                j, re, im = item
                pairs.append((j, complex(float(re), float(im))))
            return cls(b, pairs)
        except SchemaError:
            raise
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"bad harmonic expansion: {exc}") from exc


# --------------------------------------------------------------------------
# point-wise API
# --------------------------------------------------------------------------

Field = ScalarExpression | HarmonicExpansion


def evaluate(expr: Field, p: PointPolar) -> float:
    return float(expr.value_xy(p.x, p.y))


def gradient(expr: Field, p: PointPolar) -> tuple[float, float]:
    gx, gy = expr.gradient_xy(p.x, p.y)
    return float(gx), float(gy)


def laplacian(expr: Field, p: PointPolar) -> float:
    return float(expr.laplacian_xy(p.x, p.y))


def wirtinger(h: HarmonicExpansion, p: PointPolar) -> complex:
    return complex(h.wirtinger_xy(p.x, p.y))
