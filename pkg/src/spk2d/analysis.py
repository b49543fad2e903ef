"""Holonomy classification, cubic forms, asymptotic fits, special
coordinates and the Kodaira lookup table."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .connection import connection_form
from .fields import DomainError, HarmonicExpansion, PointPolar, TWO_PI
from .models import ModelSpec, SpecialKahlerData, unit_phase
from .transport import COVECTOR, ArcSegment, LineSegment, Path, RadialSegment, parallel_transport

ELLIPTIC = "Elliptic"
IDENTITY = "Identity"
MINUS_IDENTITY = "MinusIdentity"
PARABOLIC_PLUS = "ParabolicPlus"
PARABOLIC_MINUS = "ParabolicMinus"

DEFAULT_CLASS_TOL = 1e-7


# --------------------------------------------------------------------------
# holonomy classes
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class HolonomyClass:
    tag: str
    trace: float
    beta_mod: tuple[float, float] | None = None
    # |m - 1|_F or |m + 1|_F on the trace = +-2 boundary, for audit
    deviation: float | None = None

    def to_json(self) -> dict:
        out = {"tag": self.tag, "trace": self.trace}
        if self.beta_mod is not None:
            out["beta_mod"] = list(self.beta_mod)
        if self.deviation is not None:
            out["deviation"] = self.deviation
        return out


def _beta_pair(trace: float) -> tuple[float, float]:
    b0 = math.acos(max(-1.0, min(1.0, 0.5 * trace))) / math.pi
    return b0, 2.0 - b0


def classify_holonomy(m, tol: float = DEFAULT_CLASS_TOL) -> HolonomyClass:
    """SL(2, R) conjugacy type of ``m`` read off from its trace.

    On the ``trace = +-2`` boundary, ``+-1`` is told apart from a parabolic
    element by ``|m -+ 1|_F <= tol``.
    """
    m = np.asarray(m, dtype=float)
    if m.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got shape {m.shape}")
    det = float(np.linalg.det(m))
    if abs(det - 1.0) > tol:
        raise ValueError(f"matrix is not unimodular (det = {det!r})")
    tr = float(np.trace(m))
    if abs(tr - 2.0) <= tol:
        dev = float(np.linalg.norm(m - np.eye(2)))
        return HolonomyClass(IDENTITY if dev <= tol else PARABOLIC_PLUS, tr, None, dev)
    if abs(tr + 2.0) <= tol:
        dev = float(np.linalg.norm(m + np.eye(2)))
        return HolonomyClass(MINUS_IDENTITY if dev <= tol else PARABOLIC_MINUS, tr, None, dev)
    if abs(tr) < 2.0:
        return HolonomyClass(ELLIPTIC, tr, _beta_pair(tr))
    raise ValueError(f"|trace| = {abs(tr)!r} > 2: hyperbolic holonomy does not occur here")


def classify_from_beta(beta: float, tol: float = 1e-9, conical: bool = False) -> tuple[HolonomyClass, ...]:
    """Holonomy classes admissible for a singularity with parameter ``beta``.

    ``conical=True`` removes the parabolic options for integer ``beta``.
    """
    nearest = round(beta)
    if abs(beta - nearest) <= tol:
        if nearest % 2 == 0:
            out = [HolonomyClass(IDENTITY, 2.0)]
            if not conical:
                out.append(HolonomyClass(PARABOLIC_PLUS, 2.0))
        else:
            out = [HolonomyClass(MINUS_IDENTITY, -2.0)]
            if not conical:
                out.append(HolonomyClass(PARABOLIC_MINUS, -2.0))
        return tuple(out)
    tr = 2.0 * math.cos(math.pi * beta)
    return (HolonomyClass(ELLIPTIC, tr, _beta_pair(tr)),)


def _near_integer(x: float, tol: float) -> bool:
    return abs(x - round(x)) <= tol


def is_integral(value: float, kind: str = "trace", tol: float = 1e-9) -> bool:
    """Whether the holonomy is conjugate into ``Sp(2, Z)``.

    For ``kind="trace"`` this means ``trace in {0, +-1, +-2}``; for
    ``kind="beta"``, ``beta in Z/2 union Z/3``.
    """
    if kind == "trace":
        return abs(value) <= 2.0 + tol and _near_integer(value, tol)
    if kind == "beta":
        return _near_integer(2.0 * value, 2.0 * tol) or _near_integer(3.0 * value, 3.0 * tol)
    raise ValueError(f"kind must be 'trace' or 'beta', got {kind!r}")


# --------------------------------------------------------------------------
# cubic form and orders
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class LaurentCubic:
    """``Xi = Xi_0 dz^3`` with ``Xi_0 = sum_j coeffs[j] z^j``."""

    coeffs: dict[int, complex] = field(default_factory=dict)

    @property
    def order(self) -> float:
        """Smallest exponent with a non-zero coefficient; ``inf`` if ``Xi = 0``."""
        nz = [j for j, c in self.coeffs.items() if c != 0]
        return min(nz) if nz else math.inf

    def is_zero(self) -> bool:
        return self.order == math.inf

    def evaluate(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros_like(z)
        for j, c in self.coeffs.items():
            out = out + c * z**j
        return out

    def scaled(self, s: complex) -> "LaurentCubic":
        return LaurentCubic({j: s * c for j, c in self.coeffs.items()})

    def to_json(self) -> dict:
        order = self.order
        return {
            "coeffs": [[j, c.real, c.imag] for j, c in sorted(self.coeffs.items())],
            "order": None if order == math.inf else order,
        }


def cubic_form(d: SpecialKahlerData) -> LaurentCubic:
    """``Xi_0 = (a / (2z) - i dh/dz) / 2`` as exact Laurent data."""
    coeffs: dict[int, complex] = {}
    for j, c in d.h.laurent:
        if j != 0:
            coeffs[j - 1] = coeffs.get(j - 1, 0j) - 0.25j * j * c
    residue = 0.25 * d.a - 0.25j * d.h.log_coeff
    if residue != 0:
        coeffs[-1] = coeffs.get(-1, 0j) + residue
    return LaurentCubic({j: c for j, c in coeffs.items() if c != 0})


def order_of_h(h: HarmonicExpansion) -> int:
    """Order ``N + 1`` of a harmonic function at the origin.

    The constant term does not enter: it is invisible to ``dh`` and to the
    cubic form.  Pole terms dominate, then ``log r`` (order 0), then the lowest
    positive power.
    """
    powers = [j for j, c in h.laurent if j != 0]
    negative = [j for j in powers if j < 0]
    if negative:
        return min(negative)
    if h.log_coeff != 0.0:
        return 0
    if powers:
        return min(powers)
    raise ValueError("order of h is undefined: dh vanishes identically")


def cubic_order_rule(h: HarmonicExpansion, a: float) -> int:
    """Order of the cubic form predicted from ``h`` and ``a``: ``N`` if
    ``a == 0`` and ``min(-1, N)`` otherwise, with ``N + 1 = order_of_h(h)``."""
    if a == 0.0:
        return order_of_h(h) - 1
    if h.log_coeff == 0.0 and not any(j != 0 for j, _ in h.laurent):
        return -1
    return min(-1, order_of_h(h) - 1)


# --------------------------------------------------------------------------
# asymptotic fit
# --------------------------------------------------------------------------

CONICAL = "conical"
LOGARITHMIC = "logarithmic"
INTEGER_GATE = 1e-2
MAX_CONDITION = 1e10


@dataclass(frozen=True)
class SingularityFit:
    kind: str
    C: float
    residual: float
    alternative_residual: float
    beta: float | None = None
    n_plus_1: int | None = None
    slope: float | None = None
    b: complex | None = None
    order_consistent: bool | None = None

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == CONICAL:
            out["beta"] = self.beta
        else:
            out["n_plus_1"] = self.n_plus_1
            out["slope"] = self.slope
        out["C"] = self.C
        out["b"] = None if self.b is None else [self.b.real, self.b.imag]
        out["residual"] = self.residual
        out["alternative_residual"] = self.alternative_residual
        if self.order_consistent is not None:
            out["order_consistent"] = self.order_consistent
        return out


def _lstsq(X, y):
    if np.linalg.cond(X) > MAX_CONDITION:
        raise ValueError("ill-conditioned design matrix")
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    res = y - X @ coef
    return coef, float(np.sqrt(np.mean(res * res)))


def asymptotic_fit(samples: Sequence[tuple[float, float]], n_hint: int | None = None) -> SingularityFit:
    """Fit radial samples ``(r, u)`` to a conical or logarithmic singularity.

    Conical: ``u = c0 + c1 log r``.  Logarithmic: ``u + log|log r| = c0 + c1 log r``
    (the ``log|log r|`` coefficient is pinned to ``-1``).  The hypothesis with
    the smaller RMS residual wins; the logarithmic one only if ``-c1`` is
    within ``1e-2`` of an integer.
    """
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 8:
        raise ValueError("need at least 8 samples of (r, u)")
    r, u = arr[:, 0], arr[:, 1]
    if np.any(r <= 0.0) or np.any(r >= 0.5):
        raise ValueError("all sample radii must lie in (0, 0.5)")
    if r.max() / r.min() < 100.0:
        raise ValueError("samples must span at least two decades of r")
    rho = np.log(r)
    X = np.column_stack([np.ones_like(rho), rho])
    con_coef, con_res = _lstsq(X, u)
    lu = u + np.log(-rho)
    log_coef, log_res = _lstsq(X, lu)

    slope = -float(log_coef[1])
    n1 = int(round(slope))
    log_ok = abs(slope - n1) <= INTEGER_GATE
    if log_ok and log_res < con_res:
        # refit the constant with the slope pinned to the integer
        c0 = float(np.mean(lu + n1 * rho))
        consistent = None if n_hint is None else n1 == n_hint + 1
        return SingularityFit(LOGARITHMIC, math.exp(-c0), log_res, con_res, None, n1, slope, None, consistent)
    beta = -float(con_coef[1])
    consistent = None if n_hint is None else beta < n_hint + 1
    return SingularityFit(CONICAL, math.exp(-float(con_coef[0])), con_res, log_res, beta, None, None, None, consistent)


# --------------------------------------------------------------------------
# special coordinates
# --------------------------------------------------------------------------


def _catalog_parameters(model: ModelSpec):
    """``(family, parameter, C)`` with family ``cone`` or ``log``."""
    if model.kind == "flat_cone":
        return "cone", float(model.beta), model.C
    if model.kind == "fundamental":
        return "log", -1, 1.0
    if model.kind == "log_model":
        if abs(complex(model.b) - 1.0) > 1e-12:
            raise ValueError("closed-form special coordinates need b = 1")
        return "log", int(model.k), model.C
    raise ValueError(f"no closed-form special coordinates for {model.kind!r} models")


def _cut_polar(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = np.hypot(x, y)
    if np.any(r <= 0.0) or np.any(r >= 1.0):
        raise DomainError("point outside the punctured unit disk")
    th = np.mod(np.arctan2(y, x), TWO_PI)
    if np.any(th == 0.0):
        raise DomainError("point lies on the branch cut theta = 0")
    return r, th


def special_coordinates_xy(model: ModelSpec, x, y):
    """Conjugate special coordinates ``(Z, W)`` on the plane cut along ``theta = 0``."""
    family, s, C = _catalog_parameters(model)
    r, th = _cut_polar(x, y)
    logz = np.log(r) + 1j * th
    if family == "cone":
        if s == -2.0:
            Z = logz
        else:
            e = 0.5 * s + 1.0
            Z = (2.0 / (s + 2.0)) * np.exp(e * logz)
        W = 1j * Z
    elif s == -2:
        Z = logz
        W = logz**2 / 2j
    else:
        m = 2.0 / (s + 2)
        zs = np.exp(logz / m)
        Z = m * zs
        W = -1j * m * zs * (logz - m)
    scale = math.sqrt(C)
    return scale * Z, scale * W


def special_coordinates(model: ModelSpec, p: PointPolar) -> tuple[complex, complex]:
    if p.theta == 0.0:
        raise DomainError("point lies on the branch cut theta = 0")
    Z, W = special_coordinates_xy(model, p.x, p.y)
    return complex(Z), complex(W)


def _pq(model, x, y):
    Z, W = special_coordinates_xy(model, x, y)
    return Z.real, -W.real


def _fd_differentials(model, x, y, step):
    """Central differences of ``p = Re Z`` and ``q = -Re W``: ``((px, py), (qx, qy))``."""
    pxp, qxp = _pq(model, x + step, y)
    pxm, qxm = _pq(model, x - step, y)
    pyp, qyp = _pq(model, x, y + step)
    pym, qym = _pq(model, x, y - step)
    d = 2.0 * step
    return ((pxp - pxm) / d, (pyp - pym) / d), ((qxp - qxm) / d, (qyp - qym) / d)


def darboux_residual(model: ModelSpec, p: PointPolar, fd_step: float = 1e-5) -> float:
    """``|2 dp^dq(dx, dy) - 2 exp(-u)|`` with both sides doubled as in ``omega = 2 dp^dq``."""
    if p.theta == 0.0:
        raise DomainError("point lies on the branch cut theta = 0")
    h = fd_step * p.r
    (px, py), (qx, qy) = _fd_differentials(model, p.x, p.y, h)
    w = float(model.build().metric_xy(p.x, p.y))
    return float(abs(2.0 * (px * qy - py * qx) - 2.0 * w))


def _segment_crosses_cut(seg) -> bool:
    if isinstance(seg, RadialSegment):
        return math.fmod(seg.theta, TWO_PI) == 0.0
    if isinstance(seg, ArcSegment):
        lo, hi = sorted((seg.theta_from, seg.theta_to))
        k = math.floor(lo / TWO_PI)
        return not (TWO_PI * k < lo and hi < TWO_PI * (k + 1))
    (x0, y0), (x1, y1) = seg.start, seg.end
    if (y0 > 0 and y1 > 0) or (y0 < 0 and y1 < 0):
        return False
    if y0 == y1:
        return y0 == 0.0 and max(x0, x1) > 0.0
    t = y0 / (y0 - y1)
    return x0 + t * (x1 - x0) > 0.0


def flatness_residual_dp(
    model: ModelSpec,
    path: Path,
    tol: float = 1e-10,
    fd_step: float = 1e-5,
    which: str = "p",
) -> float:
    """Relative mismatch between the transported ``dp`` and ``dp`` at the path end.

    ``which="q"`` checks ``dq`` with ``q = -Re W`` instead.
    """
    if not path.segments:
        return 0.0
    if any(_segment_crosses_cut(s) for s in path.segments):
        raise DomainError("path meets the branch cut theta = 0")
    idx = {"p": 0, "q": 1}[which]
    x0, y0 = path.start
    x1, y1 = path.end
    start = np.array(_fd_differentials(model, x0, y0, fd_step * math.hypot(x0, y0))[idx], dtype=float)
    end = np.array(_fd_differentials(model, x1, y1, fd_step * math.hypot(x1, y1))[idx], dtype=float)
    res = parallel_transport(connection_form(model.build()), path, tol, COVECTOR)
    moved = res.matrix @ start
    return float(np.linalg.norm(moved - end) / np.linalg.norm(end))


# --------------------------------------------------------------------------
# closed-form holonomy of catalog models
# --------------------------------------------------------------------------


def _log_arc_transport(k: int, rho: float, s: float) -> np.ndarray:
    """Covector transport of the normalised log model from angle 0 to ``s``."""
    c, sn = math.cos(0.5 * k * s), math.sin(0.5 * k * s)
    t = s / rho
    return np.array([[c, sn + t * c], [-sn, c - t * sn]])


def reference_holonomy(model: ModelSpec, r: float, theta0: float = 0.0) -> np.ndarray | None:
    """Closed-form covector-frame holonomy based at ``r e^{i theta0}``; ``None`` for custom models."""
    if model.kind == "flat_cone":
        a = math.pi * model.beta
        return np.array([[math.cos(a), math.sin(a)], [-math.sin(a), math.cos(a)]])
    if model.kind == "custom":
        return None
    k, b = (-1, 1.0 + 0j) if model.kind == "fundamental" else (int(model.k), complex(model.b))
    rho = math.log(r)
    if k == 0:
        return np.eye(2) + (math.pi / rho) * np.array(
            [[b.imag, 1.0 + b.real], [b.real - 1.0, -b.imag]]
        )
    # the log-model form depends on theta only through b e^{ik theta}
    s0 = theta0 + unit_phase(b) / k
    M0 = _log_arc_transport(k, rho, s0)
    M1 = _log_arc_transport(k, rho, s0 + TWO_PI)
    return M1 @ np.linalg.inv(M0)


def normalizing_basepoint(k: int, b: complex) -> float:
    """Angle where ``b e^{ik theta} = 1`` (``k != 0``)."""
    if k == 0:
        raise ValueError("k = 0 has no normalising basepoint")
    return (-unit_phase(b) / k) % TWO_PI


# --------------------------------------------------------------------------
# Kodaira table
# --------------------------------------------------------------------------


def _integer_with(pred: Callable[[int], bool]):
    def rule(x: float, tol: float) -> bool:
        m = round(x)
        return abs(x - m) <= tol and pred(m)

    return rule


def _scaled_integer_with(scale: float, pred: Callable[[int], bool]):
    def rule(x: float, tol: float) -> bool:
        y = scale * x
        m = round(y)
        return abs(y - m) <= scale * tol and pred(m)

    return rule


_even = _integer_with(lambda m: m % 2 == 0)
_odd = _integer_with(lambda m: m % 2 == 1)
_thirds_pm1 = _scaled_integer_with(3.0, lambda m: m % 6 in (1, 5))
_thirds_pm2 = _scaled_integer_with(3.0, lambda m: m % 6 in (2, 4))
_half_odd = _scaled_integer_with(2.0, lambda m: m % 2 == 1)


@dataclass(frozen=True)
class KodairaRow:
    kodaira_type: str
    singularity_kind: str
    conical_condition: str | None = None
    logarithmic_condition: str | None = None
    conical_rule: Callable | None = field(default=None, compare=False, repr=False)
    logarithmic_rule: Callable | None = field(default=None, compare=False, repr=False)

    def condition(self, kind: str) -> str | None:
        return self.conical_condition if kind == CONICAL else self.logarithmic_condition

    def admits(self, kind: str, order2: float, tol: float) -> bool:
        rule = self.conical_rule if kind == CONICAL else self.logarithmic_rule
        return rule is not None and rule(order2, tol)


def _row(t, kind, con=None, log=None, con_rule=None, log_rule=None):
    return KodairaRow(t, kind, con, log, con_rule, log_rule)


KODAIRA_TABLE: tuple[KodairaRow, ...] = (
    _row("I0", "either", "beta even integer", "n odd", _even, _even),
    _row("I0*", "either", "beta odd integer", "n even", _odd, _odd),
    _row("Ib", LOGARITHMIC, None, "n odd", None, _even),
    _row("Ib*", LOGARITHMIC, None, "n even", None, _odd),
    _row("II", CONICAL, "beta = (6k+-1)/3", None, _thirds_pm1),
    _row("II*", CONICAL, "beta = (6k+-1)/3", None, _thirds_pm1),
    _row("III", CONICAL, "beta = 1/2 + k", None, _half_odd),
    _row("III*", CONICAL, "beta = 1/2 + k", None, _half_odd),
    _row("IV", CONICAL, "beta = (6k+-2)/3", None, _thirds_pm2),
    _row("IV*", CONICAL, "beta = (6k+-2)/3", None, _thirds_pm2),
)
# for the logarithmic rows the rule acts on n + 1: n odd <=> n + 1 even


def kodaira_compatible(
    kind: str, order2: float, n: int | None = None, tol: float = 1e-9
) -> list[KodairaRow]:
    """Table rows compatible with a singularity of the given kind and twice-order.

    ``order2`` is ``beta`` for conical and ``n + 1`` for logarithmic
    singularities.  With ``n`` supplied, a conical ``beta`` must satisfy
    ``beta < n + 1`` and a logarithmic ``order2`` must equal ``n + 1``.
    """
    if kind not in (CONICAL, LOGARITHMIC):
        raise ValueError(f"kind must be 'conical' or 'logarithmic', got {kind!r}")
    if n is not None:
        if kind == CONICAL and not order2 < n + 1 - tol:
            return []
        if kind == LOGARITHMIC and abs(order2 - (n + 1)) > tol:
            return []
    return [row for row in KODAIRA_TABLE if row.admits(kind, order2, tol)]


def kodaira_json(rows: Sequence[KodairaRow], kind: str) -> list[dict]:
    return [{"kodaira_type": r.kodaira_type, "condition": r.condition(kind)} for r in rows]

