"""Parallel transport along piecewise paths in the punctured disk.

Transport is the linear ODE ``Y' = F(t) Y`` with

* vector frame:   ``F = -omega(gamma'(t))``
* covector frame: ``F = omega(gamma'(t))^T``

integrated by classical RK4 on uniform grids of ``2**d`` steps, with ``d``
increased until two successive grids agree (step doubling, Richardson factor
15 for a fourth-order method).  Because the ODE is linear, every RK4 step is a
2x2 propagator that can be built from the coefficient matrix at the step's
three nodes; the propagators of one grid are computed in one vectorised pass
and multiplied by pairwise reduction.  The step schedule is fixed, so results
are bit-reproducible.

In the covector frame the result's columns are the transported images of
``dx`` and ``dy``.
"""

from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .connection import ConnectionForm
from .fields import DomainError, SchemaError, TWO_PI

DEFAULT_TOL = 1e-10
DEFAULT_MAX_REFINE = 24
MIN_DEPTH = 3
CHUNK = 1 << 15
CONTINUITY_TOL = 1e-12
NEAR_ORIGIN = 1e-6

VECTOR = "vector"
COVECTOR = "covector"


class PathError(DomainError):
    """A path leaves the punctured disk or is discontinuous."""


class ConvergenceError(RuntimeError):
    """Step doubling did not reach the tolerance within the refinement limit."""

    def __init__(self, message, best=None, error_estimate=None):
        super().__init__(message)
        self.best = best
        self.error_estimate = error_estimate


# --------------------------------------------------------------------------
# paths
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RadialSegment:
    """Ray at fixed angle, parametrised by ``rho = log r``."""

    theta: float
    r_from: float
    r_to: float

    def validate(self):
        for r in (self.r_from, self.r_to):
            if not 0.0 < r < 1.0:
                raise PathError(f"radial segment radius {r!r} outside (0, 1)")
        if min(self.r_from, self.r_to) < NEAR_ORIGIN:
            warnings.warn("radial segment comes within 1e-6 of the origin", RuntimeWarning)

    @property
    def interval(self):
        return math.log(self.r_from), math.log(self.r_to)

    def sample(self, t):
        c, s = math.cos(self.theta), math.sin(self.theta)
        r = np.exp(t)
        x, y = r * c, r * s
        return x, y, x, y

    @property
    def start(self):
        return self.r_from * math.cos(self.theta), self.r_from * math.sin(self.theta)

    @property
    def end(self):
        return self.r_to * math.cos(self.theta), self.r_to * math.sin(self.theta)

    def reversed(self):
        return RadialSegment(self.theta, self.r_to, self.r_from)

    def to_json(self):
        return {"type": "radial", "theta": self.theta, "r_from": self.r_from, "r_to": self.r_to}


@dataclass(frozen=True)
class ArcSegment:
    """Arc of a centred circle; angles are unreduced so winding is explicit."""

    r: float
    theta_from: float
    theta_to: float

    def validate(self):
        if not 0.0 < self.r < 1.0:
            raise PathError(f"arc radius {self.r!r} outside (0, 1)")
        if self.r < NEAR_ORIGIN:
            warnings.warn("arc comes within 1e-6 of the origin", RuntimeWarning)

    @property
    def interval(self):
        return self.theta_from, self.theta_to

    def sample(self, t):
        c, s = np.cos(t), np.sin(t)
        return self.r * c, self.r * s, -self.r * s, self.r * c

    @property
    def start(self):
        return self.r * math.cos(self.theta_from), self.r * math.sin(self.theta_from)

    @property
    def end(self):
        return self.r * math.cos(self.theta_to), self.r * math.sin(self.theta_to)

    def reversed(self):
        return ArcSegment(self.r, self.theta_to, self.theta_from)

    def to_json(self):
        return {"type": "arc", "r": self.r, "theta_from": self.theta_from, "theta_to": self.theta_to}


@dataclass(frozen=True)
class LineSegment:
    start: tuple[float, float]
    end: tuple[float, float]

    def __post_init__(self):
        object.__setattr__(self, "start", (float(self.start[0]), float(self.start[1])))
        object.__setattr__(self, "end", (float(self.end[0]), float(self.end[1])))

    def distance_to_origin(self) -> float:
        (x0, y0), (x1, y1) = self.start, self.end
        dx, dy = x1 - x0, y1 - y0
        L2 = dx * dx + dy * dy
        t = 0.0 if L2 == 0.0 else min(1.0, max(0.0, -(x0 * dx + y0 * dy) / L2))
        return math.hypot(x0 + t * dx, y0 + t * dy)

    def validate(self):
        dist = self.distance_to_origin()
        if dist <= 0.0:
            raise PathError("line segment passes through the origin")
        if max(math.hypot(*self.start), math.hypot(*self.end)) >= 1.0:
            raise PathError("line segment leaves the unit disk")
        if dist < NEAR_ORIGIN:
            warnings.warn("line segment comes within 1e-6 of the origin", RuntimeWarning)

    @property
    def interval(self):
        return 0.0, 1.0

    def sample(self, t):
        (x0, y0), (x1, y1) = self.start, self.end
        dx, dy = x1 - x0, y1 - y0
        return x0 + t * dx, y0 + t * dy, np.full_like(t, dx), np.full_like(t, dy)

    def reversed(self):
        return LineSegment(self.end, self.start)

    def to_json(self):
        return {"type": "line", "from": list(self.start), "to": list(self.end)}


Segment = RadialSegment | ArcSegment | LineSegment


@dataclass(frozen=True)
class Path:
    segments: tuple[Segment, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))

    def validate(self):
        for seg in self.segments:
            seg.validate()
        for a, b in zip(self.segments, self.segments[1:]):
            if math.dist(a.end, b.start) > CONTINUITY_TOL:
                raise PathError(f"discontinuous path: {a.end} -> {b.start}")

    @property
    def start(self):
        return self.segments[0].start if self.segments else None

    @property
    def end(self):
        return self.segments[-1].end if self.segments else None

    def __add__(self, other: "Path") -> "Path":
        return Path(self.segments + other.segments)

    def reversed(self) -> "Path":
        return Path(tuple(s.reversed() for s in reversed(self.segments)))

    def to_json(self) -> dict:
        return {"segments": [s.to_json() for s in self.segments]}

    @classmethod
    def from_json(cls, obj) -> "Path":
        if not isinstance(obj, Mapping) or set(obj) != {"segments"}:
            raise SchemaError("path must be an object with a single 'segments' key")
        segs = []
        for item in obj["segments"]:
            try:
                kind = item["type"]
                if kind == "radial":
                    segs.append(RadialSegment(float(item["theta"]), float(item["r_from"]), float(item["r_to"])))
                elif kind == "arc":
                    segs.append(ArcSegment(float(item["r"]), float(item["theta_from"]), float(item["theta_to"])))
                elif kind == "line":
                    (x0, y0), (x1, y1) = item["from"], item["to"]
                    segs.append(LineSegment((float(x0), float(y0)), (float(x1), float(y1))))
                else:
                    raise SchemaError(f"unknown segment type {kind!r}")
            except (KeyError, TypeError, ValueError) as exc:
                if isinstance(exc, SchemaError):
                    raise
                raise SchemaError(f"malformed segment {item!r}") from exc
        return cls(tuple(segs))


def circle(r: float, theta0: float = 0.0, turns: int = 1) -> Path:
    return Path((ArcSegment(r, theta0, theta0 + turns * TWO_PI),))


# --------------------------------------------------------------------------
# integrator
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TransportResult:
    matrix: np.ndarray
    error_estimate: float
    steps_used: int


def _max_refine_default() -> int:
    env = os.environ.get("SPK2D_MAX_REFINE")
    if env:
        try:
            return int(env)
        except ValueError:
            pass
    return DEFAULT_MAX_REFINE


def _coefficients(c: ConnectionForm, seg, t, frame):
    x, y, vx, vy = seg.sample(t)
    m = c.apply_xy(x, y, vx, vy)
    if frame == COVECTOR:
        return np.swapaxes(m, -1, -2)
    return -m


def _reduce(props: np.ndarray) -> np.ndarray:
    """Ordered product ``P[n-1] @ ... @ P[0]`` by pairwise reduction."""
    while props.shape[0] > 1:
        if props.shape[0] % 2:
            props = np.concatenate([props, np.eye(2)[None]], axis=0)
        props = props[1::2] @ props[0::2]
    return props[0]


def _rk4_product(c, seg, n: int, frame) -> np.ndarray:
    t0, t1 = seg.interval
    h = (t1 - t0) / n
    out = np.eye(2)
    eye = np.eye(2)
    for start in range(0, n, CHUNK):
        m = min(CHUNK, n - start)
        # nodes at half-step spacing: t_i, t_i + h/2, t_i + h
        idx = np.arange(2 * m + 1, dtype=float) * 0.5 + start
        t = t0 + idx * h
        if start + m == n:
            t[-1] = t1
        F = _coefficients(c, seg, t, frame)
        F0, Fh, F1 = F[0:-1:2], F[1::2], F[2::2]
        K1 = F0
        K2 = Fh @ (eye + 0.5 * h * K1)
        K3 = Fh @ (eye + 0.5 * h * K2)
        K4 = F1 @ (eye + h * K3)
        props = eye + (h / 6.0) * (K1 + 2.0 * K2 + 2.0 * K3 + K4)
        out = _reduce(props) @ out
    return out


def _transport_segment(c, seg, tol, frame, max_refine):
    t0, t1 = seg.interval
    if t0 == t1:
        return np.eye(2), 0.0, 0
    depth = MIN_DEPTH
    prev = _rk4_product(c, seg, 1 << depth, frame)
    steps = 1 << depth
    err = math.inf
    cur = prev
    while depth < max_refine:
        depth += 1
        cur = _rk4_product(c, seg, 1 << depth, frame)
        steps += 1 << depth
        err = float(np.max(np.abs(cur - prev))) / 15.0
        if err <= tol * max(1.0, float(np.max(np.abs(cur)))):
            return cur, err, steps
        prev = cur
    raise ConvergenceError(
        f"transport did not converge to {tol:g} within refinement depth {max_refine}"
        f" (estimate {err:.3g})",
        best=cur,
        error_estimate=err,
    )


def parallel_transport(
    c: ConnectionForm,
    path: Path,
    tol: float = DEFAULT_TOL,
    frame: str = COVECTOR,
    max_refine: int | None = None,
) -> TransportResult:
    """Transport matrix along ``path``.

    The tolerance applies to the whole path and is split evenly between
    segments; per segment it is relative to ``max(1, max|entry|)``.
    """
    if frame not in (VECTOR, COVECTOR):
        raise ValueError(f"frame must be 'vector' or 'covector', got {frame!r}")
    if not tol > 0.0:
        raise ValueError("tol must be positive")
    path.validate()
    if max_refine is None:
        max_refine = _max_refine_default()
    total = np.eye(2)
    err_total = 0.0
    steps_total = 0
    seg_tol = tol / max(1, len(path.segments))
    for seg in path.segments:
        m, err, steps = _transport_segment(c, seg, seg_tol, frame, max_refine)
        total = m @ total
        err_total += err
        steps_total += steps
    return TransportResult(total, err_total, steps_total)


def holonomy_circle(
    c: ConnectionForm,
    r: float,
    tol: float = DEFAULT_TOL,
    frame: str = COVECTOR,
    theta0: float = 0.0,
    max_refine: int | None = None,
) -> TransportResult:
    """Holonomy along the counter-clockwise circle of radius ``r`` based at ``r e^{i theta0}``."""
    if not 0.0 < r < 1.0:
        raise PathError(f"radius {r!r} outside (0, 1)")
    return parallel_transport(c, circle(r, theta0), tol, frame, max_refine)


def trace_invariance(
    c: ConnectionForm, radii: Sequence[float], tol: float = DEFAULT_TOL, frame: str = COVECTOR
) -> float:
    """Largest pairwise difference of holonomy traces over ``radii``."""
    traces = [float(np.trace(holonomy_circle(c, r, tol, frame).matrix)) for r in radii]
    if len(traces) < 2:
        return 0.0
    return max(traces) - min(traces)


def straight_path(points: Iterable[tuple[float, float]]) -> Path:
    pts = list(points)
    return Path(tuple(LineSegment(a, b) for a, b in zip(pts, pts[1:])))
