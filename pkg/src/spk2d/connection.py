"""Connection one-forms of special Kähler triples and their verification.

Matrices act on vector components in the frame ``(d/dx, d/dy)``: a connection
form is a pair ``(A_x, A_y)`` with ``omega(v) = A_x v_x + A_y v_y``.  The flat
Hodge star is fixed by ``*dx = dy``, ``*dy = -dx``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .fields import DomainError, PointPolar, ScalarExpression
from .models import SpecialKahlerData

SPECIAL_KAHLER = "special_kahler"
LEVI_CIVITA = "levi_civita"

J = np.array([[0.0, -1.0], [1.0, 0.0]])


def _assemble(a11x, a11y, a22x, a22y):
    """Matrices of ``[[w11, -*w11], [*w22, w22]]`` from the components of w11, w22."""
    shape = np.shape(a11x)
    ax = np.empty(shape + (2, 2))
    ay = np.empty(shape + (2, 2))
    # -*(ax dx + ay dy) = ay dx - ax dy ;  *(ax dx + ay dy) = -ay dx + ax dy
    ax[..., 0, 0] = a11x
    ax[..., 0, 1] = a11y
    ax[..., 1, 0] = -a22y
    ax[..., 1, 1] = a22x
    ay[..., 0, 0] = a11y
    ay[..., 0, 1] = -a11x
    ay[..., 1, 0] = a22x
    ay[..., 1, 1] = a22y
    return ax, ay


@dataclass(frozen=True)
class ConnectionForm:
    """Evaluator for a ``gl(2, R)``-valued one-form on the punctured disk."""

    evaluator: Callable
    kind: str
    label: str = ""

    def matrices_xy(self, x, y):
        """Return ``(A_x, A_y)`` with shape ``x.shape + (2, 2)``."""
        return self.evaluator(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    def at(self, p: PointPolar):
        ax, ay = self.matrices_xy(p.x, p.y)
        return ax, ay

    def apply_xy(self, x, y, vx, vy):
        """``omega(v)`` for tangent vectors ``(vx, vy)`` at ``(x, y)``."""
        ax, ay = self.matrices_xy(x, y)
        vx = np.asarray(vx, dtype=float)[..., None, None]
        vy = np.asarray(vy, dtype=float)[..., None, None]
        return ax * vx + ay * vy


def _phi_xy(x, y):
    r2 = x * x + y * y
    # phi = -dtheta = (y dx - x dy) / r^2
    return y / r2, -x / r2


def connection_components_xy(d: SpecialKahlerData, x, y):
    """Components of ``2*w11 = e^u (dh + a phi) - du`` and ``2*w22 = -e^u (dh + a phi) - du``.

    Returns ``(w11_x, w11_y, w22_x, w22_y)``.
    """
    eu = d.u.exp_xy(x, y, 1.0)
    hx, hy = d.h.gradient_xy(x, y)
    if d.a != 0.0:
        px, py = _phi_xy(x, y)
        hx = hx + d.a * px
        hy = hy + d.a * py
    ux, uy = d.u.gradient_xy(x, y)
    return (
        0.5 * (eu * hx - ux),
        0.5 * (eu * hy - uy),
        0.5 * (-eu * hx - ux),
        0.5 * (-eu * hy - uy),
    )


def connection_form(d: SpecialKahlerData) -> ConnectionForm:
    def evaluator(x, y):
        return _assemble(*connection_components_xy(d, x, y))

    return ConnectionForm(evaluator, SPECIAL_KAHLER, d.label)


def levi_civita_form(u: ScalarExpression, label: str = "") -> ConnectionForm:
    """Levi-Civita form ``-(du * 1 + *du * J) / 2`` of ``exp(-u)|dz|^2``."""

    def evaluator(x, y):
        ux, uy = u.gradient_xy(x, y)
        # the special Kähler shape with h = 0 reproduces exactly this form
        return _assemble(-0.5 * ux, -0.5 * uy, -0.5 * ux, -0.5 * uy)

    return ConnectionForm(evaluator, LEVI_CIVITA, label)


def zero_connection() -> ConnectionForm:
    def evaluator(x, y):
        shape = np.shape(x) + (2, 2)
        return np.zeros(shape), np.zeros(shape)

    return ConnectionForm(evaluator, SPECIAL_KAHLER, "zero")


# --------------------------------------------------------------------------
# residuals
# --------------------------------------------------------------------------


def pde_terms_xy(d: SpecialKahlerData, x, y):
    """``(lap_h, lap_u, |dh + a phi|^2 e^{2u})`` evaluated in closed form."""
    lap_h = d.h.laplacian_xy(x, y)
    lap_u = d.u.laplacian_xy(x, y)
    hx, hy = d.h.gradient_xy(x, y)
    if d.a != 0.0:
        px, py = _phi_xy(x, y)
        hx = hx + d.a * px
        hy = hy + d.a * py
    eu = d.u.exp_xy(x, y, 1.0)
    rhs = (eu * hx) ** 2 + (eu * hy) ** 2
    return lap_h, lap_u, rhs


def pde_residual(d: SpecialKahlerData, p: PointPolar) -> tuple[float, float]:
    """``(lap h, lap u - |dh + a phi|^2 e^{2u})`` at ``p``."""
    lap_h, lap_u, rhs = pde_terms_xy(d, p.x, p.y)
    return float(lap_h), float(lap_u - rhs)


def pde_residual_scaled_xy(d: SpecialKahlerData, x, y):
    """Residuals normalised by the size of the terms they compare.

    The second component is ``|lap u - rhs| / max(1, |lap u| + |rhs|)``; the
    first is ``|lap h|`` (identically zero in the representation used here).
    """
    lap_h, lap_u, rhs = pde_terms_xy(d, x, y)
    scale = np.maximum(1.0, np.abs(lap_u) + np.abs(rhs))
    return np.abs(lap_h), np.abs(lap_u - rhs) / scale


def square_loop(p: PointPolar, side: float):
    """Counter-clockwise axis-aligned square of the given side centred at ``p``."""
    from .transport import LineSegment, Path

    h = 0.5 * side
    cx, cy = p.x, p.y
    corners = [(cx - h, cy - h), (cx + h, cy - h), (cx + h, cy + h), (cx - h, cy + h)]
    # the square is convex, so its distance to the origin and its farthest
    # point are attained on the boundary
    if abs(cx) <= h and abs(cy) <= h:
        raise DomainError("square loop encloses the origin")
    if max(np.hypot(*c) for c in corners) >= 1.0:
        raise DomainError("square loop leaves the unit disk")
    segs = [LineSegment(corners[i], corners[(i + 1) % 4]) for i in range(4)]
    return Path(tuple(segs))


def curvature_residual(c: ConnectionForm, p: PointPolar, side: float, tol: float = 1e-11) -> float:
    """Frobenius distance from the identity of the transport around a small square."""
    from .transport import parallel_transport

    loop = square_loop(p, side)
    res = parallel_transport(c, loop, tol=tol)
    return float(np.linalg.norm(res.matrix - np.eye(2)))


def lc_deviation(d: SpecialKahlerData, p: PointPolar) -> float:
    """``r * max(|dA_x|_F, |dA_y|_F)`` for the difference ``omega - omega_LC``."""
    ax, ay = connection_form(d).at(p)
    bx, by = levi_civita_form(d.u).at(p)
    return p.r * max(float(np.linalg.norm(ax - bx)), float(np.linalg.norm(ay - by)))
