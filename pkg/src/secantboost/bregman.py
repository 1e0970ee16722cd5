"""Chord-versus-curve geometry.

The booster never sees a gradient, so the usual Bregman divergence is replaced
by a secant version anchored on a chord, and the price of non-convexity is
measured by how far a chord's supporting line can rise above the loss over the
segment it spans (the "optimal bound information", OBI).  All maxima here are
grid maxima: grid_points counts uniform subintervals, so refining the grid by
an integer factor reuses every coarse abscissa and the maximum can only grow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .vderiv import v_derivative

__all__ = [
    "DEFAULT_GRID",
    "REFINE_FACTOR",
    "REFINE_MARGIN",
    "ObiQuery",
    "bregman_secant",
    "obi",
    "q_star",
    "offset_feasible",
    "convex_identity_residual",
]

DEFAULT_GRID = 512

# Feasibility decisions within this distance of the budget re-run on a grid
# REFINE_FACTOR times finer before committing.
REFINE_FACTOR = 4
REFINE_MARGIN = 1e-6


@dataclass(frozen=True)
class ObiQuery:
    """Maximize (line through (a,F(a)) and (b,F(b))) - F over [min(a,c), max(a,c)].

    a anchors both the line and one end of the segment; c is the other end;
    b only shapes the line's slope.
    """

    a: float
    b: float
    c: float
    grid_points: int = DEFAULT_GRID


def bregman_secant(F, zp: float, z: float, v: float) -> float:
    """Loss gap at zp minus the chord-slope linearization taken at z.

    B(zp || z) = F(zp) - F(z) - (zp - z) * slope of F through z, z+v.
    Unlike the gradient version this can be negative; the OBI below bounds
    how negative.
    """
    zp = float(zp)
    z = float(z)
    return float(F(zp)) - float(F(z)) - (zp - z) * v_derivative(F, z, v)


def obi(F, query: ObiQuery) -> float:
    """Grid maximum of the chord line minus the loss over the spanned segment.

    Always nonnegative: the segment endpoints include a itself, where the line
    touches the loss exactly.  Degenerate chords (a == b) return 0.
    """
    if query.grid_points < 2:
        raise ValueError(f"grid_points must be >= 2, got {query.grid_points}")
    a = float(query.a)
    b = float(query.b)
    c = float(query.c)
    if a == b:
        return 0.0
    lo, hi = (a, c) if a <= c else (c, a)
    xs = np.linspace(lo, hi, query.grid_points + 1)
    fa = float(F(a))
    slope = (float(F(b)) - fa) / (b - a)
    line = fa + slope * (xs - a)
    return float(np.max(line - F(xs)))


def q_star(F, z: float, zp: float, v: float, grid_points: int = DEFAULT_GRID) -> float:
    """Worst chord distortion for the offset v at z, against the target zp.

    For convex losses the chord can only dominate the loss between its own
    endpoints, so the segment is [z, z+v] regardless of zp; otherwise the
    segment runs from z to zp.  Together with bregman_secant this gives the
    guarantee B(zp || z) >= -q_star(z, zp, v).
    """
    if F.is_convex:
        return obi(F, ObiQuery(z, z + v, z + v, grid_points))
    return obi(F, ObiQuery(z, z + v, zp, grid_points))


def offset_feasible(
    F, e_t: float, e_prev: float, v: float, z_limit: float, grid_points: int = DEFAULT_GRID
) -> bool:
    """Does the offset v at e_t keep the worst chord distortion within budget?

    Borderline calls (within REFINE_MARGIN of the budget) are re-decided on a
    REFINE_FACTOR-times finer grid.
    """
    if not z_limit > 0.0:
        raise ValueError(f"z_limit must be positive, got {z_limit}")
    q = q_star(F, e_t, e_prev, v, grid_points)
    if abs(q - z_limit) < REFINE_MARGIN:
        q = q_star(F, e_t, e_prev, v, grid_points * REFINE_FACTOR)
    return q <= z_limit


def convex_identity_residual(
    F, z: float, v: float, r: float, grid_points: int = DEFAULT_GRID
) -> float:
    """Residual of the conjugate identity at the chord slope, minus r.

    For convex F with s the slope of the chord through z and z+v,

        F(z) + F*(s) - z * s

    equals the chord's own OBI; the conjugate F*(s) = sup_t (t s - F(t)) is
    evaluated on a wide grid around z.  Returns the identity value minus r so
    callers can assert near-zero residuals directly.
    """
    if not F.is_convex:
        raise ValueError("conjugate identity requires a convex loss")
    if grid_points < 2:
        raise ValueError(f"grid_points must be >= 2, got {grid_points}")
    z = float(z)
    s = v_derivative(F, z, v)
    ts = np.linspace(z - 50.0, z + 50.0, grid_points + 1)
    conj = float(np.max(ts * s - F(ts)))
    return float(F(z)) + conj - z * s - float(r)
