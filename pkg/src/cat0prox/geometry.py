"""Concrete CAT(0) models: Euclidean space and the Poincare upper half-plane.

Points are immutable tagged values.  All operations are pure functions, so
everything here is safe to use concurrently.

The half-plane convex combination goes through the hyperboloid model
(embed, interpolate with the sinh-weighted geodesic formula, map back);
a direct half-plane parametrization is kept as a cross-check oracle.
Projection onto a vertical ray uses the perpendicular-semicircle family;
projection onto a semicircle conjugates by a Mobius isometry that sends
the semicircle to a vertical ray.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# Half-plane points are rejected below this height; identities in the test
# suites are asserted to 1e-9, so this leaves plenty of headroom.
MIN_Y = 1e-12


class GeometryError(ValueError):
    """Invalid point, invalid geodesic, or mixed-model arguments."""


@dataclass(frozen=True)
class Euclidean:
    coords: tuple[float, ...]

    def __init__(self, coords):
        object.__setattr__(self, "coords", tuple(float(c) for c in coords))


@dataclass(frozen=True)
class HalfPlane:
    x: float
    y: float

    def __post_init__(self):
        if not self.y >= MIN_Y:
            raise GeometryError(f"half-plane point needs y > 0, got y={self.y}")


Point = Euclidean | HalfPlane


@dataclass(frozen=True)
class Semicircle:
    """Geodesic line {(x,y) : (x-a)^2 + y^2 = r^2, y > 0}."""

    a: float
    r: float

    def __post_init__(self):
        if not self.r > 0:
            raise GeometryError(f"semicircle needs r > 0, got r={self.r}")


@dataclass(frozen=True)
class VerticalRay:
    """Geodesic line {(x,y) : x = a, y > 0}."""

    a: float


Geodesic = Semicircle | VerticalRay


@dataclass(frozen=True)
class VectorPair:
    """Ordered pair of points (tail, head), one formal vector."""

    tail: Point
    head: Point

    def __post_init__(self):
        _require_same_model(self.tail, self.head)


def _require_same_model(*points: Point) -> None:
    first = points[0]
    for p in points[1:]:
        if type(p) is not type(first):
            raise GeometryError(f"mixed models: {type(first).__name__} vs {type(p).__name__}")
        if isinstance(p, Euclidean) and len(p.coords) != len(first.coords):
            raise GeometryError(
                f"dimension mismatch: {len(first.coords)} vs {len(p.coords)}"
            )


def arcosh(x: float) -> float:
    """ln(x + sqrt(x^2 - 1)), clamped at 1 to absorb rounding."""
    x = max(x, 1.0)
    return math.log(x + math.sqrt(x * x - 1.0))


def distance(p: Point, q: Point) -> float:
    """Geodesic distance between two points of the same model."""
    _require_same_model(p, q)
    if p == q:
        return 0.0
    if isinstance(p, Euclidean):
        return math.dist(p.coords, q.coords)
    dx = q.x - p.x
    dy = q.y - p.y
    return arcosh(1.0 + (dx * dx + dy * dy) / (2.0 * p.y * q.y))


# -- hyperboloid round trip -------------------------------------------------
#
# (x,y) maps to ((x^2+y^2+1)/2y, x/y, (x^2+y^2-1)/2y) on {t^2-a^2-b^2=1, t>0};
# the Minkowski product of two images is cosh of the half-plane distance.

def _embed(p: HalfPlane) -> tuple[float, float, float]:
    s = p.x * p.x + p.y * p.y
    return ((s + 1.0) / (2.0 * p.y), p.x / p.y, (s - 1.0) / (2.0 * p.y))


def _unembed(t: float, a: float, b: float) -> HalfPlane:
    y = 1.0 / (t - b)
    return HalfPlane(a * y, y)


def combine(p: Point, q: Point, t: float) -> Point:
    """The point (1-t)p + tq on the unique geodesic from p to q."""
    _require_same_model(p, q)
    if not 0.0 <= t <= 1.0:
        raise GeometryError(f"combination parameter must lie in [0,1], got {t}")
    if p == q:
        return p
    if t == 0.0:
        return p
    if t == 1.0:
        return q
    if isinstance(p, Euclidean):
        return Euclidean((1.0 - t) * a + t * b for a, b in zip(p.coords, q.coords))
    d = distance(p, q)
    pe, qe = _embed(p), _embed(q)
    sh = math.sinh(d)
    w1 = math.sinh((1.0 - t) * d) / sh
    w2 = math.sinh(t * d) / sh
    return _unembed(*(w1 * a + w2 * b for a, b in zip(pe, qe)))


def combine_halfplane_direct(p: HalfPlane, q: HalfPlane, t: float) -> HalfPlane:
    """Independent half-plane interpolation used to cross-check combine().

    Vertical geodesics are exponential in y; on a semicircle the arc-length
    parameter is u = ln tan(theta/2), so interpolation is linear in u.
    """
    if p == q or t == 0.0:
        return p
    if t == 1.0:
        return q
    if math.isclose(p.x, q.x, rel_tol=0.0, abs_tol=1e-14):
        y = p.y ** (1.0 - t) * q.y**t
        return HalfPlane(p.x, y)
    a = (q.x * q.x + q.y * q.y - p.x * p.x - p.y * p.y) / (2.0 * (q.x - p.x))
    r = math.hypot(p.x - a, p.y)
    u1 = math.log(math.tan(math.atan2(p.y, p.x - a) / 2.0))
    u2 = math.log(math.tan(math.atan2(q.y, q.x - a) / 2.0))
    u = (1.0 - t) * u1 + t * u2
    theta = 2.0 * math.atan(math.exp(u))
    return HalfPlane(a + r * math.cos(theta), r * math.sin(theta))


def quasi_linearization(v: VectorPair, w: VectorPair) -> float:
    """<v, w> = (d^2(x,v') + d^2(y,u') - d^2(x,u') - d^2(y,v')) / 2.

    In the Euclidean model this equals the dot product of the difference
    vectors; in any CAT(0) model it is bounded by the product of lengths.
    """
    x, y = v.tail, v.head
    u, z = w.tail, w.head
    _require_same_model(x, y, u, z)
    return 0.5 * (
        distance(x, z) ** 2
        + distance(y, u) ** 2
        - distance(x, u) ** 2
        - distance(y, z) ** 2
    )


def on_geodesic(p: HalfPlane, g: Geodesic, tol: float = 1e-9) -> bool:
    if isinstance(g, VerticalRay):
        return abs(p.x - g.a) <= tol
    return abs(math.hypot(p.x - g.a, p.y) - g.r) <= tol


def project(p: Point, g: Geodesic) -> HalfPlane:
    """Nearest-point projection of a half-plane point onto a geodesic line."""
    if not isinstance(p, HalfPlane):
        raise GeometryError("projection targets are half-plane geodesics")
    if isinstance(g, VerticalRay):
        # The geodesics perpendicular to a vertical ray are the semicircles
        # centered at its foot, so the projection preserves the radius.
        return HalfPlane(g.a, math.hypot(p.x - g.a, p.y))
    # z -> 1/((a+r) - z) is an isometry sending the semicircle to the
    # vertical line Re w = 1/(2r); project there and map back.
    z = complex(p.x, p.y)
    end = g.a + g.r
    w = 1.0 / (end - z)
    c = 1.0 / (2.0 * g.r)
    wp = complex(c, math.hypot(w.real - c, w.imag))
    zp = end - 1.0 / wp
    return HalfPlane(zp.real, zp.imag)
