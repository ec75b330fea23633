"""Anchored (Halpern-type) and regularized (Tikhonov-type) proximal point
iterations, plus the anchored resolvent curve z_t.

Convention: the literature writes the step as "alpha u + (1-alpha) v" with
the weight on the anchor first; combine(p, q, t) puts weight (1-t) on p,
so every call site here reads combine(u, v, 1 - alpha).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .geometry import Point, VectorPair, combine, distance, quasi_linearization
from .operators import OperatorFamily, PointMap, SolverError, StepSizes


@dataclass(frozen=True)
class Reciprocal:
    """Weights alpha_n = 1/(n + offset)."""

    offset: int = 2

    def __post_init__(self):
        if self.offset < 1:
            raise ValueError("offset must be >= 1 so that weights stay in (0,1]")

    def alpha(self, n: int) -> float:
        return 1.0 / (n + self.offset)


@dataclass(frozen=True)
class Explicit:
    values: tuple[float, ...]

    def __post_init__(self):
        for i, a in enumerate(self.values):
            if not 0.0 < a <= 1.0:
                raise ValueError(f"weight alpha_{i}={a} outside (0,1]")

    def alpha(self, n: int) -> float:
        if n >= len(self.values):
            raise IndexError(f"weights materialized only up to {len(self.values)}")
        return self.values[n]


WeightScheme = Reciprocal | Explicit


@dataclass(frozen=True)
class IterationConfig:
    family: OperatorFamily
    steps: StepSizes
    weights: WeightScheme
    anchor: Point
    start: Point
    num_steps: int
    variant: str = "halpern"  # "halpern" | "tikhonov"

    def __post_init__(self):
        if self.num_steps < 0:
            raise ValueError("num_steps must be nonnegative")
        if self.variant not in ("halpern", "tikhonov"):
            raise ValueError(f"unknown variant {self.variant!r}")


@dataclass
class Trajectory:
    """Materialized iterates x_0..x_N with per-step diagnostics.

    applied[n] is the image of the n-th iterate under the n-th operator
    (so for the anchored variant, points[n+1] lies between the anchor and
    applied[n]).
    """

    points: list[Point]
    applied: list[Point] = field(default_factory=list)

    def __len__(self):
        return len(self.points)

    def residuals(self) -> list[float]:
        """d(x_n, T_n x_n) for every step that was taken."""
        return [distance(x, t) for x, t in zip(self.points, self.applied)]

    def distances_to(self, limit: Point) -> list[float]:
        return [distance(x, limit) for x in self.points]


def halpern_run(cfg: IterationConfig) -> Trajectory:
    """x_{n+1} = alpha_n u (+) (1 - alpha_n) T_n x_n."""
    if cfg.variant != "halpern":
        raise ValueError("config variant is not 'halpern'")
    points = [cfg.start]
    applied = []
    for n in range(cfg.num_steps):
        t = cfg.family.apply(cfg.steps.gamma(n), points[n])
        applied.append(t)
        points.append(combine(cfg.anchor, t, 1.0 - cfg.weights.alpha(n)))
    return Trajectory(points, applied)


def tikhonov_run(cfg: IterationConfig) -> Trajectory:
    """y_{n+1} = T_n(beta_n u (+) (1 - beta_n) y_n)."""
    if cfg.variant != "tikhonov":
        raise ValueError("config variant is not 'tikhonov'")
    points = [cfg.start]
    applied = []
    for n in range(cfg.num_steps):
        mixed = combine(cfg.anchor, points[n], 1.0 - cfg.weights.alpha(n))
        nxt = cfg.family.apply(cfg.steps.gamma(n), mixed)
        applied.append(nxt)
        points.append(nxt)
    return Trajectory(points, applied)


def anchored_point(
    T: PointMap,
    u: Point,
    t: float,
    tol: float = 1e-12,
    max_iter: int = 10**6,
) -> Point:
    """The unique z with z = t u (+) (1-t) T z, found by contraction
    iteration (factor 1-t) from z_0 = u."""
    if not 0.0 < t < 1.0:
        raise ValueError(f"anchoring parameter must lie in (0,1), got {t}")
    z = u
    stop = tol * t
    for _ in range(max_iter):
        z_next = combine(u, T(z), 1.0 - t)
        if distance(z, z_next) < stop:
            return z_next
        z = z_next
    raise SolverError(f"anchored point did not converge in {max_iter} iterations (t={t})")


def lemma_l5_inequality_check(
    T: PointMap, u: Point, t: float, x: Point, tol: float = 1e-9
) -> bool:
    """Check, at one sample point, the inner-product bound satisfied along
    the anchored resolvent curve:

        <z_t x, z_t u>  <=  t/2 d^2(x,z_t)
                            + (1-t)^2/2t d(x,Tx)(d(x,Tx) + 2 d(x,z_t)).
    """
    z = anchored_point(T, u, t)
    lhs = quasi_linearization(VectorPair(z, x), VectorPair(z, u))
    res = distance(x, T(x))
    dxz = distance(x, z)
    rhs = 0.5 * t * dxz * dxz + (1.0 - t) ** 2 / (2.0 * t) * res * (res + 2.0 * dxz)
    return lhs <= rhs + tol
