"""Operator families (projections, resolvents, prox maps) and empirical
checkers for firm-nonexpansiveness-style properties.

Families are immutable after construction and their apply methods are pure,
so concurrent use is safe.  The checkers are sampling-based surrogates for
universally quantified inequalities; sample counts and tolerances are
explicit parameters.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .geometry import Geodesic, Point, combine, distance, project

DEFAULT_TOL = 1e-9

PointMap = Callable[[Point], Point]


class SolverError(RuntimeError):
    """A fixed-point solve did not reach its tolerance within max_iter."""


@dataclass(frozen=True)
class ProjectionFamily:
    """gamma-indexed family that is constant in gamma: every member projects
    onto the same geodesic."""

    target: Geodesic

    def apply(self, gamma: float, p: Point) -> Point:
        if not gamma > 0:
            raise ValueError(f"step size must be positive, got {gamma}")
        return project(p, self.target)


@dataclass(frozen=True)
class ResolventOfNonexpansive:
    """Resolvents of a nonexpansive base map, solved by contraction iteration.

    apply(gamma, p) returns the unique z with z = (1/(1+gamma)) p (+)
    (gamma/(1+gamma)) T z; the iteration contracts with factor
    gamma/(1+gamma) < 1.
    """

    base: PointMap
    tol: float = 1e-12
    max_iter: int = 10**6

    def apply(self, gamma: float, p: Point) -> Point:
        if not gamma > 0:
            raise ValueError(f"step size must be positive, got {gamma}")
        t = gamma / (1.0 + gamma)
        z = p
        stop = self.tol * (1.0 - t)
        for _ in range(self.max_iter):
            z_next = combine(p, self.base(z), t)
            if distance(z, z_next) < stop:
                return z_next
            z = z_next
        raise SolverError(
            f"resolvent did not converge in {self.max_iter} iterations "
            f"(gamma={gamma}, tol={self.tol})"
        )


@dataclass(frozen=True)
class ProxSquaredDistance:
    """Proximal maps of f = d^2(., center)/2; these have the closed form
    (1/(1+gamma)) p (+) (gamma/(1+gamma)) center."""

    center: Point

    def apply(self, gamma: float, p: Point) -> Point:
        if not gamma > 0:
            raise ValueError(f"step size must be positive, got {gamma}")
        return combine(p, self.center, gamma / (1.0 + gamma))


OperatorFamily = ProjectionFamily | ResolventOfNonexpansive | ProxSquaredDistance


def apply_resolvent(family: OperatorFamily, gamma: float, p: Point) -> Point:
    return family.apply(gamma, p)


@dataclass(frozen=True)
class StepSizes:
    """Step-size sequence (gamma_n) with a uniform lower bound and an
    optional pointwise upper sequence."""

    constant: float | None = None
    explicit: tuple[float, ...] | None = None
    lower: float = 0.0
    upper: tuple[float, ...] | None = None

    def __post_init__(self):
        if (self.constant is None) == (self.explicit is None):
            raise ValueError("exactly one of constant/explicit must be given")
        for n in range(len(self.explicit or ())):
            g = self.gamma(n)
            if self.lower and g < self.lower:
                raise ValueError(f"gamma_{n}={g} below stated lower bound {self.lower}")
            if self.upper is not None and self.upper[n] < g:
                raise ValueError(f"upper bound at {n} is below gamma_{n}")

    def gamma(self, n: int) -> float:
        if self.constant is not None:
            return self.constant
        if n >= len(self.explicit):
            raise IndexError(f"step sizes materialized only up to {len(self.explicit)}")
        return self.explicit[n]


@dataclass(frozen=True)
class CheckResult:
    ok: bool
    worst_violation: float


def check_p2(T: PointMap, samples, tol: float = DEFAULT_TOL) -> CheckResult:
    """Check 2 d^2(Tx,Ty) <= d^2(x,Ty) + d^2(y,Tx) - d^2(x,Tx) - d^2(y,Ty)
    on every sampled pair (x, y)."""
    worst = 0.0
    for x, y in samples:
        tx, ty = T(x), T(y)
        lhs = 2.0 * distance(tx, ty) ** 2
        rhs = (
            distance(x, ty) ** 2
            + distance(y, tx) ** 2
            - distance(x, tx) ** 2
            - distance(y, ty) ** 2
        )
        worst = max(worst, lhs - rhs)
    return CheckResult(worst <= tol, worst)


def check_mutually_p2(
    T: PointMap, U: PointMap, lam: float, mu: float, samples, tol: float = DEFAULT_TOL
) -> CheckResult:
    """Check the (lambda,mu)-mutual version of the four-distance inequality."""
    if not (lam > 0 and mu > 0):
        raise ValueError("lambda and mu must be positive")
    worst = 0.0
    for x, y in samples:
        tx, uy = T(x), U(y)
        lhs = (
            distance(tx, uy) ** 2 + distance(y, uy) ** 2 - distance(y, tx) ** 2
        ) / mu
        rhs = (
            distance(x, uy) ** 2 - distance(x, tx) ** 2 - distance(tx, uy) ** 2
        ) / lam
        worst = max(worst, lhs - rhs)
    return CheckResult(worst <= tol, worst)


def displacement_bound_check(
    T: PointMap, U: PointMap, lam: float, mu: float, samples, tol: float = DEFAULT_TOL
) -> CheckResult:
    """For mutually compatible pairs: d(Tx,Ux) <= (|lam-mu|/lam) d(x,Tx) and
    d(x,Ux) <= (2 + mu/lam) d(x,Tx) on every sample."""
    worst = 0.0
    for x in samples:
        tx, ux = T(x), U(x)
        res = distance(x, tx)
        worst = max(worst, distance(tx, ux) - abs(lam - mu) / lam * res)
        worst = max(worst, distance(x, ux) - (2.0 + mu / lam) * res)
    return CheckResult(worst <= tol, worst)


def sqne_modulus_check(
    T: PointMap, p: Point, b: float, eps: float, samples, tol: float = DEFAULT_TOL
) -> CheckResult:
    """Check the strong-quasi-nonexpansiveness modulus: for z with
    d(z,p) <= b, d(z,p) - d(Tz,p) < eps^2/2b implies d(z,Tz) < eps."""
    worst = 0.0
    threshold = eps * eps / (2.0 * b)
    for z in samples:
        if distance(z, p) > b + tol:
            raise ValueError("sample outside the stated ball around p")
        if distance(z, p) - distance(T(z), p) < threshold:
            worst = max(worst, distance(z, T(z)) - eps)
    return CheckResult(worst <= tol, worst)


def quasiness_modulus(b: float, eps: float) -> float:
    """The quantitative-quasiness modulus eps^2 / (15 b)."""
    return eps * eps / (15.0 * b)


@dataclass(frozen=True)
class QuasinessProbe:
    premise_residual: bool
    premise_displacement: bool
    conclusion: bool
    ok: bool


def quantitative_quasiness_check(
    T: PointMap, z: Point, p: Point, b: float, eps: float, tol: float = DEFAULT_TOL
) -> QuasinessProbe:
    """Probe the implication: if d(z,p)-d(Tz,p) and d(p,Tp) are both below
    the quasiness modulus, then d(z,Tz) <= eps.  Vacuously true when a
    premise fails."""
    if distance(z, p) > b + tol or distance(p, T(p)) > b + tol:
        raise ValueError("z or p outside the stated ball")
    m = quasiness_modulus(b, eps)
    pr1 = distance(z, p) - distance(T(z), p) <= m
    pr2 = distance(p, T(p)) <= m
    concl = distance(z, T(z)) <= eps + tol
    return QuasinessProbe(pr1, pr2, concl, concl or not (pr1 and pr2))
