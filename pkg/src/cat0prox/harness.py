"""Experiment harness: config files, trajectory tables, metastability
search, bound-vs-empirical verification, and the self-test suites.

Config files are flat key-value text documents with dotted keys, UTF-8,
'#' comments.  CSV output uses the header ``step,x,y,dist_to_limit`` with
six fractional digits and LF line endings; row 1 is the first iterate.
All file output is whole-file atomic (write temp, rename).
"""

from __future__ import annotations

import math
import os
import random
import tempfile
from dataclasses import dataclass, field
from fractions import Fraction

from . import geometry, iterations, operators, rates
from .geometry import (
    Euclidean,
    Geodesic,
    HalfPlane,
    Point,
    Semicircle,
    VectorPair,
    VerticalRay,
    combine,
    combine_halfplane_direct,
    distance,
    project,
    quasi_linearization,
)
from .iterations import IterationConfig, Reciprocal, Trajectory, halpern_run, tikhonov_run
from .operators import (
    OperatorFamily,
    ProjectionFamily,
    ProxSquaredDistance,
    ResolventOfNonexpansive,
    StepSizes,
    check_p2,
)
from .rates import BudgetExceeded, CounterFunction, PhiTrace, RateParams, phi_main


class ConfigError(ValueError):
    """Malformed config file or inconsistent experiment parameters."""


# -- golden tables ----------------------------------------------------------
# First seven anchored-iteration steps for the two reference experiments:
# projections onto the semicircle (a=3, r=2) with anchor (6,3), and onto
# the vertical ray at 2 with anchor (1,2); start (4,5), weights 1/(n+2).

GOLDEN_SEMICIRCLE = (
    (4.354121, 2.781410, 0.520238),
    (4.291735, 2.338587, 0.347794),
    (4.245949, 2.144022, 0.259202),
    (4.216943, 2.036748, 0.206300),
    (4.197234, 1.969076, 0.171248),
    (4.182998, 1.922578, 0.146342),
    (4.172229, 1.888697, 0.127743),
)

GOLDEN_RAY = (
    (1.270813, 3.311767, 0.473128),
    (1.546908, 2.889523, 0.311565),
    (1.677895, 2.702947, 0.230210),
    (1.751232, 2.597757, 0.181888),
    (1.797667, 2.530419, 0.150019),
    (1.829597, 2.483720, 0.127473),
    (1.852865, 2.449490, 0.110707),
)


# -- counter-function specs -------------------------------------------------


def parse_gspec(spec: str) -> CounterFunction:
    """Grammar: ``const:C`` | ``affine:A,C`` | ``table:v0,v1,...;tail=const:C``."""
    spec = spec.strip()
    try:
        if spec.startswith("const:"):
            return CounterFunction.constant(int(spec[6:]))
        if spec.startswith("affine:"):
            a, c = (int(v) for v in spec[7:].split(","))
            return CounterFunction.affine(a, c)
        if spec.startswith("table:"):
            body, tail = spec[6:].split(";tail=")
            values = [int(v) for v in body.split(",")]
            return CounterFunction.tabulated(values, parse_gspec(tail))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad counter-function spec {spec!r}: {exc}") from None
    raise ConfigError(f"bad counter-function spec {spec!r}")


# -- experiment configs -----------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    model: str  # "halfplane" | "euclidean"
    dim: int | None
    family_kind: str  # "projection" | "resolvent" | "prox"
    target: Geodesic | None
    base: str | None  # resolvent base: "identity" | "constant"
    base_point: Point | None
    center: Point | None
    weights_kind: str  # "reciprocal" | "explicit"
    weights_offset: int | None
    weights_values: tuple[float, ...] | None
    steps_kind: str  # "constant" | "explicit"
    steps_gamma: float | None
    steps_values: tuple[float, ...] | None
    anchor: Point
    start: Point
    num_steps: int
    variant: str
    limit: Point | None = None


def _parse_kv(text: str) -> dict[str, str]:
    out = {}
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {ln}: expected 'key = value', got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key in out:
            raise ConfigError(f"line {ln}: duplicate key {key!r}")
        out[key] = val
    return out


def _point_from(kv: dict[str, str], prefix: str, model: str) -> Point | None:
    if model == "halfplane":
        if f"{prefix}.x" not in kv:
            return None
        return HalfPlane(float(kv[f"{prefix}.x"]), float(kv[f"{prefix}.y"]))
    if f"{prefix}.coords" not in kv:
        return None
    return Euclidean(float(c) for c in kv[f"{prefix}.coords"].split(","))


def parse_config(text: str) -> ExperimentConfig:
    kv = _parse_kv(text)

    def need(key):
        if key not in kv:
            raise ConfigError(f"missing key {key!r}")
        return kv[key]

    try:
        model = need("model.kind")
        if model not in ("halfplane", "euclidean"):
            raise ConfigError(f"unknown model {model!r}")
        dim = int(kv["model.dim"]) if model == "euclidean" else None

        fam = need("family.kind")
        target = base = base_point = center = None
        if fam == "projection":
            tk = need("family.target.kind")
            if tk == "semicircle":
                target = Semicircle(float(need("family.target.a")), float(need("family.target.r")))
            elif tk == "ray":
                target = VerticalRay(float(need("family.target.a")))
            else:
                raise ConfigError(f"unknown target kind {tk!r}")
        elif fam == "resolvent":
            base = need("family.base")
            if base == "constant":
                base_point = _point_from(kv, "family.base_point", model)
                if base_point is None:
                    raise ConfigError("resolvent of a constant map needs family.base_point")
            elif base != "identity":
                raise ConfigError(f"unknown resolvent base {base!r}")
        elif fam == "prox":
            center = _point_from(kv, "family.center", model)
            if center is None:
                raise ConfigError("prox family needs family.center")
        else:
            raise ConfigError(f"unknown family kind {fam!r}")

        wk = need("weights.kind")
        offset = values = None
        if wk == "reciprocal":
            offset = int(need("weights.offset"))
        elif wk == "explicit":
            values = tuple(float(v) for v in need("weights.values").split(","))
        else:
            raise ConfigError(f"unknown weights kind {wk!r}")

        sk = kv.get("steps.kind", "constant")
        gamma = svalues = None
        if sk == "constant":
            gamma = float(kv.get("steps.gamma", "1"))
        elif sk == "explicit":
            svalues = tuple(float(v) for v in need("steps.values").split(","))
        else:
            raise ConfigError(f"unknown steps kind {sk!r}")

        anchor = _point_from(kv, "anchor", model)
        start = _point_from(kv, "start", model)
        if anchor is None or start is None:
            raise ConfigError("anchor and start coordinates are required")

        cfg = ExperimentConfig(
            model=model,
            dim=dim,
            family_kind=fam,
            target=target,
            base=base,
            base_point=base_point,
            center=center,
            weights_kind=wk,
            weights_offset=offset,
            weights_values=values,
            steps_kind=sk,
            steps_gamma=gamma,
            steps_values=svalues,
            anchor=anchor,
            start=start,
            num_steps=int(need("num_steps")),
            variant=kv.get("variant", "halpern"),
            limit=_point_from(kv, "limit", model),
        )
    except ConfigError:
        raise
    except (ValueError, geometry.GeometryError) as exc:
        raise ConfigError(str(exc)) from None
    if cfg.variant not in ("halpern", "tikhonov"):
        raise ConfigError(f"unknown variant {cfg.variant!r}")
    if cfg.num_steps < 0:
        raise ConfigError("num_steps must be nonnegative")
    return cfg


def _emit_point(lines, prefix: str, p: Point | None):
    if p is None:
        return
    if isinstance(p, HalfPlane):
        lines.append(f"{prefix}.x = {p.x!r}")
        lines.append(f"{prefix}.y = {p.y!r}")
    else:
        lines.append(f"{prefix}.coords = {','.join(repr(c) for c in p.coords)}")


def emit_config(cfg: ExperimentConfig) -> str:
    lines = [f"model.kind = {cfg.model}"]
    if cfg.model == "euclidean":
        lines.append(f"model.dim = {cfg.dim}")
    lines.append(f"variant = {cfg.variant}")
    lines.append(f"num_steps = {cfg.num_steps}")
    lines.append(f"family.kind = {cfg.family_kind}")
    if cfg.family_kind == "projection":
        if isinstance(cfg.target, Semicircle):
            lines.append("family.target.kind = semicircle")
            lines.append(f"family.target.a = {cfg.target.a!r}")
            lines.append(f"family.target.r = {cfg.target.r!r}")
        else:
            lines.append("family.target.kind = ray")
            lines.append(f"family.target.a = {cfg.target.a!r}")
    elif cfg.family_kind == "resolvent":
        lines.append(f"family.base = {cfg.base}")
        _emit_point(lines, "family.base_point", cfg.base_point)
    else:
        _emit_point(lines, "family.center", cfg.center)
    lines.append(f"weights.kind = {cfg.weights_kind}")
    if cfg.weights_kind == "reciprocal":
        lines.append(f"weights.offset = {cfg.weights_offset}")
    else:
        lines.append(f"weights.values = {','.join(repr(v) for v in cfg.weights_values)}")
    lines.append(f"steps.kind = {cfg.steps_kind}")
    if cfg.steps_kind == "constant":
        lines.append(f"steps.gamma = {cfg.steps_gamma!r}")
    else:
        lines.append(f"steps.values = {','.join(repr(v) for v in cfg.steps_values)}")
    _emit_point(lines, "anchor", cfg.anchor)
    _emit_point(lines, "start", cfg.start)
    _emit_point(lines, "limit", cfg.limit)
    return "\n".join(lines) + "\n"


def build_family(cfg: ExperimentConfig) -> OperatorFamily:
    if cfg.family_kind == "projection":
        return ProjectionFamily(cfg.target)
    if cfg.family_kind == "prox":
        return ProxSquaredDistance(cfg.center)
    if cfg.base == "identity":
        return ResolventOfNonexpansive(lambda p: p)
    return ResolventOfNonexpansive(lambda p: cfg.base_point)


def build_iteration(cfg: ExperimentConfig, num_steps: int | None = None) -> IterationConfig:
    if cfg.weights_kind == "reciprocal":
        weights = Reciprocal(cfg.weights_offset)
    else:
        weights = iterations.Explicit(cfg.weights_values)
    if cfg.steps_kind == "constant":
        steps = StepSizes(constant=cfg.steps_gamma, lower=cfg.steps_gamma)
    else:
        steps = StepSizes(explicit=cfg.steps_values, lower=min(cfg.steps_values))
    return IterationConfig(
        family=build_family(cfg),
        steps=steps,
        weights=weights,
        anchor=cfg.anchor,
        start=cfg.start,
        num_steps=cfg.num_steps if num_steps is None else num_steps,
        variant=cfg.variant,
    )


def derived_limit(cfg: ExperimentConfig) -> Point | None:
    """The strong limit, when it has a closed form: the projection of the
    anchor onto the family's common fixed point set."""
    if cfg.limit is not None:
        return cfg.limit
    if cfg.family_kind == "projection":
        return project(cfg.anchor, cfg.target)
    if cfg.family_kind == "prox":
        return cfg.center
    if cfg.base == "identity":
        return cfg.anchor
    return cfg.base_point


@dataclass
class ExperimentResult:
    rows: list[tuple[int, float, float, float]]
    limit: Point | None
    trajectory: Trajectory


def _xy(p: Point) -> tuple[float, float]:
    if isinstance(p, HalfPlane):
        return p.x, p.y
    coords = p.coords + (0.0, 0.0)
    return coords[0], coords[1]


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    if cfg.model == "euclidean" and cfg.dim not in (1, 2):
        raise ConfigError("tabulated experiments support euclidean dimension 1 or 2")
    it = build_iteration(cfg)
    traj = halpern_run(it) if cfg.variant == "halpern" else tikhonov_run(it)
    limit = derived_limit(cfg)
    rows = []
    for n, p in enumerate(traj.points[1:], 1):
        x, y = _xy(p)
        d = distance(p, limit) if limit is not None else math.nan
        rows.append((n, x, y, d))
    return ExperimentResult(rows, limit, traj)


# -- CSV --------------------------------------------------------------------

CSV_HEADER = "step,x,y,dist_to_limit"


def emit_csv(rows) -> str:
    lines = [CSV_HEADER]
    for step, x, y, d in rows:
        lines.append(f"{step},{x:.6f},{y:.6f},{d:.6f}")
    return "\n".join(lines) + "\n"


def parse_csv(text: str) -> list[tuple[int, float, float, float]]:
    lines = text.strip().split("\n")
    if lines[0] != CSV_HEADER:
        raise ConfigError(f"bad CSV header {lines[0]!r}")
    rows = []
    for line in lines[1:]:
        step, x, y, d = line.split(",")
        rows.append((int(step), float(x), float(y), float(d)))
    return rows


def write_atomic(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- metastability ----------------------------------------------------------


@dataclass(frozen=True)
class MetastabilityQuery:
    eps: float
    g: CounterFunction
    budget: int

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")


class WindowExceedsTrajectory(RuntimeError):
    """A candidate window reaches past the materialized trajectory."""


def find_metastable_N(points, q: MetastabilityQuery, metric=distance) -> int | None:
    """Least N <= budget such that every pair of indices in the window
    [N, N + g(N)] is eps-close; None when no such N exists within budget.

    Raises WindowExceedsTrajectory when the search would need indices that
    were never materialized (reported distinctly from not-found).
    """
    n_pts = len(points)
    for N in range(q.budget + 1):
        end = N + q.g.eval(N)
        if end >= n_pts:
            raise WindowExceedsTrajectory(
                f"window [{N}, {end}] exceeds trajectory of length {n_pts}"
            )
        ok = True
        for i in range(N, end + 1):
            for j in range(i + 1, end + 1):
                if metric(points[i], points[j]) > q.eps:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            return N
    return None


# -- bound verification -----------------------------------------------------


@dataclass
class BoundReport:
    empirical_n: int | None
    phi: int | None
    budget_stage: str | None  # set when the rate evaluation ran out of budget
    trace: PhiTrace | None
    verdict: bool | None  # empirical_n <= phi, when both are available


def verify_bound(
    cfg: ExperimentConfig,
    params: RateParams,
    q: MetastabilityQuery,
    fixed_point: Point,
    rate_budget: int = 10**6,
) -> BoundReport:
    """Compare the computed rate bound against the empirical least window
    start on a materialized trajectory."""
    family = build_family(cfg)
    gamma0 = cfg.steps_gamma if cfg.steps_kind == "constant" else cfg.steps_values[0]
    if distance(fixed_point, family.apply(gamma0, fixed_point)) > 1e-9:
        raise ConfigError("supplied point is not fixed by the family")
    d0 = distance(cfg.start, fixed_point)
    du = distance(cfg.anchor, fixed_point)
    if 2 * d0 > params.b or 2 * du > params.b:
        raise ConfigError(
            f"b={params.b} too small: needs 2*d(start,p)={2*d0:.6f} and "
            f"2*d(anchor,p)={2*du:.6f} both <= b"
        )
    if cfg.weights_kind == "reciprocal":
        for n in (0, 1, 7):
            if params.alpha_minorant.value(n) > Fraction(1, n + cfg.weights_offset):
                raise ConfigError("alpha minorant exceeds the configured weights")

    length = q.budget + q.g.majorant_value(q.budget) + 1
    it = build_iteration(cfg, num_steps=length)
    traj = halpern_run(it) if cfg.variant == "halpern" else tikhonov_run(it)
    empirical = find_metastable_N(traj.points, q)

    eps_exact = Fraction(str(q.eps))
    try:
        phi, trace = phi_main(params, eps_exact, q.g, budget=rate_budget)
        stage = None
    except BudgetExceeded as exc:
        phi, trace, stage = None, exc.trace, exc.stage
    verdict = None
    if empirical is not None and phi is not None:
        verdict = empirical <= phi
    return BoundReport(empirical, phi, stage, trace, verdict)


# -- selftest ---------------------------------------------------------------


@dataclass
class SuiteResult:
    name: str
    status: str  # "pass" | "fail" | "skip"
    worst: float = 0.0


@dataclass
class SelftestReport:
    suites: list[SuiteResult] = field(default_factory=list)

    @property
    def failed(self):
        return any(s.status == "fail" for s in self.suites)

    @property
    def skipped(self):
        return all(s.status == "skip" for s in self.suites)

    def lines(self):
        return [f"{s.name:32s} {s.status:5s} worst={s.worst:.3e}" for s in self.suites]


def random_halfplane(rng: random.Random, span: float = 4.0) -> HalfPlane:
    return HalfPlane(rng.uniform(-span, span), math.exp(rng.uniform(-1.2, 1.6)))


def _geometry_suite(rng: random.Random, samples: int) -> float:
    worst = 0.0
    for _ in range(samples):
        x, y, z = (random_halfplane(rng) for _ in range(3))
        t = rng.random()
        m = combine(x, y, t)
        # CAT(0) inequality
        worst = max(
            worst,
            distance(z, m) ** 2
            - ((1 - t) * distance(z, x) ** 2 + t * distance(z, y) ** 2
               - t * (1 - t) * distance(x, y) ** 2),
        )
        # geodesic law and direct-parametrization cross-check
        t2 = rng.random()
        worst = max(
            worst,
            abs(distance(m, combine(x, y, t2)) - abs(t - t2) * distance(x, y)),
        )
        worst = max(worst, distance(m, combine_halfplane_direct(x, y, t)))
        # quasi-linearization identity (i) and Cauchy-Schwarz
        u, v = random_halfplane(rng), random_halfplane(rng)
        worst = max(
            worst,
            abs(quasi_linearization(VectorPair(x, y), VectorPair(x, y)) - distance(x, y) ** 2),
        )
        worst = max(
            worst,
            quasi_linearization(VectorPair(x, y), VectorPair(u, v))
            - distance(x, y) * distance(u, v),
        )
    return worst


def _operator_suite(rng: random.Random, samples: int) -> float:
    ray = VerticalRay(2.0)
    proj = ProjectionFamily(ray)
    prox = ProxSquaredDistance(HalfPlane(1.0, 1.0))
    pairs = [(random_halfplane(rng), random_halfplane(rng)) for _ in range(samples)]
    worst = check_p2(lambda p: proj.apply(1.0, p), pairs).worst_violation
    worst = max(worst, check_p2(lambda p: prox.apply(1.0, p), pairs).worst_violation)
    # nonexpansiveness across the family
    for x, y in pairs[: max(samples // 10, 1)]:
        g = math.exp(rng.uniform(-1, 1))
        worst = max(
            worst, distance(prox.apply(g, x), prox.apply(g, y)) - distance(x, y)
        )
    return worst


def _rates_suite() -> float:
    # spot identities of the small calculators; exact, so worst is 0 or inf
    ok = (
        rates.omega(1, 1) == Fraction(1, 15)
        and rates.xi(2, 1, CounterFunction.affine(2, 0)) == 16
        and rates.psi(Fraction(1, 2), CounterFunction.constant(1), 3, 1) == 5
        and rates.phi_lfp(1, lambda e, m: 0, 5, 1) == 6
    )
    mod = rates.preset_moduli_reciprocal(2)
    ok = ok and mod.zeta(Fraction(1, 10)) == 8 and mod.S(Fraction(1, 10), 4) == 48
    return 0.0 if ok else math.inf


def _golden_suite() -> float:
    worst = 0.0
    for table, target, u in (
        (GOLDEN_SEMICIRCLE, Semicircle(3.0, 2.0), HalfPlane(6.0, 3.0)),
        (GOLDEN_RAY, VerticalRay(2.0), HalfPlane(1.0, 2.0)),
    ):
        cfg = IterationConfig(
            family=ProjectionFamily(target),
            steps=StepSizes(constant=1.0, lower=1.0),
            weights=Reciprocal(2),
            anchor=u,
            start=HalfPlane(4.0, 5.0),
            num_steps=7,
        )
        traj = halpern_run(cfg)
        limit = project(u, target)
        for (gx, gy, gd), p in zip(table, traj.points[1:]):
            worst = max(worst, abs(p.x - gx), abs(p.y - gy), abs(distance(p, limit) - gd))
    return worst


def selftest(samples: int = 10**4, seed: int = 0) -> SelftestReport:
    report = SelftestReport()
    if samples <= 0:
        for name in ("geometry", "operators", "rates", "golden-tables"):
            report.suites.append(SuiteResult(name, "skip"))
        return report
    rng = random.Random(seed)
    checks = [
        ("geometry", lambda: _geometry_suite(rng, samples)),
        ("operators", lambda: _operator_suite(rng, max(samples // 10, 10))),
        ("rates", _rates_suite),
        ("golden-tables", _golden_suite),
    ]
    tolerances = {"geometry": 1e-9, "operators": 1e-9, "rates": 0.0, "golden-tables": 1e-4}
    for name, fn in checks:
        worst = fn()
        status = "pass" if worst <= tolerances[name] else "fail"
        report.suites.append(SuiteResult(name, status, worst))
    return report
