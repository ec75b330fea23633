"""Command-line interface.

Exit codes: 0 success, 1 usage/config error, 2 solver failure,
3 selftest failure, 4 evaluation budget exceeded, 5 selftest skipped.
"""

from __future__ import annotations

import argparse
import math
import sys
from fractions import Fraction

from . import harness
from .geometry import Euclidean, HalfPlane, Semicircle, VerticalRay, distance
from .harness import ConfigError, MetastabilityQuery, parse_config, parse_gspec
from .operators import SolverError
from .rates import (
    BudgetExceeded,
    ConstantSeq,
    RateParams,
    ReciprocalSeq,
    phi_main,
    preset_moduli_reciprocal,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_SOLVER = 2
EXIT_SELFTEST = 3
EXIT_BUDGET = 4
EXIT_SKIPPED = 5


def _load_config(path: str):
    with open(path, encoding="utf-8") as f:
        return parse_config(f.read())


def _rate_params_from(cfg, b: int | None = None, p=None) -> tuple[RateParams, object]:
    if cfg.weights_kind != "reciprocal" or cfg.steps_kind != "constant":
        raise ConfigError(
            "rate evaluation needs reciprocal weights and a constant step size"
        )
    if p is None:
        p = harness.derived_limit(cfg)
        if p is None:
            raise ConfigError("no fixed point available to derive the bound from")
    if b is None:
        b = max(
            1,
            math.ceil(2 * distance(cfg.start, p)),
            math.ceil(2 * distance(cfg.anchor, p)),
        )
    gamma = Fraction(str(cfg.steps_gamma))
    params = RateParams(
        b=b,
        gamma=gamma,
        gamma_upper=ConstantSeq(gamma),
        alpha_minorant=ReciprocalSeq(cfg.weights_offset),
        moduli=preset_moduli_reciprocal(cfg.weights_offset),
    )
    return params, p


def _plot(result, cfg, path: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    import numpy as np

    fig, ax = plt.subplots(figsize=(5, 4))
    if isinstance(cfg.target, Semicircle):
        th = np.linspace(0.05, math.pi - 0.05, 200)
        ax.plot(cfg.target.a + cfg.target.r * np.cos(th), cfg.target.r * np.sin(th), "k-")
    elif isinstance(cfg.target, VerticalRay):
        ax.axvline(cfg.target.a, color="k")
    xs = [r[1] for r in result.rows]
    ys = [r[2] for r in result.rows]
    ax.plot(xs, ys, "o-", ms=4)
    if isinstance(cfg.anchor, HalfPlane):
        ax.plot([cfg.anchor.x], [cfg.anchor.y], "s", label="anchor")
        ax.plot([cfg.start.x], [cfg.start.y], "^", label="start")
    ax.set_ylim(bottom=0)
    ax.legend()
    fig.savefig(path, format="svg")
    plt.close(fig)


def _parse_params_file(path: str, model: str):
    with open(path, encoding="utf-8") as f:
        kv = harness._parse_kv(f.read())
    try:
        b = int(kv["b"])
        gamma = Fraction(kv.get("gamma", "1"))
        offset = int(kv.get("alpha.offset", "2"))
        if model == "halfplane":
            p = HalfPlane(float(kv["p.x"]), float(kv["p.y"]))
        else:
            p = Euclidean(float(c) for c in kv["p.coords"].split(","))
    except KeyError as exc:
        raise ConfigError(f"params file missing key {exc}") from None
    params = RateParams(
        b=b,
        gamma=gamma,
        gamma_upper=ConstantSeq(Fraction(kv.get("gamma_upper", kv.get("gamma", "1")))),
        alpha_minorant=ReciprocalSeq(offset),
        moduli=preset_moduli_reciprocal(offset),
    )
    return params, p


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    result = harness.run_experiment(cfg)
    harness.write_atomic(args.out, harness.emit_csv(result.rows))
    if args.plot:
        _plot(result, cfg, args.plot)
    print(f"wrote {len(result.rows)} rows to {args.out}")
    return EXIT_OK


def cmd_rates(args) -> int:
    cfg = _load_config(args.config)
    g = parse_gspec(args.g)
    params, _ = _rate_params_from(cfg)
    eps = Fraction(args.eps)
    try:
        phi, trace = phi_main(params, eps, g, budget=args.budget)
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}")
        if exc.trace is not None:
            print(f"  C={exc.trace.C} eps_hat={exc.trace.eps_hat} c={exc.trace.c}")
        return EXIT_BUDGET
    print(f"phi = {phi}")
    print(f"  C={trace.C} eps_hat={trace.eps_hat} c={trace.c} "
          f"k_star={trace.k_star} K_star={trace.K_star} evals={trace.evals_used}")
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = _load_config(args.config)
    params, p = _parse_params_file(args.params, cfg.model)
    q = MetastabilityQuery(float(args.eps), parse_gspec(args.g), args.budget)
    report = harness.verify_bound(cfg, params, q, p, rate_budget=args.rate_budget)
    print(f"empirical N = {report.empirical_n}")
    if report.phi is not None:
        print(f"phi = {report.phi}")
        print(f"verdict: empirical <= phi is {report.verdict}")
    else:
        print(f"phi: budget exceeded at {report.budget_stage}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    report = harness.selftest(samples=args.samples, seed=args.seed)
    for line in report.lines():
        print(line)
    if report.skipped:
        return EXIT_SKIPPED
    return EXIT_SELFTEST if report.failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cat0prox",
        description="Anchored proximal point iterations on CAT(0) models "
        "with exact metastability-rate evaluation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run an experiment and write a CSV table")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--plot", help="optional SVG of the iterates")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("rates", help="evaluate the metastability-rate bound")
    p.add_argument("--config", required=True)
    p.add_argument("--eps", required=True, help="rational, e.g. 1/2 or 64")
    p.add_argument("--g", required=True, help="const:C | affine:A,C | table:...;tail=const:C")
    p.add_argument("--budget", type=int, default=10**6)
    p.set_defaults(fn=cmd_rates)

    p = sub.add_parser("verify", help="compare the bound against an empirical search")
    p.add_argument("--config", required=True)
    p.add_argument("--params", required=True)
    p.add_argument("--eps", required=True)
    p.add_argument("--g", required=True)
    p.add_argument("--budget", type=int, default=200)
    p.add_argument("--rate-budget", type=int, default=10**6)
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("selftest", help="run the built-in property suites")
    p.add_argument("--samples", type=int, default=10**4)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
