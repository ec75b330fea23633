"""Exact evaluation of the quantitative moduli and of the full
metastability-rate pipeline for the anchored and regularized iterations.

Everything in this module is exact: naturals are arbitrary-size ints and
all real-valued parameters are Fractions.  No floating point is used,
because the pipeline composes ceilings of rationals inside function
iteration and rounding would silently change integer outputs.

The pipeline output can be astronomically large for small epsilon, so
every counter-function evaluation is charged against an explicit budget
and evaluation fails loudly (BudgetExceeded, carrying the partial trace)
instead of spinning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

Rational = Fraction | int


def _frac(x) -> Fraction:
    if isinstance(x, (Fraction, int)):
        return Fraction(x)
    raise TypeError(f"exact rational required, got {type(x).__name__}")


def _short(n: int) -> str:
    """Render an int for diagnostics without materializing huge decimals."""
    if n.bit_length() <= 64:
        return str(n)
    return f"~2^{n.bit_length()}"


class BudgetExceeded(Exception):
    """Raised when an evaluation would exceed its budget.

    For pipeline evaluations, ``trace`` holds all intermediates computed
    before the failure and ``stage`` names the quantity being computed.
    """

    def __init__(self, stage: str, needed: int, trace: "PhiTrace | None" = None):
        super().__init__(
            f"evaluation budget exceeded at {stage} (needed {_short(needed)} more)"
        )
        self.stage = stage
        self.needed = needed
        self.trace = trace


@dataclass
class EvalBudget:
    limit: int
    used: int = 0

    def spend(self, n: int, stage: str) -> None:
        if self.used + n > self.limit:
            raise BudgetExceeded(stage, self.used + n - self.limit)
        self.used += n


def _unlimited() -> EvalBudget:
    return EvalBudget(limit=1 << 62)


# -- counter functions ------------------------------------------------------


class CounterFunction:
    """A total function N -> N with memoized evaluation.

    ``nondecreasing`` marks functions known to be monotone; the prefix
    maximum of such a function is the function itself, which lets the
    pipeline avoid scans over astronomically long prefixes.
    """

    def __init__(self, fn: Callable[[int], int], name: str, nondecreasing: bool = False):
        self._fn = fn
        self.name = name
        self.nondecreasing = nondecreasing
        self._memo: dict[int, int] = {}
        self._prefix_max_upto = -1
        self._prefix_max = 0

    @classmethod
    def constant(cls, c: int) -> "CounterFunction":
        if c < 0:
            raise ValueError("counter functions take values in N")
        return cls(lambda n: c, f"const:{c}", nondecreasing=True)

    @classmethod
    def affine(cls, a: int, c: int) -> "CounterFunction":
        if a < 0 or c < 0:
            raise ValueError("counter functions take values in N")
        return cls(lambda n: a * n + c, f"affine:{a},{c}", nondecreasing=True)

    @classmethod
    def tabulated(cls, values, tail: "CounterFunction") -> "CounterFunction":
        values = tuple(int(v) for v in values)
        if any(v < 0 for v in values):
            raise ValueError("counter functions take values in N")

        def fn(n):
            return values[n] if n < len(values) else tail.eval(n)

        return cls(fn, f"table:{','.join(map(str, values))};tail={tail.name}")

    def eval(self, n: int, budget: EvalBudget | None = None) -> int:
        if n < 0:
            raise ValueError(f"counter function evaluated at negative {n}")
        if n in self._memo:
            return self._memo[n]
        if budget is not None:
            budget.spend(1, f"{self.name}({_short(n)})")
        v = self._fn(n)
        if not isinstance(v, int) or v < 0:
            raise ValueError(f"{self.name}({_short(n)}) gave a non-natural value")
        self._memo[n] = v
        return v

    def __call__(self, n: int) -> int:
        return self.eval(n)

    def shift(self, c: int) -> "CounterFunction":
        """The function l -> f(l + c)."""
        return CounterFunction(
            lambda n: self.eval(n + c), f"{self.name}+shift{c}", self.nondecreasing
        )

    def tilde(self) -> "CounterFunction":
        """The function n -> n + f(n); always >= identity."""
        return CounterFunction(lambda n: n + self.eval(n), f"~{self.name}")

    def iterate(self, k: int, seed: int, budget: EvalBudget | None = None) -> int:
        """k-fold iteration from seed."""
        budget = budget or _unlimited()
        budget.spend(k, f"iterate {self.name} x{_short(k)}")
        v = seed
        for _ in range(k):
            v = self._memo[v] if v in self._memo else self.eval(v)
        return v

    def majorant_value(self, n: int, budget: EvalBudget | None = None) -> int:
        """Prefix maximum max_{i<=n} f(i)."""
        if self.nondecreasing:
            return self.eval(n, budget)
        budget = budget or _unlimited()
        if n > self._prefix_max_upto:
            budget.spend(n - self._prefix_max_upto, f"majorant {self.name}({_short(n)})")
            for i in range(self._prefix_max_upto + 1, n + 1):
                self._prefix_max = max(self._prefix_max, self.eval(i))
            self._prefix_max_upto = n
            return self._prefix_max
        return max(self.eval(i) for i in range(n + 1))


def majorant(g: CounterFunction, n: int, budget: EvalBudget | None = None) -> int:
    """max_{i<=n} g(i); nondecreasing in n and pointwise >= g."""
    return g.majorant_value(n, budget)


# -- exact rational sequences ----------------------------------------------


class RationalSeq:
    """A sequence N -> Q with optional monotonicity knowledge, so prefix
    extrema can be taken without materializing astronomical prefixes."""

    nonincreasing = False
    nondecreasing = False

    def value(self, n: int) -> Fraction:
        raise NotImplementedError

    def prefix_min(self, n: int, budget: EvalBudget | None = None) -> Fraction:
        if self.nonincreasing:
            return self.value(n)
        if self.nondecreasing:
            return self.value(0)
        (budget or _unlimited()).spend(n + 1, f"prefix_min({_short(n)})")
        return min(self.value(i) for i in range(n + 1))

    def prefix_max(self, n: int, budget: EvalBudget | None = None) -> Fraction:
        if self.nondecreasing:
            return self.value(n)
        if self.nonincreasing:
            return self.value(0)
        (budget or _unlimited()).spend(n + 1, f"prefix_max({_short(n)})")
        return max(self.value(i) for i in range(n + 1))

    def shift(self, k: int) -> "RationalSeq":
        return _ShiftedSeq(self, k)


class _ShiftedSeq(RationalSeq):
    def __init__(self, base: RationalSeq, k: int):
        self.base = base
        self.k = k
        self.nonincreasing = base.nonincreasing
        self.nondecreasing = base.nondecreasing

    def value(self, n: int) -> Fraction:
        return self.base.value(n + self.k)


class ConstantSeq(RationalSeq):
    nonincreasing = True
    nondecreasing = True

    def __init__(self, c):
        self.c = _frac(c)

    def value(self, n: int) -> Fraction:
        return self.c


class ReciprocalSeq(RationalSeq):
    """alpha_n = 1/(n + offset); strictly decreasing."""

    nonincreasing = True

    def __init__(self, offset: int):
        if offset < 1:
            raise ValueError("offset must be >= 1")
        self.offset = offset

    def value(self, n: int) -> Fraction:
        return Fraction(1, n + self.offset)

    def shift(self, k: int) -> "ReciprocalSeq":
        return ReciprocalSeq(self.offset + k)


class ExplicitSeq(RationalSeq):
    def __init__(self, values, tail=None):
        self.values = tuple(_frac(v) for v in values)
        self.tail = None if tail is None else _frac(tail)

    def value(self, n: int) -> Fraction:
        if n < len(self.values):
            return self.values[n]
        if self.tail is not None:
            return self.tail
        raise IndexError(f"sequence materialized only up to {len(self.values)}")


# -- moduli and small calculators ------------------------------------------


@dataclass(frozen=True)
class Moduli:
    """zeta witnesses alpha_n -> 0; S witnesses divergence of the product
    (nondecreasing in its second argument); R plays the role of S for the
    regularized iteration's weights."""

    zeta: Callable[[Fraction], int]
    S: Callable[[Fraction, int], int]
    R: Callable[[Fraction, int], int] | None = None


def preset_moduli_reciprocal(offset: int = 2) -> Moduli:
    """Closed-form moduli for alpha_n = 1/(n + offset).

    The weight product telescopes to (m + offset - 1)/(N + offset), which
    gives S in closed form; zeta inverts the weight formula directly.
    """
    if offset < 2:
        raise ValueError("offset must be >= 2 so that alpha_0 <= 1/2")

    def zeta(beta) -> int:
        beta = _frac(beta)
        if beta <= 0:
            raise ValueError("zeta needs a positive argument")
        return max(math.ceil(Fraction(1) / beta) - offset, 0)

    def S(eps, m: int) -> int:
        eps = _frac(eps)
        if eps <= 0:
            raise ValueError("S needs a positive first argument")
        return max(m, math.ceil(Fraction(m + offset - 1) / eps) - offset)

    return Moduli(zeta=zeta, S=S, R=S)


def omega(b, eps) -> Fraction:
    """The quantitative quasiness modulus eps^2 / (15 b)."""
    b, eps = _frac(b), _frac(eps)
    if b <= 0 or eps <= 0:
        raise ValueError("omega needs positive arguments")
    return eps * eps / (15 * b)


def xi(b, eps, g: CounterFunction, budget: EvalBudget | None = None) -> int:
    """ceil(b^2/eps^2)-fold iterate of g applied to 1 (metastability rate
    along the anchored resolvent curve)."""
    b, eps = _frac(b), _frac(eps)
    if b <= 0 or eps <= 0:
        raise ValueError("xi needs positive arguments")
    return g.iterate(math.ceil(b * b / (eps * eps)), 1, budget)


def psi(eps, g: CounterFunction, K: int, b, budget: EvalBudget | None = None) -> int:
    """ceil(b/eps)-fold iterate of n -> n + g(n) from K; always >= K."""
    b, eps = _frac(b), _frac(eps)
    if b <= 0 or eps <= 0:
        raise ValueError("psi needs positive arguments")
    return g.tilde().iterate(math.ceil(b / eps), K, budget)


def phi_lfp(eps, S: Callable[[Fraction, int], int], m: int, b) -> int:
    """m + S(eps/4b, m) + 1 (bound for the recursive-inequality lemma)."""
    b, eps = _frac(b), _frac(eps)
    if b <= 0 or eps <= 0:
        raise ValueError("phi_lfp needs positive arguments")
    return m + S(eps / (4 * b), m) + 1


def qmcp_bound(b, eps, g: CounterFunction, l: int, budget: EvalBudget | None = None) -> int:
    """Upper end of the window guaranteed for nonincreasing sequences in
    [0, b]: the ceil(b/eps)-fold iterate of n -> n + g(n) from l."""
    b, eps = _frac(b), _frac(eps)
    if b <= 0 or eps <= 0:
        raise ValueError("qmcp_bound needs positive arguments")
    return g.tilde().iterate(math.ceil(b / eps), l, budget)


# -- the full pipeline ------------------------------------------------------


@dataclass(frozen=True)
class RateParams:
    """Parameter bundle for the rate pipeline.

    b bounds twice the distances from the start and the anchor to a common
    fixed point; gamma is the uniform lower step-size bound; gamma_upper
    majorizes the step sizes; alpha_minorant minorizes the weights.
    """

    b: int
    gamma: Fraction
    gamma_upper: RationalSeq
    alpha_minorant: RationalSeq
    moduli: Moduli

    def __post_init__(self):
        if not (isinstance(self.b, int) and self.b >= 1):
            raise ValueError("b must be a positive integer")
        object.__setattr__(self, "gamma", _frac(self.gamma))
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")


@dataclass
class PhiTrace:
    """All intermediates of one pipeline evaluation, for audit."""

    C: Fraction | None = None
    eps_hat: Fraction | None = None
    eta: dict[int, Fraction] = field(default_factory=dict)
    M1: dict[int, Fraction] = field(default_factory=dict)
    n_l: dict[int, int] = field(default_factory=dict)
    ghat: dict[int, int] = field(default_factory=dict)
    theta_at_n: dict[int, int] = field(default_factory=dict)
    K: dict[int, int] = field(default_factory=dict)
    K_hat: dict[int, int] = field(default_factory=dict)
    M2: dict[int, Fraction] = field(default_factory=dict)
    f: dict[int, int] = field(default_factory=dict)
    c: int | None = None
    k_star: int | None = None
    K_star: int | None = None
    phi: int | None = None
    evals_used: int = 0


class _Pipeline:
    """Memoized evaluator for the chained quantities of the rate bound.

    Convention: eta_0 is treated as +infinity wherever a prefix scan
    touches index 0 (its defining formula divides by the index); direct
    evaluation of eta at 0 is an error.
    """

    def __init__(self, params: RateParams, eps, g: CounterFunction, budget: EvalBudget):
        self.p = params
        self.eps = _frac(eps)
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        self.g = g
        self.budget = budget
        self.b = Fraction(params.b)
        self.trace = PhiTrace()
        self.trace.C = 2 + params.gamma_upper.value(0) / params.gamma
        self.trace.eps_hat = self.eps**2 / (128 * self.b)
        self.q16 = self.eps**2 / (16 * self.b**2)
        self.e128 = self.eps**2 / (128 * self.b)
        self._S_seen: dict[Fraction, dict[int, int]] = {}
        self._ghat_memo: dict[int, int] = {}
        self._theta_memo: dict[tuple[int, int], int] = {}
        self._gprime = CounterFunction(
            lambda l: self.ghat(l) + 2, "g'", nondecreasing=True
        )
        self._gprime_tilde = self._gprime.tilde()

    def S(self, eps_arg: Fraction, m: int) -> int:
        v = self.p.moduli.S(eps_arg, m)
        # the pipeline is only sound for S nondecreasing in m; spot-check
        # against previously evaluated points
        seen = self._S_seen.setdefault(eps_arg, {})
        for m2, v2 in seen.items():
            if (m2 <= m and v2 > v) or (m2 >= m and v2 < v):
                raise ValueError("S modulus is not nondecreasing in its second argument")
        if len(seen) < 64:
            seen[m] = v
        return v

    def eta(self, l: int) -> Fraction:
        if l < 1:
            raise ValueError("eta is only defined for positive indices")
        if l not in self.trace.eta:
            self.trace.eta[l] = self.eps**2 / (192 * self.b * l)
        return self.trace.eta[l]

    def M1(self, l: int) -> Fraction:
        if l not in self.trace.M1:
            terms = [omega(self.b, self.e128), self.e128]
            if l >= 1:
                terms.append(omega(self.b, self.eta(l) / self.trace.C) / 2)
            self.trace.M1[l] = min(terms)
        return self.trace.M1[l]

    def n_l(self, l: int) -> int:
        if l not in self.trace.n_l:
            start = max(self.trace.n_l) + 1 if self.trace.n_l else 0
            acc = self.trace.n_l.get(start - 1, 0)
            for i in range(start, l + 1):
                here = self.p.moduli.zeta(self.M1(i) / self.b)
                acc = max(acc, here) if i > 0 else here
                self.trace.n_l[i] = acc
        return self.trace.n_l[l]

    def ghat(self, l: int) -> int:
        if l not in self._ghat_memo:
            s = self.S(self.q16, l)
            self._ghat_memo[l] = self.g.majorant_value(l + s + 1, self.budget) + s
            if l in self.trace.K or len(self.trace.ghat) < 64:
                self.trace.ghat[l] = self._ghat_memo[l]
        return self._ghat_memo[l]

    def ghat_majorant(self, l: int) -> int:
        # ghat is nondecreasing whenever S is nondecreasing in its second
        # argument (which is spot-checked), so its prefix max is itself
        return self.ghat(l)

    def theta(self, l: int, i: int) -> int:
        key = (l, i)
        if key not in self._theta_memo:
            if l == 0:
                count = 0  # eta_0 = +inf convention: zero iterations
            else:
                count = math.ceil(self.b / (omega(self.b, self.eta(l) / self.trace.C) / 2))
            try:
                self._theta_memo[key] = self._gprime_tilde.iterate(count, i, self.budget)
            except BudgetExceeded as exc:
                raise BudgetExceeded(f"theta({l},{i}): {exc.stage}", exc.needed, self.trace)
        return self._theta_memo[key]

    def K(self, l: int) -> int:
        if l not in self.trace.K:
            th = self.theta(l, self.n_l(l))
            self.trace.theta_at_n[l] = th
            self.trace.K[l] = th + self.ghat_majorant(th) + 2
        return self.trace.K[l]

    def K_hat(self, l: int) -> int:
        if l not in self.trace.K_hat:
            k = self.K(l)
            inner = k + self.S(self.q16, k) + 1
            self.trace.K_hat[l] = inner + self.g.majorant_value(inner, self.budget)
        return self.trace.K_hat[l]

    def gamma_upper_majorant(self, l: int) -> Fraction:
        return self.p.gamma_upper.prefix_max(l, self.budget)

    def rho_tilde(self, beta: Fraction, l: int) -> int:
        factor = 2 + self.gamma_upper_majorant(l) / self.p.gamma
        return math.ceil(factor * self.b / beta)

    def M2(self, l: int) -> Fraction:
        if l not in self.trace.M2:
            khat = self.K_hat(l)
            alpha_min = self.p.alpha_minorant.prefix_min(self.K(l), self.budget)
            self.trace.M2[l] = min(
                self.eps / 2,
                self.eps**2 / (16 * self.b * (khat + 1)),
                omega(self.b, self.e128),
                omega(self.b, self.eta(l) / self.trace.C),
                self.eps**2 / (16 * self.b) * alpha_min,
            )
        return self.trace.M2[l]

    def f(self, l: int) -> int:
        if l not in self.trace.f:
            self.trace.f[l] = max(self.rho_tilde(self.M2(l), self.K_hat(l)), l)
        return self.trace.f[l]

    def run(self) -> int:
        tr = self.trace
        try:
            tr.c = math.ceil(64 * self.b**2 / self.eps**2)
            f_c = CounterFunction(lambda l: self.f(l + tr.c), "f_c")
            tr.k_star = xi(self.b, tr.eps_hat, f_c, self.budget) + tr.c
            theta_star = max(self.theta(j, self.n_l(j)) for j in range(tr.k_star + 1))
            tr.K_star = theta_star + self.ghat_majorant(theta_star) + 2
            tr.phi = tr.K_star + self.S(self.q16, tr.K_star) + 1
            return tr.phi
        except BudgetExceeded as exc:
            exc.trace = tr
            raise
        finally:
            tr.evals_used = self.budget.used


def phi_main(
    params: RateParams, eps, g: CounterFunction, budget: int = 10**7
) -> tuple[int, PhiTrace]:
    """Evaluate the metastability-rate bound for the anchored iteration.

    Returns the exact natural together with the full intermediate trace.
    Raises BudgetExceeded (with the partial trace attached) when the
    instance is too large to materialize.
    """
    pipe = _Pipeline(params, eps, g, EvalBudget(budget))
    value = pipe.run()
    return value, pipe.trace


def theta_tikhonov(
    params: RateParams, eps, g: CounterFunction, budget: int = 10**7
) -> tuple[int, PhiTrace]:
    """Rate for the regularized iteration: shift the weight minorant by one
    index, replace S by (e, m) -> R(e, m+1) and g by n -> g(n+1), evaluate
    the anchored-iteration rate at eps/2, and add 1."""
    if params.moduli.R is None:
        raise ValueError("theta_tikhonov needs the R modulus")
    R = params.moduli.R
    shifted = RateParams(
        b=params.b,
        gamma=params.gamma,
        gamma_upper=params.gamma_upper,
        alpha_minorant=params.alpha_minorant.shift(1),
        moduli=Moduli(zeta=params.moduli.zeta, S=lambda e, m: R(e, m + 1), R=None),
    )
    h_g = g.shift(1)
    value, trace = phi_main(shifted, _frac(eps) / 2, h_g, budget)
    return value + 1, trace
