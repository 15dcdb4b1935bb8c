"""Rate-of-metastability combinators.

Every combinator returns a :class:`RateResult` holding the exact natural
number and a trace of the sub-values it was built from.  Counterfunctions
are passed around as expression trees so that a trace can be re-evaluated.

Some rates are far too large to write down (the A1 iteration count behaves
like 1/gamma(eps)^2, and gamma shrinks doubly exponentially).  For those the
tower-shaped combinators accept ``bound_target``: if the exact value runs
into a resource limit they return a certified lower bound instead, obtained
from g_eps^(j)(1) <= g_eps^(K+1)(B(...)), which holds because g_eps is
increasing with g_eps(n) >= n.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

from .counterfn import (
    Add,
    CeilScale,
    Compose,
    CounterFn,
    EpsIterate,
    Identity,
    Max,
    double,
    monotone_envelope,
    tilde_iterate,
)
from .gamma import GammaContext, gamma_diag
from .moduli import eval_modulus
from .numerics import (
    DOWN,
    LIMITS,
    UP,
    DomainError,
    Dyadic,
    ResourceError,
    Scalar,
    ceil_bounded,
    ceil_div,
    ceil_rat_pow,
    check_size,
    div,
    fmt_rational,
    int_to_decimal,
    is_zero,
    minimum,
    mul,
    power,
    scalar_str,
    to_fraction,
)

# values with more decimal digits than this are reported by length only
MAX_REPORTED_DIGITS = 10**6
# integers inside traces above this bit length are summarized
TRACE_INT_BITS = 1 << 12


# ---------------------------------------------------------------------------
# base rates


@dataclass(frozen=True)
class BaseRate:
    """A rate A(eps, g, h) for the alpha statement.

    ``run`` receives a thunk for eps (so constant stubs never pay for
    evaluating gamma) and the two counterfunctions.
    """

    kind: str
    label: str
    run: Callable[[Callable[[], Scalar], CounterFn, CounterFn], int] = field(compare=False)
    needs_epsilon: bool = True

    def __call__(self, eps, g: CounterFn, h: CounterFn) -> int:
        return self.run(lambda: eps, g, h)


def base_a1(b) -> BaseRate:
    b = Fraction(b)

    def run(eps_of, g, h):
        if Add(g, h).eval(0) == 0:
            return 0
        return rate_A1(b, eps_of(), g, h)

    return BaseRate("a1", "a1", run)


def base_a2(dim: int, b) -> BaseRate:
    b = Fraction(b)
    if dim < 1:
        raise DomainError("dimension must be positive")

    def gamma_tb(eps, _seq):
        return gamma_tb_finite_dim(dim, b, div(eps, 2, DOWN))

    def run(eps_of, g, h):
        if g.eval(0) == 0:
            return 0
        return rate_A2(gamma_tb, eps_of(), g)

    return BaseRate("a2", f"a2:dim={dim}", run)


def base_stub(k: int) -> BaseRate:
    if k < 0:
        raise DomainError("stub constant must be natural")
    return BaseRate("stub", f"stub:{k}", lambda eps_of, g, h: k, needs_epsilon=False)


def base_custom(fn: Callable[[Scalar, CounterFn, CounterFn], int], label: str = "custom") -> BaseRate:
    return BaseRate("stub", label, lambda eps_of, g, h: fn(eps_of(), g, h))


def base_table(table: dict) -> BaseRate:
    """User-supplied values keyed by the rational eps."""
    table = {Fraction(k): int(v) for k, v in table.items()}

    def run(eps_of, g, h):
        eps = to_fraction(eps_of())
        if eps not in table:
            raise DomainError(f"no tabulated base rate for eps = {fmt_rational(eps)}")
        return table[eps]

    return BaseRate("table", "table", run)


def parse_base(text: str, b) -> BaseRate:
    """``a1``, ``a2:dim=D`` or ``stub:K``."""
    if text == "a1":
        return base_a1(b)
    if text.startswith("a2:dim="):
        dim = text[len("a2:dim="):]
        if not dim.isdigit():
            raise DomainError(f"bad dimension in {text!r}")
        return base_a2(int(dim), b)
    if text.startswith("stub:"):
        k = text[len("stub:"):]
        if not k.isdigit():
            raise DomainError(f"bad stub constant in {text!r}")
        return base_stub(int(k))
    raise DomainError(f"unknown base rate {text!r}; expected a1, a2:dim=D or stub:K")


@dataclass(frozen=True)
class RateContext:
    gamma: GammaContext
    base: BaseRate

    @property
    def b(self) -> Fraction:
        return self.gamma.b


# ---------------------------------------------------------------------------
# results


@dataclass
class RateResult:
    name: str
    epsilon: Fraction
    value: Optional[int]
    trace: list = field(default_factory=list)
    lower_bound: Optional[int] = None
    _digits: Optional[int] = field(default=None, repr=False, compare=False)
    _text: Optional[str] = field(default=None, repr=False, compare=False)

    @property
    def exact(self) -> bool:
        return self.value is not None

    @property
    def bound(self) -> int:
        """The exact value if known, else the certified lower bound."""
        return self.value if self.value is not None else self.lower_bound

    def decimal(self) -> str:
        if self._text is None:
            self._text = int_to_decimal(self.value)
            self._digits = len(self._text)
        return self._text

    @property
    def digit_count(self) -> Optional[int]:
        if self.value is None:
            return None
        if self._digits is None:
            self.decimal()
        return self._digits

    def step(self, name: str) -> dict:
        for label, entry in self.trace:
            if label == name:
                return entry
        raise KeyError(name)

    def to_json(self) -> dict:
        digits = self.digit_count
        value = None
        if digits is not None and digits <= MAX_REPORTED_DIGITS:
            value = self.decimal()
        return {
            "rate": self.name,
            "epsilon": fmt_rational(self.epsilon),
            "value_digits": digits,
            "value": value,
            "trace": [{"step": label, **{k: _jsonable(v) for k, v in entry.items()}}
                      for label, entry in self.trace],
        }

    def preview(self, width: int = 20) -> str:
        if self.value is None:
            return ""
        text = self.decimal()
        return text if len(text) <= width else text[:width] + "..."


def _jsonable(v):
    if v is None or isinstance(v, (bool, str)):
        return v
    if isinstance(v, int):
        if v.bit_length() > TRACE_INT_BITS:
            return f"<{v.bit_length()}-bit integer>"
        return str(v)
    if isinstance(v, (Fraction, Dyadic)):
        return scalar_str(v)
    if isinstance(v, CounterFn):
        return v.dsl()
    return str(v)


def _positive(eps) -> Fraction:
    eps = Fraction(eps)
    if eps <= 0:
        raise DomainError("eps must be positive")
    return eps


# ---------------------------------------------------------------------------
# elementary pieces


def delta_eps(ctx: RateContext, eps) -> Scalar:
    """min{b, eps/4, eps/8 * eta(eps/(2b))} with eta rounded down."""
    eps = _positive(eps)
    b = ctx.b
    eta = eval_modulus(ctx.gamma.modulus, eps / (2 * b), DOWN)
    return minimum(b, eps / 4, mul(eps / 8, eta, DOWN))


def n_eps(eps, b, n: int) -> int:
    """max{n, ceil(6nb/eps)}."""
    eps = _positive(eps)
    r = 6 * n * Fraction(b) / eps
    return max(n, ceil_div(r.numerator, r.denominator))


def n_eps_fn(eps, b) -> CounterFn:
    return Max(Identity(), CeilScale.of(6 * Fraction(b) / eps))


def gamma_tb_finite_dim(dim: int, b, eps) -> int:
    """ceil(sqrt(dim) * b / eps), with the root handled exactly."""
    eps = to_fraction(eps)
    if eps <= 0:
        raise DomainError("eps must be positive")
    return ceil_rat_pow(dim * Fraction(b) ** 2 / eps**2, 1, 2)


def rate_nonincreasing(range_bound, eps, g: CounterFn) -> int:
    """g~^ceil(R/eps)(0): metastability of a nonincreasing sequence in [0, R]."""
    eps = _positive(eps)
    r = Fraction(range_bound)
    if r < 0:
        raise DomainError("range bound must be nonnegative")
    if g.eval(0) == 0:
        return 0
    return tilde_iterate(g, ceil_div(r.numerator * eps.denominator, r.denominator * eps.numerator), 0)


def rate_A1(b, eps, g: CounterFn, h: CounterFn) -> int:
    """(g+h)~^ceil(b^2/eps^2)(0)."""
    if is_zero(eps) or eps < 0:
        raise DomainError("eps must be positive")
    f = Add(g, h)
    if f.eval(0) == 0:
        return 0
    b = Fraction(b)
    count = ceil_bounded(div(b * b, power(eps, 2, DOWN), UP), LIMITS.max_iterations)
    return tilde_iterate(f, count, 0)


def rate_A2(gamma_tb: Callable, eps, g: CounterFn) -> int:
    """g~^K(0) with K = Gamma(eps/2, l -> g~^l(0))."""
    if is_zero(eps) or eps < 0:
        raise DomainError("eps must be positive")
    k = int(gamma_tb(div(eps, 2, DOWN), lambda l: tilde_iterate(g, l, 0)))
    if k < 0:
        raise DomainError("Gamma must return a natural number")
    return tilde_iterate(g, k, 0)


# ---------------------------------------------------------------------------
# the tower


def rate_B(ctx: RateContext, eps, g: CounterFn, h: CounterFn) -> RateResult:
    """A(gamma(eps), g', h') with g' = N + 2g + h and h' = 2(N + g)."""
    if is_zero(eps) or eps < 0:
        raise DomainError("eps must be positive")
    g1 = Add(Add(Identity(), double(g)), h)
    h1 = double(Add(Identity(), g))
    seen: list = []

    def eps_of():
        if not seen:
            seen.append(gamma_diag(ctx.gamma, eps))
        return seen[0]

    value = ctx.base.run(eps_of, g1, h1)
    entry = {"epsilon": eps, "gamma_hat": seen[0] if seen else None,
             "g_prime": g1, "h_prime": h1, "base": ctx.base.label, "value": value}
    return RateResult("B", to_fraction(eps), value, [("B", entry)])


def g_eps_fn(ctx: RateContext, eps, g: CounterFn) -> tuple[CounterFn, Fraction]:
    """n -> n' + g^M(n') with n' = max{n, ceil(4nb/eps)}, and its growth factor."""
    ratio = 4 * ctx.b / to_fraction(eps)
    n1 = Max(Identity(), CeilScale.of(ratio))
    return Add(n1, Compose(monotone_envelope(g), n1)), max(Fraction(1), ratio)


def _iterate_until(f: CounterFn, count: int, target: int) -> int:
    v = 1
    for _ in range(count):
        if v >= target:
            break
        v = check_size(f.eval(v))
    return v


def _theta(ctx, name, eps, g, h, bound_target):
    eps = to_fraction(eps)
    if eps <= 0:
        raise DomainError("eps must be positive")
    k = ceil_div((2 * ctx.b / eps).numerator, (2 * ctx.b / eps).denominator)
    check_size(k)
    if k + 2 > LIMITS.max_iterations:
        raise ResourceError(f"K = {k} exceeds the iteration limit")
    G, growth = g_eps_fn(ctx, eps, g)
    G1 = EpsIterate(G, k + 1, growth)
    entry = {"epsilon": eps, "K": k, "g_eps": G, "g_iter_K1": G1}
    if h is None:
        g_arg, h_arg = G1, double(G1)
    else:
        G2 = EpsIterate(G, k + 2, growth)
        h_arg = Max(double(G1), Compose(monotone_envelope(h), G1))
        g_arg = G2
        entry["g_iter_K2"] = G2
        entry["h_arg"] = h_arg
    try:
        inner = rate_B(ctx, eps / 4, g_arg, h_arg)
        value = G1.eval(inner.value)
    except ResourceError as exc:
        if bound_target is None:
            raise
        lb = _iterate_until(G, k + 1, bound_target)
        entry.update(inner=None, lower_bound=lb, reason=str(exc))
        return RateResult(name, eps, None, [(name, entry)], lower_bound=lb)
    entry.update(inner=inner.value, value=value)
    return RateResult(name, eps, value, [(name, entry)] + inner.trace)


def rate_Theta(ctx: RateContext, eps, g: CounterFn, bound_target: int | None = None) -> RateResult:
    """g_eps^(K+1)(B(eps/4, g_eps^(K+1), 2 g_eps^(K+1))), K = ceil(2b/eps)."""
    return _theta(ctx, "Theta", eps, g, None, bound_target)


def rate_ThetaB(ctx: RateContext, eps, g: CounterFn, h: CounterFn,
                bound_target: int | None = None) -> RateResult:
    """As rate_Theta with g_eps^(K+2) and max{2 g_eps^(K+1), h^M o g_eps^(K+1)} inside B."""
    return _theta(ctx, "ThetaB", eps, g, h, bound_target)


def _note_bound(entry: dict, lower_bound) -> None:
    if lower_bound is not None:
        entry["lower_bound"] = lower_bound


def _delta(ctx, name, eps, g, h, bound_target):
    eps = _positive(eps)
    d = to_fraction(delta_eps(ctx, eps))
    gp = Compose(CeilScale.of(6 * ctx.b / d), Add(Identity(), g))
    g_arg = Add(g, gp)
    h_arg = Add(Add(Identity(), g), double(gp))
    if h is not None:
        h_arg = Max(h_arg, h)
    inner = rate_ThetaB(ctx, d, g_arg, h_arg, bound_target)
    entry = {"epsilon": eps, "delta": d, "g_prime_eps": gp, "g_arg": g_arg, "h_arg": h_arg,
             "value": inner.value}
    _note_bound(entry, inner.lower_bound)
    return RateResult(name, eps, inner.value, [(name, entry)] + inner.trace,
                      lower_bound=inner.lower_bound)


def rate_Delta(ctx: RateContext, eps, g: CounterFn, bound_target: int | None = None) -> RateResult:
    """Theta^B(delta(eps), g + g'_eps, Id + g + 2 g'_eps)."""
    return _delta(ctx, "Delta", eps, g, None, bound_target)


def rate_DeltaB(ctx: RateContext, eps, g: CounterFn, h: CounterFn,
                bound_target: int | None = None) -> RateResult:
    """Theta^B(delta(eps), g + g'_eps, max{Id + g + 2 g'_eps, h})."""
    return _delta(ctx, "DeltaB", eps, g, h, bound_target)


def rate_Psi(ctx: RateContext, eps, g: CounterFn, h: CounterFn,
             bound_target: int | None = None) -> RateResult:
    """Delta^B(eps/4, g'', h) with g''(N) = max{g(N), ceil(4b h(N)/eps)}."""
    eps = _positive(eps)
    g2 = Max(g, Compose(CeilScale.of(4 * ctx.b / eps), h))
    inner = rate_DeltaB(ctx, eps / 4, g2, h, bound_target)
    entry = {"epsilon": eps, "g_second": g2, "h": h, "value": inner.value}
    _note_bound(entry, inner.lower_bound)
    return RateResult("Psi", eps, inner.value, [("Psi", entry)] + inner.trace,
                      lower_bound=inner.lower_bound)


def rate_Phi(ctx: RateContext, eps, g: CounterFn, h: CounterFn,
             bound_target: int | None = None) -> RateResult:
    """N_eps(Psi(eps/2, g', h')) with g' = N_eps + g o N_eps and h' = g + h o N_eps."""
    eps = _positive(eps)
    N = n_eps_fn(eps, ctx.b)
    gp = Add(N, Compose(g, N))
    hp = Add(g, Compose(h, N))
    inner = rate_Psi(ctx, eps / 2, gp, hp, bound_target)
    entry = {"epsilon": eps, "n_eps": N, "g_prime": gp, "h_prime": hp, "inner": inner.value}
    if inner.exact:
        value, lb = n_eps(eps, ctx.b, inner.value), None
    else:
        value, lb = None, n_eps(eps, ctx.b, inner.lower_bound)
    entry["value"] = value
    _note_bound(entry, lb)
    return RateResult("Phi", eps, value, [("Phi", entry)] + inner.trace, lower_bound=lb)


def rate_simultaneous(ctx: RateContext, eps, g: CounterFn, h: CounterFn,
                      bound_target: int | None = None) -> RateResult:
    """Phi(2 eps / 5, g, h)."""
    eps = _positive(eps)
    inner = rate_Phi(ctx, 2 * eps / 5, g, h, bound_target)
    entry = {"epsilon": eps, "inner_epsilon": 2 * eps / 5, "value": inner.value}
    _note_bound(entry, inner.lower_bound)
    return RateResult("simultaneous", eps, inner.value, [("simultaneous", entry)] + inner.trace,
                      lower_bound=inner.lower_bound)


RATES = {
    "B": rate_B,
    "theta": rate_Theta,
    "thetaB": rate_ThetaB,
    "delta": rate_Delta,
    "deltaB": rate_DeltaB,
    "psi": rate_Psi,
    "phi": rate_Phi,
    "simultaneous": rate_simultaneous,
}


def compute_rate(name: str, ctx: RateContext, eps, g: CounterFn, h: CounterFn) -> RateResult:
    """Dispatch by command-line name; a1 and a2 run the base rates directly."""
    eps = _positive(eps)
    if name == "a1":
        v = rate_A1(ctx.b, eps, g, h)
        return RateResult("a1", eps, v, [("a1", {"epsilon": eps, "b": ctx.b, "g": g, "h": h})])
    if name == "a2":
        if ctx.base.kind != "a2":
            raise DomainError("rate a2 needs --base a2:dim=D")
        v = ctx.base(eps, g, h)
        return RateResult("a2", eps, v, [("a2", {"epsilon": eps, "base": ctx.base.label, "g": g})])
    if name == "nonincreasing":
        r = ctx.b * ctx.b / 4
        v = rate_nonincreasing(r, eps, g)
        return RateResult("nonincreasing", eps, v,
                          [("nonincreasing", {"epsilon": eps, "range_bound": r, "g": g})])
    if name not in RATES:
        raise DomainError(f"unknown rate {name!r}")
    fn = RATES[name]
    if name in ("theta", "delta"):
        return fn(ctx, eps, g)
    return fn(ctx, eps, g, h)
