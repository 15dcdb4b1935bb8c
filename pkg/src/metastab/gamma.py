"""Bruck's nonlinearity functions gamma_2, gamma_n and the diagonal gamma.

All values are lower bounds of the exact real functions: the modulus is
rounded down, the depth p(t) is rounded up and Dyadic arithmetic rounds
down.  For the closed-form moduli the small cases are exact rationals.

The recursion gamma_{n+1}(t) = min{gamma_n(t), gamma_2(gamma_n(t/2)/3)}
always selects its second argument: gamma_2(s) <= s and gamma_n is
nondecreasing, so gamma_2(gamma_n(t/2)/3) <= gamma_n(t/2)/3 <= gamma_n(t).
gamma_n(t) is therefore a chain of n-2 applications of s -> gamma_2(s/3)
starting from gamma_2(t/2^(n-2)), and the memo table holds exactly the
dyadic arguments t/2^j visited by the chain.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .moduli import Modulus, eval_modulus
from .numerics import (
    DOWN,
    LIMITS,
    UP,
    DomainError,
    Dyadic,
    ResourceError,
    Scalar,
    ceil_rat_pow,
    compare,
    div,
    is_zero,
    ldexp,
    minimum,
    mul,
    rational_exponent,
    to_fraction,
)


@dataclass(frozen=True)
class GammaContext:
    b: Fraction
    modulus: Modulus
    c: Fraction
    q: Fraction
    _memo: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    def __post_init__(self):
        for name in ("b", "c", "q"):
            object.__setattr__(self, name, Fraction(getattr(self, name)))
        if self.b <= 0:
            raise DomainError("b must be positive")
        if self.c <= 0:
            raise DomainError("c must be positive")
        if self.q <= 1:
            raise DomainError("q must exceed 1")


def _key(t) -> tuple:
    return ("d", t.man, t.exp) if isinstance(t, Dyadic) else ("f", Fraction(t))


def gamma2(ctx: GammaContext, t) -> Scalar:
    """min{t, b/2 * eta(4t/b)}."""
    if is_zero(t):
        return Fraction(0)
    arg = div(mul(t, 4, DOWN), ctx.b, DOWN)
    return minimum(t, mul(ctx.b / 2, eval_modulus(ctx.modulus, arg, DOWN), DOWN))


def gamma_n(ctx: GammaContext, n: int, t, use_cache: bool = True) -> Scalar:
    if n < 2:
        raise DomainError("gamma_n needs n >= 2")
    if is_zero(t):
        return Fraction(0)
    if n - 2 > LIMITS.gamma_depth:
        raise ResourceError(f"gamma depth {n} exceeds {LIMITS.gamma_depth}")
    memo = ctx._memo if use_cache else {}
    # walk down to the deepest argument already known
    k, arg = n, t
    path = []
    while k > 2 and (k, _key(arg)) not in memo:
        path.append((k, arg))
        k, arg = k - 1, div(arg, 2, DOWN)
    value = memo.get((k, _key(arg)))
    if value is None:
        value = gamma2(ctx, arg)
        memo[(k, _key(arg))] = value
    for k, arg in reversed(path):
        value = gamma2(ctx, div(value, 3, DOWN))
        memo[(k, _key(arg))] = value
    return value


def gamma_n_literal(ctx: GammaContext, n: int, t) -> Scalar:
    """The recursion with both branches of the minimum evaluated (O(n^2) memo)."""
    memo: dict = {}

    def rec(k, s):
        key = (k, _key(s))
        if key not in memo:
            if k == 2:
                memo[key] = gamma2(ctx, s)
            else:
                memo[key] = minimum(rec(k - 1, s),
                                    gamma2(ctx, div(rec(k - 1, div(s, 2, DOWN)), 3, DOWN)))
        return memo[key]

    return rec(n, t)


def p_of_t(ctx: GammaContext, t) -> int:
    """max{2, ceil((6bc/(sqrt 2 t))^(q/(q-1)))}, computed exactly.

    With r = 6bc/t and q/(q-1) = a/d the condition m >= (r/sqrt 2)^(a/d) is
    m^(2d) >= (r^2/2)^a, which is an integer power test.
    """
    if is_zero(t):
        raise DomainError("p(t) is undefined at t = 0")
    a, d = rational_exponent(ctx.q)
    r = 6 * ctx.b * ctx.c / to_fraction(t)
    return max(2, ceil_rat_pow(r * r / 2, a, 2 * d))


def gamma_diag(ctx: GammaContext, t) -> Scalar:
    """gamma(t) = gamma_{p(t)}(t/3), gamma(0) = 0."""
    if is_zero(t):
        return Fraction(0)
    p = p_of_t(ctx, t)
    if p - 2 > LIMITS.gamma_depth:
        raise ResourceError(f"gamma depth p(t) = {p} exceeds {LIMITS.gamma_depth}")
    return gamma_n(ctx, p, div(t, 3, DOWN))


def gamma_diag_upper(ctx: GammaContext, t) -> Scalar:
    """Cheap upper bound (t/3) / 2^(2(p(t)-2)) of gamma_diag(t).

    Each chain step divides by at least 3 and gamma_2 never increases its
    argument, so gamma_n(s) <= s/6^(n-2) <= s/4^(n-2).
    """
    if is_zero(t):
        return Fraction(0)
    p = p_of_t(ctx, t)
    return ldexp(div(t, 3, UP), -2 * (p - 2), UP)


def gamma_diag_at_most(ctx: GammaContext, t, bound) -> bool:
    """Decide gamma_diag(t) <= bound, avoiding deep chains when possible."""
    if is_zero(t):
        return True
    if compare(gamma_diag_upper(ctx, t), bound) <= 0:
        return True
    return compare(gamma_diag(ctx, t), bound) <= 0


def min_p_for_approx(ctx: GammaContext, eps) -> int:
    """Least p >= 1 with 2c p^((1-q)/q) <= eps."""
    eps = Fraction(eps)
    if eps <= 0:
        raise DomainError("eps must be positive")
    a, d = rational_exponent(ctx.q)
    return max(1, ceil_rat_pow(2 * ctx.c / eps, a, d))
