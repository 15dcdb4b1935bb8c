from fractions import Fraction
from functools import lru_cache

import pytest
from hypothesis import given
from hypothesis import strategies as st

from metastab.gamma import (
    GammaContext,
    gamma2,
    gamma_diag,
    gamma_diag_at_most,
    gamma_diag_upper,
    gamma_n,
    gamma_n_literal,
    min_p_for_approx,
    p_of_t,
)
from metastab.moduli import LpModulus
from metastab.numerics import DomainError, Dyadic, ResourceError, compare, to_fraction

B, C, Q = Fraction(2), Fraction(1), Fraction(2)


def ctx(p=2, b=B, c=C, q=Q):
    return GammaContext(b, LpModulus(Fraction(p)), c, q)


def oracle_gamma_n(b, n, t):
    """Both branches of the min, exact Fractions, eta(e) = e^2/8 (L^2)."""

    def g2(s):
        return min(s, b / 2 * (4 * s / b) ** 2 / 8)

    @lru_cache(maxsize=None)
    def rec(k, s):
        if k == 2:
            return g2(s)
        return min(rec(k - 1, s), g2(rec(k - 1, s / 2) / 3))

    return rec(n, Fraction(t))


def test_context_validation():
    with pytest.raises(DomainError):
        ctx(q=1)
    with pytest.raises(DomainError):
        ctx(b=0)
    with pytest.raises(DomainError):
        ctx(c=0)


@pytest.mark.parametrize("t,want", [(0, 0), (1, Fraction(1, 2)), (2, Fraction(2))])
def test_gamma2_examples(t, want):
    assert gamma2(ctx(), Fraction(t)) == want


def test_gamma_n_examples():
    k = ctx()
    assert gamma_n(k, 2, Fraction(3, 7)) == gamma2(k, Fraction(3, 7))
    assert gamma_n(k, 3, Fraction(2)) == Fraction(1, 72)
    assert gamma_n(k, 50, Fraction(0)) == 0


@pytest.mark.parametrize("n", range(2, 9))
@pytest.mark.parametrize("t", [Fraction(1, 3), Fraction(1), Fraction(2), Fraction(7, 5)])
def test_gamma_n_matches_oracle(n, t):
    got = gamma_n(ctx(), n, t, use_cache=False)
    want = oracle_gamma_n(B, n, t)
    if isinstance(got, Dyadic):
        g = to_fraction(got)
        assert g <= want and (want - g) <= want / 2**90
    else:
        assert got == want


def test_chain_equals_literal_recursion():
    k = ctx(p=3)
    for n in (2, 5, 12):
        for t in (Fraction(1, 2), Fraction(3)):
            assert compare(gamma_n(k, n, t), gamma_n_literal(k, n, t)) == 0


@given(st.fractions(min_value=Fraction(1, 1000), max_value=8, max_denominator=1000), st.integers(2, 30))
def test_gamma_n_decreasing_in_n_and_below_t(t, n):
    k = ctx()
    a, b = gamma_n(k, n, t), gamma_n(k, n + 1, t)
    assert compare(b, a) <= 0
    assert compare(a, t) <= 0
    assert compare(gamma2(k, t), t) <= 0


@given(st.fractions(min_value=Fraction(1, 1000), max_value=8, max_denominator=1000), st.integers(2, 40))
def test_cache_does_not_change_values(t, n):
    k = ctx(p=3)
    cached = gamma_n(k, n, t)
    assert compare(cached, gamma_n(GammaContext(B, LpModulus(Fraction(3)), C, Q), n, t, use_cache=False)) == 0


def test_p_of_t_examples():
    assert p_of_t(ctx(), Fraction(1)) == 72
    assert p_of_t(ctx(), Fraction(100)) == 2
    with pytest.raises(DomainError):
        p_of_t(ctx(), Fraction(0))


@given(st.fractions(min_value=Fraction(1, 100), max_value=100, max_denominator=100),
       st.fractions(min_value=Fraction(1, 100), max_value=100, max_denominator=100))
def test_p_of_t_nonincreasing_and_at_least_real_value(s, t):
    lo, hi = sorted((s, t))
    k = ctx()
    assert p_of_t(k, lo) >= p_of_t(k, hi)
    # (6bc/(sqrt2 t))^2 = 72 / t^2 for b = 2, c = 1, q = 2
    assert p_of_t(k, hi) >= 72 / hi**2


def test_gamma_diag_zero_and_lower_bound_at_one():
    k = ctx()
    assert gamma_diag(k, Fraction(0)) == 0
    g1 = gamma_diag(k, Fraction(1))
    assert compare(g1, Fraction(1, 18)) <= 0
    assert compare(g1, gamma_diag_upper(k, Fraction(1))) <= 0
    assert compare(g1, 0) > 0


def test_gamma_diag_at_one_is_exact_rational():
    # the exact value gamma_72(1/3) has a denominator of about 2^(1.7e23) bits
    value = to_fraction(gamma_diag(ctx(), Fraction(1)))
    assert value == oracle_gamma_n(B, 72, Fraction(1, 3))


def test_gamma_diag_strictly_increasing_example():
    k = ctx()
    assert compare(gamma_diag(k, Fraction(1, 2)), gamma_diag(k, Fraction(1))) < 0


@pytest.mark.parametrize("p", [2, 3])
def test_gamma_diag_strictly_increasing_on_grid(p):
    k = ctx(p=p)
    grid = [Fraction(j, 4) for j in range(1, 17)]
    vals = [gamma_diag(k, t) for t in grid]
    for a, b in zip(vals, vals[1:]):
        assert compare(a, b) < 0
    for t, v in zip(grid, vals):
        assert compare(v, t / 3) <= 0


def test_gamma_diag_depth_guard():
    with pytest.raises(ResourceError):
        gamma_diag(ctx(), Fraction(1, 10**4))


def test_at_most_agrees_with_full_evaluation():
    k = ctx()
    for t in (Fraction(1, 2), Fraction(3), Fraction(20)):
        g = gamma_diag(k, t)
        assert gamma_diag_at_most(k, t, g)
        if compare(g, 0) > 0 and isinstance(g, Fraction):
            assert not gamma_diag_at_most(k, t, g * Fraction(999, 1000))


@pytest.mark.parametrize("eps,want", [(2, 1), (Fraction(1, 2), 16), (1, 4)])
def test_min_p_examples(eps, want):
    assert min_p_for_approx(ctx(), Fraction(eps)) == want


@given(st.fractions(min_value=Fraction(1, 50), max_value=10, max_denominator=50))
def test_min_p_is_least(eps):
    p = min_p_for_approx(ctx(), eps)
    # 2 p^(-1/2) <= eps  <=>  4 <= eps^2 p
    assert 4 <= eps**2 * p
    assert p == 1 or 4 > eps**2 * (p - 1)
