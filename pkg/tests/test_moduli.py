import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from metastab.moduli import (
    LpModulus,
    PiecewiseConvex,
    PreconditionError,
    ProductLift,
    check_uc_batch,
    check_uc_sample,
    convexify,
    eval_modulus,
    lp_norm,
    modulus_from_json,
    parse_modulus,
)
from metastab.numerics import DOWN, UP, DomainError, to_fraction

small_eps = st.fractions(min_value=0, max_value=4, max_denominator=1000)


def lp_oracle(p, eps):
    """Closed form evaluated in floating point."""
    p, eps = float(p), float(eps)
    if p < 2:
        return (p - 1) / 8 * eps**2
    return eps**p / (p * 2**p)


class FakeModulus:
    def evaluate(self, eps, direction=DOWN):
        return Fraction(eps)


@pytest.mark.parametrize("p,eps,want", [(2, 1, Fraction(1, 8)), (2, 0, Fraction(0)),
                                        (3, 1, Fraction(1, 24)), (Fraction(3, 2), 1, Fraction(1, 16))])
def test_lp_examples(p, eps, want):
    assert eval_modulus(LpModulus(Fraction(p)), Fraction(eps), DOWN) == want


def test_lp_rejects_p_at_most_one():
    with pytest.raises(DomainError):
        LpModulus(Fraction(1))


@pytest.mark.parametrize("p", [Fraction(3, 2), Fraction(2), Fraction(5, 2), Fraction(3), Fraction(7, 3)])
@given(eps=small_eps)
def test_lp_directed_rounding_brackets_float_value(p, eps):
    m = LpModulus(p)
    lo = float(to_fraction(m.evaluate(eps, DOWN)))
    hi = float(to_fraction(m.evaluate(eps, UP)))
    assert lo <= hi
    assert math.isclose(lo, lp_oracle(p, eps), rel_tol=1e-12, abs_tol=1e-300)
    if p.denominator == 1:
        assert lo == hi


@given(st.lists(st.fractions(min_value=Fraction(1, 100), max_value=4, max_denominator=100),
                min_size=2, max_size=6))
def test_lp_convexity_property(points):
    m = LpModulus(Fraction(3))
    pts = sorted(set(points))
    vals = [to_fraction(m.evaluate(e)) for e in pts]
    for (s, vs), (t, vt) in zip(zip(pts, vals), zip(pts[1:], vals[1:])):
        assert vs <= vt
        assert vs * t <= vt * s


def test_product_lift_example():
    m = ProductLift(LpModulus(Fraction(2)))
    assert eval_modulus(m, Fraction(0)) == 0
    v = to_fraction(eval_modulus(m, Fraction(1), DOWN))
    assert v <= Fraction(1, 262144)
    assert Fraction(1, 262144) - v < Fraction(1, 262144) * Fraction(1, 2**40)
    grid = [to_fraction(eval_modulus(m, Fraction(k, 10))) for k in range(1, 21)]
    assert grid == sorted(grid)


def test_product_lift_up_dominates_down():
    m = ProductLift(LpModulus(Fraction(3)))
    for k in range(1, 21):
        e = Fraction(k, 10)
        assert to_fraction(m.evaluate(e, DOWN)) <= to_fraction(m.evaluate(e, UP))


def test_convexify_constant_samples_with_origin_entry():
    c = Fraction(3, 10)
    grid = [Fraction(k, 4) for k in range(1, 9)]
    mod = convexify([(0, c)] + [(e, c) for e in grid])
    for e in grid:
        assert mod.evaluate(e) == c * e / 2


def test_convexify_without_origin_drops_first_cell():
    mod = convexify([(1, Fraction(1, 8)), (2, Fraction(1, 4))])
    assert mod.grid == ((Fraction(1), Fraction(0)), (Fraction(2), Fraction(1, 16)))


@pytest.mark.parametrize("samples", [[], [(0, 1)], [(1, 1), (Fraction(3, 2), 1)],
                                     [(1, 2), (2, 1)], [(1, 1), (1, 1), (2, 1)]])
def test_convexify_rejects(samples):
    with pytest.raises(DomainError):
        convexify(samples)


@given(st.lists(st.fractions(min_value=0, max_value=1, max_denominator=64), min_size=1, max_size=12))
def test_convexify_is_convex_and_below_trapezoid(values):
    values = sorted(values)
    n = len(values)
    grid = [Fraction(2 * (k + 1), n) for k in range(n)]
    samples = list(zip(grid, values))
    mod = convexify(samples)
    prev = (Fraction(0), Fraction(0))
    for e, v in mod.grid:
        assert prev[1] <= v
        if prev[0] > 0:
            assert prev[1] * e <= v * prev[0]
        prev = (e, v)
    # trapezoid with the first cell starting at 0
    trap = Fraction(0)
    left_e, left_v = Fraction(0), Fraction(0)
    for (e, v), (_, got) in zip(samples, mod.grid):
        trap += (left_v + v) * (e - left_e) / 2
        assert got <= trap / 2
        left_e, left_v = e, v


def test_piecewise_validation():
    with pytest.raises(DomainError):
        PiecewiseConvex(((Fraction(1), Fraction(1, 2)), (Fraction(2), Fraction(1, 2))))
    m = PiecewiseConvex(((Fraction(1), Fraction(1, 8)), (Fraction(2), Fraction(1, 2))))
    assert m.evaluate(Fraction(3, 2)) == Fraction(5, 16)
    assert m.evaluate(Fraction(3)) == Fraction(7, 8)


def test_uc_examples():
    lp2 = LpModulus(Fraction(2))
    x = np.array([1.0, 0.0])
    assert check_uc_sample(x, -x, Fraction(2), lp2)
    assert check_uc_sample([1, 0], [0, 1], Fraction(7, 5), lp2)
    assert not check_uc_sample([1, 0], [0, 1], Fraction(1), FakeModulus(), p=2)


def test_uc_precondition_is_distinct():
    lp2 = LpModulus(Fraction(2))
    with pytest.raises(PreconditionError):
        check_uc_sample([2, 0], [0, 1], Fraction(1), lp2)
    with pytest.raises(PreconditionError):
        check_uc_sample([1, 0], [0.9, 0], Fraction(1), lp2)


def test_uc_batch_small_sample():
    rng = np.random.default_rng(1)
    for p in (Fraction(3, 2), Fraction(2), Fraction(3)):
        v = rng.normal(size=(4000, 8))
        v /= lp_norm(v, p)[:, None]
        v *= rng.uniform(0, 1, size=(4000, 1)) ** (1 / 8)
        x, y = v[:2000], v[2000:]
        keep = lp_norm(x - y, p) >= 1
        assert check_uc_batch(x[keep], y[keep], Fraction(1), LpModulus(p), p).all()


def test_json_round_trip_and_parse():
    for m in (LpModulus(Fraction(3, 2)), ProductLift(LpModulus(Fraction(2))),
              convexify([(1, Fraction(1, 8)), (2, Fraction(1, 4))])):
        assert modulus_from_json(m.to_json()) == m
    assert parse_modulus("lp:3/2") == LpModulus(Fraction(3, 2))
    assert parse_modulus("product:lp:2") == ProductLift(LpModulus(Fraction(2)))
    with pytest.raises(DomainError):
        parse_modulus("sup:2")
