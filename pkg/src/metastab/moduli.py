"""Moduli of uniform convexity.

Three descriptors are supported: the closed form for L^p spaces, a
piecewise linear convex modulus built from samples, and the lift of a
modulus to the product space X^2 with the Euclidean product norm.  All of
them are evaluated with a rounding direction; rate formulas always ask for
``DOWN`` (a smaller modulus is still a modulus).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Union

import numpy as np

from .numerics import (
    DOWN,
    Dyadic,
    DomainError,
    RoundingDirection,
    Scalar,
    div,
    fmt_rational,
    is_zero,
    mul,
    parse_rational,
    power,
    rational_power,
    sqrt2_recip_lower,
    sqrt2_recip_upper,
    to_fraction,
)

UC_TOLERANCE = 1e-12


class PreconditionError(DomainError):
    """Sample points violate the hypotheses of the convexity inequality."""


@dataclass(frozen=True)
class LpModulus:
    """(p-1)/8 eps^2 for 1 < p < 2 and eps^p / (p 2^p) for p >= 2."""

    p: Fraction

    def __post_init__(self):
        object.__setattr__(self, "p", Fraction(self.p))
        if self.p <= 1:
            raise DomainError(f"L^p modulus needs p > 1, got {self.p}")

    def evaluate(self, eps, direction: RoundingDirection = DOWN) -> Scalar:
        if is_zero(eps):
            return Fraction(0)
        p = self.p
        if p < 2:
            return mul(power(eps, 2, direction), (p - 1) / 8, direction)
        half = div(eps, 2, direction)
        if p.denominator == 1:
            top = power(half, p.numerator, direction)
        else:
            top = rational_power(half, p, direction)
        return div(top, p, direction)

    def to_json(self) -> dict:
        return {"type": "lp", "p": fmt_rational(self.p)}


@dataclass(frozen=True)
class PiecewiseConvex:
    """Linear interpolation through (0, 0) and the grid points.

    Beyond the last grid point the modulus continues linearly with
    ``tail_slope``.
    """

    grid: tuple[tuple[Fraction, Fraction], ...]
    tail_slope: Fraction | None = None

    def __post_init__(self):
        grid = tuple((Fraction(e), Fraction(v)) for e, v in self.grid)
        if not grid:
            raise DomainError("piecewise modulus needs at least one grid point")
        prev_e, prev_v = Fraction(0), Fraction(0)
        for e, v in grid:
            if e <= prev_e:
                raise DomainError("grid points must be positive and strictly increasing")
            if v < prev_v:
                raise DomainError("modulus values must be nondecreasing")
            if prev_e > 0 and prev_v * e > v * prev_e:
                raise DomainError("value/eps must be nondecreasing (convexity)")
            prev_e, prev_v = e, v
        object.__setattr__(self, "grid", grid)
        if self.tail_slope is None:
            if len(grid) == 1:
                slope = grid[0][1] / grid[0][0]
            else:
                (e0, v0), (e1, v1) = grid[-2], grid[-1]
                slope = (v1 - v0) / (e1 - e0)
            object.__setattr__(self, "tail_slope", slope)
        else:
            object.__setattr__(self, "tail_slope", Fraction(self.tail_slope))

    def evaluate(self, eps, direction: RoundingDirection = DOWN) -> Scalar:
        if is_zero(eps):
            return Fraction(0)
        e1, v1 = self.grid[0]
        if isinstance(eps, Dyadic):
            if eps <= e1:
                return mul(eps, v1 / e1, direction)
            eps = to_fraction(eps)
        eps = Fraction(eps)
        prev_e, prev_v = Fraction(0), Fraction(0)
        for e, v in self.grid:
            if eps <= e:
                return prev_v + (v - prev_v) * (eps - prev_e) / (e - prev_e)
            prev_e, prev_v = e, v
        return prev_v + self.tail_slope * (eps - prev_e)

    def to_json(self) -> dict:
        return {
            "type": "piecewise",
            "grid": [[fmt_rational(e), fmt_rational(v)] for e, v in self.grid],
            "tail_slope": fmt_rational(self.tail_slope),
        }


@dataclass(frozen=True)
class ProductLift:
    """Modulus of (X^2, ||.||_2): eps -> delta(eps/(8 sqrt 2) * eta(eps/sqrt 2)), delta(s) = s^2/8."""

    inner: "Modulus"

    def evaluate(self, eps, direction: RoundingDirection = DOWN) -> Scalar:
        if is_zero(eps):
            return Fraction(0)
        r = sqrt2_recip_upper() if direction.up else sqrt2_recip_lower()
        scaled = mul(eps, r, direction)
        arg = mul(div(scaled, 8, direction), self.inner.evaluate(scaled, direction), direction)
        return div(power(arg, 2, direction), 8, direction)

    def to_json(self) -> dict:
        return {"type": "product", "inner": self.inner.to_json()}


Modulus = Union[LpModulus, PiecewiseConvex, ProductLift]


def eval_modulus(m: Modulus, eps, direction: RoundingDirection = DOWN) -> Scalar:
    if not is_zero(eps) and eps < 0:
        raise DomainError("modulus argument must be nonnegative")
    return m.evaluate(eps, direction)


def convexify(samples: Sequence[tuple]) -> PiecewiseConvex:
    """Half the left Riemann sum of a nondecreasing modulus eta_1.

    ``samples`` are (eps, eta_1(eps)) pairs on a grid reaching 2.  An entry
    at eps = 0 gives a lower bound for eta_1 on the first cell; without it
    the first cell contributes nothing, which is the only sound choice.
    """
    pts = [(Fraction(e), Fraction(v)) for e, v in samples]
    if not pts:
        raise DomainError("empty sample grid")
    first_value = Fraction(0)
    if pts[0][0] == 0:
        first_value = pts.pop(0)[1]
    if not pts:
        raise DomainError("sample grid has no positive point")
    prev_e, prev_v = Fraction(0), first_value
    for e, v in pts:
        if e <= prev_e:
            raise DomainError("sample grid must be strictly increasing with positive cells")
        if v < prev_v:
            raise DomainError("samples of eta_1 must be nondecreasing")
        prev_e, prev_v = e, v
    if pts[-1][0] < 2:
        raise DomainError("sample grid must cover (0, 2]")
    if first_value < 0:
        raise DomainError("modulus samples must be nonnegative")
    grid = []
    acc = Fraction(0)
    left_e, left_v = Fraction(0), first_value
    for e, v in pts:
        acc += left_v * (e - left_e) / 2
        grid.append((e, acc))
        left_e, left_v = e, v
    return PiecewiseConvex(tuple(grid), tail_slope=pts[-1][1] / 2)


def lp_norm(v, p, axis=-1):
    p = float(p)
    a = np.abs(np.asarray(v, dtype=float))
    if p == 2.0:
        return np.sqrt(np.sum(a * a, axis=axis))
    return np.sum(a**p, axis=axis) ** (1.0 / p)


def _norm_p(m: Modulus, p):
    if p is not None:
        return Fraction(p)
    if isinstance(m, LpModulus):
        return m.p
    return Fraction(2)


def check_uc_sample(x, y, eps, m: Modulus, p=None) -> bool:
    """Whether ||(x+y)/2|| <= 1 - eta(eps) holds for one admissible pair."""
    p = _norm_p(m, p)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    nx, ny, nd = lp_norm(x, p), lp_norm(y, p), lp_norm(x - y, p)
    if nx > 1 + UC_TOLERANCE or ny > 1 + UC_TOLERANCE:
        raise PreconditionError("sample points must lie in the unit ball")
    if nd < float(eps) - UC_TOLERANCE:
        raise PreconditionError(f"||x - y|| = {nd} is below eps = {float(eps)}")
    eta = float(eval_modulus(m, Fraction(eps), DOWN))
    return bool(lp_norm((x + y) / 2, p) <= 1 - eta + UC_TOLERANCE)


def check_uc_batch(xs, ys, eps, m: Modulus, p=None) -> np.ndarray:
    """Vectorized check_uc_sample over rows of xs, ys (all rows admissible)."""
    p = _norm_p(m, p)
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    ok_pre = (lp_norm(xs, p) <= 1 + UC_TOLERANCE) & (lp_norm(ys, p) <= 1 + UC_TOLERANCE)
    ok_pre &= lp_norm(xs - ys, p) >= float(eps) - UC_TOLERANCE
    if not ok_pre.all():
        raise PreconditionError(f"{int((~ok_pre).sum())} sample pairs are inadmissible")
    eta = float(eval_modulus(m, Fraction(eps), DOWN))
    return lp_norm((xs + ys) / 2, p) <= 1 - eta + UC_TOLERANCE


def modulus_from_json(d: dict) -> Modulus:
    kind = d.get("type")
    if kind == "lp":
        return LpModulus(parse_rational(d["p"]))
    if kind == "piecewise":
        grid = tuple((parse_rational(e), parse_rational(v)) for e, v in d["grid"])
        tail = d.get("tail_slope")
        return PiecewiseConvex(grid, None if tail is None else parse_rational(tail))
    if kind == "product":
        return ProductLift(modulus_from_json(d["inner"]))
    raise DomainError(f"unknown modulus type {kind!r}")


def parse_modulus(text: str) -> Modulus:
    """Command-line form: ``lp:P`` or ``product:lp:P``."""
    if text.startswith("product:"):
        return ProductLift(parse_modulus(text[len("product:"):]))
    kind, _, arg = text.partition(":")
    if kind == "lp" and arg:
        return LpModulus(parse_rational(arg))
    raise DomainError(f"cannot parse modulus {text!r}; expected lp:P")
