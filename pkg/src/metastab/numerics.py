"""Exact scalar arithmetic with directed rounding.

Rates are exact Python ints. Rationals are :class:`fractions.Fraction`.
Quantities that become too small for an exact fraction (the nonlinearity
functions shrink doubly exponentially) are carried as :class:`Dyadic`
values ``man * 2**exp`` whose exponent is an unbounded int and whose
mantissa is rounded in a declared direction.  A *scalar* is either of the
two; every helper below accepts both.
"""

from __future__ import annotations

import decimal
import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Union


class ResourceError(RuntimeError):
    """A computation would exceed the configured size or iteration limits."""


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


@dataclass
class Limits:
    # iteration counts (K+1, ceil(b^2/eps^2), ...) beyond this abort
    max_iterations: int = 10**9
    # bit length of any materialized natural number
    max_bits: int = 1 << 22
    # total bit length of an exact Fraction before switching to Dyadic
    exact_bits: int = 1 << 14
    # mantissa precision of Dyadic values
    precision: int = 96
    # depth p of the gamma_p recursion
    gamma_depth: int = 50_000


LIMITS = Limits()


class RoundingDirection(enum.Enum):
    DOWN = "down"
    UP = "up"

    @property
    def up(self) -> bool:
        return self is RoundingDirection.UP


DOWN = RoundingDirection.DOWN
UP = RoundingDirection.UP


# ---------------------------------------------------------------------------
# integer helpers


def ceil_div(a: int, b: int) -> int:
    """Return ceil(a / b) for a >= 0 and b >= 1."""
    if b <= 0:
        raise DomainError(f"ceil_div: divisor must be positive, got {b}")
    if a < 0:
        raise DomainError(f"ceil_div: numerator must be nonnegative, got {a}")
    return -(-a // b)


def iroot(n: int, k: int) -> int:
    """Floor of the k-th root of n >= 0."""
    if n < 0 or k < 1:
        raise DomainError("iroot needs n >= 0 and k >= 1")
    if k == 1 or n < 2:
        return n
    if k == 2:
        return math.isqrt(n)
    x = 1 << -(-n.bit_length() // k)
    while True:
        y = ((k - 1) * x + n // x ** (k - 1)) // k
        if y >= x:
            break
        x = y
    while x**k > n:
        x -= 1
    while (x + 1) ** k <= n:
        x += 1
    return x


def ceil_rat_pow(r: Fraction, a: int, b: int) -> int:
    """Least natural m with m**b >= r**a, by exact integer comparison."""
    r = Fraction(r)
    if r < 0:
        raise DomainError("ceil_rat_pow needs r >= 0")
    if a < 1 or b < 1:
        raise DomainError("exponents must be positive")
    num, den = r.numerator**a, r.denominator**a
    m = iroot(num // den, b)
    if m**b * den >= num:
        return m
    return m + 1


_SQRT_HALF_SCALED = math.isqrt(1 << 127)  # floor(2**64 / sqrt 2)


def sqrt2_recip_upper() -> Fraction:
    """Fixed rational u with u >= 1/sqrt(2) and u - 1/sqrt(2) < 2**-64."""
    return Fraction(_SQRT_HALF_SCALED + 1, 1 << 64)


def sqrt2_recip_lower() -> Fraction:
    """Fixed rational l with l <= 1/sqrt(2) and 1/sqrt(2) - l < 2**-64."""
    return Fraction(_SQRT_HALF_SCALED, 1 << 64)


def parse_rational(text: str | int | Fraction) -> Fraction:
    """Parse "num/den", an integer or a decimal string exactly."""
    if isinstance(text, (int, Fraction)):
        return Fraction(text)
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise DomainError(f"not a rational number: {text!r}") from exc


def fmt_rational(x: Fraction) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def rational_exponent(q: Fraction) -> tuple[int, int]:
    """Return (a, d) with q/(q-1) = a/d in lowest terms."""
    q = Fraction(q)
    if q <= 1:
        raise DomainError(f"exponent q must exceed 1, got {q}")
    e = q / (q - 1)
    return e.numerator, e.denominator


# ---------------------------------------------------------------------------
# Dyadic scalars


def _floor_shift(n: int, r: int) -> int:
    return n >> r


def _ceil_shift(n: int, r: int) -> int:
    return -((-n) >> r)


@dataclass(frozen=True)
class Dyadic:
    """Nonnegative number ``man * 2**exp`` with a bounded mantissa.

    The exponent may be astronomically large in magnitude.  Instances are
    exact values; rounding happens only when they are produced.
    """

    man: int
    exp: int

    def __post_init__(self):
        if self.man < 0:
            raise DomainError("Dyadic values are nonnegative")

    @classmethod
    def from_parts(cls, num: int, den: int, exp: int,
                   direction: RoundingDirection) -> "Dyadic":
        """Round num/den * 2**exp to LIMITS.precision bits."""
        if num == 0:
            return cls(0, 0)
        prec = LIMITS.precision
        s = prec + 1 - (num.bit_length() - den.bit_length())
        if s >= 0:
            top, bottom = num << s, den
        else:
            top, bottom = num, den << -s
        man = -(-top // bottom) if direction.up else top // bottom
        return cls._normalized(man, exp - s, direction)

    @classmethod
    def _normalized(cls, man: int, exp: int,
                    direction: RoundingDirection) -> "Dyadic":
        extra = man.bit_length() - LIMITS.precision
        if extra > 0:
            man = _ceil_shift(man, extra) if direction.up else _floor_shift(man, extra)
            exp += extra
        if man == 0:
            return cls(0, 0)
        tz = (man & -man).bit_length() - 1
        return cls(man >> tz, exp + tz)

    def log2_bracket(self) -> tuple[int, int]:
        n = self.man.bit_length()
        return self.exp + n - 1, self.exp + n

    def __float__(self) -> float:
        if self.man == 0:
            return 0.0
        top = self.exp + self.man.bit_length()
        if top < -1080:
            return 0.0
        if top > 1030:
            return math.inf
        return math.ldexp(float(self.man), self.exp)

    def __bool__(self) -> bool:
        return self.man != 0

    def __str__(self) -> str:
        return f"{self.man}*{_pow2_text(self.exp)}"

    def __repr__(self) -> str:
        return f"Dyadic({self})"

    def _cmp(self, other) -> int:
        return compare(self, other)

    def __eq__(self, other):
        if not isinstance(other, (Dyadic, Fraction, int)):
            return NotImplemented
        return compare(self, other) == 0

    def __hash__(self):
        return hash((self.man, self.exp))

    def __lt__(self, other):
        if not isinstance(other, (Dyadic, Fraction, int)):
            return NotImplemented
        return compare(self, other) < 0

    def __le__(self, other):
        if not isinstance(other, (Dyadic, Fraction, int)):
            return NotImplemented
        return compare(self, other) <= 0

    def __gt__(self, other):
        if not isinstance(other, (Dyadic, Fraction, int)):
            return NotImplemented
        return compare(self, other) > 0

    def __ge__(self, other):
        if not isinstance(other, (Dyadic, Fraction, int)):
            return NotImplemented
        return compare(self, other) >= 0


Scalar = Union[Fraction, Dyadic]


def _parts(x) -> tuple[int, int, int]:
    if isinstance(x, Dyadic):
        return x.man, 1, x.exp
    x = Fraction(x)
    if x < 0:
        raise DomainError("scalars in the rate calculus are nonnegative")
    return x.numerator, x.denominator, 0


def _make(num: int, den: int, exp: int, direction: RoundingDirection) -> Scalar:
    """Exact Fraction when it fits the exact-size budget, else a rounded Dyadic."""
    if num == 0:
        return Fraction(0)
    size = num.bit_length() + den.bit_length() + abs(exp)
    if size <= LIMITS.exact_bits:
        if exp >= 0:
            return Fraction(num << exp, den)
        return Fraction(num, den << -exp)
    return Dyadic.from_parts(num, den, exp, direction)


def log2_bracket(x) -> tuple[int, int]:
    """Integers lo <= hi with 2**lo <= x <= 2**hi (x > 0)."""
    if isinstance(x, Dyadic):
        return x.log2_bracket()
    num, den, _ = _parts(x)
    return num.bit_length() - den.bit_length() - 1, num.bit_length() - den.bit_length() + 1


def compare(x, y) -> int:
    """Exact three-way comparison of two nonnegative scalars."""
    xn, xd, xe = _parts(x)
    yn, yd, ye = _parts(y)
    if xn == 0 or yn == 0:
        return (xn > 0) - (yn > 0)
    xlo, xhi = log2_bracket(x)
    ylo, yhi = log2_bracket(y)
    if xhi < ylo:
        return -1
    if yhi < xlo:
        return 1
    left, right = xn * yd, yn * xd
    shift = xe - ye
    if shift >= 0:
        left <<= shift
    else:
        right <<= -shift
    return (left > right) - (left < right)


def is_zero(x) -> bool:
    return _parts(x)[0] == 0


def mul(x, y, direction: RoundingDirection = DOWN) -> Scalar:
    xn, xd, xe = _parts(x)
    yn, yd, ye = _parts(y)
    return _make(xn * yn, xd * yd, xe + ye, direction)


def div(x, y, direction: RoundingDirection = DOWN) -> Scalar:
    xn, xd, xe = _parts(x)
    yn, yd, ye = _parts(y)
    if yn == 0:
        raise DomainError("division by zero")
    return _make(xn * yd, xd * yn, xe - ye, direction)


def ldexp(x, e: int, direction: RoundingDirection = DOWN) -> Scalar:
    """x * 2**e for an arbitrary int e."""
    num, den, exp = _parts(x)
    return _make(num, den, exp + e, direction)


def minimum(*xs) -> Scalar:
    best = xs[0]
    for x in xs[1:]:
        if compare(x, best) < 0:
            best = x
    return best


def power(x, k: int, direction: RoundingDirection = DOWN) -> Scalar:
    """x**k for a natural exponent k."""
    if k < 0:
        raise DomainError("negative exponent")
    num, den, exp = _parts(x)
    if num == 0:
        return Fraction(0) if k > 0 else Fraction(1)
    if (num.bit_length() + den.bit_length() + abs(exp)) * k <= LIMITS.exact_bits:
        return _make(num**k, den**k, exp * k, direction)
    base = Dyadic.from_parts(num, den, exp, direction)
    acc = Dyadic(1, 0)
    for bit in bin(k)[2:]:
        acc = Dyadic._normalized(acc.man * acc.man, 2 * acc.exp, direction)
        if bit == "1":
            acc = Dyadic._normalized(acc.man * base.man, acc.exp + base.exp, direction)
    return _make(acc.man, 1, acc.exp, direction)


def root(x, d: int, direction: RoundingDirection = DOWN) -> Scalar:
    """x**(1/d), rounded in the given direction (relative error < 2**-precision)."""
    if d < 1:
        raise DomainError("root index must be positive")
    if d == 1:
        return x
    num, den, exp = _parts(x)
    if num == 0:
        return Fraction(0)
    prec = LIMITS.precision
    base = Dyadic.from_parts(num, den, exp, direction)
    q, r = divmod(base.exp, d)
    scaled = base.man << (r + d * (prec + 2))
    m = iroot(scaled, d)
    if direction.up and m**d < scaled:
        m += 1
    return _make(m, 1, q - prec - 2, direction)


def rational_power(x, e: Fraction, direction: RoundingDirection = DOWN) -> Scalar:
    """x**e for a positive rational exponent e, rounded in direction."""
    e = Fraction(e)
    if e <= 0:
        raise DomainError("exponent must be positive")
    return root(power(x, e.numerator, direction), e.denominator, direction)


_PRINTABLE_BITS = 14000  # stays under the default int-to-str digit limit


def _pow2_text(e: int) -> str:
    """Readable 2^e for messages, abbreviating exponents too long to print."""
    if e.bit_length() <= _PRINTABLE_BITS:
        return f"2^{e}"
    return f"2^(exponent of {e.bit_length()} bits)"


def to_fraction(x) -> Fraction:
    """Exact rational value; raises ResourceError if it cannot be materialized."""
    if not isinstance(x, Dyadic):
        return Fraction(x)
    if abs(x.exp) > LIMITS.max_bits:
        raise ResourceError(f"value {_pow2_text(x.log2_bracket()[0])} too extreme to materialize")
    if x.exp >= 0:
        return Fraction(x.man << x.exp)
    return Fraction(x.man, 1 << -x.exp)


def ceil_bounded(x, limit: int) -> int:
    """ceil(x) as an int, raising ResourceError when it exceeds limit."""
    if is_zero(x):
        return 0
    lo, _ = log2_bracket(x)
    if lo > limit.bit_length() + 1:
        raise ResourceError(f"value of about {_pow2_text(lo)} exceeds the limit {limit}")
    f = to_fraction(x)
    n = ceil_div(f.numerator, f.denominator)
    if n > limit:
        raise ResourceError(f"value {n} exceeds the limit {limit}")
    return n


def scalar_str(x) -> str:
    if isinstance(x, Dyadic):
        return str(x)
    return fmt_rational(x)


# ---------------------------------------------------------------------------
# naturals


def check_size(n: int, what: str = "value") -> int:
    if n.bit_length() > LIMITS.max_bits:
        raise ResourceError(f"{what} exceeds {LIMITS.max_bits} bits")
    return n


def check_iterations(i: int, what: str = "iteration count") -> int:
    if i > LIMITS.max_iterations:
        raise ResourceError(f"{what} {i} exceeds {LIMITS.max_iterations}")
    return i


_DEC_CHUNK = 1024


def int_to_decimal(n: int) -> str:
    """Decimal string of a natural number; subquadratic for huge inputs."""
    if n < 0:
        raise DomainError("naturals only")
    if n.bit_length() <= 4 * _DEC_CHUNK:
        return str(n)
    D = decimal.Decimal
    powers: dict[int, decimal.Decimal] = {}

    def pow2(w: int) -> decimal.Decimal:
        r = powers.get(w)
        if r is None:
            r = D(2) ** w if w <= _DEC_CHUNK else pow2(w >> 1) * pow2(w - (w >> 1))
            powers[w] = r
        return r

    def inner(k: int, w: int) -> decimal.Decimal:
        if w <= _DEC_CHUNK:
            return D(k)
        lo_w = w >> 1
        hi = k >> lo_w
        lo = k - (hi << lo_w)
        return inner(lo, lo_w) + inner(hi, w - lo_w) * pow2(lo_w)

    with decimal.localcontext() as ctx:
        ctx.prec = decimal.MAX_PREC
        ctx.Emax = decimal.MAX_EMAX
        ctx.Emin = decimal.MIN_EMIN
        ctx.traps[decimal.Inexact] = True
        return str(inner(n, n.bit_length()))
