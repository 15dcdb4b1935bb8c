"""Counterfunctions N -> N as immutable expression trees.

Every node carries a structural ``monotone`` flag.  The closed primitives
preserve monotonicity, so any tree built from them (in particular anything
written in the command-line grammar) is monotone and equals its own
monotone envelope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .numerics import (
    LIMITS,
    DomainError,
    ResourceError,
    ceil_div,
    check_iterations,
    check_size,
)

# largest argument up to which a non-monotone envelope is scanned
ENVELOPE_SCAN_LIMIT = 10**6


class EvaluationError(DomainError):
    """Argument outside the domain of a tabulated function."""

    def __init__(self, argument: int, message: str):
        super().__init__(message)
        self.argument = argument


class CounterFn:
    monotone: bool = True

    def __call__(self, n: int) -> int:
        return self.eval(n)

    def eval(self, n: int) -> int:
        raise NotImplementedError

    def dsl(self) -> str:
        raise NotImplementedError

    def __str__(self) -> str:
        return self.dsl()


@dataclass(frozen=True)
class Zero(CounterFn):
    def eval(self, n):
        return 0

    def dsl(self):
        return "zero"


@dataclass(frozen=True)
class Const(CounterFn):
    k: int

    def __post_init__(self):
        if self.k < 0:
            raise DomainError("constants must be natural numbers")

    def eval(self, n):
        return self.k

    def dsl(self):
        return f"const:{self.k}"


@dataclass(frozen=True)
class Identity(CounterFn):
    def eval(self, n):
        return n

    def dsl(self):
        return "id"


@dataclass(frozen=True)
class CeilScale(CounterFn):
    """n -> ceil(a*n/d)."""

    a: int
    d: int = 1

    def __post_init__(self):
        if self.a < 0 or self.d < 1:
            raise DomainError("scale needs a >= 0 and d >= 1")

    @classmethod
    def of(cls, r: Fraction) -> "CeilScale":
        r = Fraction(r)
        return cls(r.numerator, r.denominator)

    def eval(self, n):
        return check_size(ceil_div(self.a * n, self.d))

    def dsl(self):
        return f"scale:{self.a}/{self.d}"


@dataclass(frozen=True)
class _Binary(CounterFn):
    f: CounterFn
    g: CounterFn
    monotone: bool = field(init=False, default=True)
    _name = ""

    def __post_init__(self):
        object.__setattr__(self, "monotone", self.f.monotone and self.g.monotone)

    def dsl(self):
        return f"{self._name}({self.f.dsl()},{self.g.dsl()})"


@dataclass(frozen=True)
class Add(_Binary):
    _name = "add"

    def eval(self, n):
        return self.f.eval(n) + self.g.eval(n)


@dataclass(frozen=True)
class Mul(_Binary):
    _name = "mul"

    def eval(self, n):
        return check_size(self.f.eval(n) * self.g.eval(n))


@dataclass(frozen=True)
class Max(_Binary):
    _name = "max"

    def eval(self, n):
        return max(self.f.eval(n), self.g.eval(n))


@dataclass(frozen=True)
class Compose(_Binary):
    """n -> f(g(n))."""

    _name = "compose"

    def eval(self, n):
        return self.f.eval(self.g.eval(n))


def tilde_iterate(f: CounterFn, i: int, n: int) -> int:
    """i-fold iterate of n -> n + f(n); stops early at a fixed point."""
    if i < 0:
        raise DomainError("iteration count must be natural")
    if i == 0:
        return n
    step = f.eval(n)
    if step == 0:
        return n
    check_iterations(i)
    for _ in range(i):
        if step == 0:
            break
        n = check_size(n + step)
        step = f.eval(n)
    return n


def eps_iterate(f: CounterFn, i: int, n: int, growth: Fraction | None = None) -> int:
    """i-fold iterate of f started at max{1, n}.

    ``growth`` is an optional r > 1 with f(m) >= r*m; it lets oversized
    results be rejected before any work is done.
    """
    if i < 0:
        raise DomainError("iteration count must be natural")
    v = max(1, n)
    if growth is not None and growth > 1 and i > 0:
        predicted = i * math.log2(growth) + v.bit_length() - 1
        if predicted > LIMITS.max_bits:
            raise ResourceError(
                f"{i} iterations with growth factor >= {float(growth):.4g} "
                f"exceed {LIMITS.max_bits} bits")
    check_iterations(i)
    for _ in range(i):
        v = check_size(f.eval(v))
    return v


@dataclass(frozen=True)
class TildeIterate(CounterFn):
    f: CounterFn
    i: int
    monotone: bool = field(init=False, default=True)

    def __post_init__(self):
        object.__setattr__(self, "monotone", self.f.monotone)

    def eval(self, n):
        return tilde_iterate(self.f, self.i, n)

    def dsl(self):
        return f"tilde({self.f.dsl()},{self.i})"


@dataclass(frozen=True)
class EpsIterate(CounterFn):
    f: CounterFn
    i: int
    growth: Fraction | None = None
    monotone: bool = field(init=False, default=True)

    def __post_init__(self):
        object.__setattr__(self, "monotone", self.f.monotone)

    def eval(self, n):
        return eps_iterate(self.f, self.i, n, self.growth)

    def dsl(self):
        return f"iter({self.f.dsl()},{self.i})"


@dataclass(frozen=True)
class External(CounterFn):
    """Tabulated function on [0, len(values))."""

    values: tuple
    monotone: bool = field(init=False, default=True)

    def __post_init__(self):
        vals = tuple(int(v) for v in self.values)
        if any(v < 0 for v in vals):
            raise DomainError("table values must be natural numbers")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "monotone", all(a <= b for a, b in zip(vals, vals[1:])))

    def eval(self, n):
        if not 0 <= n < len(self.values):
            raise EvaluationError(n, f"argument {n} outside table domain [0, {len(self.values)})")
        return self.values[n]

    def dsl(self):
        return "table:" + ";".join(map(str, self.values))


@dataclass(frozen=True)
class Envelope(CounterFn):
    """n -> max_{m <= n} f(m), with a memoized running maximum."""

    f: CounterFn
    _running: list = field(default_factory=list, compare=False, repr=False, hash=False)

    def eval(self, n):
        run = self._running
        if n < len(run):
            return run[n]
        if n > ENVELOPE_SCAN_LIMIT:
            raise ResourceError(f"envelope scan up to {n} exceeds {ENVELOPE_SCAN_LIMIT}")
        best = run[-1] if run else 0
        for m in range(len(run), n + 1):
            best = max(best, self.f.eval(m))
            run.append(best)
        return run[n]

    def dsl(self):
        return f"envelope({self.f.dsl()})"


def monotone_envelope(f: CounterFn) -> CounterFn:
    if f.monotone or isinstance(f, Envelope):
        return f
    return Envelope(f)


def double(f: CounterFn) -> CounterFn:
    """n -> 2 f(n)."""
    return Compose(CeilScale(2, 1), f)


# ---------------------------------------------------------------------------
# command-line grammar

_BINARY = {"add": Add, "mul": Mul, "max": Max, "compose": Compose}


def parse_counterfn(text: str) -> CounterFn:
    """Parse id, zero, const:K, scale:A/D, add(F,G), mul(F,G), max(F,G), compose(F,G)."""
    fn, pos = _parse(text, 0)
    if pos != len(text):
        raise DomainError(f"trailing input at position {pos} in {text!r}")
    return fn


def _natural(text: str, what: str) -> int:
    if not text.isdigit():
        raise DomainError(f"{what} must be a decimal natural number, got {text!r}")
    return int(text)


def _parse(text: str, pos: int) -> tuple[CounterFn, int]:
    end = pos
    while end < len(text) and text[end] not in "(),":
        end += 1
    word = text[pos:end]
    if word in _BINARY:
        if end >= len(text) or text[end] != "(":
            raise DomainError(f"expected '(' after {word} at position {end}")
        left, p = _parse(text, end + 1)
        if p >= len(text) or text[p] != ",":
            raise DomainError(f"expected ',' at position {p} in {text!r}")
        right, p = _parse(text, p + 1)
        if p >= len(text) or text[p] != ")":
            raise DomainError(f"expected ')' at position {p} in {text!r}")
        return _BINARY[word](left, right), p + 1
    if word == "id":
        return Identity(), end
    if word == "zero":
        return Zero(), end
    if word.startswith("const:"):
        return Const(_natural(word[6:], "constant")), end
    if word.startswith("scale:"):
        a, sep, d = word[6:].partition("/")
        if not sep:
            raise DomainError(f"scale needs the form scale:A/D, got {word!r}")
        a, d = _natural(a, "scale numerator"), _natural(d, "scale denominator")
        if d == 0:
            raise DomainError("scale denominator must be positive")
        return CeilScale(a, d), end
    raise DomainError(f"unknown counterfunction {word!r} at position {pos}")
