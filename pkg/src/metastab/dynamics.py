"""Nonexpansive operators on finite-dimensional l^p spaces and their orbits.

Everything here runs in double precision; inequalities are compared with
the global slack ``TOL``.  Prefix sums of the orbit are accumulated in
``numpy.longdouble`` so that Cesaro means from differences of prefix sums
agree with direct averages.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path

import numpy as np

from .moduli import LpModulus, Modulus, lp_norm, modulus_from_json
from .numerics import DomainError, ResourceError, fmt_rational, parse_rational

TOL = 1e-9
DEFAULT_CAP = 200_000


@dataclass(frozen=True)
class Space:
    dim: int
    p: Fraction = Fraction(2)

    def __post_init__(self):
        object.__setattr__(self, "p", Fraction(self.p))
        if self.dim < 1:
            raise DomainError("dimension must be positive")
        if self.p < 1:
            raise DomainError("need p >= 1")

    def norm(self, v, axis=-1):
        return lp_norm(v, self.p, axis=axis)

    @property
    def euclidean(self) -> bool:
        return self.p == 2


# ---------------------------------------------------------------------------
# operators; apply() acts on the last axis and accepts batches


def _rotation_matrix(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class IdentityMap:
    dim: int
    linear = True
    wittmann = True

    def apply(self, v):
        return np.array(v, dtype=float, copy=True)

    def fixed_point(self):
        return np.zeros(self.dim)

    def to_json(self):
        return {"type": "identity"}


@dataclass(frozen=True)
class Rotation:
    angle: float
    dim: int = 2
    linear = True
    wittmann = True

    def apply(self, v):
        return np.asarray(v, dtype=float) @ _rotation_matrix(self.angle).T

    def fixed_point(self):
        return np.zeros(2)

    def to_json(self):
        return {"type": "rotation", "angle": self.angle}


@dataclass(frozen=True)
class AveragedPermutation:
    """x -> (1 - lam) x + lam P x for a coordinate permutation P."""

    lam: Fraction
    permutation: tuple
    linear = True
    wittmann = True

    def __post_init__(self):
        object.__setattr__(self, "lam", Fraction(self.lam))
        object.__setattr__(self, "permutation", tuple(int(i) for i in self.permutation))
        if not 0 < self.lam <= 1:
            raise DomainError("lambda must lie in (0, 1]")
        if sorted(self.permutation) != list(range(len(self.permutation))):
            raise DomainError("not a permutation")

    @property
    def dim(self):
        return len(self.permutation)

    def apply(self, v):
        v = np.asarray(v, dtype=float)
        lam = float(self.lam)
        return (1 - lam) * v + lam * v[..., list(self.permutation)]

    def fixed_point(self):
        return np.zeros(self.dim)

    def to_json(self):
        return {"type": "averaged_permutation", "lambda": fmt_rational(self.lam),
                "permutation": list(self.permutation)}


@dataclass(frozen=True)
class AffineContraction:
    """x -> A x + offset with a declared bound on the operator norm of A."""

    matrix: tuple
    offset: tuple
    norm_bound: Fraction
    linear = False
    wittmann = False

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        o = np.asarray(self.offset, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or o.shape != (m.shape[0],):
            raise DomainError("matrix must be square and match the offset")
        object.__setattr__(self, "matrix", tuple(map(tuple, m.tolist())))
        object.__setattr__(self, "offset", tuple(o.tolist()))
        object.__setattr__(self, "norm_bound", Fraction(self.norm_bound))
        if self.norm_bound > 1:
            raise DomainError("declared operator norm must be <= 1")

    @property
    def dim(self):
        return len(self.offset)

    def apply(self, v):
        return np.asarray(v, dtype=float) @ np.asarray(self.matrix).T + np.asarray(self.offset)

    def fixed_point(self):
        m = np.asarray(self.matrix)
        return np.linalg.solve(np.eye(self.dim) - m, np.asarray(self.offset))

    def to_json(self):
        return {"type": "affine_contraction", "matrix": [list(r) for r in self.matrix],
                "offset": list(self.offset), "norm_bound": fmt_rational(self.norm_bound)}


@dataclass(frozen=True)
class ProjectedRotation:
    """Rotation followed by the Euclidean projection onto a box."""

    angle: float
    box: tuple
    dim: int = 2

    def __post_init__(self):
        box = tuple((float(lo), float(hi)) for lo, hi in self.box)
        if len(box) != 2 or any(lo > 0 or hi < 0 for lo, hi in box):
            raise DomainError("box must be two intervals containing 0")
        object.__setattr__(self, "box", box)

    @property
    def linear(self):
        return False

    @property
    def wittmann(self):
        # odd when the box is symmetric, and then T0 = 0
        return all(lo == -hi for lo, hi in self.box)

    def apply(self, v):
        r = np.asarray(v, dtype=float) @ _rotation_matrix(self.angle).T
        lo = np.array([b[0] for b in self.box])
        hi = np.array([b[1] for b in self.box])
        return np.clip(r, lo, hi)

    def fixed_point(self):
        return np.zeros(2)

    def to_json(self):
        return {"type": "projected_rotation", "angle": self.angle, "box": [list(b) for b in self.box]}



def operator_from_json(d: dict, dim: int):
    kind = d.get("type")
    if kind == "identity":
        return IdentityMap(dim)
    if kind == "rotation":
        return Rotation(float(d["angle"]))
    if kind == "averaged_permutation":
        return AveragedPermutation(parse_rational(d["lambda"]), tuple(d["permutation"]))
    if kind == "affine_contraction":
        return AffineContraction(tuple(map(tuple, d["matrix"])), tuple(d["offset"]),
                                 parse_rational(d["norm_bound"]))
    if kind == "projected_rotation":
        return ProjectedRotation(float(d["angle"]), tuple(map(tuple, d["box"])))
    raise DomainError(f"unknown operator type {kind!r}")


def apply_power(op, v, l: int):
    for _ in range(l):
        v = op.apply(v)
    return np.asarray(v, dtype=float)


# ---------------------------------------------------------------------------
# scenarios


@dataclass
class Scenario:
    name: str
    space: Space
    operator: object
    x: np.ndarray
    b: Fraction
    modulus: Modulus
    c: Fraction
    q: Fraction
    fixed_point: np.ndarray
    base: str = "a1"

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.fixed_point = np.asarray(self.fixed_point, dtype=float)
        if self.x.shape != (self.space.dim,) or self.fixed_point.shape != (self.space.dim,):
            raise DomainError("x and fixed_point must match the space dimension")
        if self.operator.dim != self.space.dim:
            raise DomainError("operator dimension does not match the space")
        if self.b <= 0:
            raise DomainError("b must be positive")
        if self.space.norm(self.x) > float(self.b) / 2 + TOL:
            raise DomainError("x must satisfy ||x|| <= b/2")
        if isinstance(self.modulus, LpModulus) and self.modulus.p != self.space.p:
            raise DomainError("modulus exponent does not match the space")
        if self.space.norm(self.operator.apply(self.fixed_point) - self.fixed_point) > TOL:
            raise DomainError("declared fixed point is not fixed")

    @property
    def wittmann(self) -> bool:
        return bool(self.operator.wittmann)

    def to_json(self) -> dict:
        return {
            "space": {"dim": self.space.dim, "p": fmt_rational(self.space.p)},
            "operator": self.operator.to_json(),
            "x": self.x.tolist(),
            "b": fmt_rational(self.b),
            "modulus": self.modulus.to_json(),
            "c": fmt_rational(self.c),
            "q": fmt_rational(self.q),
            "fixed_point": self.fixed_point.tolist(),
            "base": self.base,
        }


def scenario_from_json(d: dict, name: str = "scenario") -> Scenario:
    try:
        space = Space(int(d["space"]["dim"]), parse_rational(d["space"]["p"]))
        return Scenario(
            name=name,
            space=space,
            operator=operator_from_json(d["operator"], space.dim),
            x=d["x"],
            b=parse_rational(d["b"]),
            modulus=modulus_from_json(d["modulus"]),
            c=parse_rational(d["c"]),
            q=parse_rational(d["q"]),
            fixed_point=d["fixed_point"],
            base=d.get("base", "a1"),
        )
    except KeyError as exc:
        raise DomainError(f"scenario is missing field {exc}") from exc


BUNDLED = ("rotation", "averaged_permutation", "affine_contraction", "projected_rotation")


def load_scenario(ref: str) -> Scenario:
    """Load a scenario by path, or by bundled name (with or without .json)."""
    path = Path(ref)
    if path.is_file():
        text, name = path.read_text(), path.stem
    else:
        stem = path.name[:-5] if path.name.endswith(".json") else path.name
        if stem not in BUNDLED:
            raise DomainError(f"no scenario file or bundled scenario named {ref!r}")
        text = resources.files("metastab").joinpath("scenarios").joinpath(stem + ".json").read_text()
        name = stem
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DomainError(f"scenario {ref!r} is not valid JSON: {exc}") from exc
    return scenario_from_json(data, name)


def bundled_scenarios() -> list[Scenario]:
    return [load_scenario(n) for n in BUNDLED]


# ---------------------------------------------------------------------------
# orbit and derived quantities


@dataclass
class OrbitCache:
    scenario: Scenario
    cap: int = DEFAULT_CAP
    _orbit: np.ndarray = field(init=False, repr=False)
    _prefix: np.ndarray = field(init=False, repr=False)
    _filled: int = field(init=False, default=0)

    def __post_init__(self):
        dim = self.scenario.space.dim
        self._orbit = np.empty((0, dim))
        self._prefix = np.zeros((1, dim), dtype=np.longdouble)

    def ensure(self, k: int) -> None:
        """Make T^0 x, ..., T^k x available."""
        if k > self.cap:
            raise ResourceError(f"orbit index {k} exceeds the cap {self.cap}")
        n = self._orbit.shape[0]
        if k < n:
            return
        new_n = min(self.cap + 1, max(k + 1, 2 * n, 64))
        op = self.scenario.operator
        pts = np.empty((new_n - n, self.scenario.space.dim))
        v = self._orbit[-1] if n else None
        for j in range(new_n - n):
            v = self.scenario.x.copy() if v is None else op.apply(v)
            pts[j] = v
        self._orbit = np.vstack([self._orbit, pts])
        sums = np.cumsum(pts.astype(np.longdouble), axis=0) + self._prefix[-1]
        self._prefix = np.vstack([self._prefix, sums])

    def point(self, k: int) -> np.ndarray:
        self.ensure(k)
        return self._orbit[k]

    def points(self, upto: int) -> np.ndarray:
        self.ensure(upto)
        return self._orbit[: upto + 1]

    def norm(self, v, axis=-1):
        return self.scenario.space.norm(v, axis=axis)


def cesaro(cache: OrbitCache, n: int, k: int) -> np.ndarray:
    """S_n T^k x = (1/n) sum_{i<n} T^{k+i} x."""
    if n < 1 or k < 0:
        raise DomainError("cesaro needs n >= 1 and k >= 0")
    cache.ensure(n + k)
    return np.asarray((cache._prefix[k + n] - cache._prefix[k]) / n, dtype=float)


def cesaro_batch(cache: OrbitCache, n, k) -> np.ndarray:
    """Vectorized cesaro for integer arrays n >= 1, k >= 0 (broadcast)."""
    n = np.asarray(n)
    k = np.asarray(k)
    if np.any(n < 1) or np.any(k < 0):
        raise DomainError("cesaro needs n >= 1 and k >= 0")
    cache.ensure(int(np.max(n + k)))
    diff = cache._prefix[k + n] - cache._prefix[k]
    return np.asarray(diff / n[..., None], dtype=float)


def mean_from(cache: OrbitCache, n, k) -> np.ndarray:
    """cesaro with the convention S_0 := S_1 for the quantifier scans."""
    return cesaro_batch(cache, np.maximum(np.asarray(n), 1), k)


def alpha(cache: OrbitCache, n: int, i: int) -> float:
    """||T^n x - T^{n+i} x||."""
    cache.ensure(n + i)
    return float(cache.norm(cache._orbit[n] - cache._orbit[n + i]))


def alpha_table(cache: OrbitCache, n_max: int, i_max: int) -> np.ndarray:
    """Array a[n, i] = alpha(n, i) for n <= n_max, i <= i_max."""
    cache.ensure(n_max + i_max)
    orb = cache._orbit
    idx = np.arange(n_max + 1)[:, None] + np.arange(i_max + 1)[None, :]
    return cache.norm(orb[: n_max + 1, None, :] - orb[idx])


def beta(cache: OrbitCache, m: int, n: int, l: int) -> float:
    """||(S_m T^{l+m} x + S_n T^{l+n} x)/2 - T^l((S_m T^m x + S_n T^n x)/2)||, 0 if m or n is 0."""
    if m == 0 or n == 0:
        return 0.0
    left = (cesaro(cache, m, l + m) + cesaro(cache, n, l + n)) / 2
    mid = (cesaro(cache, m, m) + cesaro(cache, n, n)) / 2
    return float(cache.norm(left - apply_power(cache.scenario.operator, mid, l)))


def beta_diag(cache: OrbitCache, n: int, l: int) -> float:
    return beta(cache, n, n, l)


def theta(cache: OrbitCache, n: int, f=None) -> float:
    """||S_n T^n x - f|| for a fixed point f."""
    sc = cache.scenario
    f = sc.fixed_point if f is None else np.asarray(f, dtype=float)
    if sc.space.norm(sc.operator.apply(f) - f) > TOL:
        raise DomainError("f is not a fixed point")
    return float(cache.norm(cesaro(cache, n, n) - f))


# ---------------------------------------------------------------------------
# sampled invariants


def sample_domain(scenario: Scenario, count: int, rng: np.random.Generator) -> np.ndarray:
    """Random points of the ball ||.|| <= b/2 (Euclidean sampling, rescaled to the norm)."""
    dim = scenario.space.dim
    v = rng.normal(size=(count, dim))
    r = rng.uniform(0, 1, size=(count, 1)) ** (1 / dim)
    v = v / scenario.space.norm(v)[:, None] * r
    return v * float(scenario.b) / 2


def check_nonexpansive(scenario: Scenario, count: int = 1000, seed: int = 0) -> float:
    """Largest ||Tx - Ty|| - ||x - y|| over sampled pairs (should be <= TOL)."""
    rng = np.random.default_rng(seed)
    xs, ys = sample_domain(scenario, count, rng), sample_domain(scenario, count, rng)
    op, norm = scenario.operator, scenario.space.norm
    return float(np.max(norm(op.apply(xs) - op.apply(ys)) - norm(xs - ys)))


def check_wittmann(scenario: Scenario, count: int = 1000, seed: int = 0) -> float:
    """Largest ||Tx + Ty|| - ||x + y|| over sampled pairs, and ||T0||."""
    rng = np.random.default_rng(seed)
    xs, ys = sample_domain(scenario, count, rng), sample_domain(scenario, count, rng)
    op, norm = scenario.operator, scenario.space.norm
    zero = float(norm(op.apply(np.zeros(scenario.space.dim))))
    return max(zero, float(np.max(norm(op.apply(xs) + op.apply(ys)) - norm(xs + ys))))


def check_domain(cache: OrbitCache, upto: int) -> float:
    """Largest ||T^n x|| - b/2 along the orbit."""
    pts = cache.points(upto)
    return float(np.max(cache.norm(pts)) - float(cache.scenario.b) / 2)


def consecutive_mean_gap(cache: OrbitCache, upto: int) -> float:
    """Largest ||y_{l+1} - y_l|| - 2b/l for y_l = S_l T^l x - f, 1 <= l < upto."""
    ls = np.arange(1, upto)
    y0 = cesaro_batch(cache, ls, ls)
    y1 = cesaro_batch(cache, ls + 1, ls + 1)
    return float(np.max(cache.norm(y1 - y0) - 2 * float(cache.scenario.b) / ls))
