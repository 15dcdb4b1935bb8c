"""Brute-force metastability witnesses and sampled proof inequalities."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .counterfn import Const, CounterFn, Identity, Zero
from .dynamics import (
    TOL,
    OrbitCache,
    Scenario,
    alpha_table,
    cesaro_batch,
    mean_from,
)
from .gamma import GammaContext, gamma_diag_at_most, gamma_diag_upper
from .numerics import DomainError, ResourceError, compare, mul
from .rates import RateResult

TARGETS = ("alpha", "psi", "phi", "simultaneous")
SAMPLE_LIMIT = 10


@dataclass(frozen=True)
class WitnessQuery:
    target: str
    eps: Fraction
    g: CounterFn
    h: CounterFn
    cap: int

    def __post_init__(self):
        object.__setattr__(self, "eps", Fraction(self.eps))
        if self.target not in TARGETS:
            raise DomainError(f"unknown target {self.target!r}; expected one of {TARGETS}")
        if self.eps <= 0:
            raise DomainError("eps must be positive")
        if self.cap < 0:
            raise DomainError("cap must be natural")


@dataclass
class WitnessReport:
    target: str
    found: bool
    minimal_N: Optional[int]
    checked_up_to: int
    violations: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "target": self.target,
            "found": self.found,
            "minimal_N": self.minimal_N,
            "checked_up_to": self.checked_up_to,
            "violations_sample": self.violations[:SAMPLE_LIMIT],
        }


def gamma_context(scenario: Scenario) -> GammaContext:
    return GammaContext(scenario.b, scenario.modulus, scenario.c, scenario.q)


# ---------------------------------------------------------------------------
# predicates at a single N; each returns None or a violating tuple


def _required_index(target: str, top: int, hmax: int) -> int:
    if target == "alpha":
        return top + hmax
    if target == "psi":
        return 2 * top
    return max(2 * top, top + hmax)


def _worst(values: np.ndarray, names: tuple, offsets: tuple):
    flat = int(np.argmax(values))
    idx = np.unravel_index(flat, values.shape)
    tup = {name: int(i) + off for name, i, off in zip(names, idx, offsets)}
    return float(values[idx]), tup


def _check_at(cache: OrbitCache, q: WitnessQuery, N: int):
    top = N + q.g.eval(N)
    hmax = q.h.eval(N)
    need = _required_index(q.target, top, hmax)
    if need > cache.cap:
        raise ResourceError(f"N = {N} needs orbit index {need} beyond the cap {cache.cap}")
    bound = float(q.eps) + TOL
    norm = cache.norm
    op = cache.scenario.operator
    ns = np.arange(N, top + 1)
    ks = np.arange(hmax + 1)

    if q.target == "alpha":
        a = alpha_table(cache, top, hmax)[N: top + 1]
        spread = a.max(axis=0) - a.min(axis=0)
        i = int(np.argmax(spread))
        value = float(spread[i])
        tup = {"m": N + int(np.argmax(a[:, i])), "n": N + int(np.argmin(a[:, i])), "i": i}
    else:
        diag = mean_from(cache, ns, ns)  # S_n T^n x
        values = []
        if q.target in ("phi", "simultaneous"):
            shifted = mean_from(cache, ns[:, None], ks[None, :])  # S_n T^k x
            d = norm(diag[:, None, None, :] - shifted[None, :, :, :])  # [m, n, k]
            values.append((d, ("m", "n", "k"), (N, N, 0)))
        if q.target in ("psi", "simultaneous"):
            pts = diag
            acc = np.empty((len(ns), hmax + 1))
            for l in range(hmax + 1):
                acc[:, l] = norm(pts - diag)
                pts = op.apply(pts)
            values.append((acc, ("n", "l"), (N, 0)))
        if q.target == "simultaneous":
            base = mean_from(cache, ns[:, None], ks[None, :])  # [n, k]
            pts = base
            acc = np.empty((len(ns), hmax + 1, hmax + 1))
            for l in range(hmax + 1):
                acc[:, :, l] = norm(pts - base)
                pts = op.apply(pts)
            values.append((acc, ("n", "k", "l"), (N, 0, 0)))
        worst = [_worst(v, names, offs) for v, names, offs in values]
        value, tup = max(worst, key=lambda w: w[0])
    if value < bound:
        return None
    return {"N": N, **tup, "value": value}


def _scan(cache: OrbitCache, q: WitnessQuery, lo: int, hi: int):
    """First passing N in [lo, hi], the violations before it, and any error hit."""
    violations = []
    for N in range(lo, hi + 1):
        try:
            v = _check_at(cache, q, N)
        except ResourceError as exc:
            return None, violations, exc
        if v is None:
            return N, violations, None
        violations.append(v)
    return None, violations, None


def find_witness(scenario: Scenario, query: WitnessQuery, cache: OrbitCache | None = None,
                 partitions: int = 1, workers: int = 1) -> WitnessReport:
    """Least N <= cap at which the target statement holds.

    With ``partitions`` > 1 the range is split into chunks that are scanned
    independently (optionally on threads) and reduced to the minimum.
    """
    cache = cache or OrbitCache(scenario)
    if query.cap > cache.cap:
        raise DomainError("query cap exceeds the orbit cap")
    edges = np.linspace(0, query.cap + 1, max(1, partitions) + 1).astype(int)
    chunks = [(int(a), int(b) - 1) for a, b in zip(edges[:-1], edges[1:]) if b > a]
    if len(chunks) == 1:
        parts = [_scan(cache, query, *chunks[0])]
    else:
        # fill the shared cache up front so workers only read it
        try:
            cache.ensure(cache.cap)
        except ResourceError:
            pass
        with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
            parts = list(pool.map(lambda c: _scan(cache, query, *c), chunks))
    hit, viol = None, []
    for found_at, v, err in parts:
        viol.extend(v)
        if found_at is not None:
            hit = found_at
            break
        if err is not None:
            raise err
    if hit is None:
        return WitnessReport(query.target, False, None, query.cap, viol)
    return WitnessReport(query.target, True, hit, hit, [v for v in viol if v["N"] < hit])


def assert_witness_dominated(report: WitnessReport, rate) -> bool:
    """minimal_N <= rate; a RateResult without exact value contributes its lower bound."""
    if not report.found:
        raise DomainError("no witness was found")
    if isinstance(rate, RateResult):
        bound = rate.bound
    else:
        bound = int(rate)
    return report.minimal_N <= bound


# ---------------------------------------------------------------------------
# proof inequalities


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst_margin: float
    instances: int
    violations: list = field(default_factory=list)
    skipped: bool = False

    def to_json(self) -> dict:
        return {"check": self.name, "passed": self.passed, "skipped": self.skipped,
                "worst_margin": self.worst_margin, "instances": self.instances,
                "violations_sample": self.violations[:SAMPLE_LIMIT]}


def _result(name, margins, tuples):
    margins = np.asarray(margins, dtype=float).ravel()
    bad = [dict(t, margin=float(m)) for t, m in zip(tuples, margins) if m < -TOL]
    worst = float(margins.min()) if margins.size else 0.0
    return CheckResult(name, not bad, worst, int(margins.size), bad)


class GammaBound:
    """Decides gamma(t) <= bound for the implemented gamma or a corrupted variant.

    ``corrupt`` may be None, "scale3" (3 * gamma) or "identity" (t -> t).
    """

    def __init__(self, ctx: GammaContext, corrupt: str | None = None):
        if corrupt not in (None, "scale3", "identity"):
            raise DomainError(f"unknown corruption {corrupt!r}")
        self.ctx = ctx
        self.corrupt = corrupt

    def upper(self, t: Fraction):
        if self.corrupt == "identity":
            return t
        u = gamma_diag_upper(self.ctx, t)
        return mul(u, 3) if self.corrupt == "scale3" else u

    def at_most(self, t: Fraction, bound: Fraction) -> bool:
        if bound < 0:
            return t == 0
        if self.corrupt == "identity":
            return t <= bound
        if self.corrupt == "scale3":
            if compare(self.upper(t), bound) <= 0:
                return True
            return gamma_diag_at_most(self.ctx, t, bound / 3)
        return gamma_diag_at_most(self.ctx, t, bound)


def _margin(gb: GammaBound, t: float, rhs: float) -> float:
    """rhs - gamma(t), estimated from the upper bound; its sign against -TOL is exact."""
    t = Fraction(max(t, 0.0))
    ok = gb.at_most(t, Fraction(rhs) + Fraction(TOL))
    m = rhs - float(gb.upper(t))
    return max(m, -TOL) if ok else min(m, -2 * TOL)


def check_nonlinearity(scenario: Scenario, cache: OrbitCache, samples: int = 1000,
                       max_points: int = 8, pool: int = 200, seed: int = 0,
                       corrupt: str | None = None) -> CheckResult:
    """gamma(||T(sum l_i x_i) - sum l_i T x_i||) <= max_ij(||x_i - x_j|| - ||T x_i - T x_j||)."""
    rng = np.random.default_rng(seed)
    gb = GammaBound(gamma_context(scenario), corrupt)
    orbit = cache.points(pool)
    op, norm = scenario.operator, cache.norm
    margins, tuples = [], []
    for s in range(samples):
        n = int(rng.integers(1, max_points + 1))
        idx = rng.choice(len(orbit), size=n, replace=False)
        lam = rng.dirichlet(np.ones(n))
        xs = orbit[idx]
        txs = op.apply(xs)
        t = float(norm(op.apply(lam @ xs) - lam @ txs))
        rhs = float(np.max(norm(xs[:, None] - xs[None]) - norm(txs[:, None] - txs[None])))
        margins.append(_margin(gb, t, rhs))
        tuples.append({"sample": s, "points": [int(i) for i in idx]})
    return _result("nonlinearity", margins, tuples)


def _beta_grid(cache: OrbitCache, m_max: int, n_max: int, l_max: int) -> np.ndarray:
    """b[m, n, l] = beta^l_{m,n} for 1 <= m <= m_max, 1 <= n <= n_max (index 0 unused)."""
    op, norm = cache.scenario.operator, cache.norm
    ms = np.arange(1, m_max + 1)[:, None]
    ns = np.arange(1, n_max + 1)[None, :]
    out = np.zeros((m_max + 1, n_max + 1, l_max + 1))
    mid = (cesaro_batch(cache, ms, ms) + cesaro_batch(cache, ns, ns)) / 2
    pts = mid
    for l in range(l_max + 1):
        left = (cesaro_batch(cache, ms, l + ms) + cesaro_batch(cache, ns, l + ns)) / 2
        out[1:, 1:, l] = norm(left - pts)
        pts = op.apply(pts)
    return out


def check_beta_bound(scenario: Scenario, cache: OrbitCache, m_max: int = 40, n_max: int = 40,
                     l_max: int = 20, corrupt: str | None = None) -> CheckResult:
    """gamma(beta^l_{m,n}) <= max{alpha^p_k - alpha^p_{l+k} : min{m,n} <= k < 2max{m,n} > p}."""
    gb = GammaBound(gamma_context(scenario), corrupt)
    top = 2 * max(m_max, n_max)
    a = alpha_table(cache, top + l_max, top)
    betas = _beta_grid(cache, m_max, n_max, l_max)
    margins, tuples = [], []
    for l in range(l_max + 1):
        diff = a[:top, :top] - a[l: l + top, :top]  # [k, p]
        colmax = np.maximum.accumulate(diff, axis=1)  # max over p' <= p
        for hi in range(1, max(m_max, n_max) + 1):
            c = colmax[: 2 * hi, 2 * hi - 1]
            suffix = np.maximum.accumulate(c[::-1])[::-1]  # max over k' >= k
            for lo in range(1, hi + 1):
                rhs = float(suffix[lo])
                pairs = {(lo, hi), (hi, lo)}
                for m, n in pairs:
                    if m <= m_max and n <= n_max:
                        margins.append(_margin(gb, float(betas[m, n, l]), rhs))
                        tuples.append({"m": m, "n": n, "l": l})
    return _result("beta_bound", margins, tuples)


def check_theta_recursion(scenario: Scenario, cache: OrbitCache, m_max: int = 40,
                          n_max: int = 40) -> CheckResult:
    """theta_{m+n} <= theta_m + (m-1)/(m+n) ||x-f|| + 1/(m+n) sum_{i<m+n} beta_m^{n+i}."""
    op, norm = scenario.operator, cache.norm
    f = scenario.fixed_point
    xf = float(norm(scenario.x - f))
    l_top = n_max + m_max + n_max
    all_n = np.arange(1, m_max + n_max + 1)
    th = np.zeros(m_max + n_max + 1)
    th[1:] = norm(cesaro_batch(cache, all_n, all_n) - f)
    margins, tuples = [], []
    for m in range(1, m_max + 1):
        base = cesaro_batch(cache, np.array(m), np.array(m))
        pts = base
        bl = np.empty(l_top + 1)
        for l in range(l_top + 1):
            bl[l] = float(norm(cesaro_batch(cache, np.array(m), np.array(l + m)) - pts))
            pts = op.apply(pts)
        for n in range(0, n_max + 1):
            s = m + n
            rhs = th[m] + (m - 1) / s * xf + bl[n: n + s].sum() / s
            margins.append(rhs - th[s])
            tuples.append({"m": m, "n": n})
    return _result("theta_recursion", margins, tuples)


def check_hilbert_square(scenario: Scenario, cache: OrbitCache, m_max: int = 40,
                         k_max: int = 40, i_max: int = 20) -> CheckResult:
    """(alpha^i_m)^2 - (alpha^i_{m+k})^2 <= 4(||T^m x||^2 - ||T^{m+k+i} x||^2)."""
    if not (scenario.space.euclidean and scenario.wittmann):
        return CheckResult("hilbert_square", True, 0.0, 0, skipped=True)
    a = alpha_table(cache, m_max + k_max, i_max)
    nrm = cache.norm(cache.points(m_max + k_max + i_max)) ** 2
    margins, tuples = [], []
    for m in range(m_max + 1):
        for k in range(k_max + 1):
            lhs = a[m] ** 2 - a[m + k] ** 2
            rhs = 4 * (nrm[m] - nrm[m + k + np.arange(i_max + 1)])
            margins.extend((rhs - lhs).tolist())
            tuples.extend({"m": m, "k": k, "i": i} for i in range(i_max + 1))
    return _result("hilbert_square", margins, tuples)


def check_subsequence(scenario: Scenario, cache: OrbitCache, n_max: int = 40,
                      i_max: int = 20, spread: int = 200) -> CheckResult:
    """Under M >= N+g(N) and ||T^M x - T^N x|| < eps/2: |alpha^i_m - alpha^i_n| < eps on [N, N+g(N)].

    Pairs (M, N) come from the orbit; eps is chosen just above 2||T^M x - T^N x||.
    """
    gs = (Identity(), Const(3), Zero())
    top = 2 * n_max + 3 + spread
    a = alpha_table(cache, top, i_max)
    orbit = cache.points(top)
    norm = cache.norm
    margins, tuples = [], []
    for g in gs:
        for N in range(n_max + 1):
            end = N + g.eval(N)
            Ms = np.arange(end, end + spread + 1, 20)
            d = norm(orbit[Ms] - orbit[N])
            for M, dist in zip(Ms, d):
                eps = 2 * float(dist) * (1 + 1e-6) + 1e-12
                block = a[N: end + 1]
                worst = float(np.max(block.max(axis=0) - block.min(axis=0)))
                margins.append(eps - worst)
                tuples.append({"g": g.dsl(), "N": N, "M": int(M), "eps": eps})
    return _result("subsequence", margins, tuples)


def check_proof_inequalities(scenario: Scenario, cache: OrbitCache | None = None,
                             m_max: int = 40, n_max: int = 40, l_max: int = 20,
                             i_max: int = 20, corrupt: str | None = None,
                             samples: int = 1000) -> dict:
    cache = cache or OrbitCache(scenario)
    checks = [
        check_nonlinearity(scenario, cache, samples=samples, corrupt=corrupt),
        check_beta_bound(scenario, cache, m_max, n_max, l_max, corrupt=corrupt),
        check_theta_recursion(scenario, cache, m_max, n_max),
        check_hilbert_square(scenario, cache, m_max, n_max, i_max),
        check_subsequence(scenario, cache, n_max, i_max),
    ]
    return {c.name: c for c in checks}
