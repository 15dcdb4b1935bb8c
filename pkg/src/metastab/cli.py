"""Command-line front end: ``metastab {rate,verify,suite,table}``.

Exit status: 0 on success, 1 when a ``suite`` run records a failed check,
2 on invalid input, 3 when a resource limit is hit.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from fractions import Fraction

from .counterfn import parse_counterfn
from .dynamics import DEFAULT_CAP, OrbitCache, load_scenario
from .gamma import GammaContext
from .moduli import parse_modulus
from .numerics import DomainError, ResourceError, fmt_rational, parse_rational
from .rates import RATES, RateContext, compute_rate, parse_base
from .verify import TARGETS, WitnessQuery, check_proof_inequalities, find_witness

RATE_NAMES = ("a1", "a2", "nonincreasing") + tuple(RATES)
CSV_HEADER = ("epsilon", "rate", "value_digits", "value_preview")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _dump(doc) -> str:
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def _add_rate_params(p: argparse.ArgumentParser) -> None:
    p.add_argument("--rate", required=True, choices=RATE_NAMES)
    p.add_argument("--scenario", help="scenario file or bundled name supplying b, modulus, c, q, base")
    p.add_argument("--b", help="diameter bound (rational)")
    p.add_argument("--g", default="id", help="counterfunction g (default: id)")
    p.add_argument("--h", default="id", help="counterfunction h (default: id)")
    p.add_argument("--modulus", help="lp:P or product:lp:P (default: lp:2)")
    p.add_argument("--c", help="B-convexity constant c (default: 1)")
    p.add_argument("--q", help="B-convexity exponent q (default: 2)")
    p.add_argument("--base", help="a1, a2:dim=D or stub:K (default: a1)")
    p.add_argument("--bound-target", type=int, default=None,
                   help="on resource exhaustion report a lower bound, iterating up to this value")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="metastab", description="Rates of metastability for Cesaro means.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("rate", help="compute one rate as a JSON document")
    _add_rate_params(p)
    p.add_argument("--epsilon", required=True)

    p = sub.add_parser("verify", help="brute-force the least witness N for a statement")
    p.add_argument("--scenario", required=True)
    p.add_argument("--target", required=True, choices=TARGETS)
    p.add_argument("--epsilon", required=True)
    p.add_argument("--g", default="id")
    p.add_argument("--h", default="id")
    p.add_argument("--cap", type=int, required=True, help="largest N scanned")
    p.add_argument("--orbit-cap", type=int, default=DEFAULT_CAP)
    p.add_argument("--partitions", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("suite", help="sample the intermediate proof inequalities")
    p.add_argument("--scenario", required=True)
    p.add_argument("--m-max", type=int, default=40)
    p.add_argument("--n-max", type=int, default=40)
    p.add_argument("--l-max", type=int, default=20)
    p.add_argument("--i-max", type=int, default=20)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--corrupt", choices=("scale3", "identity"), default=None)
    p.add_argument("--orbit-cap", type=int, default=DEFAULT_CAP)

    p = sub.add_parser("table", help="one rate over a grid of epsilons, as CSV")
    _add_rate_params(p)
    p.add_argument("--epsilons", required=True, help="comma-separated rationals")
    p.add_argument("--output", default="-", help="CSV path, '-' for standard output")
    return parser


def _rate_context(args) -> RateContext:
    """Explicit flags win over scenario fields, which win over the defaults."""
    b, modulus, c, q, base = None, parse_modulus("lp:2"), Fraction(1), Fraction(2), "a1"
    if args.scenario:
        sc = load_scenario(args.scenario)
        b, modulus, c, q, base = sc.b, sc.modulus, sc.c, sc.q, sc.base
    if args.b is not None:
        b = parse_rational(args.b)
    if b is None:
        raise DomainError("--b is required without --scenario")
    if args.modulus:
        modulus = parse_modulus(args.modulus)
    if args.c is not None:
        c = parse_rational(args.c)
    if args.q is not None:
        q = parse_rational(args.q)
    if args.base:
        base = args.base
    return RateContext(GammaContext(b, modulus, c, q), parse_base(base, b))


def _compute(args, ctx: RateContext, eps: Fraction):
    g, h = parse_counterfn(args.g), parse_counterfn(args.h)
    if args.bound_target is not None and args.rate in RATES:
        fn = RATES[args.rate]
        if args.rate in ("theta", "delta"):
            return fn(ctx, eps, g, bound_target=args.bound_target)
        return fn(ctx, eps, g, h, bound_target=args.bound_target)
    return compute_rate(args.rate, ctx, eps, g, h)


def _positive_rational(text: str) -> Fraction:
    eps = parse_rational(text)
    if eps <= 0:
        raise DomainError(f"epsilon must be positive, got {text!r}")
    return eps


def cmd_rate(args, out) -> int:
    ctx = _rate_context(args)
    result = _compute(args, ctx, _positive_rational(args.epsilon))
    out.write(_dump(result.to_json()))
    return 0


def cmd_verify(args, out) -> int:
    scenario = load_scenario(args.scenario)
    query = WitnessQuery(args.target, _positive_rational(args.epsilon),
                         parse_counterfn(args.g), parse_counterfn(args.h), args.cap)
    cache = OrbitCache(scenario, cap=args.orbit_cap)
    report = find_witness(scenario, query, cache, partitions=args.partitions, workers=args.workers)
    out.write(_dump(report.to_json()))
    return 0


def cmd_suite(args, out) -> int:
    scenario = load_scenario(args.scenario)
    cache = OrbitCache(scenario, cap=args.orbit_cap)
    checks = check_proof_inequalities(scenario, cache, m_max=args.m_max, n_max=args.n_max,
                                      l_max=args.l_max, i_max=args.i_max,
                                      corrupt=args.corrupt, samples=args.samples)
    passed = all(c.passed for c in checks.values())
    out.write(_dump({"scenario": scenario.name, "corrupt": args.corrupt, "passed": passed,
                     "checks": [c.to_json() for c in checks.values()]}))
    return 0 if passed else 1


def cmd_table(args, out) -> int:
    ctx = _rate_context(args)
    grid = [_positive_rational(t) for t in args.epsilons.split(",") if t.strip()]
    if not grid:
        raise DomainError("--epsilons is empty")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for eps in grid:
        try:
            result = _compute(args, ctx, eps)
        except ResourceError as exc:
            writer.writerow([fmt_rational(eps), args.rate, "", f"resource limit: {exc}"])
            continue
        if result.exact:
            writer.writerow([fmt_rational(eps), args.rate, result.digit_count, result.preview()])
        else:
            writer.writerow([fmt_rational(eps), args.rate, "", f">= {result.lower_bound}"])
    if args.output == "-":
        out.write(buf.getvalue())
    else:
        with open(args.output, "w", newline="") as fh:
            fh.write(buf.getvalue())
        out.write(_dump({"output": args.output, "rate": args.rate, "rows": len(grid)}))
    return 0


COMMANDS = {"rate": cmd_rate, "verify": cmd_verify, "suite": cmd_suite, "table": cmd_table}


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args, out)
    except UsageError as exc:
        err.write(f"{exc}\n")
        return 2
    except ResourceError as exc:
        err.write(f"metastab: resource limit: {exc}\n")
        return 3
    except (DomainError, ValueError, KeyError, OSError) as exc:
        err.write(f"metastab: invalid input: {exc}\n")
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
