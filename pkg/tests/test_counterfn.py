from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from metastab.counterfn import (
    Add,
    CeilScale,
    Compose,
    Const,
    EpsIterate,
    EvaluationError,
    External,
    Identity,
    Max,
    Mul,
    TildeIterate,
    Zero,
    double,
    eps_iterate,
    monotone_envelope,
    parse_counterfn,
    tilde_iterate,
)
from metastab.numerics import DomainError, ResourceError


def naive(text, n):
    """Independent evaluator of the command-line grammar via Python lambdas."""
    import math
    import re

    src = text
    src = re.sub(r"const:(\d+)", r"(lambda n: \1)", src)
    src = re.sub(r"scale:(\d+)/(\d+)", r"(lambda n: -(-\1*n//\2))", src)
    src = src.replace("id", "(lambda n: n)").replace("zero", "(lambda n: 0)")
    env = {
        "add": lambda f, g: lambda n: f(n) + g(n),
        "mul": lambda f, g: lambda n: f(n) * g(n),
        "max": lambda f, g: lambda n: max(f(n), g(n)),
        "compose": lambda f, g: lambda n: f(g(n)),
        "math": math,
    }
    return eval(src, env)(n)


leaves = st.one_of(
    st.just("id"), st.just("zero"),
    st.integers(0, 20).map(lambda k: f"const:{k}"),
    st.tuples(st.integers(0, 9), st.integers(1, 9)).map(lambda t: f"scale:{t[0]}/{t[1]}"),
)
exprs = st.recursive(
    leaves,
    lambda inner: st.tuples(st.sampled_from(["add", "mul", "max", "compose"]), inner, inner)
    .map(lambda t: f"{t[0]}({t[1]},{t[2]})"),
    max_leaves=6,
)


def test_eval_examples():
    assert Identity().eval(5) == 5
    assert Add(Identity(), Const(2)).eval(7) == 9
    assert CeilScale(8, 1).eval(3) == 24
    assert CeilScale(7, 2).eval(3) == 11


@given(exprs, st.integers(0, 200))
def test_parser_matches_independent_evaluator(text, n):
    f = parse_counterfn(text)
    assert f.eval(n) == naive(text, n)
    assert f.dsl() == text
    assert parse_counterfn(f.dsl()) == f


@given(exprs)
def test_structural_monotone_flag_matches_samples(text):
    f = parse_counterfn(text)
    vals = [f.eval(n) for n in range(101)]
    assert f.monotone
    assert vals == sorted(vals)


@pytest.mark.parametrize("text", ["", "foo", "add(id)", "add(id,id", "const:-1", "scale:1", "scale:1/0",
                                  "id,", "add(id,id)x", "const:a"])
def test_parser_rejects(text):
    with pytest.raises(DomainError):
        parse_counterfn(text)


def test_external_domain_and_envelope():
    t = External((3, 1, 2))
    assert not t.monotone
    with pytest.raises(EvaluationError) as info:
        t.eval(3)
    assert info.value.argument == 3
    env = monotone_envelope(t)
    assert [env.eval(n) for n in range(3)] == [3, 3, 3]
    assert monotone_envelope(env) is env
    mono = Add(Identity(), Const(1))
    assert monotone_envelope(mono) is mono


@given(st.lists(st.integers(0, 50), min_size=1, max_size=30))
def test_envelope_is_running_max_and_idempotent(values):
    f = External(tuple(values))
    env = monotone_envelope(f)
    want = [max(values[: n + 1]) for n in range(len(values))]
    assert [env.eval(n) for n in reversed(range(len(values)))][::-1] == want
    from metastab.counterfn import Envelope

    twice = Envelope(env)
    assert [twice.eval(n) for n in range(len(values))] == want


def test_envelope_scan_limit():
    from metastab.counterfn import ENVELOPE_SCAN_LIMIT, Envelope

    with pytest.raises(ResourceError):
        Envelope(External((1, 0))).eval(ENVELOPE_SCAN_LIMIT + 1)


def test_tilde_examples():
    assert tilde_iterate(Identity(), 3, 1) == 8
    assert tilde_iterate(Const(5), 0, 11) == 11
    assert tilde_iterate(Zero(), 10**6, 42) == 42
    assert tilde_iterate(Zero(), 10**30, 42) == 42
    with pytest.raises(ResourceError):
        tilde_iterate(Const(1), 10**30, 0)


@given(exprs, st.integers(0, 6), st.integers(0, 6), st.integers(0, 30))
def test_tilde_composition_law(text, i, j, n):
    f = parse_counterfn(text)
    try:
        assert tilde_iterate(f, i + j, n) == tilde_iterate(f, j, tilde_iterate(f, i, n))
    except ResourceError:
        pass


def test_eps_iterate_examples():
    sixteen = CeilScale(16, 1)
    assert eps_iterate(sixteen, 0, 0) == 1
    assert eps_iterate(sixteen, 2, 1) == 256
    assert eps_iterate(sixteen, 5, 0) == 1048576
    assert EpsIterate(sixteen, 5).eval(0) == 1048576


def test_eps_iterate_growth_guard_fails_fast():
    with pytest.raises(ResourceError):
        eps_iterate(CeilScale(16, 1), 10**7, 1, growth=Fraction(16))


def test_iterate_nodes_and_double():
    f = Add(Identity(), Const(1))
    assert TildeIterate(f, 2).eval(1) == tilde_iterate(f, 2, 1)
    assert double(f).eval(4) == 10
    assert Mul(Identity(), Identity()).eval(9) == 81
    assert Max(Const(3), Identity()).eval(2) == 3
    assert Compose(CeilScale(3, 2), Identity()).eval(3) == 5
