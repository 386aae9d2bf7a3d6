import math
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from treethin.cutsets import enumerate_pushout, initial_cutset
from treethin.field import Configuration, ground_state
from treethin.hardcore import (
    adapted_probability,
    is_isolated_in_ball,
    nu_event_bruteforce,
    nu_marginal_dp,
    nu_marginals,
    nu_pattern_dp,
    nu_support_check,
    parity_sweep,
    partition_function,
    pattern_is,
    vertex_is,
)
from treethin.treekit import BudgetExceeded, DepthError, ball, build_tree

from conftest import probabilities, small_specs

HALF = Fraction(1, 2)


def test_support_examples(binary):
    t = binary(3)
    for R in (1, 2, 3):
        assert nu_support_check(t, R, Configuration.zeros(ball(t, R)))
    assert nu_support_check(t, 1, ground_state(t, ball(t, 1), 1))
    b2 = ball(t, 2)
    leaf = t.level(2)[0]
    assert not nu_support_check(t, 2, Configuration.zeros(b2).with_values({leaf: 1}))


@given(small_specs(3), st.data())
def test_support_forms_agree(spec, data):
    t = build_tree(spec)
    R = data.draw(st.integers(0, t.depth))
    n = t.ball_size(R)
    bits = data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    c = Configuration(ball(t, R), tuple(bits))
    assert nu_support_check(t, R, c) == is_isolated_in_ball(t, R, c)


@pytest.mark.parametrize("p", [Fraction(1, 3), Fraction(1, 2), Fraction(9, 10)])
def test_closed_forms(binary, p):
    t = binary(3)
    assert nu_marginal_dp(t, 1, p, 0, 0).value == 1 - p
    assert nu_marginal_dp(t, 2, p, 0, 0).value == 1 / (1 + p * (1 - p) ** 2)
    assert nu_event_bruteforce(t, 1, p, vertex_is(0, 0)).value == 1 - p


def test_frozen_values(binary):
    t = binary(3)
    assert nu_event_bruteforce(t, 2, HALF, vertex_is(0, 0)).value == Fraction(8, 9)
    assert nu_event_bruteforce(t, 2, HALF, lambda b: b[:, 0] | ~b[:, 0]).value == 1
    assert math.isclose(float(nu_marginal_dp(t, 2, 0.9, 0, 0, "log")), 0.991080, abs_tol=5e-7)


def test_ground_state_pattern_closed_form(binary):
    t = binary(3)
    p = Fraction(3, 10)
    w0 = ground_state(t, ball(t, 2), 0)
    z = partition_function(t, 2, p)
    expected = p ** 3 * (1 - p) * (1 - p) ** 6 / z.value
    assert nu_pattern_dp(t, 2, p, w0).value == expected
    assert nu_event_bruteforce(t, 2, p, pattern_is(w0)).value == expected


def test_pattern_outside_support(binary):
    t = binary(3)
    assert nu_pattern_dp(t, 3, HALF, {0: 1, 1: 1}).value == 0
    assert nu_pattern_dp(t, 3, 0.5, {0: 1, 1: 1}, "log").value == -math.inf
    assert nu_pattern_dp(t, 2, HALF, {4: 1}).value == 0


def test_errors(binary):
    t = binary(3)
    with pytest.raises(DepthError):
        nu_marginal_dp(t, 4, HALF, 0, 0)
    with pytest.raises(DepthError):
        nu_pattern_dp(t, 1, HALF, {5: 0})
    with pytest.raises(BudgetExceeded):
        nu_event_bruteforce(binary(4), 4, HALF, vertex_is(0, 0))


@given(small_specs(3), probabilities, st.data())
def test_dp_matches_bruteforce(spec, p, data):
    t = build_tree(spec)
    R = max(r for r in range(t.depth + 1) if t.ball_size(r) <= 14)
    marg = nu_marginals(t, R, p)
    logm = nu_marginals(t, R, float(p), "log")
    for v in range(t.ball_size(R)):
        assert marg[v][0].value + marg[v][1].value == 1
        bf = nu_event_bruteforce(t, R, p, vertex_is(v, 1))
        assert marg[v][1] == bf
        assert logm[v][1].rel_err(bf) < 1e-12
    n = t.ball_size(R)
    pat = {v: data.draw(st.integers(0, 1)) for v in data.draw(st.sets(st.integers(0, n - 1), max_size=4))}
    assert nu_pattern_dp(t, R, p, pat) == nu_event_bruteforce(t, R, p, pattern_is(pat))


def test_single_vertex_pattern_matches_marginal(binary):
    t = binary(4)
    p = Fraction(2, 7)
    for v in (0, 1, 5, 12):
        assert nu_pattern_dp(t, 4, p, {v: 1}) == nu_marginal_dp(t, 4, p, v, 1)


def test_parity_sweep_report(binary):
    t = binary(7)
    rep = parity_sweep(t, 0.999, [1, 2, 3, 5, 7], "log", vertices=[0])
    assert rep.columns == ["tree_id", "p", "radius", "vertex", "prob_wrong", "peierls_bound", "pass"]
    by_r = {row["radius"]: row for row in rep.rows}
    assert math.isclose(float(by_r[1]["prob_wrong"]), 0.001, rel_tol=1e-9)
    assert all(by_r[r]["pass"] for r in (2, 3, 5, 7))
    diverge = parity_sweep(t, 0.9, [3], "log", vertices=[0])
    assert diverge.rows[0]["pass"] is None


def test_parity_sweep_log_vs_exact(binary):
    t = binary(6)
    a = parity_sweep(t, Fraction(99, 100), [3, 6], "exact")
    b = parity_sweep(t, 0.99, [3, 6], "log")
    for x, y in zip(a.rows, b.rows):
        assert y["prob_wrong"].rel_err(x["prob_wrong"]) < 1e-12


def test_adapted_initial_cutset_matches_bruteforce(binary):
    t = binary(3)
    cut = initial_cutset(t, 0)
    res = adapted_probability(t, 3, HALF, cut)
    clamp = {0: 0, 1: 0, 2: 0, 3: 0}
    assert res.direct == res.decomposed == nu_event_bruteforce(t, 3, HALF, pattern_is(clamp))


def test_adapted_closure_is_whole_ball(binary):
    t = binary(3)
    p = Fraction(2, 5)
    res = adapted_probability(t, 1, p, initial_cutset(t, 0))
    z = partition_function(t, 1, p).value
    assert res.decomposed.value == (1 - p) ** 4 / z == 1 - p


@pytest.mark.parametrize("p", [Fraction(1, 2), Fraction(9, 10), Fraction(999, 1000)])
def test_adapted_decomposition_and_flip_bound(binary, p):
    t = binary(7)
    for ty, R in ((0, 7), (1, 6)):
        for cut in enumerate_pushout(t, ty, 2).all():
            res = adapted_probability(t, R, p, cut)
            assert res.direct == res.decomposed
            assert res.direct <= res.flip_bound
            logged = adapted_probability(t, R, float(p), cut, "log")
            assert logged.direct.rel_err(res.direct) < 1e-12
