from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from treethin.cutsets import (
    InvalidCutset,
    MergeError,
    check_cutset_bounds,
    convergence_threshold,
    count_connected_subgraphs,
    entropy_bound,
    enumerate_bruteforce,
    enumerate_pushout,
    initial_cutset,
    is_type_changing,
    make_cutset,
    merge_at,
    peierls_bound,
    peierls_sum_exact,
    pushout,
    pushout_bookkeeping,
    reduce_to_initial,
    replay_pushouts,
)
from treethin.field import flip_region, ground_state
from treethin.hardcore import nu_marginal_dp
from treethin.rng import SplitMix64
from treethin.selftest import connected_subgraph_poly
from treethin.treekit import BudgetExceeded, DepthError, Region, TreeSpec, build_tree


def test_initial_cutsets(binary):
    t = binary(4)
    c0, c1 = initial_cutset(t, 0), initial_cutset(t, 1)
    assert (c0.interior_size, len(c0.edges), c0.n_repl) == (1, 3, 1)
    assert (c1.interior_size, len(c1.edges), c1.n_repl) == (4, 6, 2)
    assert c0.n_pushouts == c1.n_pushouts == 0
    assert check_cutset_bounds(c1, 2, 2, 0)


def test_initial_type0_is_root_on_any_tree():
    t = build_tree(TreeSpec(kind="seeded_random", depth=4, root_children=3,
                            d_min_children=2, d_max_children=4, seed=8))
    assert initial_cutset(t, 0).key == (0,)


def test_single_pushout(binary):
    t = binary(5)
    c = pushout(initial_cutset(t, 0), (0, 1))
    assert (c.interior_size, len(c.edges), c.n_repl) == (4, 6, 2)
    assert c.n_pushouts == 1
    assert check_cutset_bounds(c, 2, 2, 1)
    assert pushout(c, (0, 1)) is c            # (0, 1) is no longer a cutset edge
    assert pushout(c, (5, 11)) is c


def test_pushout_depth_guard(binary):
    t = binary(2)
    with pytest.raises(DepthError):
        pushout(initial_cutset(t, 0), (0, 1))


def test_merge(binary):
    t = binary(5)
    c = pushout(initial_cutset(t, 0), (0, 2))
    assert merge_at(c, 2) == initial_cutset(t, 0)
    with pytest.raises(MergeError):
        merge_at(initial_cutset(t, 0), 0)
    with pytest.raises(MergeError):
        merge_at(initial_cutset(t, 1), 1)


def test_reduce_examples(binary):
    t = binary(7)
    assert reduce_to_initial(initial_cutset(t, 1)) == []
    one = pushout(initial_cutset(t, 1), (1, 4))
    assert len(reduce_to_initial(one)) == 1


def test_invalid_interiors(binary):
    t = binary(4)
    assert not is_type_changing(t, 0, {0, 1})       # 1 is an odd-depth source
    assert not is_type_changing(t, 0, {1, 4, 5})    # root missing
    with pytest.raises(InvalidCutset):
        make_cutset(t, 1, {0})


@given(st.integers(0, 2 ** 64 - 1), st.integers(0, 1), st.integers(0, 5))
def test_random_pushout_sequences_reduce(seed, ty, k):
    t = build_tree(TreeSpec(kind="seeded_random", depth=2 * k + 3, root_children=3,
                            d_min_children=2, d_max_children=3, seed=seed % 1000))
    rng = SplitMix64(seed)
    cut = initial_cutset(t, ty)
    done = 0
    for _ in range(k):
        edges = [e for e in cut.edges if t.depth_of[e[1]] + 2 <= t.depth]
        if not edges:
            break
        cut = pushout(cut, edges[rng.randint(0, len(edges) - 1)])
        done += 1
    merges = reduce_to_initial(cut)
    assert len(merges) == done == cut.n_pushouts
    rebuilt = list(replay_pushouts(initial_cutset(t, ty), merges))
    assert (rebuilt[-1][2] if rebuilt else initial_cutset(t, ty)) == cut
    assert pushout_bookkeeping(cut)
    lo, hi = 2, 3
    assert check_cutset_bounds(cut, lo, hi, done)
    assert cut.interior_size == cut.interior_edge_count() + 1
    # flipping the interior turns one ground state into the other there
    interior = Region.of(t, cut.interior)
    w = ground_state(t, interior, ty)
    assert flip_region(w, interior) == ground_state(t, interior, 1 - ty)


def test_enumeration_counts(binary):
    assert enumerate_pushout(binary(6), 0, 2).counts() == {0: 1, 1: 3, 2: 15}
    assert enumerate_pushout(binary(9), 0, 3).counts()[3] == 91


def test_bruteforce_examples(binary):
    t = binary(5)
    assert enumerate_bruteforce(t, 0, 1) == [initial_cutset(t, 0)]
    assert enumerate_bruteforce(t, 1, 4) == [initial_cutset(t, 1)]
    with pytest.raises(BudgetExceeded):
        enumerate_bruteforce(t, 0, 99)


@pytest.mark.parametrize("spec", [
    TreeSpec(kind="regular", depth=7, root_children=3, children=2),
    TreeSpec(kind="by_level", depth=7, root_children=3, children_per_level=(3, 2)),
    TreeSpec(kind="seeded_random", depth=7, root_children=4, d_min_children=2, d_max_children=3, seed=21),
])
@pytest.mark.parametrize("ty", [0, 1])
def test_pushout_equals_bruteforce(spec, ty):
    t = build_tree(spec)
    limit = 11
    oracle = {c.key for c in enumerate_bruteforce(t, ty, limit)}
    found = {c.key for c in enumerate_pushout(t, ty, 4).all() if c.interior_size <= limit}
    assert found == oracle


def test_every_enumerated_cutset_passes_bounds(binary):
    t = binary(11)
    for c in enumerate_pushout(t, 0, 5).all():
        assert check_cutset_bounds(c, 2, 2, c.n_pushouts)
        assert c.n_pushouts == len(reduce_to_initial(c))


def test_connected_subgraph_counts(binary):
    t = binary(5)
    assert count_connected_subgraphs(t, 0) == 1
    assert count_connected_subgraphs(t, 1) == 3 <= entropy_bound(t, 1) == 9
    assert count_connected_subgraphs(t, 2) == 9 <= 81
    with pytest.raises(BudgetExceeded):
        count_connected_subgraphs(t, 50)


@given(st.integers(0, 10_000), st.integers(2, 3))
def test_connected_subgraphs_match_polynomial(seed, hi):
    t = build_tree(TreeSpec(kind="seeded_random", depth=5, root_children=3,
                            d_min_children=2, d_max_children=hi, seed=seed))
    poly = connected_subgraph_poly(t, 5)
    for k in range(6):
        assert count_connected_subgraphs(t, k) == poly[k] <= entropy_bound(t, k)


def test_peierls_closed_form():
    b = peierls_bound(Fraction(999, 1000), 2, 2)
    q = Fraction(1, 999)
    assert b.convergent and b.value.value == q / (1 - 729 * q) == Fraction(1, 270)
    assert abs(float(b.value) - 3.704e-3) < 1e-6
    assert not peierls_bound(Fraction(9, 10), 2, 2).convergent
    assert convergence_threshold(2, 2) == Fraction(729, 730)
    assert not peierls_bound(Fraction(729, 730), 2, 2).convergent
    assert peierls_bound(Fraction(7291, 7300), 2, 2).convergent


def test_peierls_partial_sum_and_tail():
    b = peierls_bound(Fraction(999, 1000), 2, 2, n_terms=4)
    assert b.partial.value + b.tail.value == b.value.value
    lg = peierls_bound(0.999, 2, 2, n_terms=4, mode="log")
    assert lg.value.rel_err(b.value) < 1e-12
    assert lg.tail.rel_err(b.tail) < 1e-9


def test_peierls_sum_sandwich(binary):
    t = binary(3)
    p = Fraction(999, 1000)
    total, count = peierls_sum_exact(t, 1, p)
    assert count == 8
    assert nu_marginal_dp(t, 3, p, 0, 0) <= total <= peierls_bound(p, 2, 2).value


def test_peierls_sum_half_counts_cutsets(binary):
    total, count = peierls_sum_exact(binary(3), 1, Fraction(1, 2))
    assert total.value == count
