from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from treethin.field import (
    Configuration,
    DomainError,
    bernoulli_weight,
    clusters,
    flip_region,
    ground_state,
    sample_bernoulli,
    thin,
)
from treethin.treekit import Region, TreeSpec, ball, build_tree, full_region

from conftest import probabilities, small_specs


def configs(max_depth=4):
    """A tree together with a configuration on its full stored region."""
    @st.composite
    def build(draw):
        tree = build_tree(draw(small_specs(max_depth)))
        bits = draw(st.lists(st.integers(0, 1), min_size=tree.n, max_size=tree.n))
        return Configuration(full_region(tree), tuple(bits))
    return build()


def test_sampling_mean_and_determinism():
    tree = build_tree(TreeSpec(kind="regular", depth=16, root_children=3, children=2))
    region = Region.of(tree, range(100_000))
    c = sample_bernoulli(tree, region, 0.7, seed=42)
    assert abs(sum(c.bits) / len(c.bits) - 0.7) < 0.01
    assert sample_bernoulli(tree, region, 0.7, seed=42) == c
    small = Region.of(tree, range(1000))
    assert sample_bernoulli(tree, small, 0.5, 1) != sample_bernoulli(tree, small, 0.5, 2)
    with pytest.raises(ValueError):
        sample_bernoulli(tree, small, 1.0, 1)


def test_thin_examples(binary):
    t = binary(3)
    dom = full_region(t)
    zero = Configuration.zeros(dom)
    assert thin(zero, "all_zero") == zero
    root_only = zero.with_values({0: 1})
    assert thin(root_only, "all_zero") == zero
    pair = zero.with_values({0: 1, 1: 1})
    assert thin(pair, "all_zero") == pair


def test_thin_exterior_rules(binary):
    t = binary(2)
    dom = full_region(t)
    leaf = t.level(2)[0]
    c = Configuration.zeros(dom).with_values({leaf: 1})
    assert thin(c, "all_zero")[leaf] == 0
    assert thin(c, "all_one")[leaf] == 1       # unseen children are occupied
    masked = thin(c, "mask")
    assert masked.domain == ball(t, 1)
    with pytest.raises(DomainError):
        masked[leaf]


def test_thin_needs_rooted_domain(binary):
    t = binary(2)
    with pytest.raises(DomainError):
        thin(Configuration.zeros(Region.of(t, [1, 4])), "all_zero")


def test_ground_states(binary):
    t = binary(3)
    b2 = ball(t, 2)
    w0, w1 = ground_state(t, b2, 0), ground_state(t, b2, 1)
    assert w0[0] == 0 and w1[0] == 1
    assert flip_region(w0, b2) == w1
    interior = Region.of(t, [0, 1, 4, 5])
    assert flip_region(w0, interior).restrict(interior) == w1.restrict(interior)


def test_weights():
    t = build_tree(TreeSpec(kind="regular", depth=2, root_children=3, children=2))
    b1 = ball(t, 1)
    p = Fraction(1, 3)
    assert bernoulli_weight(Configuration.ones(b1), Region.of(t, [0, 1, 2]),
                            Fraction(1, 2)).value == Fraction(1, 8)
    assert bernoulli_weight(ground_state(t, b1, 0), b1, p).value == (1 - p) * p ** 3
    assert bernoulli_weight(Configuration.zeros(b1), Region.of(t, []), p).value == 1


def test_cluster_examples(binary):
    t = binary(2)
    dom = full_region(t)
    assert clusters(Configuration.zeros(dom)) == []
    assert clusters(Configuration.zeros(dom).with_values({0: 1, 2: 1})) == [(0, 2)]
    w1 = ground_state(t, dom, 1)
    assert len(clusters(w1)) == 7 and all(len(c) == 1 for c in clusters(w1))


def test_json_round_trip(binary):
    t = binary(2)
    c = sample_bernoulli(t, full_region(t), 0.5, 3)
    assert Configuration.from_json(t, c.to_json()) == c


@given(configs())
def test_thin_idempotent_and_decreasing(c):
    for rule in ("all_zero", "all_one"):
        out = thin(c, rule)
        assert out.domain == c.domain
        assert thin(out, rule) == out
        assert all(b <= c[v] for v, b in out.items())


@given(configs())
def test_thin_keeps_exactly_the_large_clusters(c):
    assert clusters(thin(c, "all_zero")) == [k for k in clusters(c) if len(k) >= 2]


@given(configs())
def test_mask_agrees_with_both_rules_where_defined(c):
    masked = thin(c, "mask")
    for rule in ("all_zero", "all_one"):
        full = thin(c, rule)
        assert all(full[v] == b for v, b in masked.items())


@given(configs(3), probabilities, st.data())
def test_weight_multiplicative(c, p, data):
    verts = list(c.domain.vertices)
    chosen = data.draw(st.sets(st.sampled_from(verts)))
    a = Region.of(c.tree, chosen)
    b = c.domain - a
    prod = bernoulli_weight(c, a, p).value * bernoulli_weight(c, b, p).value
    assert prod == bernoulli_weight(c, c.domain, p).value
    assert bernoulli_weight(c, c.domain, p, "log").rel_err(bernoulli_weight(c, c.domain, p)) < 1e-12


@given(configs(3), st.data())
def test_flip_involution(c, data):
    region = Region.of(c.tree, data.draw(st.sets(st.sampled_from(list(c.domain.vertices)))))
    once = flip_region(c, region)
    assert flip_region(once, region) == c
    assert sum(once.bits) - sum(c.bits) == sum(1 - 2 * c[v] for v in region.vertices)
