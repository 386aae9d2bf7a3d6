import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from treethin.treekit import (
    InvalidSpec,
    DepthError,
    Region,
    TreeSpec,
    ball,
    binary_spec,
    boundary,
    build_tree,
    full_region,
    load_tree_spec,
    tree_from_json,
    validate_degree_bounds,
)

from conftest import small_specs


def test_binary_counts():
    assert build_tree(binary_spec(2)).n == 10
    assert build_tree(binary_spec(0)).n == 1
    t = build_tree(binary_spec(5))
    assert len(ball(t, 5)) == 94
    assert len(ball(t, 2)) == 10
    assert ball(t, 0).vertices == (0,)


def test_boundary_examples(binary):
    t = binary(4)
    assert boundary(ball(t, 0)).vertices == (1, 2, 3)
    assert len(boundary(ball(t, 1))) == 6
    assert len(boundary(full_region(t))) == 0


def test_seeded_random_is_reproducible():
    spec = TreeSpec(kind="seeded_random", depth=3, root_children=3,
                    d_min_children=2, d_max_children=3, seed=7)
    a, b = build_tree(spec), build_tree(spec)
    assert a.parent == b.parent and a.depth_of == b.depth_of


def test_deeper_random_tree_extends_shallower():
    spec = TreeSpec(kind="seeded_random", depth=3, root_children=3,
                    d_min_children=2, d_max_children=4, seed=99)
    small, big = build_tree(spec), build_tree(spec.with_depth(5))
    assert big.parent[:small.n] == small.parent


def test_degree_bounds():
    assert validate_degree_bounds(build_tree(binary_spec(4))) == (2, 2, True)
    path = build_tree(TreeSpec(kind="regular", depth=4, root_children=1, children=1))
    assert validate_degree_bounds(path) == (1, 1, False)
    t = build_tree(TreeSpec(kind="seeded_random", depth=5, root_children=3,
                            d_min_children=2, d_max_children=4, seed=3))
    lo, hi, ok = validate_degree_bounds(t)
    assert 2 <= lo <= hi <= 4 and ok


@pytest.mark.parametrize("bad", [
    dict(kind="regular", depth=2),
    dict(kind="regular", depth=-1, children=2),
    dict(kind="seeded_random", depth=2, d_min_children=3, d_max_children=2),
    dict(kind="by_level", depth=2, children_per_level=[]),
    dict(kind="nonsense", depth=2),
    dict(kind="regular", depth=2, children=2, colour="red"),
])
def test_invalid_specs(bad):
    with pytest.raises(InvalidSpec):
        build_tree(TreeSpec.from_dict(bad))


def test_ball_beyond_depth(binary):
    with pytest.raises(DepthError):
        ball(binary(2), 3)


def test_json_round_trip(tmp_path, binary):
    t = binary(3)
    doc = json.loads(json.dumps(t.to_json()))
    assert set(doc) == {"n", "parent", "depth"}
    back = tree_from_json(doc)
    assert back.parent == t.parent and back.depth_of == t.depth_of
    spec = binary_spec(3).to_dict()
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(spec))
    assert load_tree_spec(path) == binary_spec(3)


@given(small_specs())
def test_structural_invariants(spec):
    t = build_tree(spec)
    assert t.n == len(t.edges()) + 1
    assert t.depth == spec.depth
    assert all(t.depth_of[v] <= t.depth_of[v + 1] for v in range(t.n - 1))
    for v in range(t.n):
        for c in t.children[v]:
            assert c > v and t.parent[c] == v and t.depth_of[c] == t.depth_of[v] + 1
    assert t.n <= spec.max_vertices()


@given(small_specs(), st.data())
def test_ball_boundary_relations(spec, data):
    t = build_tree(spec)
    r = data.draw(st.integers(0, t.depth))
    inner = ball(t, r)
    assert inner.issubset(ball(t, min(r + 1, t.depth)))
    if r < t.depth:
        assert boundary(inner) == ball(t, r + 1) - inner
    assert not (boundary(inner) & inner)


@given(small_specs(max_depth=3), st.data())
def test_region_set_semantics(spec, data):
    t = build_tree(spec)
    a = Region.of(t, data.draw(st.lists(st.integers(0, t.n - 1))))
    b = Region.of(t, data.draw(st.lists(st.integers(0, t.n - 1))))
    assert list(a.vertices) == sorted(set(a.vertices))
    assert (a | b).members == a.members | b.members
    assert (a - b).members == a.members - b.members
    assert (a & b).issubset(a)
