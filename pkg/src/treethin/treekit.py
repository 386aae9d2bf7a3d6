"""Finite truncations of bounded-degree rooted trees.

Vertices are indexed 0..N-1 in breadth-first order with the root at 0, so a
ball around the root is always a contiguous index prefix.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .rng import SplitMix64

KINDS = ("regular", "by_level", "seeded_random")


class InvalidSpec(ValueError):
    pass


class DepthError(ValueError):
    """A query needs vertices beyond the stored truncation depth."""


class BudgetExceeded(ValueError):
    """An exhaustive enumeration would exceed its configured size limit."""


@dataclass(frozen=True)
class TreeSpec:
    kind: str
    depth: int
    root_children: int = 3
    children: int | None = None
    children_per_level: tuple[int, ...] | None = None
    d_min_children: int | None = None
    d_max_children: int | None = None
    seed: int = 0

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise InvalidSpec(f"unknown tree kind {self.kind!r}")
        if not isinstance(self.depth, int) or self.depth < 0:
            raise InvalidSpec("depth must be a non-negative integer")
        if self.root_children < 1:
            raise InvalidSpec("root_children must be positive")
        if self.kind == "regular":
            if self.children is None or self.children < 1:
                raise InvalidSpec("regular trees need a positive 'children'")
        elif self.kind == "by_level":
            if not self.children_per_level:
                raise InvalidSpec("by_level trees need 'children_per_level'")
            if any(c < 1 for c in self.children_per_level):
                raise InvalidSpec("children_per_level entries must be positive")
        else:
            lo, hi = self.d_min_children, self.d_max_children
            if lo is None or hi is None:
                raise InvalidSpec("seeded_random trees need d_min_children and d_max_children")
            if lo < 1 or lo > hi:
                raise InvalidSpec(f"need 1 <= d_min_children <= d_max_children, got {lo}, {hi}")
            if not 0 <= self.seed < 1 << 64:
                raise InvalidSpec("seed must be a 64-bit unsigned integer")

    @property
    def tree_id(self) -> str:
        """Short comma-free label used in report rows."""
        if self.kind == "regular":
            body = f"r{self.root_children}_c{self.children}"
        elif self.kind == "by_level":
            body = f"r{self.root_children}_l{'-'.join(map(str, self.children_per_level))}"
        else:
            body = f"r{self.root_children}_u{self.d_min_children}-{self.d_max_children}_s{self.seed}"
        return f"{self.kind}_{body}_d{self.depth}"

    def max_vertices(self) -> int:
        """Upper bound on the vertex count of the built tree."""
        total, level = 1, 1
        for d in range(self.depth):
            if d == 0:
                k = self.root_children
            elif self.kind == "regular":
                k = self.children
            elif self.kind == "by_level":
                k = max(self.children_per_level)
            else:
                k = self.d_max_children
            level *= k
            total += level
        return total

    def with_depth(self, depth: int) -> TreeSpec:
        return TreeSpec(**{**self.to_dict(), "depth": depth, "children_per_level": self.children_per_level})

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "root_children": self.root_children, "depth": self.depth}
        if self.kind == "regular":
            d["children"] = self.children
        elif self.kind == "by_level":
            d["children_per_level"] = list(self.children_per_level)
        else:
            d.update(d_min_children=self.d_min_children,
                     d_max_children=self.d_max_children, seed=self.seed)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> TreeSpec:
        unknown = set(d) - {"kind", "root_children", "children", "children_per_level",
                            "d_min_children", "d_max_children", "depth", "seed"}
        if unknown:
            raise InvalidSpec(f"unknown tree spec fields: {sorted(unknown)}")
        if "kind" not in d or "depth" not in d:
            raise InvalidSpec("tree spec needs 'kind' and 'depth'")
        cpl = d.get("children_per_level")
        spec = cls(
            kind=d["kind"],
            depth=d["depth"],
            root_children=d.get("root_children", 3),
            children=d.get("children"),
            children_per_level=tuple(cpl) if cpl is not None else None,
            d_min_children=d.get("d_min_children"),
            d_max_children=d.get("d_max_children"),
            seed=d.get("seed", 0),
        )
        spec.validate()
        return spec


def binary_spec(depth: int) -> TreeSpec:
    """Root with 3 children, every other internal vertex with 2."""
    return TreeSpec(kind="regular", depth=depth, root_children=3, children=2)


@dataclass(frozen=True, eq=False)
class RootedTree:
    """BFS-indexed finite tree. ``parent[0] == -1``."""

    parent: tuple[int, ...]
    children: tuple[tuple[int, ...], ...]
    depth_of: tuple[int, ...]
    level_start: tuple[int, ...]
    spec: TreeSpec | None = None

    @property
    def n(self) -> int:
        return len(self.parent)

    @property
    def depth(self) -> int:
        """Truncation depth: largest stored distance from the root."""
        return len(self.level_start) - 2

    @property
    def tree_id(self) -> str:
        return self.spec.tree_id if self.spec is not None else f"custom_n{self.n}"

    def ball_size(self, radius: int) -> int:
        if radius < 0:
            return 0
        if radius > self.depth:
            raise DepthError(f"radius {radius} exceeds stored depth {self.depth}")
        return self.level_start[radius + 1]

    def level(self, k: int) -> range:
        return range(self.level_start[k], self.level_start[k + 1])

    def neighbours(self, v: int) -> tuple[int, ...]:
        p = self.parent[v]
        return self.children[v] if p < 0 else (p,) + self.children[v]

    def edges(self) -> list[tuple[int, int]]:
        """Oriented edges <parent, child>."""
        return [(self.parent[v], v) for v in range(1, self.n)]

    def ancestor(self, v: int, steps: int) -> int:
        for _ in range(steps):
            v = self.parent[v]
            if v < 0:
                raise ValueError("walked above the root")
        return v

    def to_json(self) -> dict:
        return {"n": self.n, "parent": list(self.parent), "depth": list(self.depth_of)}


def tree_from_parents(parent: Sequence[int], spec: TreeSpec | None = None) -> RootedTree:
    """Build a tree from a BFS-ordered parent array (root has parent -1)."""
    n = len(parent)
    if n == 0 or parent[0] != -1:
        raise InvalidSpec("parent[0] must be -1 (the root)")
    kids: list[list[int]] = [[] for _ in range(n)]
    depth = [0] * n
    for v in range(1, n):
        p = parent[v]
        if not 0 <= p < v:
            raise InvalidSpec("parent array must be BFS ordered (parent index < child index)")
        kids[p].append(v)
        depth[v] = depth[p] + 1
        if depth[v] < depth[v - 1]:
            raise InvalidSpec("parent array is not in breadth-first order")
    starts = [0] * (depth[-1] + 2)
    for v in range(n - 1, -1, -1):
        starts[depth[v]] = v
    starts[-1] = n
    return RootedTree(tuple(parent), tuple(tuple(k) for k in kids), tuple(depth), tuple(starts), spec)


def tree_from_json(doc: dict) -> RootedTree:
    parent = doc["parent"]
    if doc.get("n", len(parent)) != len(parent):
        raise InvalidSpec("'n' does not match the parent array length")
    tree = tree_from_parents(parent)
    if "depth" in doc and list(doc["depth"]) != list(tree.depth_of):
        raise InvalidSpec("'depth' array inconsistent with 'parent'")
    return tree


def build_tree(spec: TreeSpec) -> RootedTree:
    """Generate the truncation of ``spec`` to ``spec.depth`` levels.

    ``by_level`` trees give depth-k vertices (k >= 1) ``children_per_level[k-1]``
    children, cycling through the list when it is shorter than the tree.
    ``seeded_random`` trees draw each non-root child count uniformly from
    [d_min_children, d_max_children], one splitmix64 draw per internal vertex in
    BFS order, so a deeper tree extends a shallower one with the same seed.
    """
    spec.validate()
    rng = SplitMix64(spec.seed) if spec.kind == "seeded_random" else None
    parent = [-1]
    frontier = [0]
    for d in range(spec.depth):
        nxt = []
        for v in frontier:
            if d == 0:
                k = spec.root_children
            elif spec.kind == "regular":
                k = spec.children
            elif spec.kind == "by_level":
                cpl = spec.children_per_level
                k = cpl[(d - 1) % len(cpl)]
            else:
                k = rng.randint(spec.d_min_children, spec.d_max_children)
            for _ in range(k):
                nxt.append(len(parent))
                parent.append(v)
        frontier = nxt
    return tree_from_parents(parent, spec)


def load_tree_spec(path) -> TreeSpec:
    with open(path) as fh:
        return TreeSpec.from_dict(json.load(fh))


@dataclass(frozen=True, eq=False)
class Region:
    """A vertex subset of a tree, stored sorted."""

    tree: RootedTree
    vertices: tuple[int, ...]
    _members: frozenset = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        members = frozenset(self.vertices)
        if len(members) != len(self.vertices):
            raise ValueError("region has duplicate vertices")
        if self.vertices and (min(self.vertices) < 0 or max(self.vertices) >= self.tree.n):
            raise ValueError("region escapes the stored tree")
        object.__setattr__(self, "_members", members)

    @classmethod
    def of(cls, tree: RootedTree, vertices: Iterable[int]) -> Region:
        return cls(tree, tuple(sorted(set(vertices))))

    def __contains__(self, v) -> bool:
        return v in self._members

    def __iter__(self):
        return iter(self.vertices)

    def __len__(self) -> int:
        return len(self.vertices)

    def __eq__(self, other) -> bool:
        return (isinstance(other, Region) and other.tree is self.tree
                and other.vertices == self.vertices)

    def __hash__(self):
        return hash((id(self.tree), self.vertices))

    def __or__(self, other: Region) -> Region:
        return Region.of(self.tree, self._members | other._members)

    def __and__(self, other: Region) -> Region:
        return Region.of(self.tree, self._members & other._members)

    def __sub__(self, other: Region) -> Region:
        return Region.of(self.tree, self._members - other._members)

    def issubset(self, other: Region) -> bool:
        return self._members <= other._members

    @property
    def members(self) -> frozenset:
        return self._members

    def closure(self) -> Region:
        return self | boundary(self)


def ball(tree: RootedTree, radius: int) -> Region:
    if radius < 0:
        raise ValueError("radius must be non-negative")
    return Region(tree, tuple(range(tree.ball_size(radius))))


def full_region(tree: RootedTree) -> Region:
    return Region(tree, tuple(range(tree.n)))


def boundary(region: Region) -> Region:
    """Stored vertices outside ``region`` adjacent to it."""
    tree = region.tree
    out = set()
    for v in region.vertices:
        for w in tree.neighbours(v):
            if w not in region:
                out.add(w)
    return Region.of(tree, out)


def validate_degree_bounds(tree: RootedTree) -> tuple[int | None, int | None, bool]:
    """Children-count range over non-root internal vertices and a flag for the standard regime.

    Vertices at the truncation depth are skipped (their children are not
    stored). The regime holds when the root has at least 3 children and every
    scanned vertex has at least 2. Returns ``(None, None, flag)`` when no
    non-root internal vertex exists.
    """
    counts = [len(tree.children[v]) for v in range(1, tree.n) if tree.depth_of[v] < tree.depth]
    root_ok = tree.depth == 0 or len(tree.children[0]) >= 3
    if not counts:
        return None, None, root_ok
    lo, hi = min(counts), max(counts)
    return lo, hi, root_ok and lo >= 2


def max_degree(tree: RootedTree) -> int:
    """Largest number of nearest neighbours of a stored internal vertex."""
    best = len(tree.children[0])
    for v in range(1, tree.n):
        if tree.depth_of[v] < tree.depth:
            best = max(best, len(tree.children[v]) + 1)
    return best
