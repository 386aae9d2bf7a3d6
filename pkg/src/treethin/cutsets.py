"""Type-changing cutsets, the pushout/merge operations, and the Peierls bound.

A cutset is identified by its interior: a finite subtree containing the root.
Its edges are all oriented edges leaving the interior. For type ``s`` every
interior vertex that is the source of a cutset edge sits at a depth of parity
``s``; equivalently every interior vertex of the other parity keeps all of its
children inside. The type-``s`` ground state on the interior is empty at the
cutset sources, so each cutset edge ends in a pair of empty sites.
"""
from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

from .prob import Prob, check_mode, check_p
from .treekit import BudgetExceeded, DepthError, RootedTree, max_degree

log = logging.getLogger(__name__)

BRUTEFORCE_INTERIOR_LIMIT = 24


class InvalidCutset(ValueError):
    pass


class MergeError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TypeChangingCutset:
    tree: RootedTree
    type: int
    interior: frozenset

    @property
    def key(self) -> tuple[int, ...]:
        """Canonical identity: the sorted interior."""
        return tuple(sorted(self.interior))

    def __eq__(self, other) -> bool:
        return (isinstance(other, TypeChangingCutset) and other.tree is self.tree
                and other.type == self.type and other.interior == self.interior)

    def __hash__(self):
        return hash((id(self.tree), self.type, self.interior))

    def __repr__(self) -> str:
        return f"TypeChangingCutset(type={self.type}, interior={list(self.key)})"

    @property
    def edges(self) -> tuple[tuple[int, int], ...]:
        t = self.tree
        return tuple((x, y) for x in self.key for y in t.children[x] if y not in self.interior)

    @property
    def boundary(self) -> tuple[int, ...]:
        return tuple(y for _, y in self.edges)

    @property
    def closure(self) -> tuple[int, ...]:
        return tuple(sorted(self.interior.union(self.boundary)))

    @property
    def interior_size(self) -> int:
        return len(self.interior)

    @property
    def n_repl(self) -> int:
        """Zeros minus ones of the type's ground state on the interior."""
        d = self.tree.depth_of
        return sum(1 if (d[x] + self.type) % 2 == 0 else -1 for x in self.interior)

    @property
    def n_pushouts(self) -> int:
        """Pushouts needed from the initial cutset: one per pushed-out vertex,
        i.e. per interior vertex at the parity opposite to the type (the root
        of a type-1 cutset belongs to the initial interior)."""
        d = self.tree.depth_of
        pushed = sum(1 for x in self.interior if d[x] % 2 != self.type)
        return pushed if self.type == 0 else pushed - 1

    def interior_edge_count(self) -> int:
        return sum(1 for x in self.interior if x != 0)

    def to_json(self) -> dict:
        return {"type": self.type, "n": self.n_pushouts, "interior": list(self.key),
                "n_repl": self.n_repl}


def is_type_changing(tree: RootedTree, type: int, interior) -> bool:
    """Check the cutset definition literally on a candidate interior.

    The interior must be a subtree containing the root whose cutset edges stay
    inside the stored tree, and every interior vertex with an outgoing cutset
    edge (every leaf of the interior in particular) must have depth parity
    ``type``.
    """
    interior = frozenset(interior)
    if 0 not in interior:
        return False
    for x in interior:
        if x and tree.parent[x] not in interior:
            return False
        if tree.depth_of[x] >= tree.depth:
            return False
        kids = tree.children[x]
        if not kids:
            return False
        if any(c not in interior for c in kids) and tree.depth_of[x] % 2 != type:
            return False
    return True


def make_cutset(tree: RootedTree, type: int, interior) -> TypeChangingCutset:
    if type not in (0, 1):
        raise ValueError("type must be 0 or 1")
    if not is_type_changing(tree, type, interior):
        raise InvalidCutset(f"not a type-{type} cutset interior: {sorted(interior)}")
    return TypeChangingCutset(tree, type, frozenset(interior))


def initial_cutset(tree: RootedTree, type: int) -> TypeChangingCutset:
    """``{root}`` for type 0, the unit ball for type 1."""
    if tree.depth < 2:
        raise DepthError("initial cutsets need a stored depth of at least 2")
    if type == 0:
        return make_cutset(tree, 0, {0})
    return make_cutset(tree, 1, {0, *tree.children[0]})


def pushout(cutset: TypeChangingCutset, edge: tuple[int, int]) -> TypeChangingCutset:
    """Replace ``<x, y>`` by the edges from ``y``'s children to its grandchildren.

    Identity when ``edge`` is not a cutset edge.
    """
    x, y = edge
    tree = cutset.tree
    if x not in cutset.interior or y in cutset.interior or tree.parent[y] != x:
        return cutset
    if tree.depth_of[y] + 2 > tree.depth:
        raise DepthError(f"pushout at {edge} needs depth {tree.depth_of[y] + 2}, stored {tree.depth}")
    kids = tree.children[y]
    if not kids or any(not tree.children[z] for z in kids):
        raise DepthError(f"pushout at {edge}: missing children below {y}")
    return TypeChangingCutset(tree, cutset.type, cutset.interior | {y, *kids})


def merge_at(cutset: TypeChangingCutset, y: int) -> TypeChangingCutset:
    """Inverse of :func:`pushout`: drop ``y`` and its children from the interior,
    so their cutset edges collapse to ``<parent(y), y>``."""
    tree = cutset.tree
    if y not in cutset.interior or y == 0:
        raise MergeError(f"vertex {y} is not a non-root interior vertex")
    if tree.depth_of[y] % 2 == cutset.type or (cutset.type == 1 and tree.depth_of[y] < 2):
        raise MergeError(f"vertex {y} was not added by a pushout")
    kids = tree.children[y]
    for z in kids:
        if z not in cutset.interior or any(v in cutset.interior for v in tree.children[z]):
            raise MergeError(f"children of {y} are not all cutset-edge sources")
    return TypeChangingCutset(tree, cutset.type, cutset.interior - {y, *kids})


def is_initial(cutset: TypeChangingCutset) -> bool:
    return cutset.n_pushouts == 0


def reduce_to_initial(cutset: TypeChangingCutset) -> list[int]:
    """Merge at the grandparent of a deepest boundary vertex until the initial
    cutset is reached; returns the merge vertices in order."""
    tree = cutset.tree
    seq = []
    initial_size = 1 if cutset.type == 0 else 1 + len(tree.children[0])
    while cutset.interior_size > initial_size:
        bnd = cutset.boundary
        deepest = max(tree.depth_of[v] for v in bnd)
        v = min(b for b in bnd if tree.depth_of[b] == deepest)
        y = tree.ancestor(v, 2)
        cutset = merge_at(cutset, y)
        seq.append(y)
    return seq


def replay_pushouts(start: TypeChangingCutset, merges: list[int]):
    """Rebuild a cutset from ``start`` by undoing ``merges`` in reverse order.

    Yields ``(before, y, after)`` for every pushout applied.
    """
    tree = start.tree
    cur = start
    for y in reversed(merges):
        nxt = pushout(cur, (tree.parent[y], y))
        yield cur, y, nxt
        cur = nxt



def pushout_bookkeeping(cutset: TypeChangingCutset) -> bool:
    """Rebuild ``cutset`` from the initial one and check every pushout step.

    A pushout at ``<x, y>`` must add ``d_y + 1`` interior vertices and raise
    ``N_repl`` by ``d_y - 1``, where ``d_y`` is the number of children of ``y``.
    Also checks ``|int| = (interior edges) + 1`` at each step and that the
    replay ends at ``cutset``.
    """
    tree = cutset.tree
    merges = reduce_to_initial(cutset)
    cur = initial_cutset(tree, cutset.type)
    for before, y, after in replay_pushouts(cur, merges):
        d_y = len(tree.children[y])
        if after.interior_size != before.interior_size + d_y + 1:
            return False
        if after.n_repl != before.n_repl + d_y - 1:
            return False
        if after.interior_size != after.interior_edge_count() + 1:
            return False
        cur = after
    return cur == cutset and cur.n_pushouts == len(merges)

@dataclass
class CutsetEnumeration:
    type: int
    levels: dict = field(default_factory=dict)   # n -> list of cutsets
    blocked: int = 0                             # pushouts refused by the depth cap

    def all(self) -> list[TypeChangingCutset]:
        return [c for n in sorted(self.levels) for c in self.levels[n]]

    def counts(self) -> dict:
        return {n: len(v) for n, v in sorted(self.levels.items())}


def enumerate_pushout(tree: RootedTree, type: int, max_n: int | None,
                      max_depth: int | None = None) -> CutsetEnumeration:
    """All cutsets reachable from the initial one by at most ``max_n`` pushouts.

    Breadth-first over the pushout count with deduplication by sorted interior.
    Pushouts whose closure would exceed ``max_depth`` (default: the stored
    depth) are counted in ``blocked`` and skipped; the other branches continue.
    ``max_n=None`` runs until no pushout is possible.
    """
    cap = tree.depth if max_depth is None else min(max_depth, tree.depth)
    start = initial_cutset(tree, type)
    res = CutsetEnumeration(type)
    if max(tree.depth_of[v] for v in start.closure) > cap:
        return res
    level = {start.key: start}
    n = 0
    while level:
        res.levels[n] = sorted(level.values(), key=lambda c: c.key)
        if max_n is not None and n >= max_n:
            break
        nxt = {}
        for cut in level.values():
            for e in cut.edges:
                if tree.depth_of[e[1]] + 2 > cap:
                    res.blocked += 1
                    continue
                new = pushout(cut, e)
                nxt.setdefault(new.key, new)
        level = nxt
        n += 1
    if res.blocked:
        log.debug("enumerate_pushout: %d pushouts blocked by depth cap %d", res.blocked, cap)
    return res


def enumerate_bruteforce(tree: RootedTree, type: int, max_interior: int,
                         budget: int = BRUTEFORCE_INTERIOR_LIMIT) -> list[TypeChangingCutset]:
    """Every type-``type`` cutset whose interior has at most ``max_interior``
    vertices, by include/exclude search over rooted subtrees.

    Each undecided child of the growing subtree is either added or left out;
    leaving a child out makes its parent a cutset source, so that branch is
    abandoned when the parent has the wrong parity. Completed subtrees are
    re-checked against :func:`is_type_changing`.
    """
    if max_interior > budget:
        raise BudgetExceeded(f"max_interior {max_interior} exceeds budget {budget}")
    if type not in (0, 1):
        raise ValueError("type must be 0 or 1")
    depth = tree.depth_of
    out = []

    def extend(interior: list, frontier: deque):
        if not frontier:
            if is_type_changing(tree, type, interior):
                out.append(TypeChangingCutset(tree, type, frozenset(interior)))
            return
        c = frontier.popleft()
        x = tree.parent[c]
        # leave c outside: x becomes a cutset source
        if depth[x] % 2 == type:
            extend(interior, frontier)
        # take c inside (its own children must be stored)
        if len(interior) < max_interior and depth[c] < tree.depth and tree.children[c]:
            interior.append(c)
            frontier.extend(tree.children[c])
            extend(interior, frontier)
            for _ in tree.children[c]:
                frontier.pop()
            interior.pop()
        frontier.appendleft(c)

    if tree.depth >= 1 and tree.children[0]:
        extend([0], deque(tree.children[0]))
    out.sort(key=lambda c: (c.interior_size, c.key))
    return out


def check_cutset_bounds(cutset: TypeChangingCutset, d_min: int, d_max: int,
                        n: int | None = None) -> bool:
    """Interior-size and replacement bounds after ``n`` pushouts.

    ``|int| <= 1 + m (d_max + 1)`` and ``N_repl >= 1 + m (d_min - 1)`` with
    ``m = n`` for type 0 and ``m = n + 1`` for type 1.
    """
    if n is None:
        n = len(reduce_to_initial(cutset))
    m = n + cutset.type
    return (cutset.interior_size <= 1 + m * (d_max + 1)
            and cutset.n_repl >= 1 + m * (d_min - 1))


def count_connected_subgraphs(tree: RootedTree, k_edges: int, budget: int = 12) -> int:
    """Number of connected edge sets of size ``k_edges`` containing the root.

    On a tree these are the rooted subtrees with ``k_edges + 1`` vertices; each
    is grown exactly once by deciding every frontier edge in order (take it or
    drop it for good).
    """
    if k_edges < 0:
        raise ValueError("k_edges must be non-negative")
    if k_edges > budget:
        raise BudgetExceeded(f"k={k_edges} exceeds enumeration budget {budget}")
    count = 0
    kids = tree.children

    def grow(frontier: list, start: int, left: int):
        nonlocal count
        if left == 0:
            count += 1
            return
        for i in range(start, len(frontier)):
            c = frontier[i]
            # take edge to c; edges before i are dropped for good
            added = kids[c]
            frontier.extend(added)
            grow(frontier, i + 1, left - 1)
            del frontier[len(frontier) - len(added):]

    grow(list(kids[0]), 0, k_edges)
    return count


def entropy_bound(tree: RootedTree, k_edges: int) -> int:
    """``(max degree) ** (2k)``: the connected-subgraph count bound."""
    return max_degree(tree) ** (2 * k_edges)


# -- Peierls series -----------------------------------------------------------

@dataclass(frozen=True)
class PeierlsBound:
    p: Fraction
    d_min: int
    d_max: int
    convergent: bool
    ratio: Prob                 # common ratio of the geometric series
    value: Prob | None = None   # None in the divergent regime
    partial: Prob | None = None
    tail: Prob | None = None
    n_terms: int | None = None


def peierls_bound(p, d_min: int, d_max: int, n_terms: int | None = None,
                  mode: str = "exact") -> PeierlsBound:
    """``sum_n (d_max+1)^(2n(d_max+1)) q^(1 + n(d_min-1))`` with ``q = (1-p)/p``.

    The series is geometric with first term ``q`` and ratio
    ``r = (d_max+1)^(2(d_max+1)) q^(d_min-1)``. When ``r >= 1`` the result is
    flagged divergent and carries no value. With ``n_terms`` the first terms are
    summed explicitly and the remainder ``q r^N / (1 - r)`` is added as a
    certified tail.
    """
    q_p = check_p(p)
    check_mode(mode)
    if d_min < 1 or d_max < d_min:
        raise ValueError("need 1 <= d_min <= d_max")
    q = (1 - q_p) / q_p
    growth = (d_max + 1) ** (2 * (d_max + 1))
    r = growth * q ** (d_min - 1)
    if mode == "exact":
        ratio = Prob.exact(r)
    else:
        lq = math.log(q)
        lr = math.log(growth) + (d_min - 1) * lq
        ratio = Prob.from_log(lr)
    # convergence is decided on the exact ratio in both modes
    if r >= 1:
        return PeierlsBound(q_p, d_min, d_max, False, ratio)
    if mode == "exact":
        value = Prob.exact(q / (1 - r))
    else:
        value = Prob.from_log(lq - math.log1p(-float(r)))
    if n_terms is None:
        return PeierlsBound(q_p, d_min, d_max, True, ratio, value)
    if mode == "exact":
        partial = Prob.exact(sum((q * r ** n for n in range(n_terms)), Fraction(0)))
        tail = Prob.exact(q * r ** n_terms / (1 - r))
    else:
        partial = Prob.from_log(lq + math.log(math.fsum(float(r) ** n for n in range(n_terms)))) \
            if n_terms else Prob.from_log(-math.inf)
        tail = Prob.from_log(lq + n_terms * lr - math.log1p(-float(r)))
    return PeierlsBound(q_p, d_min, d_max, True, ratio, value, partial, tail, n_terms)


def convergence_threshold(d_min: int, d_max: int) -> Fraction | float:
    """Smallest ``p`` above which the Peierls series converges.

    Solves ``q^(d_min-1) < (d_max+1)^(-2(d_max+1))``; exact when ``d_min == 2``.
    """
    growth = (d_max + 1) ** (2 * (d_max + 1))
    if d_min == 2:
        # q < 1/growth  <=>  p > growth / (growth + 1)
        return Fraction(growth, growth + 1)
    if d_min == 1:
        return 1.0
    qmax = growth ** (-1.0 / (d_min - 1))
    return 1.0 / (1.0 + qmax)


def peierls_sum_exact(tree: RootedTree, R: int, p, type: int = 0,
                      mode: str = "exact") -> tuple[Prob, int]:
    """``sum q^N_repl`` over all type-``type`` cutsets with closure inside the
    ball of radius ``2R+1`` (type 0) or ``2R`` (type 1).

    Returns the sum and the number of cutsets.
    """
    q_p = check_p(p)
    check_mode(mode)
    radius = 2 * R + 1 if type == 0 else 2 * R
    if radius > tree.depth:
        raise DepthError(f"ball radius {radius} exceeds stored depth {tree.depth}")
    cuts = enumerate_pushout(tree, type, None, max_depth=radius).all()
    q = (1 - q_p) / q_p
    if mode == "exact":
        total = sum((q ** c.n_repl for c in cuts), Fraction(0))
        return Prob.exact(total), len(cuts)
    lq = math.log(q)
    terms = sorted(c.n_repl * lq for c in cuts)
    top = terms[-1]
    return Prob.from_log(top + math.log(math.fsum(math.exp(t - top) for t in terms))), len(cuts)


def ball_radius_for(R: int, type: int) -> int:
    return 2 * R + 1 if type == 0 else 2 * R
