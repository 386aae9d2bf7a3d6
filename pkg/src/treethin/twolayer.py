"""Second-layer (image) probabilities and the first-/second-layer checks.

The image of the Bernoulli field under the removal map is observed through
events ``{T(sigma) = w' on L}``. Because the map has range one, such an event
only depends on first-layer spins in ``L`` and its neighbours.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .cutsets import peierls_bound
from .field import Configuration, ground_state
from .hardcore import iter_bit_blocks, nu_pattern_dp, weighted_count
from .prob import Prob, check_mode, check_p, logaddexp
from .report import ExperimentReport
from .treekit import BudgetExceeded, DepthError, Region, RootedTree, ball, validate_degree_bounds

NEG_INF = -math.inf
BRUTEFORCE_LIMIT = 22


class ZeroProbabilityCondition(ZeroDivisionError):
    pass


@dataclass(frozen=True, eq=False)
class SecondLayerEvent:
    """The event that the image configuration equals ``pattern`` on its keys."""

    tree: RootedTree
    pattern: dict

    def __post_init__(self):
        if any(s not in (0, 1) for s in self.pattern.values()):
            raise ValueError("second-layer values must be 0 or 1")
        if any(not 0 <= v < self.tree.n for v in self.pattern):
            raise ValueError("event region escapes the stored tree")

    @property
    def region(self) -> Region:
        return Region.of(self.tree, self.pattern)

    @property
    def dependency(self) -> Region:
        """First-layer sites that determine the event: the region and its boundary."""
        return self.region.closure()

    def check_measurable(self) -> None:
        t = self.tree
        for v in self.pattern:
            if t.depth_of[v] >= t.depth:
                raise DepthError(f"vertex {v} has unstored neighbours; event not determined")

    def __and__(self, other: SecondLayerEvent) -> SecondLayerEvent:
        clash = [v for v in set(self.pattern) & set(other.pattern)
                 if self.pattern[v] != other.pattern[v]]
        if clash:
            raise ValueError(f"events disagree on vertices {clash[:5]}")
        return SecondLayerEvent(self.tree, {**self.pattern, **other.pattern})


def layer_event(tree: RootedTree, layers: dict) -> SecondLayerEvent:
    """Event from depth ranges: ``{(lo, hi): value}`` sets every vertex with
    ``lo <= depth <= hi`` to ``value``."""
    pat = {}
    for (lo, hi), s in layers.items():
        if hi > tree.depth:
            raise DepthError(f"layer {hi} exceeds stored depth {tree.depth}")
        for k in range(max(lo, 0), hi + 1):
            for v in tree.level(k):
                pat[v] = s
    return SecondLayerEvent(tree, pat)


def image_event_prob_dp(tree: RootedTree, p, event: SecondLayerEvent, mode: str = "exact") -> Prob:
    """``mu_p(T(sigma) = w' on L)`` by a tree recursion over the dependency region.

    For each vertex ``u`` and spins ``(t, s)`` of its parent and itself the
    recursion keeps the weight of ``u``'s subtree. A prescribed 1 needs ``u``
    occupied with an occupied child or parent; a prescribed 0 needs ``u`` empty
    or all neighbours empty. Children are folded in with a running
    (no occupied child, some occupied child) pair, so no subtraction occurs.
    """
    q = check_p(p)
    check_mode(mode)
    if event.tree is not tree:
        raise ValueError("event belongs to a different tree")
    event.check_measurable()
    pat = event.pattern
    if not pat:
        return Prob.of(1, mode)
    dep = set(event.dependency)
    region = set(dep)
    for v in dep:
        while v > 0:
            v = tree.parent[v]
            if v in region:
                break
            region.add(v)
    region.add(0)
    if mode == "exact":
        w = (q.denominator - q.numerator, q.numerator)
        zero, one = 0, 1

        def add(x, y):
            return x + y

        def mul(x, y):
            return x * y
    else:
        w = (math.log1p(-float(q)), math.log(q))
        zero, one = NEG_INF, 0.0
        add = logaddexp

        def mul(x, y):
            return x + y
    A = {}  # u -> ((A(t=0,s=0), A(t=0,s=1)), (A(t=1,s=0), A(t=1,s=1)))
    for u in sorted(region, reverse=True):
        folded = []
        for s in (0, 1):
            none, some = one, zero
            for c in tree.children[u]:
                if c not in region:
                    continue
                a0, a1 = A[c][s]
                some = add(mul(some, add(a0, a1)), mul(none, a1))
                none = mul(none, a0)
            folded.append((none, some))
        target = pat.get(u)
        n0, s0 = folded[0]
        n1, s1 = folded[1]
        tot0, tot1 = add(n0, s0), add(n1, s1)
        rows = []
        for t in (0, 1):
            if target is None:
                a0, a1 = mul(w[0], tot0), mul(w[1], tot1)
            elif target == 1:
                a0 = zero
                a1 = mul(w[1], add(s1, n1) if t == 1 else s1)
            else:
                a0 = mul(w[0], tot0)
                a1 = mul(w[1], n1) if t == 0 else zero
            rows.append((a0, a1))
        A[u] = tuple(rows)
    a0, a1 = A[0][0]  # the root has no parent: treat it as empty
    total = add(a0, a1)
    if mode == "exact":
        return Prob.exact(Fraction(total, q.denominator ** len(region)))
    return Prob.from_log(min(0.0, total))


def image_event_prob_bruteforce(tree: RootedTree, p, event: SecondLayerEvent,
                                budget: int = BRUTEFORCE_LIMIT) -> Prob:
    """Exact enumeration over first-layer spins on the dependency region."""
    q = check_p(p)
    event.check_measurable()
    dep = list(event.dependency)
    k = len(dep)
    if k > budget:
        raise BudgetExceeded(f"dependency region of {k} sites exceeds budget {budget}")
    col = {v: i for i, v in enumerate(dep)}
    checks = [(col[x], [col[y] for y in tree.neighbours(x)], s) for x, s in event.pattern.items()]
    hits = np.zeros(k + 1, dtype=np.int64)
    for bits in iter_bit_blocks(k):
        ok = np.ones(bits.shape[0], dtype=bool)
        for i, nb, s in checks:
            any_nb = np.zeros(bits.shape[0], dtype=bool)
            for j in nb:
                any_nb |= bits[:, j]
            ok &= (bits[:, i] & any_nb) == bool(s)
        hits += np.bincount(bits[ok].sum(axis=1), minlength=k + 1)
    return Prob.exact(weighted_count(hits, k, q))


def conditional(tree: RootedTree, p, event: SecondLayerEvent, given: SecondLayerEvent,
                mode: str = "exact") -> Prob:
    den = image_event_prob_dp(tree, p, given, mode)
    if (den.is_exact and den.value == 0) or (not den.is_exact and den.value == NEG_INF):
        raise ZeroProbabilityCondition("conditioning event has probability zero")
    return image_event_prob_dp(tree, p, event & given, mode) / den


def star_pattern(tree: RootedTree) -> dict:
    """Second-layer ``w'*`` on ``B_2``: occupied on ``B_1``, empty on depth 2."""
    return {v: int(tree.depth_of[v] <= 1) for v in range(tree.ball_size(2))}


def zero_pattern(tree: RootedTree) -> dict:
    return {v: 0 for v in range(tree.ball_size(2))}


@dataclass(frozen=True)
class RelationCheck:
    R: int
    p: object
    lhs: Prob
    rhs: Prob
    rel_err: float

    def to_json(self) -> dict:
        from .report import json_value
        return {"R": self.R, "p": str(self.p), "lhs": json_value(self.lhs),
                "rhs": json_value(self.rhs), "rel_err": self.rel_err}


def verify_relation(tree: RootedTree, R: int, p, mode: str = "exact") -> RelationCheck:
    """Compare the second-layer odds of ``w'*`` against ``0'`` on ``B_2`` (given
    empty image up to depth ``R+1`` and occupied image at depth ``R+2``) with
    ``p/(1-p)`` times the constrained probability of the type-0 ground state
    on ``B_2`` in ``B_{R+1}``."""
    q = check_p(p)
    check_mode(mode)
    if R < 1:
        raise ValueError("R must be at least 1")
    if tree.depth < R + 3:
        raise DepthError(f"need stored depth >= R+3 = {R + 3}, have {tree.depth}")
    cond = layer_event(tree, {(3, R + 1): 0, (R + 2, R + 2): 1})
    star = SecondLayerEvent(tree, star_pattern(tree)) & cond
    zero = SecondLayerEvent(tree, zero_pattern(tree)) & cond
    lhs = image_event_prob_dp(tree, q, star, mode) / image_event_prob_dp(tree, q, zero, mode)
    b2 = ball(tree, 2)
    nu = nu_pattern_dp(tree, R + 1, q, ground_state(tree, b2, 0), mode)
    rhs = nu * Prob.of(q / (1 - q), mode) if mode == "exact" else \
        Prob.from_log(nu.log() + math.log(q) - math.log1p(-float(q)))
    return RelationCheck(R, p, lhs, rhs, lhs.rel_err(rhs))


def ratio_experiment(tree: RootedTree, p, R_list, mode: str = "log") -> ExperimentReport:
    """Odd-ball over even-ball probability of the type-0 ground state on ``B_2``.

    Where the Peierls bound ``eps`` converges and ``|B_2| eps < 1`` each ratio is
    compared with ``eps / (1 - |B_2| eps)``; elsewhere rows carry no verdict.
    """
    q = check_p(p)
    d_min, d_max, _ = validate_degree_bounds(tree)
    eps = peierls_bound(q, d_min, d_max, mode="exact")
    b2 = ball(tree, 2)
    w0 = ground_state(tree, b2, 0)
    bound, regime = None, "divergent"
    if eps.convergent and len(b2) * eps.value.value < 1:
        e = eps.value.value
        bound = Prob.exact(e / (1 - len(b2) * e)).to_mode(mode)
        regime = "convergent"
    rep = ExperimentReport(
        ["tree_id", "p", "R", "nu_odd_pattern", "nu_even_pattern", "ratio", "bound", "regime", "pass"],
        config={"tree": tree.spec.to_dict() if tree.spec else None, "p": str(p),
                "radius": list(R_list), "mode": mode})
    for R in sorted(R_list):
        if 2 * R + 1 > tree.depth:
            raise DepthError(f"R={R} needs stored depth {2 * R + 1}")
        odd = nu_pattern_dp(tree, 2 * R + 1, q, w0, mode)
        even = nu_pattern_dp(tree, 2 * R, q, w0, mode)
        ratio = odd / even
        rep.add(tree_id=tree.tree_id, p=p, R=R, nu_odd_pattern=odd, nu_even_pattern=even,
                ratio=ratio, bound=bound, regime=regime,
                **{"pass": (ratio <= bound) if bound is not None else None})
    return rep


@dataclass(frozen=True)
class DenominatorCheck:
    R: int
    p: object
    which: str
    proxy: Prob
    c_p: Prob
    passed: bool


def denominator_bound_check(tree: RootedTree, R: int, p, which: str = "zero",
                            mode: str = "exact") -> DenominatorCheck:
    """Lower bound on the conditional image probability of ``w'*`` (``which="star"``)
    or ``0'`` (``which="zero"``) on ``B_2`` given empty image on
    ``B_{2R} \\ B_2`` and occupied image on ``B_{2R+2} \\ B_{2R}``.

    The bound is ``c(p) = 1 / (1 + 1/W(w_hat))`` with ``w_hat`` the first-layer
    preimage used for the estimate (``w*`` resp. all-zero on ``B_2``).
    """
    q = check_p(p)
    check_mode(mode)
    if which not in ("star", "zero"):
        raise ValueError("which must be 'star' or 'zero'")
    if R < 2:
        raise ValueError("R must be at least 2")
    if tree.depth < 2 * R + 3:
        raise DepthError(f"need stored depth >= 2R+3 = {2 * R + 3}, have {tree.depth}")
    cond = layer_event(tree, {(3, 2 * R): 0, (2 * R + 1, 2 * R + 2): 1})
    pattern = star_pattern(tree) if which == "star" else zero_pattern(tree)
    proxy = conditional(tree, q, SecondLayerEvent(tree, pattern), cond, mode)
    b2 = ball(tree, 2)
    hat = Configuration(b2, tuple(pattern[v] for v in b2.vertices))
    ones = sum(hat.bits)
    zeros = len(b2) - ones
    if mode == "exact":
        w = q ** ones * (1 - q) ** zeros
        c_p = Prob.exact(w / (w + 1))
    else:
        lw = ones * math.log(q) + zeros * math.log1p(-float(q))
        c_p = Prob.from_log(lw - logaddexp(lw, 0.0))
    return DenominatorCheck(R, p, which, proxy, c_p, proxy >= c_p)
