"""The Bernoulli field on a ball conditioned on isolation, with occupied exterior.

Conditioning ``T(sigma_B 1_{B^c}) = 0`` on ``B = B_R`` leaves exactly the
configurations whose occupied set is an independent set avoiding depth ``R``
(those vertices touch the occupied exterior). All exact quantities below are
computed by a two-state tree recursion; :func:`nu_event_bruteforce` is the
independent enumeration oracle that applies the removal map literally.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .field import Configuration, ground_state, thin
from .prob import Prob, check_mode, check_p, logaddexp
from .report import ExperimentReport
from .treekit import BudgetExceeded, DepthError, Region, RootedTree, ball, validate_degree_bounds

NEG_INF = -math.inf
BRUTEFORCE_LIMIT = 24


def nu_support_check(tree: RootedTree, R: int, config: Configuration) -> bool:
    """True iff ``config`` on ``B_R`` survives the removal map as all zeros
    when the exterior of the ball is fully occupied."""
    if config.domain != ball(tree, R):
        raise ValueError("configuration domain must be the ball B_R")
    return not any(thin(config, "all_one").bits)


def is_isolated_in_ball(tree: RootedTree, R: int, config: Configuration) -> bool:
    """Independent-set form of the support: no adjacent occupied pair and no
    occupied vertex at depth ``R``."""
    for v, b in config.items():
        if not b:
            continue
        if tree.depth_of[v] == R:
            return False
        if any(config[c] for c in tree.children[v]):
            return False
    return True


def _pattern_dict(pattern) -> dict:
    if isinstance(pattern, Configuration):
        return dict(pattern.items())
    return dict(pattern)


class _Messages:
    """Upward messages of the isolation model on a vertex set inside ``B_R``.

    In exact mode the messages are integers homogeneous in the weights
    ``a = num(p)`` and ``c = den(p) - num(p)``; the true weight of a vertex set
    ``S`` is the integer divided by ``den(p) ** |S|``. In log mode each vertex
    keeps a normalized log pair plus its log normalizer, so partition-function
    ratios only accumulate the normalizers that actually differ.
    """

    def __init__(self, tree: RootedTree, R: int, p: Fraction, mode: str,
                 vertices, clamp: dict | None = None):
        self.tree, self.R, self.mode = tree, R, mode
        self.vertices = list(vertices)
        members = set(self.vertices)
        clamp = clamp or {}
        self.m0, self.m1, self.k = {}, {}, {}
        self.none = {}
        self.roots = [v for v in self.vertices if tree.parent[v] not in members]
        self.dead = False
        if mode == "exact":
            a, c = p.numerator, p.denominator - p.numerator
            self.den = p.denominator
        else:
            la, lc = math.log(p), math.log1p(-float(p))
        for u in sorted(self.vertices, reverse=True):
            kids = [ch for ch in tree.children[u] if ch in members] if tree.depth_of[u] < R else []
            if mode == "exact":
                if tree.depth_of[u] >= R:
                    x0, x1, none = c, 0, 1
                else:
                    tot = none = 1
                    for ch in kids:
                        tot *= self.m0[ch] + self.m1[ch]
                        none *= self.m0[ch]
                    x0, x1 = c * tot, a * none
            else:
                if tree.depth_of[u] >= R:
                    x0, x1, none = lc, NEG_INF, 0.0
                else:
                    # normalized children: log(m0 + m1) == 0
                    none = math.fsum(self.m0[ch] for ch in kids)
                    x0, x1 = lc, la + none
            s = clamp.get(u)
            if s == 0:
                x1 = 0 if mode == "exact" else NEG_INF
            elif s == 1:
                x0 = 0 if mode == "exact" else NEG_INF
            self.none[u] = none
            if mode == "exact":
                self.m0[u], self.m1[u] = x0, x1
                if x0 == 0 and x1 == 0:
                    self.dead = True
            else:
                k = logaddexp(x0, x1)
                if k == NEG_INF:
                    self.dead = True
                    self.m0[u] = self.m1[u] = NEG_INF
                    self.k[u] = NEG_INF
                else:
                    self.m0[u], self.m1[u], self.k[u] = x0 - k, x1 - k, k

    def partition(self) -> Prob:
        """Total weight of the allowed configurations on the vertex set."""
        if self.mode == "exact":
            z = 1
            for r in self.roots:
                z *= self.m0[r] + self.m1[r]
            return Prob.exact(Fraction(z, self.den ** len(self.vertices)))
        if self.dead:
            return Prob.from_log(NEG_INF)
        return Prob.from_log(math.fsum(self.k.values()))

    def ratio_to(self, base: _Messages) -> Prob:
        """Partition ratio ``Z(self) / Z(base)`` over the same vertex set."""
        if self.mode == "exact":
            num = den = 1
            for r in self.roots:
                num *= self.m0[r] + self.m1[r]
                den *= base.m0[r] + base.m1[r]
            return Prob.exact(Fraction(num, den))
        if self.dead:
            return Prob.from_log(NEG_INF)
        diffs = [self.k[v] - base.k[v] for v in self.vertices if self.k[v] != base.k[v]]
        return Prob.from_log(min(0.0, math.fsum(diffs)))


def _ball_messages(tree, R, p, mode, clamp=None) -> _Messages:
    if R > tree.depth:
        raise DepthError(f"R={R} exceeds stored depth {tree.depth}")
    if R < 0:
        raise ValueError("R must be non-negative")
    return _Messages(tree, R, p, mode, range(tree.ball_size(R)), clamp)


def partition_function(tree: RootedTree, R: int, p, region: Region | None = None,
                       mode: str = "exact") -> Prob:
    """Weight ``Z_region`` of isolation-compatible configurations on ``region``
    (default ``B_R``), with depth-``R`` vertices held empty by the exterior."""
    q = check_p(p)
    check_mode(mode)
    if region is None:
        return _ball_messages(tree, R, q, mode).partition()
    if any(tree.depth_of[v] > R for v in region):
        raise ValueError("region must lie inside B_R")
    return _Messages(tree, R, q, mode, region.vertices).partition()


def nu_marginals(tree: RootedTree, R: int, p, mode: str = "exact") -> list[tuple[Prob, Prob]]:
    """``[(nu(sigma_v = 0), nu(sigma_v = 1)) for v in B_R]`` by an upward and a
    downward pass."""
    q = check_p(p)
    check_mode(mode)
    msg = _ball_messages(tree, R, q, mode)
    n = tree.ball_size(R)
    out0, out1 = [None] * n, [None] * n
    res = []
    if mode == "exact":
        a, c = q.numerator, q.denominator - q.numerator
        z = msg.m0[0] + msg.m1[0]
        out0[0] = out1[0] = 1
        for u in range(n):
            if tree.depth_of[u] < R:
                tot = 1
                for ch in tree.children[u]:
                    tot *= msg.m0[ch] + msg.m1[ch]
                none = msg.none[u]
                for v in tree.children[u]:
                    sib_tot = tot // (msg.m0[v] + msg.m1[v])
                    sib_none = none // msg.m0[v]
                    out1[v] = out0[u] * c * sib_tot
                    out0[v] = out1[v] + out1[u] * a * sib_none
            res.append((Prob.exact(Fraction(msg.m0[u] * out0[u], z)),
                        Prob.exact(Fraction(msg.m1[u] * out1[u], z))))
        return res
    la, lc = math.log(q), math.log1p(-float(q))
    out0[0] = out1[0] = 0.0
    for u in range(n):
        if tree.depth_of[u] < R:
            none = msg.none[u]
            for v in tree.children[u]:
                o1 = out0[u] + lc
                o0 = logaddexp(o1, out1[u] + la + (none - msg.m0[v]))
                k = logaddexp(o0, o1)
                out0[v], out1[v] = o0 - k, o1 - k
        j0, j1 = msg.m0[u] + out0[u], msg.m1[u] + out1[u]
        norm = logaddexp(j0, j1)
        res.append((Prob.from_log(min(0.0, j0 - norm)), Prob.from_log(min(0.0, j1 - norm))))
    return res


def nu_marginal_dp(tree: RootedTree, R: int, p, vertex: int, value: int,
                   mode: str = "exact") -> Prob:
    if value not in (0, 1):
        raise ValueError("value must be 0 or 1")
    if R > tree.depth:
        raise DepthError(f"R={R} exceeds stored depth {tree.depth}")
    if not 0 <= vertex < tree.ball_size(R):
        raise ValueError(f"vertex {vertex} is outside B_R")
    if vertex == 0:
        # root only needs the upward pass
        return nu_pattern_dp(tree, R, p, {0: value}, mode)
    return nu_marginals(tree, R, p, mode)[vertex][value]


def nu_pattern_dp(tree: RootedTree, R: int, p, pattern, mode: str = "exact") -> Prob:
    """``nu_{B_R}(sigma_A = pattern)`` by clamping ``A`` and renormalizing.

    ``pattern`` is a :class:`Configuration` on ``A`` or a ``{vertex: value}``
    map. Patterns outside the support give exactly zero.
    """
    q = check_p(p)
    check_mode(mode)
    clamp = _pattern_dict(pattern)
    n = tree.ball_size(R) if R <= tree.depth else None
    if n is None or any(not 0 <= v < n for v in clamp):
        raise DepthError("pattern region must lie inside B_R")
    base = _ball_messages(tree, R, q, mode)
    return _ball_messages(tree, R, q, mode, clamp).ratio_to(base)


# -- brute-force oracle ---------------------------------------------------

def vertex_is(v: int, s: int) -> Callable:
    return lambda bits: bits[:, v] == bool(s)


def pattern_is(pattern) -> Callable:
    items = list(_pattern_dict(pattern).items())

    def pred(bits):
        ok = np.ones(bits.shape[0], dtype=bool)
        for v, s in items:
            ok &= bits[:, v] == bool(s)
        return ok
    return pred


def iter_bit_blocks(n: int, block: int = 1 << 16):
    """All 2**n configurations as boolean arrays of shape (rows, n), in blocks."""
    shifts = np.arange(n, dtype=np.int64)
    total = 1 << n
    for start in range(0, total, block):
        ids = np.arange(start, min(total, start + block), dtype=np.int64)
        yield ((ids[:, None] >> shifts) & 1).astype(bool)


def weighted_count(counts: np.ndarray, n: int, p: Fraction) -> Fraction:
    """``sum_k counts[k] p^k (1-p)^(n-k)`` exactly."""
    return sum((int(c) * p ** k * (1 - p) ** (n - k) for k, c in enumerate(counts) if c),
               Fraction(0))


def nu_event_bruteforce(tree: RootedTree, R: int, p, predicate: Callable,
                        budget: int = BRUTEFORCE_LIMIT) -> Prob:
    """Exact ``nu_{B_R}(event)`` by enumerating all ``2^|B_R|`` configurations.

    The conditioning is evaluated from the removal formula itself: a
    configuration is kept iff no vertex of ``B_R`` is occupied with an occupied
    neighbour, where every child of a depth-``R`` vertex lies in the occupied
    exterior. ``predicate`` maps a boolean array ``(rows, |B_R|)`` (columns are
    vertex indices) to a boolean row mask.
    """
    q = check_p(p)
    n = tree.ball_size(R)
    if n > budget:
        raise BudgetExceeded(f"|B_R| = {n} exceeds the enumeration budget {budget}")
    nbrs = [[w for w in tree.neighbours(v) if w < n] for v in range(n)]
    touches_exterior = np.array([tree.depth_of[v] == R for v in range(n)])
    kept = np.zeros(n + 1, dtype=np.int64)
    hits = np.zeros(n + 1, dtype=np.int64)
    for bits in iter_bit_blocks(n):
        occ_nb = np.zeros_like(bits)
        for v in range(n):
            for w in nbrs[v]:
                occ_nb[:, v] |= bits[:, w]
        occ_nb |= touches_exterior
        removed_nothing_survives = ~(bits & occ_nb).any(axis=1)
        ones = bits.sum(axis=1)
        kept += np.bincount(ones[removed_nothing_survives], minlength=n + 1)
        sel = removed_nothing_survives & np.asarray(predicate(bits), dtype=bool)
        hits += np.bincount(ones[sel], minlength=n + 1)
    z = weighted_count(kept, n, q)
    return Prob.exact(weighted_count(hits, n, q) / z)


# -- experiments ------------------------------------------------------------

def wrong_value(tree: RootedTree, v: int, type: int) -> int:
    """The spin at ``v`` that disagrees with the type-``type`` ground state."""
    return 1 - (tree.depth_of[v] + type) % 2


def parity_sweep(tree: RootedTree, p, R_list, mode: str = "log",
                 vertices=None) -> ExperimentReport:
    """Probability of disagreeing with the ground state selected by the ball's
    parity, for each radius and each vertex of ``B_2``.

    Odd radii select the type-1 state, even radii the type-0 state. Each row is
    compared with the explicit Peierls bound for the tree's degree range; the
    ``pass`` column is empty when that bound diverges.
    """
    from .cutsets import peierls_bound

    d_min, d_max, _ = validate_degree_bounds(tree)
    bound = peierls_bound(p, d_min, d_max, mode=mode) if d_min else None
    rep = ExperimentReport(
        ["tree_id", "p", "radius", "vertex", "prob_wrong", "peierls_bound", "pass"],
        config={"tree": tree.spec.to_dict() if tree.spec else None, "p": str(p),
                "radius": list(R_list), "mode": mode})
    for r in sorted(R_list):
        marg = nu_marginals(tree, r, p, mode)
        watch = vertices if vertices is not None else range(tree.ball_size(min(2, r)))
        for x in watch:
            prob = marg[x][wrong_value(tree, x, r % 2)]
            ok = None
            if bound is not None and bound.convergent:
                ok = prob <= bound.value
            rep.add(tree_id=tree.tree_id, p=p, radius=r, vertex=x, prob_wrong=prob,
                    peierls_bound=bound.value if ok is not None else None, **{"pass": ok})
    return rep


@dataclass(frozen=True)
class AdaptedProbability:
    direct: Prob       # nu(sigma_int = ground state, sigma_boundary = 0) by clamped DP
    decomposed: Prob   # W(int) (1-p)^|boundary| Z_outside / Z_ball
    flip_bound: Prob   # ((1-p)/p) ** N_repl


def adapted_probability(tree: RootedTree, R: int, p, cutset, mode: str = "exact") -> AdaptedProbability:
    """Probability under ``nu_{B_R}`` of the configurations adapted to ``cutset``,
    computed twice: by clamping the closure in the recursion, and through the
    product decomposition over the closure and its complement in the ball."""
    q = check_p(p)
    check_mode(mode)
    if R > tree.depth:
        raise DepthError("R exceeds the stored depth")
    n = tree.ball_size(R)
    closure = cutset.closure
    if any(v >= n for v in closure):
        raise ValueError("cutset closure escapes B_R")
    interior = Region.of(tree, cutset.interior)
    clamp = dict(ground_state(tree, interior, cutset.type).items())
    clamp.update({y: 0 for y in cutset.boundary})
    direct = nu_pattern_dp(tree, R, q, clamp, mode)

    w_int = ground_state(tree, interior, cutset.type)
    ones = sum(w_int.bits)
    zeros = len(interior) - ones + len(cutset.boundary)
    rest = Region.of(tree, set(range(n)) - set(closure))
    z_rest = partition_function(tree, R, q, rest, mode)
    z_ball = partition_function(tree, R, q, None, mode)
    # an occupied interior vertex at depth R is outside the support
    feasible = all(not (b and tree.depth_of[v] == R) for v, b in w_int.items())
    if mode == "exact":
        w = q ** ones * (1 - q) ** zeros if feasible else Fraction(0)
        decomposed = Prob.exact(w * z_rest.value / z_ball.value)
        flip = Prob.exact(((1 - q) / q) ** cutset.n_repl)
    else:
        lw = ones * math.log(q) + zeros * math.log1p(-float(q)) if feasible else NEG_INF
        decomposed = Prob.from_log(min(0.0, lw + z_rest.value - z_ball.value))
        flip = Prob.from_log(cutset.n_repl * (math.log1p(-float(q)) - math.log(q)))
    return AdaptedProbability(direct, decomposed, flip)
