"""Desk-scale invariant and oracle suites.

Each ``check_*`` function returns a :class:`CheckResult`. ``run_suite`` runs all
of them at a small or a full budget; the full budget uses the sizes the
acceptance tests require.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .cutsets import (
    check_cutset_bounds,
    count_connected_subgraphs,
    entropy_bound,
    enumerate_bruteforce,
    enumerate_pushout,
    peierls_bound,
    peierls_sum_exact,
    pushout_bookkeeping,
)
from .field import clusters, sample_bernoulli, thin
from .hardcore import (
    nu_event_bruteforce,
    nu_marginal_dp,
    nu_marginals,
    nu_pattern_dp,
    parity_sweep,
    pattern_is,
    vertex_is,
)
from .report import ExperimentReport
from .rng import SplitMix64
from .treekit import RootedTree, TreeSpec, binary_spec, build_tree, full_region, validate_degree_bounds
from .twolayer import (
    SecondLayerEvent,
    denominator_bound_check,
    image_event_prob_bruteforce,
    image_event_prob_dp,
    ratio_experiment,
    verify_relation,
)

LOG_TOL = 1e-12
P_999 = Fraction(999, 1000)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def oracle_trees(count: int) -> list[RootedTree]:
    """Mixed regular, by-level and seeded-random trees for oracle checks."""
    specs = [binary_spec(3),
             TreeSpec(kind="regular", depth=3, root_children=3, children=3),
             TreeSpec(kind="by_level", depth=3, root_children=3, children_per_level=(2, 3)),
             TreeSpec(kind="by_level", depth=3, root_children=4, children_per_level=(3, 2))]
    seed = 1
    while len(specs) < count:
        specs.append(TreeSpec(kind="seeded_random", depth=3, root_children=3,
                              d_min_children=2, d_max_children=3, seed=seed))
        seed += 1
    return [build_tree(s) for s in specs[:count]]


def largest_radius(tree: RootedTree, max_size: int) -> int:
    return max(r for r in range(tree.depth + 1) if tree.ball_size(r) <= max_size)


def check_first_layer_oracle(n_trees: int = 20, ps=("0.2", "0.5", "0.9"),
                             max_ball: int = 20) -> CheckResult:
    worst, compared = 0.0, 0
    for tree in oracle_trees(n_trees):
        R = largest_radius(tree, max_ball)
        n = tree.ball_size(R)
        for text in ps:
            p = Fraction(text)
            marg = nu_marginals(tree, R, p, "exact")
            logm = nu_marginals(tree, R, float(p), "log")
            for v in range(n):
                for s in (0, 1):
                    bf = nu_event_bruteforce(tree, R, p, vertex_is(v, s))
                    if marg[v][s] != bf or nu_marginal_dp(tree, R, p, v, s) != bf:
                        return CheckResult("first_layer_oracle", False,
                                           f"{tree.tree_id} p={text} v={v} s={s}")
                    worst = max(worst, logm[v][s].rel_err(bf))
                    compared += 1
            # a two-site pattern per tree: root and its first child
            pat = {0: 0, tree.children[0][0]: 1}
            bf = nu_event_bruteforce(tree, R, p, pattern_is(pat))
            if nu_pattern_dp(tree, R, p, pat) != bf:
                return CheckResult("first_layer_oracle", False, f"{tree.tree_id} pattern")
            worst = max(worst, nu_pattern_dp(tree, R, float(p), pat, "log").rel_err(bf))
    ok = worst <= LOG_TOL
    return CheckResult("first_layer_oracle", ok,
                       f"{n_trees} trees, {compared} marginals exact, log rel_err {worst:.2e}")


def random_event(tree: RootedTree, rng: SplitMix64, max_dependency: int) -> SecondLayerEvent:
    """A random image pattern on vertices with stored neighbourhoods, grown
    until its dependency region would exceed ``max_dependency``."""
    inner = [v for v in range(tree.n) if tree.depth_of[v] < tree.depth]
    pattern = {}
    target = rng.randint(1, 6)
    for _ in range(4 * target):
        v = inner[rng.randint(0, len(inner) - 1)]
        trial = {**pattern, v: rng.randint(0, 1)}
        if len(SecondLayerEvent(tree, trial).dependency) <= max_dependency:
            pattern = trial
        if len(pattern) >= target:
            break
    if not pattern:
        pattern = {0: rng.randint(0, 1)}
    return SecondLayerEvent(tree, pattern)


def check_second_layer_oracle(n_events: int = 100, max_dependency: int = 20,
                              seed: int = 2024) -> CheckResult:
    rng = SplitMix64(seed)
    trees = [build_tree(binary_spec(4)),
             build_tree(TreeSpec(kind="seeded_random", depth=4, root_children=3,
                                 d_min_children=2, d_max_children=3, seed=11))]
    for i in range(n_events):
        tree = trees[i % len(trees)]
        event = random_event(tree, rng, max_dependency)
        p = Fraction(rng.randint(1, 19), 20)
        dp = image_event_prob_dp(tree, p, event)
        bf = image_event_prob_bruteforce(tree, p, event)
        if dp != bf:
            return CheckResult("second_layer_oracle", False,
                               f"event {sorted(event.pattern.items())} p={p}: {dp} vs {bf}")
    return CheckResult("second_layer_oracle", True, f"{n_events} events exact")


def check_relation(ps=("0.3", "0.7", "0.95"), exact_R=(1, 2), log_R=(3,)) -> CheckResult:
    tree = build_tree(binary_spec(max((*exact_R, *log_R)) + 3))
    worst = 0.0
    for text in ps:
        for R in exact_R:
            chk = verify_relation(tree, R, Fraction(text), "exact")
            if chk.rel_err != 0:
                return CheckResult("relation", False, f"R={R} p={text} rel_err={chk.rel_err}")
        for R in log_R:
            chk = verify_relation(tree, R, float(text), "log")
            worst = max(worst, chk.rel_err)
    return CheckResult("relation", worst <= LOG_TOL,
                       f"exact R={list(exact_R)}, log R={list(log_R)} rel_err {worst:.2e}")


def inhomogeneous_spec(depth: int) -> TreeSpec:
    return TreeSpec(kind="by_level", depth=depth, root_children=3,
                    children_per_level=(2, 3, 2, 2, 3, 2, 2, 2))


def check_cutsets(max_interior: int = 15) -> CheckResult:
    depth = 2 * ((max_interior + 2) // 3) + 2
    details = []
    for spec in (binary_spec(depth), inhomogeneous_spec(depth)):
        tree = build_tree(spec)
        d_min, d_max, _ = validate_degree_bounds(tree)
        for ty in (0, 1):
            oracle = {c.key for c in enumerate_bruteforce(tree, ty, max_interior)}
            start = 1 if ty == 0 else 1 + len(tree.children[0])
            found = [c for c in enumerate_pushout(tree, ty, (max_interior - start) // (d_min + 1)).all()
                     if c.interior_size <= max_interior]
            if {c.key for c in found} != oracle:
                return CheckResult("cutsets", False, f"{tree.tree_id} type {ty}: sets differ")
            for c in found:
                if not (pushout_bookkeeping(c) and check_cutset_bounds(c, d_min, d_max, c.n_pushouts)):
                    return CheckResult("cutsets", False, f"{tree.tree_id} {c!r}")
            details.append(len(found))
    counts = enumerate_pushout(build_tree(binary_spec(6)), 0, 2).counts()
    ok = counts == {0: 1, 1: 3, 2: 15}
    return CheckResult("cutsets", ok, f"sets equal (sizes {details}), counts {counts}")


def connected_subgraph_poly(tree: RootedTree, k_max: int) -> list[int]:
    """Coefficients of ``f_root`` where ``f_v = prod_c (1 + x f_c)``, truncated."""
    polys = {}
    for v in range(tree.n - 1, -1, -1):
        f = [1] + [0] * k_max
        for c in tree.children[v]:
            g = [0] + polys.pop(c)[:k_max]     # x * f_c
            g[0] += 1
            f = [sum(f[i] * g[j - i] for i in range(j + 1)) for j in range(k_max + 1)]
        polys[v] = f
    return polys[0]


def check_entropy(k_max: int = 8) -> CheckResult:
    specs = [binary_spec(k_max + 1),
             TreeSpec(kind="seeded_random", depth=k_max + 1, root_children=3,
                      d_min_children=2, d_max_children=3, seed=7)]
    for spec in specs:
        tree = build_tree(spec)
        poly = connected_subgraph_poly(tree, k_max)
        for k in range(k_max + 1):
            c = count_connected_subgraphs(tree, k)
            if c != poly[k] or c > entropy_bound(tree, k):
                return CheckResult("entropy", False, f"{tree.tree_id} k={k}: {c}")
    return CheckResult("entropy", True, f"k <= {k_max} on {len(specs)} trees")


def check_peierls_sandwich() -> CheckResult:
    tree = build_tree(binary_spec(3))
    nu = nu_marginal_dp(tree, 3, P_999, 0, 0)
    total, count = peierls_sum_exact(tree, 1, P_999)
    bound = peierls_bound(P_999, 2, 2)
    ok = bound.convergent and nu.value <= total.value <= bound.value.value
    just_above = peierls_bound(Fraction(729, 730) + Fraction(1, 10 ** 9), 2, 2)
    at = peierls_bound(Fraction(729, 730), 2, 2)
    ok = ok and just_above.convergent and not at.convergent
    return CheckResult("peierls_sandwich", ok,
                       f"{float(nu.value):.4e} <= {float(total.value):.4e} ({count} cutsets) "
                       f"<= {bound.value}")


def check_phase_transition(max_odd: int = 11, ratio_R=(2, 3, 4)) -> CheckResult:
    tree = build_tree(binary_spec(max(max_odd, 2 * max(ratio_R) + 1)))
    eps = peierls_bound(P_999, 2, 2).value.value
    radii = list(range(4, max_odd + 1))
    rep = parity_sweep(tree, 0.999, radii, "log", vertices=[0])
    for row in rep.rows:
        if not float(row["prob_wrong"]) <= float(eps):
            return CheckResult("phase_transition", False, f"radius {row['radius']}")
    ratios = ratio_experiment(tree, 0.999, list(ratio_R), "log")
    bound = eps / (1 - 10 * eps)
    ok = ratios.all_pass and all(float(r) <= float(bound) for r in ratios.column("ratio"))
    return CheckResult("phase_transition", ok,
                       f"radii {radii[0]}..{radii[-1]} below {float(eps):.4e}, "
                       f"ratios below {float(bound):.4e}")


def check_denominator(radii=(2, 3), ps=("0.3", "0.7")) -> CheckResult:
    tree = build_tree(binary_spec(2 * max(radii) + 3))
    for R in radii:
        for text in ps:
            for which in ("star", "zero"):
                chk = denominator_bound_check(tree, R, Fraction(text), which)
                if not chk.passed:
                    return CheckResult("denominator", False, f"R={R} p={text} {which}")
    return CheckResult("denominator", True, f"R in {list(radii)}, p in {list(ps)}")


def check_transform(n_configs: int = 1000) -> CheckResult:
    trees = [build_tree(binary_spec(5)),
             build_tree(TreeSpec(kind="seeded_random", depth=5, root_children=3,
                                 d_min_children=2, d_max_children=3, seed=5))]
    for i in range(n_configs):
        tree = trees[i % 2]
        p = (0.2, 0.5, 0.8)[i % 3]
        cfg = sample_bernoulli(tree, full_region(tree), p, seed=i)
        for rule in ("all_zero", "all_one"):
            out = thin(cfg, rule)
            if thin(out, rule) != out:
                return CheckResult("transform", False, f"not idempotent, seed {i} {rule}")
            if any(b > cfg[v] for v, b in out.items()):
                return CheckResult("transform", False, f"not decreasing, seed {i} {rule}")
        out = thin(cfg, "all_zero")
        if clusters(out) != [c for c in clusters(cfg) if len(c) >= 2]:
            return CheckResult("transform", False, f"clusters changed, seed {i}")
    return CheckResult("transform", True, f"{n_configs} configurations")


BUDGETS = {
    "small": [
        lambda: check_first_layer_oracle(4, max_ball=13),
        lambda: check_second_layer_oracle(20, 14),
        lambda: check_relation(("0.3",), (1, 2), (3,)),
        lambda: check_cutsets(9),
        lambda: check_entropy(5),
        check_peierls_sandwich,
        lambda: check_phase_transition(7, (2, 3)),
        lambda: check_denominator((2,), ("0.3",)),
        lambda: check_transform(100),
    ],
    "full": [
        check_first_layer_oracle,
        check_second_layer_oracle,
        check_relation,
        check_cutsets,
        check_entropy,
        check_peierls_sandwich,
        check_phase_transition,
        check_denominator,
        check_transform,
    ],
}


def run_suite(budget: str = "small", config: dict | None = None) -> ExperimentReport:
    rep = ExperimentReport(["check", "detail", "pass"], config=config or {"budget": budget})
    for check in BUDGETS[budget]:
        res = check()
        rep.add(check=res.name, detail=res.detail, **{"pass": res.passed})
    return rep
