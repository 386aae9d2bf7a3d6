"""Command-line driver.

Every subcommand resolves its options (built-in defaults, then an optional
``--config`` JSON file, then explicit flags), runs, and writes one report to
``--out`` (standard output by default). The resolved options are embedded in
the report so a run can be repeated byte for byte.

Exit codes: 0 all checks passed, 1 a check failed, 2 invalid input or an
exceeded budget.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from functools import lru_cache

from . import __version__
from .cutsets import (
    ball_radius_for,
    check_cutset_bounds,
    convergence_threshold,
    enumerate_bruteforce,
    enumerate_pushout,
    peierls_bound,
    peierls_sum_exact,
    pushout_bookkeeping,
)
from .field import clusters, sample_bernoulli, thin
from .hardcore import nu_marginal_dp, nu_pattern_dp, parity_sweep
from .prob import check_mode
from .report import ExperimentReport
from .treekit import (
    BudgetExceeded,
    DepthError,
    InvalidSpec,
    RootedTree,
    TreeSpec,
    ball,
    binary_spec,
    build_tree,
    full_region,
    tree_from_json,
    validate_degree_bounds,
)
from .twolayer import denominator_bound_check, ratio_experiment, verify_relation

log = logging.getLogger("treethin")

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2
LOG_TOLERANCE = 1e-12
MAX_TREE_VERTICES = 2_000_000

# keys a --config file may set; each mirrors a flag
CONFIG_KEYS = ("tree", "depth", "p", "p_grid", "radius", "seed", "mode", "format",
               "max_n", "max_interior", "jobs", "out", "type", "exterior", "which",
               "vertex", "value", "pattern", "d_min", "d_max", "budget")

DEFAULTS = {
    "gen-tree": {},
    "thin": {"p": ["0.5"], "seed": 0, "exterior": "all_one"},
    "nu": {"p": ["0.5"], "radius": [2], "mode": "exact", "vertex": [0], "value": 0},
    "sweep": {"p": ["0.999"], "radius": [4, 5, 6, 7, 8, 9, 10, 11], "mode": "log"},
    "cutsets": {"type": [0], "max_n": 2, "max_interior": 12},
    "peierls": {"p": ["0.999"], "d_min": 2, "d_max": 2, "mode": "exact"},
    "relation": {"p": ["0.3", "0.7", "0.95"], "radius": [1, 2], "mode": "exact"},
    "ratio": {"p": ["0.999"], "radius": [2, 3, 4], "mode": "log"},
    "denom": {"p": ["0.3", "0.7"], "radius": [2, 3], "mode": "exact", "which": ["star", "zero"]},
    "selftest": {"budget": "small"},
}
# depth of the default binary tree when nothing else fixes it
BASE_DEPTH = {"gen-tree": 4, "thin": 6}
COMMON = {"seed": 0, "mode": "log", "format": "csv", "jobs": 1, "out": None, "tree": None}


class UsageError(ValueError):
    """Bad option values that argparse itself cannot detect."""


# -- option parsing --------------------------------------------------------

def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _p_list(text: str) -> list[str]:
    items = [x.strip() for x in text.split(",") if x.strip()]
    for x in items:
        _parse_p(x, "exact")
    return items


def _parse_p(text: str, mode: str):
    try:
        q = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a probability: {text!r}") from None
    if not 0 < q < 1:
        raise argparse.ArgumentTypeError(f"p must lie in (0, 1), got {text}")
    return q if mode == "exact" else float(q)


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("expected a positive integer")
    return v


def _pattern(text: str) -> dict:
    out = {}
    for item in text.split(","):
        v, _, s = item.partition("=")
        if s not in ("0", "1"):
            raise argparse.ArgumentTypeError(f"pattern items look like 'vertex=0|1', got {item!r}")
        out[int(v)] = int(s)
    return out


def _add_common(sp: argparse.ArgumentParser) -> None:
    g = sp.add_argument_group("common options")
    g.add_argument("--config", help="JSON file with option values (flags override it)")
    g.add_argument("--tree", help="tree spec JSON or exported tree JSON (default: binary tree)")
    g.add_argument("--depth", type=int, help="stored depth for the default or spec tree")
    g.add_argument("--p", type=_p_list, help="probability (single value)")
    g.add_argument("--p-grid", dest="p_grid", type=_p_list, help="comma-separated probabilities")
    g.add_argument("--radius", type=_int_list, help="comma-separated radii")
    g.add_argument("--seed", type=_u64)
    g.add_argument("--mode", choices=("exact", "log"))
    g.add_argument("--format", choices=("csv", "json"))
    g.add_argument("--max-n", dest="max_n", type=int)
    g.add_argument("--max-interior", dest="max_interior", type=int)
    g.add_argument("--jobs", type=_positive)
    g.add_argument("--out", help="output path (default: standard output)")
    g.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="treethin", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, metavar="command")

    sp = sub.add_parser("gen-tree", help="build a tree and export it as JSON")
    _add_common(sp)

    sp = sub.add_parser("thin", help="sample a Bernoulli field and remove isolated sites")
    _add_common(sp)
    sp.add_argument("--exterior", choices=("mask", "all_zero", "all_one"))

    sp = sub.add_parser("nu", help="marginal or pattern probabilities of the isolation measure")
    _add_common(sp)
    sp.add_argument("--vertex", type=_int_list)
    sp.add_argument("--value", type=int, choices=(0, 1))
    sp.add_argument("--pattern", type=_pattern, help="e.g. 0=0,1=1 (overrides --vertex)")

    sp = sub.add_parser("sweep", help="ground-state disagreement probabilities by radius")
    _add_common(sp)

    sp = sub.add_parser("cutsets", help="enumerate or cross-check type-changing cutsets")
    sp.add_argument("action", choices=("enumerate", "verify"))
    _add_common(sp)
    sp.add_argument("--type", type=_int_list, help="cutset type(s): 0, 1 or 0,1")

    sp = sub.add_parser("peierls", help="explicit Peierls bound, optionally with exact sums")
    _add_common(sp)
    sp.add_argument("--d-min", dest="d_min", type=int)
    sp.add_argument("--d-max", dest="d_max", type=int)

    sp = sub.add_parser("relation", help="check the first/second layer relation")
    _add_common(sp)

    sp = sub.add_parser("ratio", help="odd/even ball ratio experiment")
    _add_common(sp)

    sp = sub.add_parser("denom", help="denominator lower bound check")
    _add_common(sp)
    sp.add_argument("--which", choices=("star", "zero", "both"))

    sp = sub.add_parser("selftest", help="run the invariant and oracle suites")
    _add_common(sp)
    sp.add_argument("--budget", choices=("small", "full"))
    return ap


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults, the --config file and explicit flags into one dict."""
    cfg = dict(COMMON)
    cfg.update(DEFAULTS[args.command])
    if getattr(args, "config", None):
        with open(args.config) as fh:
            doc = json.load(fh)
        unknown = set(doc) - set(CONFIG_KEYS)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        for k, v in doc.items():
            cfg[k] = _normalise(k, v)
    for k in CONFIG_KEYS:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    if cfg.get("p_grid"):
        cfg["p"] = cfg.pop("p_grid")
    cfg.pop("p_grid", None)
    if cfg.get("which") == "both":
        cfg["which"] = ["star", "zero"]
    elif isinstance(cfg.get("which"), str):
        cfg["which"] = [cfg["which"]]
    if "pattern" in cfg and cfg["pattern"] is not None:
        cfg["pattern"] = {int(k): int(v) for k, v in cfg["pattern"].items()}
    check_mode(cfg["mode"])
    for t in cfg.get("type") or ():
        if t not in (0, 1):
            raise UsageError("cutset type must be 0 or 1")
    cfg["command"] = args.command
    if args.command == "cutsets":
        cfg["action"] = args.action
    return cfg


def _normalise(key: str, value):
    """Config-file values use the same spelling as flags; lists may be JSON arrays."""
    if key in ("p", "p_grid"):
        items = value if isinstance(value, list) else [value]
        return [str(x) for x in items]
    if key in ("radius", "vertex", "type") and not isinstance(value, list):
        return [int(value)]
    return value


# -- trees -----------------------------------------------------------------

def _tree_source(cfg: dict, need: int):
    """Resolve ``cfg['tree']`` to a spec dict (extended to depth ``need``) or a path."""
    src = cfg.get("tree")
    depth = cfg.get("depth")
    if src is None:
        if depth is None:
            depth = BASE_DEPTH.get(cfg["command"], 0)
        return _checked(binary_spec(max(need, depth)))
    if isinstance(src, dict) and "parent" in src:
        raise UsageError("inline trees must be specs; pass exported trees by path")
    doc = src
    if isinstance(src, str):
        with open(src) as fh:
            doc = json.load(fh)
        if "parent" in doc:
            return src
    spec = TreeSpec.from_dict(doc)
    target = depth if depth is not None else spec.depth
    if target < need:
        log.info("extending tree depth %d -> %d", target, need)
        target = need
    return _checked(spec.with_depth(target))


def _checked(spec: TreeSpec) -> dict:
    size = spec.max_vertices()
    if size > MAX_TREE_VERTICES:
        raise BudgetExceeded(f"tree of depth {spec.depth} may have {size} vertices "
                             f"(limit {MAX_TREE_VERTICES})")
    return spec.to_dict()


@lru_cache(maxsize=8)
def _load_tree_cached(key: str) -> RootedTree:
    src = json.loads(key)
    if isinstance(src, str):
        with open(src) as fh:
            return tree_from_json(json.load(fh))
    return build_tree(TreeSpec.from_dict(src))


def load_tree(cfg: dict) -> RootedTree:
    return _load_tree_cached(json.dumps(cfg["tree"], sort_keys=True))


# -- per-p workers (top level so a process pool can pickle them) -------------

def _rows_nu(cfg, p):
    tree = load_tree(cfg)
    rows = []
    for r in cfg["radius"]:
        if cfg.get("pattern"):
            pat = cfg["pattern"]
            prob = nu_pattern_dp(tree, r, p, pat, cfg["mode"])
            query = " ".join(f"{v}={s}" for v, s in sorted(pat.items()))
            rows.append(dict(tree_id=tree.tree_id, p=p, radius=r, query=query, prob=prob))
            continue
        for v in cfg["vertex"]:
            prob = nu_marginal_dp(tree, r, p, v, cfg["value"], cfg["mode"])
            rows.append(dict(tree_id=tree.tree_id, p=p, radius=r, query=f"{v}={cfg['value']}",
                             prob=prob))
    return rows


def _rows_sweep(cfg, p):
    return parity_sweep(load_tree(cfg), p, cfg["radius"], cfg["mode"]).rows


def _rows_ratio(cfg, p):
    return ratio_experiment(load_tree(cfg), p, cfg["radius"], cfg["mode"]).rows


def _rows_relation(cfg, p):
    tree = load_tree(cfg)
    rows = []
    for R in cfg["radius"]:
        chk = verify_relation(tree, R, p, cfg["mode"])
        tol = 0.0 if cfg["mode"] == "exact" else LOG_TOLERANCE
        rows.append(dict(tree_id=tree.tree_id, p=p, R=R, lhs=chk.lhs, rhs=chk.rhs,
                         rel_err=chk.rel_err, tolerance=tol, **{"pass": chk.rel_err <= tol}))
    return rows


def _rows_denom(cfg, p):
    tree = load_tree(cfg)
    rows = []
    for R in cfg["radius"]:
        for which in cfg["which"]:
            chk = denominator_bound_check(tree, R, p, which, cfg["mode"])
            rows.append(dict(tree_id=tree.tree_id, p=p, R=R, which=which, proxy=chk.proxy,
                             c_p=chk.c_p, **{"pass": chk.passed}))
    return rows


def _rows_thin(cfg, p):
    tree = load_tree(cfg)
    radius = cfg.get("radius")
    region = ball(tree, radius[0]) if radius else full_region(tree)
    before = sample_bernoulli(tree, region, p, cfg["seed"])
    after = thin(before, cfg["exterior"])
    cl_before = clusters(before)
    cl_after = clusters(after)
    decreasing = all(b <= before[v] for v, b in after.items())
    ok = decreasing
    if cfg["exterior"] != "mask":
        kept = set(cl_after)
        big_kept = all(c in kept for c in cl_before if len(c) >= 2)
        ok = ok and big_kept and thin(after, cfg["exterior"]) == after
    return [dict(tree_id=tree.tree_id, p=p, seed=cfg["seed"], exterior=cfg["exterior"],
                 n_in=len(before.domain), n_out=len(after.domain),
                 ones_before=sum(before.bits), ones_after=sum(after.bits),
                 clusters_before=len(cl_before),
                 singletons=sum(1 for c in cl_before if len(c) == 1),
                 clusters_after=len(cl_after),
                 before="".join(map(str, before.bits)), after="".join(map(str, after.bits)),
                 **{"pass": ok})]


GRID_COMMANDS = {
    "nu": (_rows_nu, ["tree_id", "p", "radius", "query", "prob"]),
    "sweep": (_rows_sweep, ["tree_id", "p", "radius", "vertex", "prob_wrong", "peierls_bound", "pass"]),
    "ratio": (_rows_ratio, ["tree_id", "p", "R", "nu_odd_pattern", "nu_even_pattern", "ratio",
                            "bound", "regime", "pass"]),
    "relation": (_rows_relation, ["tree_id", "p", "R", "lhs", "rhs", "rel_err", "tolerance", "pass"]),
    "denom": (_rows_denom, ["tree_id", "p", "R", "which", "proxy", "c_p", "pass"]),
    "thin": (_rows_thin, ["tree_id", "p", "seed", "exterior", "n_in", "n_out", "ones_before",
                          "ones_after", "clusters_before", "singletons", "clusters_after",
                          "before", "after", "pass"]),
}


def run_grid(cfg: dict) -> ExperimentReport:
    worker, columns = GRID_COMMANDS[cfg["command"]]
    ps = [_parse_p(x, cfg["mode"]) for x in cfg["p"]]
    if not ps:
        raise UsageError("empty p grid")
    if cfg["jobs"] > 1 and len(ps) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg["jobs"], len(ps))) as pool:
            chunks = list(pool.map(_call_worker, [(worker, cfg, p) for p in ps]))
    else:
        chunks = [worker(cfg, p) for p in ps]
    # grid order first, then the worker's own order: independent of scheduling
    order = sorted(range(len(ps)), key=lambda i: (Fraction(cfg["p"][i]), i))
    rows = [row for i in order for row in chunks[i]]
    return ExperimentReport(columns, rows, config=_public(cfg))


def _call_worker(job):
    worker, cfg, p = job
    return worker(cfg, p)


def _public(cfg: dict) -> dict:
    out = {k: v for k, v in sorted(cfg.items()) if v is not None and k != "out"}
    if "pattern" in out:
        out["pattern"] = {str(k): v for k, v in sorted(out["pattern"].items())}
    return out


# -- other commands ----------------------------------------------------------

def run_cutsets(cfg: dict) -> ExperimentReport:
    if cfg["action"] == "enumerate":
        return _cutsets_enumerate(cfg)
    return _cutsets_verify(cfg)


def _cutsets_enumerate(cfg: dict) -> ExperimentReport:
    tree = load_tree(cfg)
    rep = ExperimentReport(["type", "n", "interior_size", "n_repl", "interior"], config=_public(cfg))
    for ty in cfg["type"]:
        enum = enumerate_pushout(tree, ty, cfg["max_n"])
        if enum.blocked:
            log.warning("%d pushouts blocked by the stored depth %d", enum.blocked, tree.depth)
        for cut in enum.all():
            rep.add(type=ty, n=cut.n_pushouts, interior_size=cut.interior_size,
                    n_repl=cut.n_repl, interior=" ".join(map(str, cut.key)))
    return rep


def _cutsets_verify(cfg: dict) -> ExperimentReport:
    tree = load_tree(cfg)
    d_min, d_max, _ = validate_degree_bounds(tree)
    if d_min is None:
        raise UsageError("tree has no non-root internal vertices")
    limit = cfg["max_interior"]
    rep = ExperimentReport(["tree_id", "type", "max_interior", "pushout_count", "bruteforce_count",
                            "same_set", "bounds_ok", "bookkeeping_ok", "pass"], config=_public(cfg))
    for ty in cfg["type"]:
        oracle = enumerate_bruteforce(tree, ty, limit)
        # each pushout adds at least d_min + 1 interior vertices
        start = 1 if ty == 0 else 1 + len(tree.children[0])
        max_n = max(0, (limit - start) // (d_min + 1))
        found = [c for c in enumerate_pushout(tree, ty, max_n).all() if c.interior_size <= limit]
        same = {c.key for c in found} == {c.key for c in oracle}
        bounds = all(check_cutset_bounds(c, d_min, d_max, c.n_pushouts) for c in found)
        books = all(pushout_bookkeeping(c) for c in found)
        rep.add(tree_id=tree.tree_id, type=ty, max_interior=limit, pushout_count=len(found),
                bruteforce_count=len(oracle), same_set=same, bounds_ok=bounds,
                bookkeeping_ok=books, **{"pass": same and bounds and books})
    return rep


def run_peierls(cfg: dict) -> ExperimentReport:
    mode = cfg["mode"]
    cols = ["p", "d_min", "d_max", "ratio", "bound", "convergent", "threshold"]
    with_tree = _uses_tree(cfg)
    if with_tree:
        cols += ["R", "nu_root_wrong", "exact_sum", "n_cutsets", "pass"]
    rep = ExperimentReport(cols, config=_public(cfg))
    tree = load_tree(cfg) if with_tree else None
    for text in sorted(cfg["p"], key=Fraction):
        p = _parse_p(text, mode)
        b = peierls_bound(p, cfg["d_min"], cfg["d_max"], mode=mode)
        base = dict(p=p, d_min=cfg["d_min"], d_max=cfg["d_max"], ratio=b.ratio, bound=b.value,
                    convergent=b.convergent, threshold=convergence_threshold(cfg["d_min"], cfg["d_max"]))
        summary = f"p={text} d_min={cfg['d_min']} d_max={cfg['d_max']}"
        if b.convergent:
            summary += f" bound={float(b.value):.4e}"
        print(f"{summary} convergent={str(b.convergent).lower()}", file=sys.stderr)
        if not with_tree:
            rep.add(**base)
            continue
        for R in cfg["radius"]:
            total, count = peierls_sum_exact(tree, R, p, 0, mode)
            nu = nu_marginal_dp(tree, ball_radius_for(R, 0), p, 0, 0, mode)
            ok = nu <= total and (not b.convergent or total <= b.value)
            rep.add(**base, R=R, nu_root_wrong=nu, exact_sum=total, n_cutsets=count, **{"pass": ok})
    return rep


def run_gen_tree(cfg: dict) -> str:
    tree = load_tree(cfg)
    doc = {"config": _public(cfg), **tree.to_json()}
    return json.dumps(doc, separators=(",", ":")) + "\n"


def run_selftest(cfg: dict) -> ExperimentReport:
    from .selftest import run_suite
    return run_suite(cfg["budget"], config=_public(cfg))


# -- entry point -------------------------------------------------------------

def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _depth_for(cfg: dict) -> int:
    """Smallest stored depth the command can work with."""
    cmd = cfg["command"]
    r = max(cfg.get("radius") or [0])
    if cmd == "cutsets":
        n = cfg["max_n"] if cfg["action"] == "enumerate" else (cfg["max_interior"] + 2) // 3
        return 2 * n + 2
    return {"nu": r, "sweep": r, "thin": r, "peierls": 2 * r + 1, "ratio": 2 * r + 1,
            "relation": r + 3, "denom": 2 * r + 3}.get(cmd, 0)


def _uses_tree(cfg: dict) -> bool:
    if cfg["command"] == "selftest":
        return False
    return cfg["command"] != "peierls" or cfg.get("radius") is not None


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="treethin: %(message)s", stream=sys.stderr)
    t0 = time.perf_counter()
    try:
        cfg = resolve(args)
        if _uses_tree(cfg):
            cfg["tree"] = _tree_source(cfg, _depth_for(cfg))
        if cfg["command"] == "gen-tree":
            _emit(run_gen_tree(cfg), cfg["out"])
            return EXIT_OK
        if cfg["command"] in GRID_COMMANDS:
            rep = run_grid(cfg)
        elif cfg["command"] == "cutsets":
            rep = run_cutsets(cfg)
        elif cfg["command"] == "peierls":
            rep = run_peierls(cfg)
        else:
            rep = run_selftest(cfg)
    except (UsageError, InvalidSpec, DepthError, BudgetExceeded, ValueError, OSError,
            argparse.ArgumentTypeError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_INPUT
    _emit(rep.to_csv() if cfg["format"] == "csv" else rep.to_json(), cfg["out"])
    log.info("%s finished in %.2fs", cfg["command"], time.perf_counter() - t0)
    if not rep.all_pass:
        log.error("%d row(s) failed", sum(1 for r in rep.rows if r.get("pass") is False))
        return EXIT_FAIL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
