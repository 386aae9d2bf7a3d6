"""Spin configurations on a tree and the isolated-site removal map."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

from .prob import Prob, check_mode, check_p, safe_log
from .rng import SplitMix64
from .treekit import Region, RootedTree

EXTERIOR_RULES = ("mask", "all_zero", "all_one")


class DomainError(ValueError):
    """A vertex was queried or modified outside a configuration's domain."""


@dataclass(frozen=True, eq=False)
class Configuration:
    """0/1 values on ``domain``; ``bits[i]`` belongs to ``domain.vertices[i]``."""

    domain: Region
    bits: tuple[int, ...]
    _index: dict = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.bits) != len(self.domain):
            raise ValueError("one bit per domain vertex required")
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("bits must be 0 or 1")
        object.__setattr__(self, "_index", {v: i for i, v in enumerate(self.domain.vertices)})

    @classmethod
    def from_map(cls, domain: Region, values: dict) -> Configuration:
        return cls(domain, tuple(int(values[v]) for v in domain.vertices))

    @classmethod
    def zeros(cls, domain: Region) -> Configuration:
        return cls(domain, (0,) * len(domain))

    @classmethod
    def ones(cls, domain: Region) -> Configuration:
        return cls(domain, (1,) * len(domain))

    @property
    def tree(self) -> RootedTree:
        return self.domain.tree

    def __getitem__(self, v: int) -> int:
        try:
            return self.bits[self._index[v]]
        except KeyError:
            raise DomainError(f"vertex {v} is outside the configuration domain") from None

    def items(self):
        return zip(self.domain.vertices, self.bits)

    def occupied(self) -> list[int]:
        return [v for v, b in self.items() if b]

    def restrict(self, region: Region) -> Configuration:
        return Configuration(region, tuple(self[v] for v in region.vertices))

    def with_values(self, values: dict) -> Configuration:
        bits = list(self.bits)
        for v, b in values.items():
            if v not in self._index:
                raise DomainError(f"vertex {v} is outside the configuration domain")
            bits[self._index[v]] = int(b)
        return Configuration(self.domain, tuple(bits))

    def __eq__(self, other) -> bool:
        return (isinstance(other, Configuration) and self.domain == other.domain
                and self.bits == other.bits)

    def __hash__(self):
        return hash((self.domain, self.bits))

    def to_json(self) -> dict:
        return {"domain": list(self.domain.vertices), "bits": "".join(map(str, self.bits))}

    @classmethod
    def from_json(cls, tree: RootedTree, doc: dict) -> Configuration:
        domain = Region(tree, tuple(doc["domain"]))
        bits = doc["bits"]
        if set(bits) - {"0", "1"}:
            raise ValueError("bits must be a string of 0/1 characters")
        return cls(domain, tuple(int(c) for c in bits))


def sample_bernoulli(tree: RootedTree, region: Region, p, seed: int) -> Configuration:
    """Independent Bernoulli(p) spins on ``region``.

    One splitmix64 draw per vertex in increasing index order; the spin is 1 when
    the 53-bit uniform falls below ``p``.
    """
    pf = float(check_p(p))
    if region.tree is not tree:
        raise ValueError("region belongs to a different tree")
    rng = SplitMix64(seed)
    return Configuration(region, tuple(int(rng.uniform() < pf) for _ in region.vertices))


def _check_rooted(domain: Region) -> None:
    tree = domain.tree
    if 0 not in domain:
        raise DomainError("domain must contain the root")
    for v in domain.vertices:
        if v and tree.parent[v] not in domain:
            raise DomainError("domain is not connected to the root")


def thin(config: Configuration, exterior: str = "mask") -> Configuration:
    """Remove isolated occupied sites: ``T(w)_x = w_x (1 - prod_{y~x} (1 - w_y))``.

    Neighbours outside the domain (including the unstored children of vertices
    at the truncation depth) are handled by ``exterior``: with ``mask`` a vertex
    with any such neighbour drops out of the output domain, with ``all_zero`` or
    ``all_one`` those neighbours are held at 0 or 1.
    """
    if exterior not in EXTERIOR_RULES:
        raise ValueError(f"exterior must be one of {EXTERIOR_RULES}")
    domain = config.domain
    _check_rooted(domain)
    tree = domain.tree
    out_vertices, out_bits = [], []
    for v, b in config.items():
        unseen = tree.depth_of[v] == tree.depth  # children not stored
        has_occ = False
        for w in tree.neighbours(v):
            if w in domain:
                has_occ = has_occ or config[w] == 1
            else:
                unseen = True
        if unseen:
            if exterior == "mask":
                continue
            if exterior == "all_one":
                has_occ = True
        out_vertices.append(v)
        out_bits.append(b if has_occ else 0)
    return Configuration(Region(tree, tuple(out_vertices)), tuple(out_bits))


def ground_state(tree: RootedTree, region: Region, type: int) -> Configuration:
    """Alternating ground state: type 0 is empty on even depths, type 1 the flip."""
    if type not in (0, 1):
        raise ValueError("type must be 0 or 1")
    return Configuration(region, tuple((tree.depth_of[v] + type) % 2 for v in region.vertices))


def flip_region(config: Configuration, region: Region) -> Configuration:
    if not region.issubset(config.domain):
        raise DomainError("flip region escapes the configuration domain")
    return Configuration(config.domain, tuple(
        1 - b if v in region else b for v, b in config.items()))


def bernoulli_weight(config: Configuration, region: Region, p, mode: str = "exact") -> Prob:
    """``prod_{x in region} p^{w_x} (1 - p)^{1 - w_x}``."""
    q = check_p(p)
    check_mode(mode)
    if not region.issubset(config.domain):
        raise DomainError("weight region escapes the configuration domain")
    ones = sum(config[v] for v in region.vertices)
    zeros = len(region) - ones
    if mode == "exact":
        return Prob.exact(q ** ones * (1 - q) ** zeros)
    pf = float(q)
    return Prob.from_log(ones * safe_log(pf) + zeros * math.log1p(-pf))


def clusters(config: Configuration) -> list[tuple[int, ...]]:
    """Maximal connected sets of occupied domain vertices, sorted."""
    tree = config.tree
    seen = set()
    out = []
    for v in config.occupied():
        if v in seen:
            continue
        comp = [v]
        seen.add(v)
        queue = deque([v])
        while queue:
            u = queue.popleft()
            for w in tree.neighbours(u):
                if w in config.domain and w not in seen and config[w] == 1:
                    seen.add(w)
                    comp.append(w)
                    queue.append(w)
        out.append(tuple(sorted(comp)))
    out.sort()
    return out


def weight_fraction(ones: int, zeros: int, p: Fraction) -> Fraction:
    return p ** ones * (1 - p) ** zeros
