"""3-Hitting Set: neighbors graphs, the small-hypergraph catalog and the randomized solver.

A small hypergraph has edges of one or two vertices and no isolated vertices.
The neighbors graph of ``v`` is obtained from the edges through ``v`` by deleting
``v``; every minimal hitting set of it is a branching option, alongside ``{v}``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .asymptotics import DEFAULT_TOL, OptimizedRule, RuleSpec, optimize_rule_generic
from .graphs import ParseError
from .recurrence import CompositeRecurrence, Term, dp_eval
from .rng import make_rng, trial_seed

Edge = tuple[int, ...]


class CatalogMiss(LookupError):
    pass


# ---------------------------------------------------------------------------
# hypergraphs


@dataclass(frozen=True)
class Hypergraph3:
    n: int
    edges: tuple[Edge, ...]

    def __post_init__(self):
        norm = []
        for e in self.edges:
            t = tuple(sorted(set(int(x) for x in e)))
            if not 1 <= len(t) <= 3 or len(t) != len(e):
                raise ValueError(f"edge {e} must have 1-3 distinct vertices")
            if t[0] < 0 or t[-1] >= self.n:
                raise ValueError(f"edge {e} out of range")
            norm.append(t)
        if len(set(norm)) != len(norm):
            raise ValueError("duplicate edges")
        object.__setattr__(self, "edges", tuple(sorted(norm)))

    def incident(self, v: int) -> list[Edge]:
        return [e for e in self.edges if v in e]

    def degree(self, v: int) -> int:
        return len(self.incident(v))

    def is_hitting_set(self, s: Iterable[int]) -> bool:
        s = set(s)
        return all(any(x in s for x in e) for e in self.edges)


@dataclass(frozen=True)
class SmallHypergraph:
    """Edges of size 1-2 over the vertices they mention."""

    edges: tuple[Edge, ...]

    def __post_init__(self):
        norm = tuple(sorted(tuple(sorted(set(e))) for e in self.edges))
        if any(not 1 <= len(e) <= 2 for e in norm):
            raise ValueError("small hypergraph edges have 1 or 2 vertices")
        if len(set(norm)) != len(norm):
            raise ValueError("duplicate edges")
        object.__setattr__(self, "edges", norm)

    @property
    def vertices(self) -> tuple[int, ...]:
        return tuple(sorted({x for e in self.edges for x in e}))

    @property
    def size(self) -> int:
        return len(self.edges)


def induced_graph(h: Hypergraph3, v: int, f: Sequence[Edge]) -> SmallHypergraph:
    edges = []
    for e in f:
        e = tuple(sorted(e))
        if v not in e:
            raise ValueError(f"edge {e} does not contain {v}")
        if len(e) == 1:
            raise ValueError(f"singleton edge {{{v}}} has no neighbors graph")
        edges.append(tuple(x for x in e if x != v))
    return SmallHypergraph(tuple(edges))


def neighbors_graph(h: Hypergraph3, v: int) -> SmallHypergraph:
    inc = h.incident(v)
    if not inc:
        raise ValueError(f"vertex {v} is isolated")
    return induced_graph(h, v, inc)


# ---------------------------------------------------------------------------
# canonical form


def _components(edges: Sequence[Edge]) -> list[list[Edge]]:
    parent: dict[int, int] = {}

    def find(x):
        while parent.setdefault(x, x) != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e in edges:
        for x in e:
            find(x)
        if len(e) == 2:
            parent[find(e[0])] = find(e[1])
    groups: dict[int, list[Edge]] = {}
    for e in edges:
        groups.setdefault(find(e[0]), []).append(e)
    return list(groups.values())


def _refine(verts: list[int], edges: Sequence[Edge]) -> list[list[int]]:
    nbrs = {v: [] for v in verts}
    single = {v: 0 for v in verts}
    for e in edges:
        if len(e) == 1:
            single[e[0]] = 1
        else:
            nbrs[e[0]].append(e[1])
            nbrs[e[1]].append(e[0])
    color = {v: (len(nbrs[v]), single[v]) for v in verts}
    ranks = {c: i for i, c in enumerate(sorted(set(color.values())))}
    color = {v: ranks[color[v]] for v in verts}
    while True:
        sig = {v: (color[v], tuple(sorted(color[u] for u in nbrs[v]))) for v in verts}
        ranks = {s: i for i, s in enumerate(sorted(set(sig.values())))}
        new = {v: ranks[sig[v]] for v in verts}
        if len(ranks) == len(set(color.values())):
            break
        color = new
    cells: dict[int, list[int]] = {}
    for v in sorted(verts):
        cells.setdefault(color[v], []).append(v)
    return [cells[c] for c in sorted(cells)]


def _component_canon(edges: Sequence[Edge]) -> tuple[tuple, list[int]]:
    verts = sorted({x for e in edges for x in e})
    cells = _refine(verts, edges)
    best, best_order = None, None
    for parts in itertools.product(*(itertools.permutations(c) for c in cells)):
        order = [v for p in parts for v in p]
        pos = {v: i for i, v in enumerate(order)}
        code = tuple(sorted(tuple(sorted(pos[x] for x in e)) for e in edges))
        if best is None or code < best:
            best, best_order = code, order
    return (len(verts), best), best_order


@lru_cache(maxsize=1 << 16)
def _canon_cached(edges: tuple[Edge, ...]):
    comps = [_component_canon(c) for c in _components(edges)]
    comps.sort(key=lambda t: t[0])
    key_edges, order, offset = [], [], 0
    for (nv, code), comp_order in comps:
        key_edges.extend(tuple(x + offset for x in e) for e in code)
        order.extend(comp_order)
        offset += nv
    return (offset, tuple(key_edges)), tuple(order)


def canonical_form(g: SmallHypergraph) -> tuple[int, tuple[Edge, ...]]:
    """Relabeling-invariant key ``(vertex count, edges over 0..n-1)``."""
    return _canon_cached(g.edges)[0]


def canonical_labeling(g: SmallHypergraph) -> tuple[tuple[int, tuple[Edge, ...]], tuple[int, ...]]:
    """Key plus ``phi``: canonical label ``i`` corresponds to vertex ``phi[i]`` of ``g``."""
    return _canon_cached(g.edges)


# ---------------------------------------------------------------------------
# catalog


def minimal_hitting_sets(edges: Sequence[Edge], n: int) -> list[tuple[int, ...]]:
    """All inclusion-minimal hitting sets over vertices ``0..n-1``, by increasing size."""
    masks = [sum(1 << x for x in e) for e in edges]
    found: list[int] = []
    for size in range(0, n + 1):
        for combo in itertools.combinations(range(n), size):
            s = sum(1 << x for x in combo)
            if all(s & m for m in masks) and not any(f & s == f for f in found):
                found.append(s)
    return [tuple(x for x in range(n) if s >> x & 1) for s in found]


@dataclass(frozen=True)
class CatalogEntry:
    n: int
    edges: tuple[Edge, ...]
    hitting_sets: tuple[tuple[int, ...], ...]
    gamma: tuple[float, ...] | None = None

    @property
    def key(self):
        return (self.n, self.edges)

    @property
    def m(self) -> int:
        return len(self.hitting_sets)

    @property
    def size(self) -> int:
        return len(self.edges)


@dataclass
class Catalog:
    delta: int
    entries: list[CatalogEntry]
    lookup: dict = field(default_factory=dict)

    def __post_init__(self):
        self.lookup = {e.key: i for i, e in enumerate(self.entries)}

    def find(self, key) -> CatalogEntry:
        try:
            return self.entries[self.lookup[key]]
        except KeyError:
            raise CatalogMiss(f"no catalog entry for {key}") from None

    def with_gammas(self, gammas: Sequence[Sequence[float]]) -> "Catalog":
        return Catalog(self.delta, [replace(e, gamma=tuple(float(x) for x in g)) for e, g in zip(self.entries, gammas)])

    def to_json(self) -> str:
        return json.dumps({"delta": self.delta, "entries": [
            {"vertices": e.n, "edges": [list(x) for x in e.edges], "hitting_sets": [list(c) for c in e.hitting_sets],
             **({"gamma": list(e.gamma)} if e.gamma is not None else {})}
            for e in self.entries]})

    @classmethod
    def from_json(cls, text: str) -> "Catalog":
        data = json.loads(text)
        entries = [CatalogEntry(d["vertices"], tuple(tuple(x) for x in d["edges"]),
                                tuple(tuple(c) for c in d["hitting_sets"]),
                                tuple(d["gamma"]) if d.get("gamma") is not None else None)
                   for d in data["entries"]]
        return cls(int(data["delta"]), entries)


MAX_CATALOG_DELTA = 7


def _children(n: int, edges: tuple[Edge, ...]):
    present = set(edges)
    new = [(u,) for u in range(n + 1)]
    new += [(u, v) for u in range(n + 1) for v in range(u + 1, n + 2)]
    for e in new:
        if e not in present:
            yield edges + (e,)


def generate_catalog(delta: int, max_delta: int = MAX_CATALOG_DELTA) -> Catalog:
    """All small hypergraphs with at most ``delta`` edges, one per isomorphism class.

    Level ``l + 1`` is grown from the canonical members of level ``l`` by adding
    one edge in every possible way (possibly on fresh vertices) and deduplicating
    by canonical key.
    """
    if delta < 1:
        raise ValueError("delta must be >= 1")
    if delta > max_delta:
        raise ValueError(f"delta={delta} exceeds the configured cap {max_delta}")
    level = {canonical_form(SmallHypergraph(((0,),))), canonical_form(SmallHypergraph(((0, 1),)))}
    keys = set(level)
    for _ in range(delta - 1):
        nxt = set()
        for n, edges in sorted(level):
            for child in _children(n, edges):
                nxt.add(canonical_form(SmallHypergraph(child)))
        level = nxt
        keys |= nxt
    entries = [CatalogEntry(n, e, tuple(minimal_hitting_sets(e, n)))
               for n, e in sorted(keys, key=lambda k: (len(k[1]), k))]
    return Catalog(delta, entries)


# ---------------------------------------------------------------------------
# rules and recurrence


def entry_rule(entry: CatalogEntry, delta: int) -> RuleSpec:
    """Options ``C_1..C_m`` then ``{v}``; states ``v`` outside the solution (one per ``C_j``) then ``v`` inside."""
    sets = [set(c) for c in entry.hitting_sets]
    b = tuple(len(c) for c in sets) + (1,)
    states = [tuple(len(ci & cj) for ci in sets) + (0,) for cj in sets]
    ind = 1 if entry.size < delta else 0
    states.append((ind,) * len(sets) + (1,))
    return RuleSpec(b, tuple(states), entry.gamma, f"G{entry.key}")


def build_recurrence_3hs(cat: Catalog) -> CompositeRecurrence:
    terms: list[Term] = []
    for e in cat.entries:
        if e.gamma is None:
            raise ValueError(f"catalog entry {e.key} has no gamma")
        terms += entry_rule(e, cat.delta).terms()
    terms.append(Term((1,), (1,), (1.0,)))
    return CompositeRecurrence(tuple(terms))


@dataclass
class OptimizedCatalog:
    catalog: Catalog
    m: float
    per_entry: list[OptimizedRule]

    @property
    def base(self) -> float:
        return math.exp(self.m)


def optimize_catalog_gammas(cat: Catalog, alpha: float, tol: float = DEFAULT_TOL) -> OptimizedCatalog:
    results = [optimize_rule_generic(entry_rule(e, cat.delta), alpha, tol) for e in cat.entries]
    m = max(r.m_star for r in results)
    return OptimizedCatalog(cat.with_gammas([r.gamma_star for r in results]), m, results)


# ---------------------------------------------------------------------------
# solver


@dataclass(frozen=True)
class HittingResult:
    hitting_set: frozenset[int]
    recursion_steps: int
    seed_used: int

    @property
    def size(self) -> int:
        return len(self.hitting_set)


def three_hs_run(h: Hypergraph3, cat: Catalog, seed: int, check_maps: bool = False) -> HittingResult:
    rng = make_rng(seed)
    inc: dict[int, set[Edge]] = {}
    for e in h.edges:
        for x in e:
            inc.setdefault(x, set()).add(e)
    live = set(h.edges)
    chosen: set[int] = set()
    steps = 0

    def take(S):
        for x in S:
            for e in list(inc.get(x, ())):
                live.discard(e)
                for y in e:
                    inc[y].discard(e)
            inc.pop(x, None)
        chosen.update(S)

    while live:
        steps += 1
        single = min((e for e in live if len(e) == 1), default=None)
        if single is not None:
            take(single)
            continue
        v = max(sorted(x for x in inc if inc[x]), key=lambda x: len(inc[x]))
        F = sorted(inc[v])[:cat.delta]
        N = SmallHypergraph(tuple(tuple(x for x in e if x != v) for e in F))
        key, phi = canonical_labeling(N)
        entry = cat.find(key)
        if entry.gamma is None:
            raise ValueError(f"catalog entry {key} has no gamma")
        i = int(np.searchsorted(np.cumsum(entry.gamma), rng.random(), side="right"))
        i = min(i, entry.m)
        if i == entry.m:
            S = {v}
        else:
            S = {phi[x] for x in entry.hitting_sets[i]}
            if check_maps and not all(any(x in S for x in e) for e in N.edges):
                raise AssertionError("isomorphism map does not carry a hitting set to a hitting set")
        take(S)
    if not h.is_hitting_set(chosen):
        raise AssertionError("solver returned a set that misses an edge")
    return HittingResult(frozenset(chosen), steps, int(seed))


@dataclass(frozen=True)
class HsApproxResult:
    hitting_set: frozenset[int] | None
    success: bool
    trials: int
    r: float
    budget: int


def alpha_hs(h: Hypergraph3, k: int, alpha: float, cat: Catalog, rec: CompositeRecurrence | None = None,
             repeat_multiplier: float = 1.0, seed: int = 0, max_trials: int = 10**7) -> HsApproxResult:
    if k < 0:
        raise ValueError("k must be >= 0")
    b = math.floor(alpha * k + 1e-9)
    rec = build_recurrence_3hs(cat) if rec is None else rec
    r = float(np.exp(dp_eval(rec, b, k).log_value(b, k)))
    if r <= 0:
        return HsApproxResult(None, False, 0, 0.0, b)
    trials = math.ceil(repeat_multiplier / r)
    if trials > max_trials:
        raise ValueError(f"{trials} repetitions exceed max_trials={max_trials}")
    best = None
    for i in range(trials):
        res = three_hs_run(h, cat, trial_seed(seed, i))
        if best is None or res.size < len(best):
            best = res.hitting_set
    return HsApproxResult(best, len(best) <= b, trials, r, b)


# ---------------------------------------------------------------------------
# text format


def parse_hypergraph(text: str) -> Hypergraph3:
    """Parse ``p hs n m`` / ``e v1 [v2 [v3]]`` (1-indexed); ``c`` lines are comments."""
    n = None
    edges = []
    declared = None
    for no, raw in enumerate(text.splitlines(), start=1):
        parts = raw.split()
        if not parts or parts[0] == "c":
            continue
        if parts[0] == "p":
            if n is not None or len(parts) != 4 or parts[1] != "hs":
                raise ParseError(no, "expected a single 'p hs <n> <m>'")
            try:
                n, declared = int(parts[2]), int(parts[3])
            except ValueError:
                raise ParseError(no, "non-integer size in problem line") from None
        elif parts[0] == "e":
            if n is None:
                raise ParseError(no, "edge before problem line")
            if not 2 <= len(parts) <= 4:
                raise ParseError(no, "an edge has 1 to 3 vertices")
            try:
                e = tuple(int(x) - 1 for x in parts[1:])
            except ValueError:
                raise ParseError(no, "non-integer vertex") from None
            if len(set(e)) != len(e) or min(e) < 0 or max(e) >= n:
                raise ParseError(no, f"invalid edge {' '.join(parts[1:])}")
            edges.append(tuple(sorted(e)))
        else:
            raise ParseError(no, f"unknown line type {parts[0]!r}")
    if n is None:
        raise ParseError(0, "missing problem line")
    if declared != len(edges):
        raise ParseError(0, f"header declares {declared} edges, found {len(edges)}")
    if len(set(edges)) != len(edges):
        raise ParseError(0, "duplicate edges")
    return Hypergraph3(n, tuple(edges))


def to_hypergraph_text(h: Hypergraph3) -> str:
    lines = [f"p hs {h.n} {len(h.edges)}"] + ["e " + " ".join(str(x + 1) for x in e) for e in h.edges]
    return "\n".join(lines) + "\n"
