"""Independent oracles and statistical checks tying the recurrences to the solvers."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .graphs import Graph
from .hs import Catalog, Hypergraph3, three_hs_run
from .recurrence import CompositeRecurrence, dp_eval
from .rng import make_rng, trial_seed
from .vc import VcConfig, run_algorithm


@dataclass(frozen=True)
class CheckReport:
    name: str
    passed: bool
    observed: float
    bound: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"CHECK {self.name} {status} observed={self.observed:.6g} bound={self.bound:.6g}"


# ---------------------------------------------------------------------------
# exact optima


def exact_min_cover(g: Graph, max_vertices: int = 24) -> int:
    """Branch on a maximum-degree vertex: either it or its whole neighborhood is in the cover."""
    if g.n > max_vertices:
        raise ValueError(f"exact_min_cover is limited to {max_vertices} vertices")
    best = [g.n]

    def rec(adj: dict[int, frozenset[int]], size: int):
        if size >= best[0]:
            return
        live = {v: s for v, s in adj.items() if s}
        if not live:
            best[0] = size
            return
        v = max(sorted(live), key=lambda x: len(live[x]))
        for S in ({v}, set(live[v])):
            sub = {u: s - S for u, s in live.items() if u not in S}
            rec(sub, size + len(S))

    rec({v: frozenset(a) for v, a in enumerate(g.adjacency)}, 0)
    return best[0]


def exact_min_hitting_set(h: Hypergraph3, max_vertices: int = 20) -> int:
    """Branch over the vertices of the smallest remaining edge."""
    if h.n > max_vertices:
        raise ValueError(f"exact_min_hitting_set is limited to {max_vertices} vertices")
    best = [h.n]

    def rec(edges: list[tuple[int, ...]], size: int):
        if size >= best[0]:
            return
        if not edges:
            best[0] = size
            return
        e = min(edges, key=lambda x: (len(x), x))
        for v in e:
            rec([f for f in edges if v not in f], size + 1)

    rec(list(h.edges), 0)
    return best[0]


# ---------------------------------------------------------------------------
# planted instances


@dataclass(frozen=True)
class PlantedInstance:
    structure: Graph | Hypergraph3
    planted_cover: frozenset[int]
    k: int
    seed: int


def make_planted_vc(n: int, k: int, extra_edge_density: float = 0.2, seed: int = 0) -> PlantedInstance:
    """Random graph whose planted cover has ``k`` vertices and whose complement is independent.

    Every outside vertex gets up to three cover neighbors so that branching rules fire;
    further cover-incident edges are added with probability ``extra_edge_density``.
    """
    if not 0 <= k < n:
        raise ValueError("need 0 <= k < n")
    if not 0 <= extra_edge_density <= 1:
        raise ValueError("extra_edge_density must lie in [0, 1]")
    rng = make_rng(seed)
    perm = rng.permutation(n)
    cover = [int(x) for x in perm[:k]]
    outside = [int(x) for x in perm[k:]]
    edges = set()
    if k > 0:
        for v in outside:
            for u in rng.choice(cover, size=min(3, k), replace=False):
                edges.add((min(u, v), max(u, v)))
        for u, v in itertools.combinations(sorted(cover), 2):
            if rng.random() < extra_edge_density:
                edges.add((u, v))
        for u in cover:
            for v in outside:
                if rng.random() < extra_edge_density / 2:
                    edges.add((min(u, v), max(u, v)))
    g = Graph.from_edges(n, sorted(edges))
    planted = frozenset(cover)
    assert g.is_cover(planted)
    return PlantedInstance(g, planted, k, seed)


def make_planted_hs(n: int, k: int, n_edges: int, seed: int = 0) -> PlantedInstance:
    """Random 3-hypergraph in which every edge meets a planted set of ``k`` vertices."""
    if not 0 <= k < n:
        raise ValueError("need 0 <= k < n")
    if k == 0 and n_edges > 0:
        raise ValueError("no edges can be planted around an empty hitting set")
    rng = make_rng(seed)
    perm = rng.permutation(n)
    cover = [int(x) for x in perm[:k]]
    edges = set()
    attempts = 0
    while len(edges) < n_edges:
        attempts += 1
        if attempts > 100 * n_edges + 1000:
            raise ValueError("cannot place that many distinct edges")
        size = 3 if rng.random() < 0.8 else 2
        anchor = int(rng.choice(cover))
        others = rng.choice([v for v in range(n) if v != anchor], size=size - 1, replace=False)
        edges.add(tuple(sorted([anchor, *(int(x) for x in others)])))
    h = Hypergraph3(n, tuple(sorted(edges)))
    planted = frozenset(cover)
    assert h.is_hitting_set(planted)
    return PlantedInstance(h, planted, k, seed)


# ---------------------------------------------------------------------------
# statistical and asymptotic checks


def success_count(algo: str, instance: PlantedInstance, b: int, trials: int, seed: int,
                  config: VcConfig | Catalog) -> int:
    hits = 0
    for i in range(trials):
        s = trial_seed(seed, i)
        if algo == "3hs":
            size = three_hs_run(instance.structure, config, s).size
        else:
            size = run_algorithm(algo, instance.structure, config, s).size
        hits += size <= b
    return hits


def monte_carlo_bound_check(algo: str, instance: PlantedInstance, b: int, trials: int, seed: int,
                            config: VcConfig | Catalog, rec: CompositeRecurrence,
                            name: str | None = None) -> CheckReport:
    """PASS iff the success frequency is at least ``p(b, k)`` minus three standard errors."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    k = instance.k
    bound = float(np.exp(dp_eval(rec, max(b, 0), k).log_value(b, k))) if b >= 0 else 0.0
    p_hat = success_count(algo, instance, b, trials, seed, config) / trials
    slack = 3 * math.sqrt(p_hat * (1 - p_hat) / trials)
    return CheckReport(name or f"monte_carlo[{algo},k={k},b={b}]", p_hat >= bound - slack, p_hat, bound,
                       f"trials={trials} slack={slack:.3g}")


def convergence_gaps(rec: CompositeRecurrence, alpha: float, M: float, k_list: Sequence[int]) -> list[float]:
    kmax = max(k_list)
    table = dp_eval(rec, math.floor(alpha * kmax + 1e-9), kmax)
    return [abs(-table.log_value(math.floor(alpha * k + 1e-9), k) / k - M) for k in k_list]


def convergence_check(rec: CompositeRecurrence, alpha: float, M: float, k_list: Sequence[int],
                      final_tol: float = 0.03) -> CheckReport:
    """The exponent gap must shrink along ``k_list`` and end below ``final_tol``."""
    gaps = convergence_gaps(rec, alpha, M, k_list)
    monotone = all(b <= a for a, b in zip(gaps, gaps[1:]))
    return CheckReport(f"convergence[alpha={alpha}]", monotone and gaps[-1] <= final_tol, gaps[-1], final_tol,
                       "gaps=" + ",".join(f"{g:.4g}" for g in gaps))


def rules_mapping_infimum(rec: CompositeRecurrence, b: int, k: int) -> float:
    """Smallest success probability over every k-consistent choice of term per history.

    A rules mapping picks, after each history of outcomes, one term whose coverage
    does not overshoot the remaining ``k``.  Only histories of total cost below ``b``
    matter: one more step from cost ``b`` always exhausts the budget.  Every
    reachable decision tree is enumerated and its success probability summed over
    its paths.
    """
    if b > 4 or k > 4:
        raise ValueError("rules_mapping_infimum is limited to b, k <= 4")
    if len(rec.terms) > 2 or any(t.r > 2 for t in rec.terms):
        raise ValueError("rules_mapping_infimum is limited to two terms of two options")
    terms = [(t.k_max, list(zip(t.b, t.k, t.gamma))) for t in rec.terms]

    def outcomes(bb: int, kk: int) -> list[float]:
        # success probability of every distinct decision tree rooted at (bb, kk)
        if bb < 0:
            return [0.0]
        if kk <= 0:
            return [1.0]
        if bb == 0:
            return [0.0]
        values = []
        for km, opts in terms:
            if km > kk:
                continue
            children = [outcomes(bb - bi, kk - ki) for bi, ki, _ in opts]
            for combo in itertools.product(*children):
                values.append(sum(g * v for (_, _, g), v in zip(opts, combo)))
        return values

    return min(outcomes(b, k))
