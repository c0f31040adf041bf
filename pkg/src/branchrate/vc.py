"""Randomized branching algorithms for Vertex Cover and their lower-bound recurrences.

Wherever a vertex, neighbor subset, edge or component may be chosen freely the
lowest index wins, so a run is a pure function of (graph, config, seed).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from typing import Callable

import numpy as np

from .asymptotics import DEFAULT_TOL, OptimizedRule, RuleSpec, optimize_rule
from .graphs import Graph
from .recurrence import CompositeRecurrence, Term, dp_eval
from .rng import make_rng, trial_seed

ALGORITHMS = ("vc3", "vc3star", "enhanced_vc3star", "better_vc")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration


@dataclass
class VcConfig:
    delta_cap: int = 100
    excluded_degree: int | None = None
    gamma_by_degree: dict[int, float] = field(default_factory=dict)
    lambda1: dict[int, float] = field(default_factory=dict)
    lambda2: dict[int, float] = field(default_factory=dict)
    lambda3: float | None = None
    delta3way: dict[int, tuple[float, float, float]] = field(default_factory=dict)
    rng_seed: int = 0

    def __post_init__(self):
        if self.delta_cap < 3:
            raise ConfigError("delta_cap must be at least 3")
        self.gamma_by_degree = {int(d): float(g) for d, g in self.gamma_by_degree.items()}
        self.lambda1 = {int(r): float(g) for r, g in self.lambda1.items()}
        self.lambda2 = {int(r): float(g) for r, g in self.lambda2.items()}
        self.delta3way = {int(r): tuple(float(x) for x in t) for r, t in self.delta3way.items()}
        probs = [*self.gamma_by_degree.values(), *self.lambda1.values(), *self.lambda2.values()]
        if self.lambda3 is not None:
            probs.append(self.lambda3)
        if any(not 0 < p < 1 for p in probs):
            raise ConfigError("branching probabilities must lie in (0, 1)")
        for r, t in self.delta3way.items():
            if len(t) != 3 or any(x < 0 for x in t) or abs(sum(t) - 1) > 1e-12:
                raise ConfigError(f"three-way distribution for r={r} must be 3 non-negative reals summing to 1")
        if self.excluded_degree is not None and not 2 <= self.excluded_degree < self.delta_cap:
            raise ConfigError("excluded_degree must satisfy 2 <= delta < delta_cap")

    def gamma(self, d: int) -> float:
        d = min(d, self.delta_cap)
        if d not in self.gamma_by_degree:
            raise ConfigError(f"no branching probability for degree {d}")
        return self.gamma_by_degree[d]

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1)

    @classmethod
    def from_json(cls, text: str) -> "VcConfig":
        return cls(**json.loads(text))


@dataclass(frozen=True)
class CoverResult:
    cover: frozenset[int]
    recursion_steps: int
    seed_used: int

    @property
    def size(self) -> int:
        return len(self.cover)


# ---------------------------------------------------------------------------
# working-graph helpers (dict of neighbor sets, isolated vertices dropped)


def _remove(adj: dict[int, set[int]], S) -> None:
    for v in S:
        nb = adj.pop(v, None)
        if nb is None:
            continue
        for u in nb:
            s = adj[u]
            s.discard(v)
            if not s:
                del adj[u]


def _pick_max_degree(adj, allowed: Callable[[int], bool] | None = None):
    best, bd = None, -1
    for v in sorted(adj):
        d = len(adj[v])
        if d > bd and (allowed is None or allowed(d)):
            best, bd = v, d
    return best, bd


def _component(adj, start) -> set[int]:
    seen, stack = {start}, [start]
    while stack:
        for u in adj[stack.pop()]:
            if u not in seen:
                seen.add(u)
                stack.append(u)
    return seen


def _split(adj):
    """Return (component of the lowest vertex, rest) or None if connected."""
    first = min(adj)
    comp = _component(adj, first)
    if len(comp) == len(adj):
        return None
    return {v: adj[v] for v in comp}, {v: s for v, s in adj.items() if v not in comp}


def _copy(adj):
    return {v: set(s) for v, s in adj.items()}


def _deg2_cover(adj) -> set[int]:
    cover: set[int] = set()
    seen: set[int] = set()
    for v in sorted(adj):
        if v in seen:
            continue
        comp = _component(adj, v)
        seen |= comp
        ends = sorted(u for u in comp if len(adj[u]) == 1)
        start = ends[0] if ends else min(comp)
        order, prev, cur = [start], None, start
        while True:
            nxt = [u for u in sorted(adj[cur]) if u != prev and u != start]
            if not nxt or (prev is not None and nxt[0] in order):
                break
            prev, cur = cur, nxt[0]
            order.append(cur)
        if ends:
            cover.update(order[1::2])
        else:
            cover.update(order[0::2])
    return cover


def max_deg2_exact(g: Graph) -> frozenset[int]:
    """Minimum cover of a graph whose components are paths and cycles."""
    if g.max_degree() > 2:
        raise ValueError("max_deg2_exact needs maximum degree <= 2")
    return frozenset(_deg2_cover(g.adj_sets()))


def _finish(g: Graph, cover, steps, seed) -> CoverResult:
    cover = frozenset(cover)
    if not g.is_cover(cover):
        raise AssertionError("solver returned a set that misses an edge")
    return CoverResult(cover, steps, int(seed))


# ---------------------------------------------------------------------------
# algorithms


def vc3_run(g: Graph, gamma: float, seed: int) -> CoverResult:
    if not 0 < gamma < 1:
        raise ConfigError("gamma must lie in (0, 1)")
    rng = make_rng(seed)
    adj = g.adj_sets()
    cover, steps = set(), 0
    while True:
        steps += 1
        v, d = _pick_max_degree(adj)
        if v is None or d <= 2:
            break
        S = {v} if rng.random() < gamma else set(sorted(adj[v])[:3])
        cover |= S
        _remove(adj, S)
    cover |= _deg2_cover(adj)
    return _finish(g, cover, steps, seed)


def vc3star_run(g: Graph, cfg: VcConfig, seed: int) -> CoverResult:
    rng = make_rng(seed)
    adj = g.adj_sets()
    cover, steps = set(), 0
    while True:
        steps += 1
        v, d = _pick_max_degree(adj)
        if v is None or d <= 2:
            break
        if rng.random() < cfg.gamma(d):
            S = {v}
        else:
            S = set(sorted(adj[v])[:cfg.delta_cap])
        cover |= S
        _remove(adj, S)
    cover |= _deg2_cover(adj)
    return _finish(g, cover, steps, seed)


class _Counter:
    def __init__(self):
        self.steps = 0


def _enhanced(adj, cfg: VcConfig, rng, ctr: _Counter) -> set[int]:
    delta = cfg.excluded_degree
    cover: set[int] = set()
    while adj:
        ctr.steps += 1
        parts = _split(adj)
        if parts is not None:
            comp, adj = parts
            cover |= _enhanced(comp, cfg, rng, ctr)
            continue
        leaf = next((v for v in sorted(adj) if len(adj[v]) == 1), None)
        if leaf is not None:
            S = set(adj[leaf])
        else:
            v, d = _pick_max_degree(adj, lambda d: d != delta)
            if v is None:
                return cover | _two_branch(adj, lambda a: _enhanced(a, cfg, rng, ctr))
            S = {v} if rng.random() < cfg.gamma(d) else set(sorted(adj[v])[:cfg.delta_cap])
        cover |= S
        _remove(adj, S)
    return cover


def _two_branch(adj, solve) -> set[int]:
    v1 = min(adj)
    v2 = min(adj[v1])
    out = []
    for x in (v1, v2):
        sub = _copy(adj)
        _remove(sub, [x])
        out.append(solve(sub) | {x})
    return out[0] if len(out[0]) <= len(out[1]) else out[1]


def enhanced_vc3star_run(g: Graph, cfg: VcConfig, seed: int) -> CoverResult:
    if cfg.excluded_degree is None:
        raise ConfigError("excluded_degree must be set")
    rng = make_rng(seed)
    ctr = _Counter()
    cover = _enhanced(g.adj_sets(), cfg, rng, ctr)
    return _finish(g, cover, ctr.steps, seed)


def _deg3_case(adj, v):
    """First applicable degree-3 case for ``v`` as (kind, branch sets, key) or None."""
    x0, y0, z0 = sorted(adj[v])
    nv = adj[v]
    for x, y, z in ((x0, y0, z0), (x0, z0, y0), (y0, z0, x0)):
        if y in adj[x]:
            return "adjacent", (set(nv), set(adj[z])), len(adj[z])
    closed = nv | {v}
    for x, y in ((x0, y0), (x0, z0), (y0, z0)):
        common = (adj[x] & adj[y]) - closed
        if common:
            return "common", (set(nv), {v, min(common)}), None
    for x in (x0, y0, z0):
        if len(adj[x]) == 4:
            y, z = sorted(nv - {x})
            ny_nz = adj[y] | adj[z]
            return "three_way", (set(nv), set(adj[x]), {x} | ny_nz), len(ny_nz)
    return None


def _better(adj, cfg: VcConfig, rng, ctr: _Counter) -> set[int]:
    cover: set[int] = set()
    while adj:
        ctr.steps += 1
        parts = _split(adj)
        if parts is not None:
            comp, adj = parts
            cover |= _better(comp, cfg, rng, ctr)
            continue
        degs = {v: len(s) for v, s in adj.items()}
        leaf = next((v for v in sorted(adj) if degs[v] == 1), None)
        if leaf is not None:
            S = set(adj[leaf])
        else:
            v, d = _pick_max_degree(adj)
            if d >= 5:
                S = {v} if rng.random() < cfg.gamma(d) else set(sorted(adj[v])[:cfg.delta_cap])
            elif len(set(degs.values())) == 1:
                return cover | _two_branch(adj, lambda a: _better(a, cfg, rng, ctr))
            else:
                S = _better_small_degree(adj, degs, cfg, rng)
        cover |= S
        _remove(adj, S)
    return cover


def _better_small_degree(adj, degs, cfg: VcConfig, rng) -> set[int]:
    v = next((u for u in sorted(adj) if degs[u] == 2), None)
    if v is not None:
        x, y = sorted(adj[v])
        if y in adj[x]:
            return {x, y}
        if degs[x] == degs[y] == 2 and adj[x] == adj[y]:
            (z,) = adj[x] - {v}
            return {z, v}
        nxy = adj[x] | adj[y]
        lam = _need(cfg.lambda1, len(nxy), "lambda1")
        return set(adj[v]) if rng.random() < lam else set(nxy)
    for v in sorted(adj):
        if degs[v] != 3:
            continue
        case = _deg3_case(adj, v)
        if case is None:
            continue
        kind, sets, r = case
        if kind == "adjacent":
            lam = _need(cfg.lambda2, r, "lambda2")
            return sets[0] if rng.random() < lam else sets[1]
        if kind == "common":
            if cfg.lambda3 is None:
                raise ConfigError("lambda3 is not configured")
            return sets[0] if rng.random() < cfg.lambda3 else sets[1]
        probs = _need(cfg.delta3way, r, "delta3way")
        u = rng.random()
        return sets[0] if u < probs[0] else sets[1] if u < probs[0] + probs[1] else sets[2]
    raise AssertionError("no branching case applies; the case analysis should be exhaustive")


def _need(table, key, name):
    if key not in table:
        raise ConfigError(f"{name}[{key}] is not configured")
    return table[key]


def better_vc_run(g: Graph, cfg: VcConfig, seed: int) -> CoverResult:
    rng = make_rng(seed)
    ctr = _Counter()
    cover = _better(g.adj_sets(), cfg, rng, ctr)
    return _finish(g, cover, ctr.steps, seed)


def run_algorithm(algo: str, g: Graph, cfg: VcConfig, seed: int) -> CoverResult:
    if algo == "vc3":
        return vc3_run(g, cfg.gamma(3), seed)
    if algo == "vc3star":
        return vc3star_run(g, cfg, seed)
    if algo == "enhanced_vc3star":
        return enhanced_vc3star_run(g, cfg, seed)
    if algo == "better_vc":
        return better_vc_run(g, cfg, seed)
    raise ValueError(f"unknown algorithm {algo!r}; expected one of {ALGORITHMS}")


# ---------------------------------------------------------------------------
# rules and recurrences


def _two(b, states, g, name="") -> RuleSpec:
    return RuleSpec(b, states, (g, 1 - g) if g is not None else None, name)


def degree_rule(d: int, delta_cap: int, gamma: float | None = None) -> RuleSpec:
    """Branch on a degree-``d`` vertex: select it, or select its (capped) neighborhood."""
    if d >= delta_cap:
        return _two((1, delta_cap), ((1, 0), (0, delta_cap)), gamma, f"gamma_{delta_cap}")
    return _two((1, d), ((1, 1), (0, d)), gamma, f"gamma_{d}")


def better_vc_rules(cfg: VcConfig | None = None) -> list[RuleSpec]:
    """Every randomized rule of the improved algorithm (deterministic rows excluded)."""
    cap = 100 if cfg is None else cfg.delta_cap
    get = (lambda t, k: None) if cfg is None else (lambda t, k: t.get(k))
    rules = [degree_rule(d, cap, None if cfg is None else cfg.gamma_by_degree.get(d)) for d in range(5, cap + 1)]
    rules += [_two((2, r), ((2, 2), (1, r)), get(cfg.lambda1 if cfg else {}, r), f"lambda1_{r}") for r in range(3, 8)]
    rules += [_two((3, r), ((3, 1), (1, r)), get(cfg.lambda2 if cfg else {}, r), f"lambda2_{r}") for r in (3, 4)]
    rules.append(_two((3, 2), ((3, 0), (1, 2)), None if cfg is None else cfg.lambda3, "lambda3"))
    for r in (5, 6, 7):
        states = ((3, 1, 3), (1, 4, r), (2, 4, 1 + math.ceil(r / 2)), (2, 2, r + 1))
        g3 = None if cfg is None else cfg.delta3way.get(r)
        rules.append(RuleSpec((3, 4, r + 1), states, g3, f"delta_{r}"))
    return rules


def build_recurrence(algo: str, cfg: VcConfig) -> CompositeRecurrence:
    cap = cfg.delta_cap

    def deg_terms(d):
        return degree_rule(d, cap, cfg.gamma(d)).terms()

    if algo == "vc3":
        g = cfg.gamma(3)
        return CompositeRecurrence.from_triples([((1, 3), (1, 0), (g, 1 - g)), ((1, 3), (0, 3), (g, 1 - g))])
    if algo == "vc3star":
        return CompositeRecurrence(tuple(t for d in range(3, cap + 1) for t in deg_terms(d)))
    if algo == "enhanced_vc3star":
        delta = cfg.excluded_degree
        if delta is None:
            raise ConfigError("excluded_degree must be set")
        terms = [t for d in range(2, cap + 1) if d != delta for t in deg_terms(d)]
        return CompositeRecurrence(tuple(terms) + (Term((1,), (1,), (1.0,)),))
    if algo == "better_vc":
        terms = [Term((1,), (1,), (1.0,)), Term((2,), (2,), (1.0,))]
        for rule in better_vc_rules(cfg):
            if rule.gamma is None:
                raise ConfigError(f"rule {rule.name} is not configured")
            terms += rule.terms()
        return CompositeRecurrence(tuple(terms))
    raise ValueError(f"unknown algorithm {algo!r}")


# ---------------------------------------------------------------------------
# optimized configurations


@dataclass
class TunedConfig:
    config: VcConfig
    m: float
    worst_rule: str
    rules: dict[str, OptimizedRule]

    @property
    def base(self) -> float:
        return math.exp(self.m)


def _tuned(cfg, results: dict[str, OptimizedRule]) -> TunedConfig:
    worst = max(results, key=lambda n: (results[n].m_star, n))
    return TunedConfig(cfg, results[worst].m_star, worst, results)


def degree_rates(alpha: float, delta_cap: int = 100, degrees=None, tol: float = DEFAULT_TOL) -> dict[int, OptimizedRule]:
    degrees = range(2, delta_cap + 1) if degrees is None else degrees
    return {d: optimize_rule(degree_rule(d, delta_cap), alpha, tol) for d in degrees}


@dataclass(frozen=True)
class ExcludedDegree:
    delta: int | None
    m: float
    per_degree: dict[int, float]

    @property
    def base(self) -> float:
        return math.exp(self.m)


def choose_excluded_degree(alpha: float, delta_cap: int = 100, tol: float = DEFAULT_TOL) -> ExcludedDegree:
    """Pick the degree whose rule is worst; the rate is then the worst of the others.

    Ties go to the lowest degree.  If the capped-degree rule is the worst it cannot
    be excluded, ``delta`` is ``None`` and the rate is the overall maximum.
    """
    if alpha <= 1:
        raise ValueError("alpha must exceed 1")
    ms = {d: r.m_star for d, r in degree_rates(alpha, delta_cap, tol=tol).items()}
    top = max(ms.values())
    worst = min(d for d, m in ms.items() if m == top)
    if worst == delta_cap:
        return ExcludedDegree(None, top, ms)
    return ExcludedDegree(worst, max(m for d, m in ms.items() if d != worst), ms)


def tune_config(algo: str, alpha: float, delta_cap: int = 100, tol: float = DEFAULT_TOL) -> TunedConfig:
    """Optimize every rule of ``algo`` independently and assemble its configuration."""
    if algo == "vc3":
        res = optimize_rule(_two((1, 3), ((1, 0), (0, 3)), None), alpha, tol)
        return _tuned(VcConfig(delta_cap=max(delta_cap, 3), gamma_by_degree={3: res.gamma_star[0]}), {"gamma_3": res})
    if algo in ("vc3star", "enhanced_vc3star"):
        lo = 3 if algo == "vc3star" else 2
        per = degree_rates(alpha, delta_cap, range(lo, delta_cap + 1), tol)
        delta = None
        if algo == "enhanced_vc3star":
            delta = choose_excluded_degree(alpha, delta_cap, tol).delta
            if delta is None:
                raise ConfigError("the capped-degree rule is the worst; no degree can be excluded")
            per.pop(delta)
        cfg = VcConfig(delta_cap=delta_cap, excluded_degree=delta,
                       gamma_by_degree={d: r.gamma_star[0] for d, r in per.items()})
        return _tuned(cfg, {f"gamma_{d}": r for d, r in per.items()})
    if algo == "better_vc":
        results = {}
        for rule in better_vc_rules(VcConfig(delta_cap=delta_cap)):
            results[rule.name] = optimize_rule(rule, alpha, tol)
        cfg = VcConfig(
            delta_cap=delta_cap,
            gamma_by_degree={d: results[f"gamma_{d}"].gamma_star[0] for d in range(5, delta_cap + 1)},
            lambda1={r: results[f"lambda1_{r}"].gamma_star[0] for r in range(3, 8)},
            lambda2={r: results[f"lambda2_{r}"].gamma_star[0] for r in (3, 4)},
            lambda3=results["lambda3"].gamma_star[0],
            delta3way={r: _fix_sum(results[f"delta_{r}"].gamma_star) for r in (5, 6, 7)},
        )
        return _tuned(cfg, results)
    raise ValueError(f"unknown algorithm {algo!r}")


def _fix_sum(g) -> tuple[float, float, float]:
    a, b = float(g[0]), float(g[1])
    return (a, b, max(0.0, 1.0 - a - b))


# ---------------------------------------------------------------------------
# repetition wrapper


@dataclass(frozen=True)
class ApproxResult:
    cover: frozenset[int] | None
    success: bool
    trials: int
    r: float
    budget: int


def budget_for(alpha: float, k: int) -> int:
    return math.floor(alpha * k + 1e-9)


def repetitions(r: float, repeat_multiplier: float) -> int:
    return math.ceil(repeat_multiplier / r)


def alpha_approx(g: Graph, k: int, alpha: float, algo: str, cfg: VcConfig, rec: CompositeRecurrence | None = None,
                 repeat_multiplier: float = 1.0, seed: int = 0, max_trials: int = 10**7) -> ApproxResult:
    """Repeat ``algo`` about ``1/p(floor(alpha k), k)`` times and keep the smallest cover."""
    if k < 0:
        raise ValueError("k must be >= 0")
    b = budget_for(alpha, k)
    rec = build_recurrence(algo, cfg) if rec is None else rec
    r = float(np.exp(dp_eval(rec, b, k).log_value(b, k)))
    if r <= 0:
        return ApproxResult(None, False, 0, 0.0, b)
    trials = repetitions(r, repeat_multiplier)
    if trials > max_trials:
        raise ValueError(f"{trials} repetitions exceed max_trials={max_trials}")
    best = None
    for i in range(trials):
        res = run_algorithm(algo, g, cfg, trial_seed(seed, i))
        if best is None or res.size < len(best):
            best = res.cover
    return ApproxResult(best, len(best) <= b, trials, r, b)
