"""Branching numbers, composite-recurrence rates and rule-distribution optimization.

For a term ``(b, k, gamma)`` and approximation ratio ``alpha`` the branching
number is

    M = min { D(q || gamma) / (q . k) : q a distribution, q . b <= alpha * (q . k) }.

It is computed through the dual function

    G(t) = min_{mu >= 0} ln sum_i gamma_i * exp(t * k_i + mu * a_i),   a = alpha * k - b,

which is non-decreasing and convex in ``t``; ``M`` is the smallest ``t >= 0`` with
``G(t) >= 0`` and the optimal ``q`` is the tilted distribution
``q_i ~ gamma_i * exp(t * k_i + mu * a_i)``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq, linprog
from scipy.special import logsumexp

from .recurrence import CompositeRecurrence, Term, as_distribution

DEFAULT_TOL = 1e-7
CERT_CONSTRAINT_SLACK = 1e-9
CERT_VALUE_TOL = 1e-7


class ConvergenceError(RuntimeError):
    pass


class InfiniteRate(ValueError):
    pass


# ---------------------------------------------------------------------------
# divergences


def kl_divergence(c: Sequence[float], d: Sequence[float]) -> float:
    c = np.asarray(c, dtype=float)
    d = np.asarray(d, dtype=float)
    if c.shape != d.shape:
        raise ValueError(f"length mismatch: {c.shape} vs {d.shape}")
    pos = c > 0
    if np.any(d[pos] <= 0):
        return math.inf
    return float(max(0.0, np.sum(c[pos] * np.log(c[pos] / d[pos]))))


def _block_slices(blocks: Sequence[int], n: int) -> list[slice]:
    if any(int(s) < 1 for s in blocks) or sum(int(s) for s in blocks) != n:
        raise ValueError(f"block sizes {list(blocks)} do not partition a vector of length {n}")
    out, start = [], 0
    for s in blocks:
        out.append(slice(start, start + int(s)))
        start += int(s)
    return out


def extended_kl(t: Sequence[float], upsilon: Sequence[float], blocks: Sequence[int]) -> float:
    """Block divergence ``sum_i t_i ln(t_i / upsilon_i) - sum_j lam_j ln lam_j``.

    ``blocks`` lists block lengths; ``upsilon`` is a distribution inside each
    block and ``lam_j`` is the mass ``t`` puts on block ``j``.
    """
    t = np.asarray(t, dtype=float)
    u = np.asarray(upsilon, dtype=float)
    if t.shape != u.shape:
        raise ValueError(f"length mismatch: {t.shape} vs {u.shape}")
    slices = _block_slices(blocks, len(t))
    pos = t > 0
    if np.any(u[pos] <= 0):
        return math.inf
    lam = np.array([t[s].sum() for s in slices])
    lam = lam[lam > 0]
    return float(np.sum(t[pos] * np.log(t[pos] / u[pos])) - np.sum(lam * np.log(lam)))


def extended_kl_blockwise(t: Sequence[float], upsilon: Sequence[float], blocks: Sequence[int]) -> float:
    """The same quantity written as ``sum_j lam_j * D(t_j / lam_j || upsilon_j)``."""
    t = np.asarray(t, dtype=float)
    u = np.asarray(upsilon, dtype=float)
    total = 0.0
    for s in _block_slices(blocks, len(t)):
        lam = t[s].sum()
        if lam > 0:
            total += lam * kl_divergence(t[s] / lam, u[s])
    return total


# ---------------------------------------------------------------------------
# branching number of a single term


@dataclass(frozen=True)
class BranchingNumberResult:
    m: float
    q_star: tuple[float, ...] | None

    @property
    def base(self) -> float:
        return math.exp(self.m)

    @property
    def finite(self) -> bool:
        return math.isfinite(self.m)


def _inner_min(c: np.ndarray, a: np.ndarray) -> tuple[float, float]:
    """Return ``(min_{mu>=0} LSE(c + mu a), argmin)``; argmin may be ``inf``."""
    lse0 = logsumexp(c)

    def slope(mu):
        z = c + mu * a
        return float(np.dot(np.exp(z - logsumexp(z)), a))

    if slope(0.0) >= 0:
        return float(lse0), 0.0
    if not np.any(a > 0):
        zero = a == 0
        return (float(logsumexp(c[zero])) if zero.any() else -math.inf), math.inf
    hi = 1.0
    while slope(hi) < 0:
        hi *= 2.0
        if hi > 1e12:
            raise ConvergenceError("dual multiplier bracket exploded")
    mu = brentq(slope, 0.0, hi, xtol=1e-15, rtol=1e-15, maxiter=500)
    return float(logsumexp(c + mu * a)), float(mu)


def _tilt(c: np.ndarray, a: np.ndarray, mu: float) -> np.ndarray:
    if math.isinf(mu):
        z = np.where(a == 0, c, -np.inf)
    else:
        z = c + mu * a
    return np.exp(z - logsumexp(z))


def _objective(q: np.ndarray, gamma: np.ndarray, k: np.ndarray) -> float:
    return kl_divergence(q, gamma) / float(np.dot(q, k))


def alpha_branching_number(b: Sequence[int], k: Sequence[int], gamma: Sequence[float], alpha: float,
                           tol: float = DEFAULT_TOL) -> BranchingNumberResult:
    b = np.asarray(b, dtype=float)
    k = np.asarray(k, dtype=float)
    gamma = np.asarray(as_distribution(gamma))
    if not (b.shape == k.shape == gamma.shape):
        raise ValueError("b, k and gamma must share a length")
    if not np.any(k > 0):
        raise ValueError("coverage vector needs a positive entry")
    a = alpha * k - b
    supp = gamma > 0
    # a point mass on an option with a_i >= 0 is feasible; no such option means no feasible q
    if not np.any(a[supp] >= 0):
        return BranchingNumberResult(math.inf, None)
    if float(np.dot(gamma, a)) >= 0:
        return BranchingNumberResult(0.0, tuple(gamma))

    lg = np.log(gamma[supp])
    ks, as_ = k[supp], a[supp]

    def G(t):
        return _inner_min(lg + t * ks, as_)[0]

    ok = as_ >= 0
    t_hi = float(np.min(-lg[ok] / ks[ok]))
    if G(t_hi) < 0:  # only via rounding; widen slightly
        t_hi = t_hi * (1 + 1e-12) + 1e-15
    # G(0) >= 0 only through rounding once gamma itself is infeasible
    t_star = 0.0 if G(0.0) >= 0 else brentq(G, 0.0, t_hi, xtol=1e-15, rtol=1e-15, maxiter=500)
    _, mu = _inner_min(lg + t_star * ks, as_)
    q = np.zeros_like(gamma)
    q[supp] = _tilt(lg + t_star * ks, as_, mu)

    m = _objective(q, gamma, k)
    if float(np.dot(q, a)) < -CERT_CONSTRAINT_SLACK or abs(m - t_star) > max(tol, CERT_VALUE_TOL):
        raise ConvergenceError(f"certificate failed: m={m}, t={t_star}, q.a={np.dot(q, a)}")
    return BranchingNumberResult(m, tuple(float(x) for x in q))


def composite_rate(rec: CompositeRecurrence, alpha: float, tol: float = DEFAULT_TOL):
    """Return ``(M, per_term)`` with ``M`` the largest branching number over the terms."""
    per_term = [alpha_branching_number(t.b, t.k, t.gamma, alpha, tol) for t in rec.terms]
    bad = [i for i, r in enumerate(per_term) if not r.finite]
    if bad:
        raise InfiniteRate(f"terms {bad} have infinite branching number at alpha={alpha}")
    return max(r.m for r in per_term), per_term


# ---------------------------------------------------------------------------
# rules


@dataclass(frozen=True)
class RuleSpec:
    """Costs ``b`` shared by all states, coverage vectors ``states``, optional fixed ``gamma``."""

    b: tuple[int, ...]
    states: tuple[tuple[int, ...], ...]
    gamma: tuple[float, ...] | None = None
    name: str = ""

    def __post_init__(self):
        b = tuple(int(x) for x in self.b)
        states = tuple(tuple(int(x) for x in s) for s in self.states)
        if not b or any(x < 1 for x in b):
            raise ValueError(f"costs must be positive integers: {b}")
        if not states:
            raise ValueError("a rule needs at least one state")
        for s in states:
            if len(s) != len(b):
                raise ValueError(f"state {s} does not match cost length {len(b)}")
            if any(x < 0 for x in s) or not any(x >= 1 for x in s):
                raise ValueError(f"state {s} needs non-negative entries and at least one positive")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "states", states)
        if self.gamma is not None:
            g = as_distribution(self.gamma)
            if len(g) != len(b):
                raise ValueError("gamma length differs from the cost vector")
            object.__setattr__(self, "gamma", g)

    @property
    def r(self) -> int:
        return len(self.b)

    def terms(self, gamma: Sequence[float] | None = None) -> list[Term]:
        g = self.gamma if gamma is None else tuple(gamma)
        if g is None:
            raise ValueError(f"rule {self.name!r} has no gamma")
        return [Term(self.b, s, g) for s in self.states]

    def to_dict(self) -> dict:
        d = {"name": self.name, "b": list(self.b), "states": [list(s) for s in self.states]}
        if self.gamma is not None:
            d["gamma"] = list(self.gamma)
        return d


@dataclass(frozen=True)
class OptimizedRule:
    gamma_star: tuple[float, ...]
    m_star: float
    per_state_q: tuple[tuple[float, ...] | None, ...]
    degenerate: bool = False

    @property
    def base(self) -> float:
        return math.exp(self.m_star)


def evaluate_rule(rule: RuleSpec, gamma: Sequence[float], alpha: float,
                  tol: float = DEFAULT_TOL) -> list[BranchingNumberResult]:
    return [alpha_branching_number(rule.b, s, gamma, alpha, tol) for s in rule.states]


def certify_gamma(rule: RuleSpec, gamma: Sequence[float], alpha: float, tol: float = DEFAULT_TOL,
                  degenerate=False) -> OptimizedRule:
    """Evaluate a fixed distribution on every state of ``rule``."""
    gamma = as_distribution(gamma)
    res = evaluate_rule(rule, gamma, alpha, tol)
    return OptimizedRule(gamma, max(r.m for r in res), tuple(r.q_star for r in res), degenerate)


def simple_rule(b1: int, b2: int, s1: int, s2: int) -> RuleSpec:
    return RuleSpec((b1, b2), ((b1, s2), (s1, b2)))


def _boundary(own: float, other_cost: float, other_cov: float, alpha: float) -> float:
    # smallest probability of the covering option that keeps the state feasible
    return (other_cost - alpha * other_cov) / ((alpha - 1) * own + other_cost - alpha * other_cov)


def _bernoulli_kl(p: float, g: float) -> float:
    return kl_divergence((p, 1 - p), (g, 1 - g))


def optimize_simple_rule(b1: int, b2: int, s1: int, s2: int, alpha: float,
                         tol: float = DEFAULT_TOL) -> OptimizedRule:
    """Optimize a two-option, two-state rule by bisection on ``f1 - f2``.

    State one has coverage ``(b1, s2)`` and is feasible iff the probability of
    option one is at least ``c1``; state two is symmetric with ``c2`` on option two.
    """
    if not (0 <= s1 < b1 and 0 <= s2 < b2):
        raise ValueError("simple rule requires 0 <= s1 < b1 and 0 <= s2 < b2")
    if alpha <= 1:
        raise ValueError("alpha must exceed 1")
    rule = simple_rule(b1, b2, s1, s2)
    c1 = _boundary(b1, b2, s2, alpha)
    c2 = _boundary(b2, b1, s1, alpha)
    degenerate = c1 <= 0 or c2 <= 0

    def f1(g):
        if c1 <= 0 or g >= c1:
            return 0.0
        return _bernoulli_kl(c1, g) / (c1 * b1 + (1 - c1) * s2)

    def f2(g):
        if c2 <= 0 or 1 - g >= c2:
            return 0.0
        return _bernoulli_kl(c2, 1 - g) / (c2 * b2 + (1 - c2) * s1)

    grid = np.linspace(0.005, 0.995, 100)
    v1 = np.array([f1(g) for g in grid])
    v2 = np.array([f2(g) for g in grid])
    if np.any(np.diff(v1) > 1e-12) or np.any(np.diff(v2) < -1e-12):
        raise ConvergenceError("simple-rule objectives are not monotone on the probe grid")

    lo_ok, hi_ok = max(c1, 0.0), 1 - max(c2, 0.0)
    if lo_ok <= hi_ok:
        return certify_gamma(rule, (0.5 * (lo_ok + hi_ok), 1 - 0.5 * (lo_ok + hi_ok)), alpha, tol, degenerate)

    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f1(mid) > f2(mid):
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    g = 0.5 * (lo + hi)
    out = certify_gamma(rule, (g, 1 - g), alpha, tol, degenerate)
    if abs(out.m_star - max(f1(g), f2(g))) > max(tol, 1e-9):
        raise ConvergenceError("closed-form and certified branching numbers disagree")
    return out


def is_simple_rule(rule: RuleSpec) -> bool:
    if rule.r != 2 or len(rule.states) != 2:
        return False
    (b1, b2), ((c1, s2), (s1, c2)) = rule.b, rule.states
    return c1 == b1 and c2 == b2 and 0 <= s1 < b1 and 0 <= s2 < b2


def optimize_rule(rule: RuleSpec, alpha: float, tol: float = DEFAULT_TOL) -> OptimizedRule:
    """Closed-form bisection for simple rules, the generic solver otherwise."""
    if is_simple_rule(rule):
        (b1, b2), ((_, s2), (s1, _)) = rule.b, rule.states
        return optimize_simple_rule(b1, b2, s1, s2, alpha, tol)
    return optimize_rule_generic(rule, alpha, tol)


# ---------------------------------------------------------------------------
# generic rules: bisection on the target value with an LP cutting-plane feasibility test

GAMMA_FLOOR = 1e-9


def _state_dual(gamma: np.ndarray, lk: np.ndarray, a: np.ndarray) -> tuple[float, float]:
    # lk = t * k for one state; returns (min over mu of sum gamma*exp(lk + mu a), argmin mu)
    val, mu = _inner_min(np.log(gamma) + lk, a)
    return math.exp(val), mu


def _cut(lk: np.ndarray, a: np.ndarray, mu: float) -> np.ndarray:
    if math.isinf(mu):
        return np.where(a == 0, np.exp(lk), 0.0)
    return np.exp(lk + mu * a)


def _feasible_gamma(t: float, K: np.ndarray, A: np.ndarray, pool: set, max_rounds: int = 400):
    """Search for gamma with every state's branching number <= t.

    Returns ``(margin, gamma)`` where ``margin >= 0`` certifies feasibility of
    ``gamma`` and an LP upper bound ``< 0`` proves infeasibility.
    """
    h, r = K.shape
    lks = t * K
    gamma = np.full(r, 1.0 / r)
    best = (-math.inf, gamma)
    for _ in range(max_rounds):
        rows = [_cut(lks[j], A[j], mu) for j, mu in sorted(pool, key=lambda x: (x[0], x[1]))]
        # variables (gamma_1..gamma_r, s); maximize s subject to row . gamma >= 1 + s
        A_ub = np.hstack([-np.array(rows), np.ones((len(rows), 1))])
        b_ub = -np.ones(len(rows))
        res = linprog(
            c=np.r_[np.zeros(r), -1.0],
            A_ub=A_ub, b_ub=b_ub,
            A_eq=np.r_[np.ones(r), 0.0][None, :], b_eq=[1.0],
            bounds=[(GAMMA_FLOOR, 1.0)] * r + [(-1.0, 1.0)],
            method="highs",
        )
        if res.status != 0:
            raise ConvergenceError(f"LP failed: {res.message}")
        s_lp = -res.fun
        gamma = np.clip(res.x[:r], GAMMA_FLOOR, None)
        gamma /= gamma.sum()
        if s_lp < -1e-12:
            return s_lp, best[1]
        duals = [_state_dual(gamma, lks[j], A[j]) for j in range(h)]
        s_true = min(v for v, _ in duals) - 1.0
        if s_true > best[0]:
            best = (s_true, gamma.copy())
        if s_true >= 0 or s_lp - s_true < 1e-13:
            return s_true, gamma
        added = False
        for j, (v, mu) in enumerate(duals):
            if v - 1.0 < s_lp - 1e-13 and (j, mu) not in pool:
                pool.add((j, mu))
                added = True
        if not added:
            return s_true, gamma
    return best


def optimize_rule_generic(rule: RuleSpec, alpha: float, tol: float = DEFAULT_TOL,
                          max_iter: int = 200) -> OptimizedRule:
    """Minimize the largest branching number over the rule's states by choosing gamma."""
    r = rule.r
    K = np.array(rule.states, dtype=float)
    A = alpha * K - np.array(rule.b, dtype=float)
    if any(not np.any(A[j] >= 0) for j in range(len(rule.states))):
        return OptimizedRule(tuple([1.0 / r] * r), math.inf, tuple(None for _ in rule.states))

    best = certify_gamma(rule, [1.0 / r] * r, alpha, tol)
    lo, hi = 0.0, best.m_star
    # seed cuts with mu = 0 and with the multipliers of the uniform start
    pool = {(j, 0.0) for j in range(len(rule.states))}
    for j in range(len(rule.states)):
        pool.add((j, _state_dual(np.full(r, 1.0 / r), hi * K[j], A[j])[1]))
    for _ in range(max_iter):
        if hi - lo <= 0.25 * tol:
            break
        t = 0.5 * (lo + hi)
        margin, gamma = _feasible_gamma(t, K, A, pool)
        if margin >= 0:
            cand = certify_gamma(rule, gamma, alpha, tol)
            if cand.m_star < best.m_star:
                best = cand
            hi = min(t, best.m_star)
        else:
            lo = t
    else:
        raise ConvergenceError(f"bisection did not reach tol={tol}")
    return best


# ---------------------------------------------------------------------------
# rule-set I/O


def load_rule_set(text: str) -> list[RuleSpec]:
    data = json.loads(text)
    if not isinstance(data, dict) or "rules" not in data:
        raise ValueError('rule-set JSON must be an object with a "rules" list')
    return [RuleSpec(tuple(d["b"]), tuple(tuple(s) for s in d["states"]), d.get("gamma"), d.get("name", f"rule{i}"))
            for i, d in enumerate(data["rules"])]


def dump_rule_set(rules: Sequence[RuleSpec]) -> str:
    return json.dumps({"rules": [r.to_dict() for r in rules]}, indent=1)


@dataclass
class RuleRateRow:
    rule: str
    alpha: float
    result: OptimizedRule
    extra: dict = field(default_factory=dict)


def rule_rates_csv(rows: Sequence[RuleRateRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rule", "alpha", "m", "base", "gamma", "q_states"])
    for row in rows:
        res = row.result
        w.writerow([
            row.rule, f"{row.alpha:.6g}", f"{res.m_star:.12g}", f"{res.base:.12g}",
            " ".join(f"{g:.12g}" for g in res.gamma_star),
            "|".join(" ".join(f"{x:.12g}" for x in q) if q is not None else "inf" for q in res.per_state_q),
        ])
    return buf.getvalue()
