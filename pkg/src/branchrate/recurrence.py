"""Composite two-variable recurrences and their exact evaluation.

A composite recurrence is a family of terms ``(b, k, gamma)``; its value is

    p(b, k) = min over terms with max(k_term) <= k of
              sum_i gamma_i * p(b - b_i, k - k_i)

with ``p(b, k) = 0`` for ``b < 0`` and ``p(b, 0) = 1`` for ``b >= 0``.
Values at realistic sizes drop far below the smallest double, so tables are
kept as natural logarithms.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

DEFAULT_CELL_CAP = 200_000_000
NAIVE_B_CAP = 12


class InvalidRecurrence(ValueError):
    pass


class TableTooLarge(MemoryError):
    pass


def as_distribution(weights: Iterable[float], tol: float = 1e-6) -> tuple[float, ...]:
    """Validate non-negative weights summing to one and renormalize them."""
    w = [float(x) for x in weights]
    if not w:
        raise ValueError("distribution must have at least one entry")
    if any(x < 0 or not math.isfinite(x) for x in w):
        raise ValueError(f"distribution entries must be finite and >= 0: {w}")
    s = math.fsum(w)
    if abs(s - 1.0) > tol:
        raise ValueError(f"distribution sums to {s}, expected 1")
    return tuple(x / s for x in w)


@dataclass(frozen=True)
class Term:
    """One branching state: option costs ``b``, coverages ``k``, probabilities ``gamma``."""

    b: tuple[int, ...]
    k: tuple[int, ...]
    gamma: tuple[float, ...]

    def __post_init__(self):
        b = tuple(int(x) for x in self.b)
        k = tuple(int(x) for x in self.k)
        if not (len(b) == len(k) == len(self.gamma)) or not b:
            raise ValueError(f"term vectors must share a positive length: {self.b}, {self.k}, {self.gamma}")
        if any(x < 1 for x in b):
            raise ValueError(f"costs must be >= 1: {b}")
        if any(x < 0 for x in k):
            raise ValueError(f"coverages must be >= 0: {k}")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "gamma", as_distribution(self.gamma))

    @property
    def r(self) -> int:
        return len(self.b)

    @property
    def k_max(self) -> int:
        return max(self.k)

    def to_dict(self) -> dict:
        return {"b": list(self.b), "k": list(self.k), "gamma": list(self.gamma)}


@dataclass(frozen=True)
class CompositeRecurrence:
    terms: tuple[Term, ...]

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))

    def __len__(self):
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    @classmethod
    def from_triples(cls, triples: Iterable[tuple[Sequence[int], Sequence[int], Sequence[float]]]):
        return cls(tuple(Term(tuple(b), tuple(k), tuple(g)) for b, k, g in triples))

    def to_json(self) -> str:
        return json.dumps({"terms": [t.to_dict() for t in self.terms]})

    @classmethod
    def from_json(cls, text: str) -> "CompositeRecurrence":
        data = json.loads(text)
        if not isinstance(data, dict) or "terms" not in data:
            raise ValueError('recurrence JSON must be an object with a "terms" list')
        return cls(tuple(Term(tuple(t["b"]), tuple(t["k"]), tuple(t["gamma"])) for t in data["terms"]))


@dataclass
class ValidationReport:
    valid: bool
    problems: list[str] = field(default_factory=list)

    def __bool__(self):
        return self.valid


def validate_recurrence(rec: CompositeRecurrence) -> ValidationReport:
    problems = []
    if len(rec.terms) == 0:
        problems.append("recurrence has no terms")
    elif not any(t.k_max <= 1 for t in rec.terms):
        problems.append("no term with all coverages <= 1; the minimum can range over an empty set at k=1")
    return ValidationReport(not problems, problems)


def cell_cap() -> int:
    raw = os.environ.get("BRANCHRATE_CELL_CAP")
    return int(float(raw)) if raw else DEFAULT_CELL_CAP


def _logsumexp_rows(a: np.ndarray) -> np.ndarray:
    # a has shape (r, n); rows that are all -inf give -inf
    m = a.max(axis=0)
    finite = np.isfinite(m)
    out = np.full(a.shape[1], -np.inf)
    if finite.any():
        mf = m[finite]
        out[finite] = mf + np.log(np.exp(a[:, finite] - mf).sum(axis=0))
    return out


class DpTable:
    """Log-probabilities ``log_p[b, k]`` for ``0 <= b <= b_max`` and ``0 <= k <= k_max``."""

    def __init__(self, log_p: np.ndarray):
        log_p = np.asarray(log_p, dtype=float)
        log_p.setflags(write=False)
        self.log_p = log_p

    @property
    def b_max(self) -> int:
        return self.log_p.shape[0] - 1

    @property
    def k_max(self) -> int:
        return self.log_p.shape[1] - 1

    def log_value(self, b: int, k: int) -> float:
        if b < 0:
            return -math.inf
        if k <= 0:
            return 0.0
        if b > self.b_max or k > self.k_max:
            raise IndexError(f"({b}, {k}) outside table {self.b_max}x{self.k_max}")
        return float(self.log_p[b, k])

    def value(self, b: int, k: int) -> float:
        return math.exp(self.log_value(b, k))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["b", "k", "log_p"])
        for b in range(self.b_max + 1):
            for k in range(self.k_max + 1):
                w.writerow([b, k, repr(float(self.log_p[b, k]))])
        return buf.getvalue()


def dp_eval(rec: CompositeRecurrence, b_max: int, k_max: int, max_cells: int | None = None) -> DpTable:
    """Fill the log-space table of ``rec`` bottom-up.

    Every option costs at least one unit of budget, so column ``b`` depends
    only on columns ``< b`` and can be computed for all ``k`` at once.
    """
    report = validate_recurrence(rec)
    if not report:
        raise InvalidRecurrence("; ".join(report.problems))
    if b_max < 0 or k_max < 0:
        raise ValueError("b_max and k_max must be >= 0")
    cap = cell_cap() if max_cells is None else max_cells
    cells = (b_max + 1) * (k_max + 1)
    if cells > cap:
        raise TableTooLarge(f"table of {cells} cells exceeds the cap of {cap} (set BRANCHRATE_CELL_CAP)")

    L = np.full((b_max + 1, k_max + 1), -np.inf)
    L[:, 0] = 0.0
    if k_max == 0:
        return DpTable(L)

    prepared = []
    for t in rec.terms:
        k_lo = max(t.k_max, 1)
        if k_lo > k_max:
            continue
        ks = np.arange(k_lo, k_max + 1)
        opts = [(bi, ks - ki, math.log(gi)) for bi, ki, gi in zip(t.b, t.k, t.gamma) if gi > 0]
        prepared.append((k_lo, opts))

    for b in range(b_max + 1):
        best = np.full(k_max + 1, np.inf)
        for k_lo, opts in prepared:
            rows = [L[b - bi, kidx] + lg for bi, kidx, lg in opts if b - bi >= 0]
            if rows:
                val = _logsumexp_rows(np.vstack(rows)) if len(rows) > 1 else rows[0]
            else:
                val = np.full(k_max + 1 - k_lo, -np.inf)
            np.minimum(best[k_lo:], val, out=best[k_lo:])
        L[b, 1:] = best[1:]
    return DpTable(L)


def naive_eval(rec: CompositeRecurrence, b: int, k: int) -> float:
    """Top-down evaluation in plain probabilities; an oracle for :func:`dp_eval`."""
    if b > NAIVE_B_CAP:
        raise ValueError(f"naive evaluation is capped at b <= {NAIVE_B_CAP}")
    terms = [(t.k_max, list(zip(t.b, t.k, t.gamma))) for t in rec.terms]
    seen: dict[tuple[int, int], float] = {}

    def p(bb: int, kk: int) -> float:
        if bb < 0:
            return 0.0
        if kk <= 0:
            return 1.0
        key = (bb, kk)
        if key in seen:
            return seen[key]
        vals = [sum(g * p(bb - bi, kk - ki) for bi, ki, g in opts) for km, opts in terms if km <= kk]
        if not vals:
            raise InvalidRecurrence(f"no applicable term at k={kk}")
        seen[key] = min(vals)
        return seen[key]

    return p(b, k)
