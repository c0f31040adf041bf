"""Undirected simple graphs and the DIMACS edge format."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable


class ParseError(ValueError):
    def __init__(self, line_no: int, msg: str):
        super().__init__(f"line {line_no}: {msg}")
        self.line_no = line_no


@dataclass(frozen=True)
class Graph:
    """Vertices ``0..n-1`` with sorted neighbor tuples."""

    n: int
    adjacency: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if len(self.adjacency) != self.n:
            raise ValueError("adjacency length differs from n")
        for v, nbrs in enumerate(self.adjacency):
            if list(nbrs) != sorted(set(nbrs)):
                raise ValueError(f"neighbors of {v} must be sorted and distinct")
            for u in nbrs:
                if u == v or not 0 <= u < self.n:
                    raise ValueError(f"bad neighbor {u} of {v}")
                if v not in self.adjacency[u]:
                    raise ValueError(f"asymmetric edge {v}-{u}")

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "Graph":
        adj: list[set[int]] = [set() for _ in range(n)]
        for u, v in edges:
            if u == v:
                raise ValueError(f"self-loop at {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge {u}-{v} out of range")
            adj[u].add(v)
            adj[v].add(u)
        return cls(n, tuple(tuple(sorted(s)) for s in adj))

    def edges(self) -> list[tuple[int, int]]:
        return [(u, v) for u in range(self.n) for v in self.adjacency[u] if u < v]

    @property
    def m(self) -> int:
        return sum(len(a) for a in self.adjacency) // 2

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    def max_degree(self) -> int:
        return max((len(a) for a in self.adjacency), default=0)

    def adj_sets(self) -> dict[int, set[int]]:
        """Mutable adjacency of the non-isolated vertices, for solvers."""
        return {v: set(a) for v, a in enumerate(self.adjacency) if a}

    def is_cover(self, cover: Iterable[int]) -> bool:
        c = set(cover)
        return all(u in c or v in c for u, v in self.edges())


def path_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def cycle_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def complete_graph(n: int) -> Graph:
    return Graph.from_edges(n, itertools.combinations(range(n), 2))


def star_graph(leaves: int) -> Graph:
    return Graph.from_edges(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


def petersen_graph() -> Graph:
    outer = [(i, (i + 1) % 5) for i in range(5)]
    spokes = [(i, i + 5) for i in range(5)]
    inner = [(5 + i, 5 + (i + 2) % 5) for i in range(5)]
    return Graph.from_edges(10, outer + spokes + inner)


def parse_dimacs(text: str) -> Graph:
    """Parse ``p edge n m`` / ``e u v`` (1-indexed); ``c`` lines are comments."""
    n = None
    declared_m = None
    edges = []
    for no, raw in enumerate(text.splitlines(), start=1):
        parts = raw.split()
        if not parts or parts[0] == "c":
            continue
        if parts[0] == "p":
            if n is not None:
                raise ParseError(no, "duplicate problem line")
            if len(parts) != 4 or parts[1] not in ("edge", "col"):
                raise ParseError(no, "expected 'p edge <n> <m>'")
            try:
                n, declared_m = int(parts[2]), int(parts[3])
            except ValueError:
                raise ParseError(no, "non-integer size in problem line") from None
        elif parts[0] == "e":
            if n is None:
                raise ParseError(no, "edge before problem line")
            if len(parts) != 3:
                raise ParseError(no, "expected 'e <u> <v>'")
            try:
                u, v = int(parts[1]) - 1, int(parts[2]) - 1
            except ValueError:
                raise ParseError(no, "non-integer vertex") from None
            if not (0 <= u < n and 0 <= v < n) or u == v:
                raise ParseError(no, f"invalid edge {parts[1]} {parts[2]}")
            edges.append((u, v))
        else:
            raise ParseError(no, f"unknown line type {parts[0]!r}")
    if n is None:
        raise ParseError(0, "missing problem line")
    g = Graph.from_edges(n, edges)
    if declared_m is not None and declared_m != len(edges):
        raise ParseError(0, f"header declares {declared_m} edges, found {len(edges)}")
    return g


def to_dimacs(g: Graph) -> str:
    lines = [f"p edge {g.n} {g.m}"] + [f"e {u + 1} {v + 1}" for u, v in g.edges()]
    return "\n".join(lines) + "\n"
