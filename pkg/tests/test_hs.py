"""3-Hitting Set: small hypergraphs, the catalog, the solver and its recurrence."""

import itertools
import math
from collections import Counter

import numpy as np
import pytest

from branchrate.asymptotics import composite_rate
from branchrate.graphs import ParseError
from branchrate.hs import (
    Catalog,
    CatalogMiss,
    Hypergraph3,
    SmallHypergraph,
    alpha_hs,
    build_recurrence_3hs,
    canonical_form,
    canonical_labeling,
    entry_rule,
    generate_catalog,
    induced_graph,
    minimal_hitting_sets,
    neighbors_graph,
    optimize_catalog_gammas,
    parse_hypergraph,
    three_hs_run,
    to_hypergraph_text,
)
from branchrate.recurrence import Term
from branchrate.verify import make_planted_hs


def relabel(edges):
    verts = sorted({x for e in edges for x in e})
    pos = {v: i for i, v in enumerate(verts)}
    return len(verts), tuple(sorted(tuple(sorted(pos[x] for x in e)) for e in edges))


def isomorphic(a, b):
    """Permutation test on graphs already relabeled to 0..n-1."""
    (na, ea), (nb, eb) = a, b
    if na != nb or len(ea) != len(eb) or Counter(map(len, ea)) != Counter(map(len, eb)):
        return False
    target = set(eb)
    for perm in itertools.permutations(range(na)):
        if {tuple(sorted(perm[x] for x in e)) for e in ea} == target:
            return True
    return False


def labeled_small_hypergraphs(delta):
    """Every edge set of size 1..delta over vertices 0..2*delta-1."""
    verts = range(2 * delta)
    pool = [(v,) for v in verts] + list(itertools.combinations(verts, 2))
    for m in range(1, delta + 1):
        yield from itertools.combinations(pool, m)


def brute_minimal(edges, n):
    hits = [s for s in itertools.product((0, 1), repeat=n)
            if all(any(s[x] for x in e) for e in edges)]
    hit_set = set(hits)
    out = []
    for s in hits:
        if all(tuple(0 if j == i else s[j] for j in range(n)) not in hit_set for i in range(n) if s[i]):
            out.append(tuple(i for i in range(n) if s[i]))
    return sorted(out)


class TestTypes:
    def test_hypergraph_validation(self):
        with pytest.raises(ValueError):
            Hypergraph3(3, ((0, 1, 2, 2),))
        with pytest.raises(ValueError):
            Hypergraph3(3, ((0, 3),))
        with pytest.raises(ValueError):
            Hypergraph3(3, ((0, 1), (1, 0)))
        with pytest.raises(ValueError):
            Hypergraph3(4, ((0, 1, 2, 3),))

    def test_small_validation(self):
        with pytest.raises(ValueError):
            SmallHypergraph(((0, 1, 2),))
        with pytest.raises(ValueError):
            SmallHypergraph(((0,), (0,)))

    def test_text_round_trip(self):
        h = Hypergraph3(5, ((0, 1, 2), (3,), (1, 4)))
        assert parse_hypergraph(to_hypergraph_text(h)) == h

    @pytest.mark.parametrize("text,line", [
        ("p hs 3 1\ne 1 2 3 1\n", 2),
        ("p hs 3 1\ne 1 z\n", 2),
        ("e 1\n", 1),
        ("p hs 3 1\ne 1 4\n", 2),
    ])
    def test_parse_errors(self, text, line):
        with pytest.raises(ParseError) as err:
            parse_hypergraph(text)
        assert err.value.line_no == line


class TestNeighborsGraph:
    def test_figure_instance(self):
        # v1 lies in {v1,v2,v3} and {v1,v4}; other edges avoid it
        h = Hypergraph3(6, ((0, 1, 2), (0, 3), (2, 4, 5), (1, 5)))
        assert neighbors_graph(h, 0).edges == ((1, 2), (3,))

    def test_single_edge(self):
        h = Hypergraph3(3, ((0, 1, 2),))
        assert neighbors_graph(h, 0).edges == ((1, 2),)

    def test_pair_and_triple(self):
        h = Hypergraph3(3, ((0, 1), (0, 1, 2)))
        ng = neighbors_graph(h, 0)
        assert ng.edges == ((1,), (1, 2))
        assert ng.vertices == (1, 2)

    def test_induced_identity(self):
        h = Hypergraph3(6, ((0, 1, 2), (0, 3), (0, 4, 5), (1, 5)))
        assert induced_graph(h, 0, h.incident(0)) == neighbors_graph(h, 0)
        assert induced_graph(h, 0, [(0, 1, 2)]).edges == ((1, 2),)

    def test_induced_capped(self):
        edges = tuple((0, i) for i in range(1, 10))
        h = Hypergraph3(10, edges)
        g = induced_graph(h, 0, h.incident(0)[:7])
        assert g.size == 7

    def test_errors(self):
        h = Hypergraph3(4, ((0,), (1, 2)))
        with pytest.raises(ValueError):
            neighbors_graph(h, 3)
        with pytest.raises(ValueError):
            neighbors_graph(h, 0)
        with pytest.raises(ValueError):
            induced_graph(h, 0, [(1, 2)])


class TestCanonicalForm:
    def test_permutation_invariant(self):
        rng = np.random.default_rng(0)
        g = SmallHypergraph(((0, 1), (1, 2), (2,), (3, 4), (0, 4)))
        key = canonical_form(g)
        for _ in range(30):
            p = rng.permutation(8)
            h = SmallHypergraph(tuple(tuple(int(p[x]) for x in e) for e in g.edges))
            assert canonical_form(h) == key

    def test_distinguishes(self):
        assert canonical_form(SmallHypergraph(((1, 2),))) != canonical_form(SmallHypergraph(((1,),)))

    def test_labeling_maps_to_input(self):
        g = SmallHypergraph(((3, 7), (7,), (5, 3)))
        (n, edges), phi = canonical_labeling(g)
        assert {tuple(sorted(phi[x] for x in e)) for e in edges} == set(g.edges)

    def test_two_edge_classes_match_oracle(self):
        graphs = [relabel(e) for e in labeled_small_hypergraphs(2) if len(e) == 2]
        classes = []
        for g in graphs:
            if not any(isomorphic(g, c) for c in classes):
                classes.append(g)
        keys = {canonical_form(SmallHypergraph(g[1])) for g in graphs}
        assert len(keys) == len(classes)


class TestCatalog:
    def test_delta_one(self):
        cat = generate_catalog(1)
        assert len(cat.entries) == 2
        assert sorted(e.m for e in cat.entries) == [1, 2]

    def test_triangle(self):
        assert minimal_hitting_sets([(0, 1), (0, 2), (1, 2)], 3) == [(0, 1), (0, 2), (1, 2)]

    @pytest.mark.parametrize("delta", [1, 2, 3])
    def test_complete_and_non_redundant(self, delta):
        cat = generate_catalog(delta)
        keys = [e.key for e in cat.entries]
        assert len(set(keys)) == len(keys)
        # independent class count over every labeled instance
        reps = {}
        for edges in labeled_small_hypergraphs(delta):
            g = relabel(edges)
            key = canonical_form(SmallHypergraph(edges))
            assert key in cat.lookup
            if key in reps:
                assert isomorphic(g, reps[key])
            else:
                assert not any(isomorphic(g, r) for r in reps.values())
                reps[key] = g
        assert set(reps) == set(keys)

    def test_counts(self):
        assert [len(generate_catalog(d).entries) for d in (1, 2, 3)] == [2, 7, 21]

    @pytest.mark.parametrize("delta", [2, 3])
    def test_hitting_sets_exact(self, delta):
        for e in generate_catalog(delta).entries:
            assert sorted(e.hitting_sets) == brute_minimal(e.edges, e.n)

    def test_cap(self):
        with pytest.raises(ValueError):
            generate_catalog(8)
        with pytest.raises(ValueError):
            generate_catalog(0)

    def test_json_round_trip(self, catalog3):
        back = Catalog.from_json(catalog3.to_json())
        assert back.entries == catalog3.entries
        assert back.lookup == catalog3.lookup

    def test_miss(self):
        with pytest.raises(CatalogMiss):
            generate_catalog(1).find((5, ((0, 1),)))


class TestRecurrence:
    def test_pair_entry_states(self):
        cat = generate_catalog(1)
        pair = next(e for e in cat.entries if e.edges == ((0, 1),))
        rule = entry_rule(pair, 1)
        assert rule.b == (1, 1, 1)
        assert rule.states[0] == (1, 0, 0)
        assert rule.states[1] == (0, 1, 0)
        # the entry is full (one edge, delta one) so the indicator is 0
        assert rule.states[2] == (0, 0, 1)

    def test_indicator_below_delta(self):
        cat = generate_catalog(2)
        e = next(x for x in cat.entries if x.size == 1 and x.n == 2)
        assert entry_rule(e, 2).states[-1] == (1, 1, 1)

    def test_standalone_term_once(self, catalog3):
        rec = build_recurrence_3hs(catalog3)
        assert rec.terms.count(Term((1,), (1,), (1.0,))) == 1

    def test_needs_gamma(self):
        with pytest.raises(ValueError):
            build_recurrence_3hs(generate_catalog(2))

    def test_optimizer_matches_composite(self):
        opt = optimize_catalog_gammas(generate_catalog(2), 2.0)
        assert math.isfinite(opt.m)
        M, _ = composite_rate(build_recurrence_3hs(opt.catalog), 2.0)
        assert M == pytest.approx(opt.m, abs=1e-4)

    def test_free_entry_is_zero(self):
        # a lone singleton leaves no choice at alpha 2: v or the singleton both cost 1
        cat = generate_catalog(1)
        single = next(i for i, e in enumerate(cat.entries) if e.edges == ((0,),))
        opt = optimize_catalog_gammas(cat, 2.0)
        assert opt.per_entry[single].m_star == pytest.approx(0, abs=1e-7)

    @pytest.mark.full
    def test_delta_seven(self):
        opt = optimize_catalog_gammas(generate_catalog(7), 2.0)
        assert opt.base == pytest.approx(1.0659, abs=2e-3)


class TestSolver:
    def test_singleton_forced(self, catalog3):
        h = Hypergraph3(4, ((2,), (0, 1, 3)))
        for s in range(10):
            assert 2 in three_hs_run(h, catalog3, s).hitting_set

    def test_single_edge(self, catalog3):
        h = Hypergraph3(3, ((0, 1, 2),))
        for s in range(20):
            res = three_hs_run(h, catalog3, s, check_maps=True)
            assert h.is_hitting_set(res.hitting_set) and res.size <= 2

    def test_random_instances(self, catalog3):
        rng = np.random.default_rng(4)
        for t in range(40):
            n = int(rng.integers(4, 25))
            edges = {tuple(sorted(int(x) for x in rng.choice(n, size=int(rng.integers(1, 4)), replace=False)))
                     for _ in range(int(rng.integers(1, 3 * n)))}
            h = Hypergraph3(n, tuple(edges))
            a = three_hs_run(h, catalog3, t, check_maps=True)
            assert h.is_hitting_set(a.hitting_set)
            assert a == three_hs_run(h, catalog3, t)

    def test_high_degree_uses_capped_subgraph(self, catalog3):
        h = Hypergraph3(10, tuple((0, i) for i in range(1, 10)))
        res = three_hs_run(h, catalog3, 1, check_maps=True)
        assert h.is_hitting_set(res.hitting_set)

    def test_missing_gamma(self):
        with pytest.raises(ValueError):
            three_hs_run(Hypergraph3(3, ((0, 1, 2),)), generate_catalog(2), 0)


class TestAlphaHs:
    def test_edgeless(self, catalog3):
        res = alpha_hs(Hypergraph3(3, ()), 0, 2.0, catalog3)
        assert res.success and res.hitting_set == frozenset()

    def test_certain_failure(self, catalog3):
        res = alpha_hs(Hypergraph3(3, ((0,), (1,), (2,))), 0, 2.0, catalog3)
        assert not res.success

    @pytest.mark.slow
    def test_meta_runs(self, catalog3):
        inst = make_planted_hs(20, 10, 30, seed=2)
        rec = build_recurrence_3hs(catalog3)
        wins = sum(alpha_hs(inst.structure, 10, 2.0, catalog3, rec, seed=s).success for s in range(200))
        assert wins / 200 >= 0.5
