"""Oracles, planted instances and the statistical checks."""

import itertools
import math

import numpy as np
import pytest

from branchrate.asymptotics import composite_rate
from branchrate.graphs import Graph, complete_graph, cycle_graph
from branchrate.hs import Hypergraph3
from branchrate.recurrence import CompositeRecurrence, Term, dp_eval, naive_eval
from branchrate.verify import (
    CheckReport,
    PlantedInstance,
    convergence_check,
    convergence_gaps,
    exact_min_cover,
    exact_min_hitting_set,
    make_planted_hs,
    make_planted_vc,
    monte_carlo_bound_check,
    rules_mapping_infimum,
    success_count,
)


def subset_min_cover(g):
    for size in range(g.n + 1):
        for c in itertools.combinations(range(g.n), size):
            if g.is_cover(c):
                return size


def subset_min_hitting(h):
    for size in range(h.n + 1):
        for c in itertools.combinations(range(h.n), size):
            if h.is_hitting_set(c):
                return size


def small_rec(rng):
    terms = []
    for j in range(int(rng.integers(1, 3))):
        r = int(rng.integers(1, 3))
        b = rng.integers(1, 4, size=r)
        k = rng.integers(0, 2 if j == 0 else 4, size=r)
        if k.max() == 0:
            k[0] = 1
        terms.append(Term(tuple(int(x) for x in b), tuple(int(x) for x in k), tuple(rng.dirichlet(np.ones(r)))))
    return CompositeRecurrence(tuple(terms))


class TestExact:
    def test_cover_examples(self):
        assert exact_min_cover(cycle_graph(5)) == 3
        assert exact_min_cover(complete_graph(4)) == 3
        assert exact_min_cover(Graph.from_edges(6, [])) == 0

    def test_cover_against_subsets(self):
        rng = np.random.default_rng(0)
        for _ in range(30):
            n = int(rng.integers(2, 11))
            edges = [e for e in itertools.combinations(range(n), 2) if rng.random() < 0.35]
            g = Graph.from_edges(n, edges)
            assert exact_min_cover(g) == subset_min_cover(g)

    def test_hitting_examples(self):
        assert exact_min_hitting_set(Hypergraph3(3, ((0, 1, 2),))) == 1
        assert exact_min_hitting_set(Hypergraph3(9, ((0, 1, 2), (3, 4, 5), (6, 7, 8)))) == 3
        fig = Hypergraph3(6, ((0, 1, 2), (0, 3), (2, 4, 5), (1, 5)))
        assert exact_min_hitting_set(fig) == subset_min_hitting(fig)

    def test_hitting_against_subsets(self):
        rng = np.random.default_rng(1)
        for _ in range(30):
            n = int(rng.integers(3, 11))
            edges = {tuple(sorted(int(x) for x in rng.choice(n, size=int(rng.integers(1, 4)), replace=False)))
                     for _ in range(int(rng.integers(1, 2 * n)))}
            h = Hypergraph3(n, tuple(edges))
            assert exact_min_hitting_set(h) == subset_min_hitting(h)

    def test_caps(self):
        with pytest.raises(ValueError):
            exact_min_cover(Graph.from_edges(25, []))
        with pytest.raises(ValueError):
            exact_min_hitting_set(Hypergraph3(21, ()))


class TestPlanted:
    def test_k_zero(self):
        assert make_planted_vc(10, 0, seed=1).structure.m == 0

    def test_k_one(self):
        inst = make_planted_vc(6, 1, seed=2)
        assert exact_min_cover(inst.structure) == 1

    def test_oracle(self):
        inst = make_planted_vc(30, 8, seed=3)
        assert exact_min_cover(inst.structure, max_vertices=30) <= 8

    @pytest.mark.parametrize("seed", range(5))
    def test_invariants(self, seed):
        inst = make_planted_vc(20, 6, 0.3, seed)
        g = inst.structure
        assert len(inst.planted_cover) == 6 and g.is_cover(inst.planted_cover)
        outside = set(range(20)) - inst.planted_cover
        assert all(not (u in outside and v in outside) for u, v in g.edges())
        h = make_planted_hs(15, 5, 25, seed).structure
        assert len(h.edges) == 25
        assert h.is_hitting_set(make_planted_hs(15, 5, 25, seed).planted_cover)

    def test_reproducible(self):
        assert make_planted_vc(25, 7, seed=9) == make_planted_vc(25, 7, seed=9)
        assert make_planted_hs(15, 5, 20, seed=9) == make_planted_hs(15, 5, 20, seed=9)

    def test_bad_parameters(self):
        with pytest.raises(ValueError):
            make_planted_vc(5, 5)
        with pytest.raises(ValueError):
            make_planted_vc(5, 2, extra_edge_density=1.5)
        with pytest.raises(ValueError):
            make_planted_hs(5, 0, 3)


class TestMonteCarlo:
    def test_large_budget(self, tuned_vc):
        cfg, rec = tuned_vc["vc3"]
        inst = make_planted_vc(20, 6, seed=4)
        rep = monte_carlo_bound_check("vc3", inst, 20, 200, 0, cfg, rec)
        assert rep.observed == 1.0 and rep.passed

    def test_budget_below_optimum(self, tuned_vc):
        cfg, rec = tuned_vc["vc3"]
        inst = PlantedInstance(complete_graph(5), frozenset(range(4)), 4, 0)
        rep = monte_carlo_bound_check("vc3", inst, 3, 200, 0, cfg, rec)
        assert rep.bound == 0.0 and rep.observed == 0.0 and rep.passed

    @pytest.mark.slow
    def test_vc3_planted(self, tuned_vc):
        cfg, rec = tuned_vc["vc3"]
        inst = make_planted_vc(30, 10, seed=7)
        rep = monte_carlo_bound_check("vc3", inst, 15, 20000, 1, cfg, rec)
        assert rep.passed, rep.line()

    def test_zero_trials(self, tuned_vc):
        cfg, rec = tuned_vc["vc3"]
        with pytest.raises(ValueError):
            monte_carlo_bound_check("vc3", make_planted_vc(10, 3), 4, 0, 0, cfg, rec)

    def test_reproducible(self, tuned_vc):
        cfg, _ = tuned_vc["vc3star"]
        inst = make_planted_vc(24, 8, seed=3)
        assert success_count("vc3star", inst, 12, 300, 5, cfg) == success_count("vc3star", inst, 12, 300, 5, cfg)

    def test_report_line(self):
        line = CheckReport("x", False, 0.25, 0.5).line()
        assert line == "CHECK x FAIL observed=0.25 bound=0.5"


class TestConvergence:
    def test_vc3(self, tuned_vc):
        _, rec = tuned_vc["vc3"]
        M, _ = composite_rate(rec, 1.5)
        rep = convergence_check(rec, 1.5, M, (250, 500, 1000))
        assert rep.passed, rep.detail
        assert rep.observed <= 0.03

    def test_zero_rate_envelope(self):
        rec = CompositeRecurrence.from_triples([((1, 2), (1, 1), (0.5, 0.5)), ((1,), (1,), (1.0,))])
        M, _ = composite_rate(rec, 1.5)
        assert M == 0.0
        ks = [10, 20, 50, 100, 200]
        r = max(t.r for t in rec.terms)
        for k, g in zip(ks, convergence_gaps(rec, 1.5, M, ks)):
            assert g <= (r + 1) * math.log(1.5 * k + 2) / k

    def test_relaxed_alpha(self, tuned_vc):
        _, rec = tuned_vc["vc3"]
        m_lo, _ = composite_rate(rec, 1.2)
        m_hi, _ = composite_rate(rec, 2.4)
        assert m_hi <= m_lo
        gaps = convergence_gaps(rec, 2.4, m_hi, (50, 100, 200))
        assert all(b <= a for a, b in zip(gaps, gaps[1:]))


class TestRulesMapping:
    def vc3(self):
        return CompositeRecurrence.from_triples([((1, 3), (1, 0), (0.5, 0.5)), ((1, 3), (0, 3), (0.5, 0.5))])

    def test_hand_value(self):
        assert rules_mapping_infimum(self.vc3(), 1, 1) == 0.5

    def test_boundaries(self):
        assert rules_mapping_infimum(self.vc3(), 3, 0) == 1.0
        assert rules_mapping_infimum(self.vc3(), -1, 2) == 0.0

    def test_equals_naive_and_dp(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            rec = small_rec(rng)
            t = dp_eval(rec, 4, 4)
            for b in range(-1, 5):
                for k in range(5):
                    inf = rules_mapping_infimum(rec, b, k)
                    assert inf == naive_eval(rec, b, k)
                    assert abs(inf - t.value(b, k)) <= 1e-9

    def test_caps(self):
        with pytest.raises(ValueError):
            rules_mapping_infimum(self.vc3(), 5, 1)
        big = CompositeRecurrence.from_triples([((1, 1, 1), (1, 0, 0), (0.2, 0.3, 0.5))])
        with pytest.raises(ValueError):
            rules_mapping_infimum(big, 2, 2)
