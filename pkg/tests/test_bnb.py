import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from onebit.bnb import (
    Cut,
    CutPool,
    Node,
    SolverOptions,
    initial_cut_pool,
    make_cut,
    separate,
    solve_alg1,
    solve_global,
)
from onebit.detectors import exhaustive_search
from onebit.links import AR_L1, AR_L2, ML, link_eval, objective
from onebit.model import generate_instance

from conftest import noiseless_instance, tiny_instance


def links_for(inst):
    return [ML(inst.sigma), AR_L1, AR_L2]


class TestCuts:
    def test_hinge_tangent_example(self):
        inst = tiny_instance([[1.0, 1.0], [1.0, -1.0]])
        cuts = separate(inst, AR_L1, [-1.0, -1.0], np.zeros(2))
        assert len(cuts) == 1
        cut = cuts[0]
        assert cut.row == 0 and cut.offset == 0.0
        np.testing.assert_array_equal(cut.coeffs, [-1.0, -1.0])

    def test_no_cut_when_epigraph_is_exact(self):
        inst = generate_instance(6, 2, 5.0, seed=0)
        x = np.ones(inst.n)
        g, _ = link_eval(ML(inst.sigma), inst.b @ x)
        assert separate(inst, ML(inst.sigma), x, g) == []
        assert len(separate(inst, ML(inst.sigma), x, g - 1e-3)) == inst.m

    @pytest.mark.parametrize("kind", ["ML", "L1", "L2"])
    @given(seed=st.integers(0, 2**32 - 1))
    def test_tangent_under_estimates_and_touches(self, kind, seed):
        rng = np.random.default_rng(seed)
        inst = generate_instance(5, 2, float(rng.uniform(-5, 25)), seed)
        link = {"ML": ML(inst.sigma), "L1": AR_L1, "L2": AR_L2}[kind]
        anchor = rng.choice([-1.0, 1.0], inst.n)
        row = int(rng.integers(inst.m))
        cut = make_cut(inst, link, row, anchor)
        g_anchor, _ = link_eval(link, inst.b[row] @ anchor)
        assert cut.value(anchor) == pytest.approx(float(g_anchor), abs=1e-12)
        for x in rng.uniform(-1, 1, (50, inst.n)):
            g, _ = link_eval(link, inst.b[row] @ x)
            assert cut.value(x) <= float(g) + 1e-9

    def test_initial_pool_sizes(self):
        inst = generate_instance(6, 3, 10.0, seed=1)
        hinge = initial_cut_pool(inst, AR_L1)
        assert len(hinge) == 2 * inst.m and all(c.anchor is None for c in hinge)
        for link in (ML(inst.sigma), AR_L2):
            cuts = initial_cut_pool(inst, link)
            assert len(cuts) == inst.m
            assert sorted(c.row for c in cuts) == list(range(inst.m))

    def test_hinge_pieces_are_exact(self):
        inst = generate_instance(4, 2, 10.0, seed=2)
        pool = initial_cut_pool(inst, AR_L1)
        x = np.random.default_rng(0).uniform(-1, 1, inst.n)
        g, _ = link_eval(AR_L1, inst.b @ x)
        best = np.full(inst.m, -np.inf)
        for c in pool:
            best[c.row] = max(best[c.row], c.value(x))
        np.testing.assert_allclose(best, g, atol=1e-14)


class TestCutPool:
    def test_duplicate_tangent_is_rejected(self):
        inst = generate_instance(4, 2, 10.0, seed=3)
        pool = CutPool(inst.n, inst.m)
        cut = make_cut(inst, AR_L2, 1, np.ones(inst.n))
        assert pool.add(cut) is True
        assert pool.add(make_cut(inst, AR_L2, 1, np.ones(inst.n))) is False
        assert pool.add(make_cut(inst, AR_L2, 2, np.ones(inst.n))) is True
        assert len(pool) == 2

    def test_grows_past_capacity(self):
        pool = CutPool(2, 3, capacity=2)
        for i in range(3):
            pool.add(Cut(i, None, float(i), np.array([1.0, -1.0])))
            pool.add(Cut(i, None, 0.0, np.zeros(2)))
        model = pool.model(np.array([-1, -1, 0, 0, 0.0]), np.array([1, 1, np.inf, np.inf, np.inf]))
        assert model.a.shape == (6, 5)
        np.testing.assert_array_equal(model.a[2], [-1.0, 1.0, 0.0, 1.0, 0.0])
        assert model.rhs[2] == 1.0
        np.testing.assert_array_equal(model.objective, [0, 0, 1, 1, 1])


class TestNode:
    def test_disjoint_fixings(self):
        with pytest.raises(ValueError):
            Node(frozenset({0, 1}), frozenset({1}), 0.0)
        Node(frozenset({0}), frozenset({1}), 0.0)


class TestSmallExamples:
    def test_diagonal_hinge(self):
        inst = tiny_instance(np.diag([3.0, 3.0]))
        res = solve_global(inst, AR_L1)
        np.testing.assert_array_equal(res.x_opt, [1.0, 1.0])
        assert res.objective == 0.0 and res.proven_optimal

    def test_opposite_rows_floor(self):
        w = np.array([1.0, 1.0, 2.0, 2.0])
        inst = tiny_instance([w, -w], sigma=1.0)
        res = solve_global(inst, ML(1.0))
        assert res.objective == pytest.approx(2 * math.log(2), rel=1e-12)
        assert w @ res.x_opt == 0.0

    def test_noiseless_hinge_recovers_zero(self):
        inst = noiseless_instance(12, 3, seed=4)
        res = solve_global(inst, AR_L1)
        assert res.objective == 0.0
        assert np.all(inst.b @ res.x_opt >= 0)

    def test_size_cap(self):
        inst = generate_instance(8, 4, 10.0, seed=0)
        with pytest.raises(ValueError, match="max_n"):
            solve_global(inst, AR_L1, SolverOptions(max_n=7))
        with pytest.raises(ValueError, match="max_n"):
            solve_alg1(inst, AR_L1, SolverOptions(max_n=7))


class TestAgainstExhaustive:
    @pytest.mark.parametrize("snr", [0.0, 10.0, 20.0])
    def test_objective_matches(self, snr):
        for seed in range(15):
            inst = generate_instance(8, 3, snr, seed)
            for link in links_for(inst):
                want = exhaustive_search(inst, link).objective
                res = solve_global(inst, link)
                assert res.proven_optimal
                assert res.objective == pytest.approx(want, abs=1e-8, rel=1e-10)
                assert objective(inst, link, res.x_opt).value == pytest.approx(res.objective, rel=1e-14)

    def test_reference_scheme_agrees(self):
        for seed in range(10):
            inst = generate_instance(6, 3, 5.0, seed)
            for link in links_for(inst):
                a, b = solve_global(inst, link), solve_alg1(inst, link)
                assert b.stats.outer_iterations >= 1
                assert a.objective == pytest.approx(b.objective, abs=1e-8)

    def test_mode_switch_dispatches(self):
        inst = generate_instance(5, 2, 5.0, seed=5)
        res = solve_global(inst, AR_L2, SolverOptions(mode="alg1"))
        assert res.stats.outer_iterations >= 1
        assert res.objective == pytest.approx(exhaustive_search(inst, AR_L2).objective, abs=1e-8)


class TestBounds:
    def test_root_bound_and_monotone_children(self):
        for seed in range(10):
            inst = generate_instance(10, 4, 10.0, seed)
            for link in links_for(inst):
                res = solve_global(inst, link)
                s = res.stats
                assert s.root_bound <= res.objective + 1e-9
                assert s.bound_drop <= 1e-9
                assert s.lp_solves >= s.nodes_processed >= 1
                assert s.pool_size == len(initial_cut_pool(inst, link)) + s.cuts_generated

    def test_cut_pool_ratio(self):
        inst = generate_instance(8, 3, 10.0, seed=6)
        s = solve_global(inst, AR_L2).stats
        assert s.cut_pool_ratio == pytest.approx(s.pool_size / (inst.m * 2 ** inst.n), rel=1e-12)


class TestOptions:
    def test_node_limit_reports_unproven(self):
        inst = generate_instance(16, 6, 0.0, seed=1)
        link = ML(inst.sigma)
        full = solve_global(inst, link)
        assert full.stats.nodes_processed > 2
        capped = solve_global(inst, link, SolverOptions(node_limit=1))
        assert not capped.proven_optimal
        assert capped.stats.nodes_processed <= 1
        assert capped.objective >= full.objective - 1e-9

    def test_shortcut_off_gives_same_optimum(self):
        for seed in range(5):
            inst = generate_instance(8, 3, 10.0, seed)
            link = ML(inst.sigma)
            a = solve_global(inst, link)
            b = solve_global(inst, link, SolverOptions(incumbent_shortcut=False))
            assert a.objective == pytest.approx(b.objective, abs=1e-8)

    def test_deterministic(self):
        inst = generate_instance(10, 4, 10.0, seed=9)
        a, b = solve_global(inst, AR_L2), solve_global(inst, AR_L2)
        np.testing.assert_array_equal(a.x_opt, b.x_opt)
        assert a.stats.nodes_processed == b.stats.nodes_processed


class TestDegenerateRegressions:
    """Instances whose node LPs once stalled in degenerate pivoting."""

    @pytest.mark.parametrize("mt, nt, snr, seed", [(32, 6, 20.0, 22), (8, 3, 20.0, 2), (32, 6, 30.0, 7),
                                                   (16, 4, 20.0, 17), (32, 6, 25.0, 78), (32, 6, 25.0, 10)])
    def test_solves_to_proven_optimum(self, mt, nt, snr, seed):
        inst = generate_instance(mt, nt, snr, seed)
        res = solve_global(inst, ML(inst.sigma))
        assert res.proven_optimal
        assert res.stats.root_bound <= res.objective + 1e-9
        if mt * nt <= 64:
            # small enough to confirm against the full enumeration
            assert res.objective == pytest.approx(exhaustive_search(inst, ML(inst.sigma)).objective, abs=1e-8)
