"""Mask construction, parameter matching, application, and reweighting."""

import math

import numpy as np
import pytest

from prunelab.analytics import ge_monte_carlo
from prunelab.dpp import DppKernel
from prunelab.netcore import TwoLayerNet, forward_many, make_teacher
from prunelab.pruning import (
    EdgeMask,
    NodeMask,
    apply_mask,
    match_params,
    optimal_edge_scale,
    prune_dpp_node,
    prune_importance_edge,
    prune_importance_node,
    prune_random_edge,
    prune_random_node,
    reweight_edge_scale,
    reweight_node,
)
from prunelab.theory import TheoryParams, ge_random_edge_rescaled


class TestNodeMasks:
    def test_keep_all(self):
        mask = prune_random_node(6, 6, np.random.default_rng(0))
        assert np.array_equal(mask.kept, np.arange(6))

    def test_keep_none(self):
        mask = prune_random_node(6, 0, np.random.default_rng(0))
        assert mask.k_n == 0

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            prune_random_node(6, 7, np.random.default_rng(0))

    def test_uniform_over_subsets(self):
        # K=6, k_n=2: all 15 pairs equally likely (multinomial 3-sigma band)
        rng = np.random.default_rng(1)
        n = 100_000
        counts = {}
        for _ in range(n):
            mask = prune_random_node(6, 2, rng)
            counts[tuple(mask.kept)] = counts.get(tuple(mask.kept), 0) + 1
        assert len(counts) == 15
        p = 1 / 15
        bound = 3 * math.sqrt(n * p * (1 - p))
        assert all(abs(c - n * p) < bound for c in counts.values())

    def test_importance_by_magnitude(self):
        mask = prune_importance_node(np.array([3.0, -5.0, 1.0]), 2)
        assert np.array_equal(mask.kept, [0, 1])

    def test_importance_ties(self):
        mask = prune_importance_node(np.ones(5), 3)
        assert np.array_equal(mask.kept, [0, 1, 2])

    def test_importance_identity(self):
        mask = prune_importance_node(np.array([1.0, 2.0, 3.0]), 3)
        assert np.array_equal(mask.kept, [0, 1, 2])

    def test_dpp_mask_block_kernel(self):
        L = np.zeros((6, 6))
        L[:3, :3] = 1.0
        L[3:, 3:] = 1.0
        kernel = DppKernel(L=L + 1e-6 * np.eye(6), eps=1e-6)
        rng = np.random.default_rng(2)
        cross = sum(
            (lambda kept: (kept[0] < 3) != (kept[1] < 3))(prune_dpp_node(kernel, 2, rng).kept)
            for _ in range(5_000)
        )
        assert cross / 5_000 >= 0.999

    def test_dpp_identity_kernel_uniform(self):
        kernel = DppKernel(L=np.eye(4))
        rng = np.random.default_rng(3)
        counts = np.zeros(4)
        for _ in range(40_000):
            counts[prune_dpp_node(kernel, 1, rng).kept[0]] += 1
        assert np.all(np.abs(counts - 10_000) < 3 * math.sqrt(40_000 * 0.25 * 0.75))

    def test_node_mask_validation(self):
        with pytest.raises(ValueError):
            NodeMask(kept=[0, 0], n_total=3)
        with pytest.raises(ValueError):
            NodeMask(kept=[3], n_total=3)


class TestEdgeMasks:
    def test_keep_all(self):
        mask = prune_random_edge(3, 10, 1.0, np.random.default_rng(0))
        assert mask.kept.all()

    def test_keep_none(self):
        mask = prune_random_edge(3, 10, 0.0, np.random.default_rng(0))
        assert not mask.kept.any()

    def test_bernoulli_concentration(self):
        mask = prune_random_edge(6, 500, 0.5, np.random.default_rng(1))
        total = mask.kept.sum()
        assert abs(total - 1500) < 4 * math.sqrt(3000 * 0.25)

    def test_exact_mode_counts(self):
        mask = prune_random_edge(6, 500, 83 / 500, np.random.default_rng(2), exact=True, k_e=83)
        assert np.array_equal(mask.per_node_counts, np.full(6, 83))

    def test_c_out_of_range(self):
        with pytest.raises(ValueError):
            prune_random_edge(3, 10, 1.2, np.random.default_rng(0))

    def test_importance_edge_row(self):
        mask = prune_importance_edge(np.array([[0.1, -0.9, 0.5]]), 1)
        assert np.array_equal(mask.kept[0], [False, True, False])

    def test_importance_edge_identity(self):
        w = np.random.default_rng(3).standard_normal((2, 7))
        mask = prune_importance_edge(w, 7)
        assert mask.kept.all()

    def test_importance_edge_zero_row_ties(self):
        mask = prune_importance_edge(np.zeros((1, 5)), 2)
        assert np.array_equal(np.flatnonzero(mask.kept[0]), [0, 1])


class TestApplyMask:
    def test_full_node_mask_is_identity(self):
        rng = np.random.default_rng(4)
        net = TwoLayerNet(rng.standard_normal((4, 12)), rng.standard_normal(4))
        pruned = apply_mask(net, NodeMask(kept=np.arange(4), n_total=4))
        X = rng.standard_normal((100, 12))
        assert np.array_equal(forward_many(pruned, X), forward_many(net, X))

    def test_empty_node_mask_zero_function(self):
        rng = np.random.default_rng(5)
        net = TwoLayerNet(rng.standard_normal((4, 12)), rng.standard_normal(4))
        pruned = apply_mask(net, NodeMask(kept=[], n_total=4))
        X = rng.standard_normal((10, 12))
        assert np.all(forward_many(pruned, X) == 0.0)

    def test_edge_mask_equals_explicit_zeroing(self):
        rng = np.random.default_rng(6)
        net = TwoLayerNet(rng.standard_normal((3, 15)), rng.standard_normal(3))
        mask = prune_random_edge(3, 15, 0.4, rng)
        pruned = apply_mask(net, mask)
        reference = TwoLayerNet(np.where(mask.kept, net.w, 0.0), net.v)
        X = rng.standard_normal((50, 15))
        assert np.allclose(forward_many(pruned, X), forward_many(reference, X), atol=1e-12)

    def test_shape_mismatch(self):
        net = TwoLayerNet(np.zeros((2, 5)), np.zeros(2))
        with pytest.raises(ValueError):
            apply_mask(net, NodeMask(kept=[0], n_total=3))
        with pytest.raises(ValueError):
            apply_mask(net, EdgeMask(kept=np.ones((3, 5), dtype=bool)))


class TestMatchParams:
    def test_benchmark_ratios(self):
        # N=500, K=6: k_n -> k_e must give 83, 166, 250, 333, 417, 500
        expected = {1: 83, 2: 166, 3: 250, 4: 333, 5: 417, 6: 500}
        for k_n, k_e in expected.items():
            spec = match_params(k_n, 6, 500)
            assert spec.k_e == k_e
            assert abs(spec.c - k_n / 6) < 1e-15

    def test_full_keep(self):
        spec = match_params(6, 6, 500)
        assert spec.k_e == 500 and spec.c == 1.0

    def test_parameter_counts_close(self):
        # retained counts agree up to the rounding of the matching rule
        K, N = 6, 500
        for k_n in range(1, K + 1):
            spec = match_params(k_n, K, N)
            node_params = k_n * (N + 1)
            edge_params = K * spec.k_e + K
            assert abs(node_params - edge_params) <= math.ceil(K / 2)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            match_params(0, 6, 500)


class TestReweighting:
    def test_full_mask_recovers_v(self):
        rng = np.random.default_rng(7)
        net = TwoLayerNet(rng.standard_normal((4, 30)), rng.standard_normal(4))
        probes = rng.standard_normal((400, 30))
        rw = reweight_node(net, NodeMask(kept=np.arange(4), n_total=4), probes)
        assert np.allclose(rw.v, net.v, atol=1e-6)

    def test_duplicate_nodes_sum_weights(self):
        rng = np.random.default_rng(8)
        row = rng.standard_normal(25)
        net = TwoLayerNet(np.vstack([row, row]), np.array([1.3, 2.1]))
        probes = rng.standard_normal((300, 25))
        rw = reweight_node(net, NodeMask(kept=[0], n_total=2), probes)
        assert abs(rw.v[0] - 3.4) < 1e-6

    def test_never_hurts_monte_carlo_ge(self):
        rng = np.random.default_rng(9)
        teacher = make_teacher(60, 2, 3.0, rng)
        student = TwoLayerNet(rng.standard_normal((4, 60)), rng.standard_normal(4))
        mask = NodeMask(kept=[0, 2], n_total=4)
        probes = rng.standard_normal((500, 60))
        plain = apply_mask(student, mask)
        rw = reweight_node(student, mask, probes)
        # reweighting fits the student's own output; its pruned-vs-original
        # error cannot exceed the unreweighted one beyond probe noise
        ge_plain = ge_monte_carlo(plain, student, 40_000, np.random.default_rng(10))
        ge_rw = ge_monte_carlo(rw, student, 40_000, np.random.default_rng(10))
        assert ge_rw.value <= ge_plain.value + 2 * ge_plain.std_err

    def test_empty_mask_rejected(self):
        net = TwoLayerNet(np.zeros((2, 5)), np.zeros(2))
        with pytest.raises(ValueError):
            reweight_node(net, NodeMask(kept=[], n_total=2), np.zeros((50, 5)))

    def test_too_few_probes_rejected(self):
        rng = np.random.default_rng(11)
        net = TwoLayerNet(rng.standard_normal((3, 8)), rng.standard_normal(3))
        with pytest.raises(ValueError):
            reweight_node(net, NodeMask(kept=[0, 1], n_total=3), rng.standard_normal((10, 8)))

    def test_edge_scale(self):
        rng = np.random.default_rng(12)
        net = TwoLayerNet(rng.standard_normal((3, 10)), rng.standard_normal(3))
        X = rng.standard_normal((20, 10))
        assert np.array_equal(forward_many(reweight_edge_scale(net, 1.0), X), forward_many(net, X))
        assert np.all(forward_many(reweight_edge_scale(net, 0.0), X) == 0.0)
        assert np.allclose(
            forward_many(reweight_edge_scale(net, 2.5), X), 2.5 * forward_many(net, X), atol=1e-12
        )


class TestOptimalEdgeScale:
    def test_unpruned_needs_no_rescale(self):
        assert abs(optimal_edge_scale(1.0, 1) - 1.0) < 1e-12
        for Z in (1, 2, 5, 11):
            assert abs(optimal_edge_scale(1.0, Z) - 1.0) < 1e-12

    def test_zero_keep_probability(self):
        assert optimal_edge_scale(0.0, 3) == 0.0

    def test_minimizes_rescaled_formula(self):
        # grid-search oracle over the quadratic
        for c, Z in ((0.2, 3), (1 / 6, 3), (0.45, 5)):
            p = TheoryParams(M=2, Z=Z, v_star=4.0, c=c)
            grid = np.arange(0.0, 3.0, 1e-3)
            vals = [ge_random_edge_rescaled(p, A) for A in grid]
            best = grid[int(np.argmin(vals))]
            assert abs(optimal_edge_scale(c, Z) - best) <= 1e-3
