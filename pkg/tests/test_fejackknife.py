# Copyright (C) 2024 The judgeiv authors
#
# You can copy, redistribute or modify this Program under the terms of
# the GNU General Public License version 2 as published by the Free
# Software Foundation.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# version 2 along with this program; if not, write to the Free Software
# Foundation, Inc., 51 Franklin Street, Fifth Floor, Boston, MA
# 02110-1301, USA.

import unittest
from dataclasses import replace
from unittest import mock

import numpy as np
from numpy.testing import assert_allclose

from judgeiv import oracles
from judgeiv.data import (
    JudgeDesignData,
    MultiwayClustering,
    build_judge_projection,
)
from judgeiv.estimators import jive, md_cjive
from judgeiv.exceptions import (
    AdjustmentInfeasible,
    IdentificationFailure,
    InvalidConfigurationError,
    ResourceLimit,
)
from judgeiv.fejackknife import (
    BLOCK,
    DIAGONAL,
    block_pairs,
    fe_cjive,
    fe_design,
    fe_jive,
    fe_projection,
    solve_block_H,
    solve_vartheta,
)
from judgeiv.projections import FE_ADJUSTED
from judgeiv.simulation import DgpConfig, FE_ONLY, generate_fe_only


def equal_judges(m, judges=3, seed=0):
    rng = np.random.default_rng(seed)
    n = m * judges
    judge = np.repeat(np.arange(judges), m)
    x = judge * 0.7 + rng.standard_normal(n)
    return JudgeDesignData(y=2.0 * x + rng.standard_normal(n), X=x,
                           judge=judge)


def fe_instance(seed):
    """Random design with a FE dimension and general clusters of 3 to 5
    cases."""
    rng = np.random.default_rng(seed)
    sizes = rng.integers(3, 6, 10)
    labels = rng.permutation(np.repeat(np.arange(sizes.size), sizes))
    data = oracles.random_design(rng, labels.size, 4, clusters=(3,),
                                 min_judge_size=3)
    return data.with_clustering(data.clustering.add("dim2", labels))


class VarthetaTestCase(unittest.TestCase):

    def test_equal_judge_sizes(self):
        data = equal_judges(4)
        projection = fe_projection(data)
        adjustment = projection.kit.adjustment
        self.assertEqual(adjustment.kind, DIAGONAL)
        assert_allclose(adjustment.values, np.full(12, 1.0 / 3), rtol=1e-10)
        assert_allclose(fe_jive(data).beta, jive(data).beta, rtol=1e-10)

    def test_two_case_judges(self):
        data = JudgeDesignData(y=[1.0, 2.0, 3.0, 4.0], X=[1.0, 0.0, 0.5, 2.0],
                               judge=[0, 0, 1, 1])
        with self.assertRaises(AdjustmentInfeasible) as cm:
            fe_jive(data)
        self.assertIn("pivot_ratio", cm.exception.details)
        self.assertIn("max_leverage", cm.exception.details)

    def test_zero_diagonal(self):
        data = fe_instance(1)
        projection = fe_projection(data, ("dim1",))
        scale = np.abs(projection.P).max()
        self.assertEqual(projection.kit.variant, FE_ADJUSTED)
        self.assertLess(np.abs(np.diag(projection.kit.matrix)).max(),
                        1e-10 * scale)

    def test_solve_vartheta(self):
        M = np.eye(3) - np.full((3, 3), 1.0 / 3)
        adjustment = solve_vartheta(M, np.full(3, 1.0 / 3))
        assert_allclose(adjustment.values, np.full(3, 0.5), rtol=1e-12)
        assert_allclose(adjustment.matrix(3), np.eye(3) * 0.5, rtol=1e-12)


class BlockAdjustmentTestCase(unittest.TestCase):

    def test_block_pairs(self):
        rows, cols = block_pairs([0, 1, 0])
        self.assertEqual(list(zip(rows.tolist(), cols.tolist())),
                         [(0, 0), (0, 2), (2, 0), (2, 2), (1, 1)])

    def test_zero_blocks(self):
        data = fe_instance(2)
        projection = fe_projection(data, ("dim1",), "dim2")
        self.assertEqual(projection.kit.adjustment.kind, BLOCK)
        rows, cols = block_pairs(data.clustering.labels("dim2"))
        scale = np.abs(projection.P).max()
        self.assertLess(np.abs(projection.kit.matrix[rows, cols]).max(),
                        1e-10 * scale)

    def test_singleton_blocks_are_diagonal(self):
        data = fe_instance(3)
        projection = fe_projection(data, ("dim1",))
        theta = solve_vartheta(projection.M, np.diag(projection.P)).values
        H = solve_block_H(projection.M, projection.P, np.arange(data.n))
        assert_allclose(np.diag(H.matrix(data.n)), theta, rtol=0, atol=1e-12)
        self.assertFalse(np.any(H.matrix(data.n)[~np.eye(data.n, dtype=bool)]))

    def test_singleton_general_dimension(self):
        data = fe_instance(4)
        data = data.with_clustering(data.clustering.add(
            "individual", np.arange(data.n)))
        a = fe_cjive(data, ("dim1",), "individual")
        b = fe_jive(data, ("dim1",))
        self.assertEqual(a.diagnostics["adjustment"], DIAGONAL)
        assert_allclose(a.beta, b.beta, rtol=1e-12)

    def test_resource_limit(self):
        data = fe_instance(5)
        with self.assertRaises(ResourceLimit) as cm:
            fe_cjive(data, ("dim1",), "dim2", max_system_size=10)
        self.assertEqual(cm.exception.details["limit"], 10)


class FeDesignTestCase(unittest.TestCase):

    def test_singleton_fixed_effects(self):
        data = equal_judges(3)
        data = data.with_clustering(MultiwayClustering.singleton(data.n))
        with self.assertRaises(InvalidConfigurationError):
            fe_design(data, ("individual",))

    def test_collinear_dummies_pruned(self):
        data = fe_instance(6)
        data = data.with_controls(np.ones((data.n, 1)))
        W = fe_design(data, ("dim1", "dim2"))
        self.assertEqual(W.shape[1], np.linalg.matrix_rank(W))

    def test_diagnostics(self):
        data = fe_instance(7)
        result = fe_cjive(data, ("dim1",), "dim2")
        self.assertEqual(result.estimator, "fe_cjive")
        self.assertEqual(result.diagnostics["fe_dims"], ["dim1"])
        self.assertEqual(result.diagnostics["general_dim"], "dim2")
        self.assertEqual(result.diagnostics["system_size"],
                         int((data.clustering.sizes("dim2") ** 2).sum()))


class ScenarioTestCase(unittest.TestCase):

    def test_fe_only(self):
        config = DgpConfig.preset(FE_ONLY, n=200, k=10, clusters=(10, 10),
                                  seed=9)
        sample = generate_fe_only(config)
        with self.assertRaises(IdentificationFailure):
            md_cjive(sample.data, ("cluster",))
        result = fe_cjive(sample.data, ("cluster",))
        self.assertTrue(np.isfinite(result.coef))

    def test_judge_fixed_effects(self):
        data = equal_judges(4)
        data = data.with_clustering(
            MultiwayClustering((data.judge,), ("judge",)))
        with self.assertRaises(IdentificationFailure):
            fe_cjive(data, ("judge",))

class AnnihilationTestCase(unittest.TestCase):

    def test_controls_annihilated(self):
        data = fe_instance(11)
        rng = np.random.default_rng(11)
        data = data.with_controls(
            np.column_stack([np.ones(data.n), rng.standard_normal(data.n)]))
        for general_dim in (None, "dim2"):
            projection = fe_projection(data, ("dim1",), general_dim)
            Pt = projection.kit.matrix
            scale = np.abs(projection.P).max()
            self.assertLess(np.abs(Pt @ projection.W).max(), 1e-10 * scale)
            self.assertLess(np.abs(Pt @ data.W).max(), 1e-10 * scale)
            self.assertLess(
                np.abs(Pt @ data.clustering.dummies("dim1")).max(),
                1e-10 * scale)

    def test_outcome_shift(self):
        data = fe_instance(12)
        data = data.with_controls(np.ones((data.n, 1)))
        shifted = replace(data, y=data.y + 5.0)
        assert_allclose(fe_jive(shifted, ("dim1",)).beta,
                        fe_jive(data, ("dim1",)).beta, rtol=1e-10)
        assert_allclose(fe_cjive(shifted, ("dim1",), "dim2").beta,
                        fe_cjive(data, ("dim1",), "dim2").beta, rtol=1e-10)

    def test_row_permutation(self):
        data = fe_instance(13)
        perm = np.random.default_rng(13).permutation(data.n)
        shuffled = JudgeDesignData(
            y=data.y[perm], X=data.X[perm], judge=data.judge[perm],
            clustering=MultiwayClustering(
                tuple(labels[perm] for labels in data.clustering.dims),
                data.clustering.names))
        assert_allclose(fe_cjive(shuffled, ("dim1",), "dim2").beta,
                        fe_cjive(data, ("dim1",), "dim2").beta, rtol=1e-10)


class GeneralClusteringTestCase(unittest.TestCase):

    def test_fixed_effects_absorb_cluster_dependence(self):
        # Cluster effects in both dimensions: dim1 is absorbed by fixed
        # effects, dim2 blocks are removed by the adjustment.
        data = fe_instance(14)
        Pt = fe_projection(data, ("dim1",), "dim2").kit.matrix
        rng = np.random.default_rng(14)
        reps = 4000
        eta = rng.standard_normal((data.n, reps))
        for name in data.clustering.names:
            effect = rng.standard_normal((data.clustering.count(name), reps))
            eta += effect[data.clustering.labels(name)]
        eps = 0.5 * eta + np.sqrt(0.75) * rng.standard_normal((data.n, reps))
        values = np.einsum("ir,ir->r", eta, Pt @ eps)
        se = values.std() / np.sqrt(reps)
        self.assertLess(abs(values.mean()), 4 * se)
        P = build_judge_projection(data.judge)
        values = np.einsum("ir,ir->r", eta, P @ eps)
        se = values.std() / np.sqrt(reps)
        self.assertGreater(values.mean(), 4 * se)


class ResidualGateTestCase(unittest.TestCase):

    def test_diagonal_residual(self):
        M = np.eye(3)
        diag_P = np.ones(3)
        with mock.patch("judgeiv.fejackknife._lu_solve",
                        return_value=(diag_P + 5e-11, 1.0)):
            adjustment = solve_vartheta(M, diag_P)
        self.assertLessEqual(adjustment.residual, 1e-10)
        with mock.patch("judgeiv.fejackknife._lu_solve",
                        return_value=(diag_P + 5e-9, 1.0)):
            with self.assertRaises(AdjustmentInfeasible):
                solve_vartheta(M, diag_P)

    def test_block_residual(self):
        M = np.eye(4)
        P = np.full((4, 4), 0.5)
        labels = np.array([0, 0, 1, 1])
        rows, cols = block_pairs(labels)
        with mock.patch("judgeiv.fejackknife._lu_solve",
                        return_value=(P[rows, cols] + 5e-9, 1.0)):
            with self.assertRaises(AdjustmentInfeasible):
                solve_block_H(M, P, labels)
        with mock.patch("judgeiv.fejackknife._lu_solve",
                        return_value=(P[rows, cols] + 2e-11, 1.0)):
            adjustment = solve_block_H(M, P, labels)
        self.assertEqual(adjustment.kind, BLOCK)


if __name__ == "__main__":
    unittest.main()
