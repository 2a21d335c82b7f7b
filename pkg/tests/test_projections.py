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

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

from judgeiv import oracles
from judgeiv.data import JudgeDesignData, MultiwayClustering, build_judge_projection
from judgeiv.exceptions import (
    IdentificationFailure,
    InternalError,
    LeaveOutUndefined,
)
from judgeiv.projections import (
    DDDOT,
    DOT,
    annihilate,
    base_projection,
    column_projection,
    jackknife,
    leave_out_instrument,
    residual_maker,
)


class AnnihilateTestCase(unittest.TestCase):

    def setUp(self):
        rng = np.random.default_rng(11)
        self.W = np.column_stack([np.ones(15), rng.standard_normal(15)])
        self.A = rng.standard_normal((15, 3))

    def test_orthogonal_to_controls(self):
        MA = annihilate(self.W, self.A)
        assert_allclose(self.W.T @ MA, 0.0, atol=1e-12)

    def test_no_controls(self):
        out = annihilate(None, self.A)
        assert_array_equal(out, self.A)
        self.assertIsNot(out, self.A)
        assert_array_equal(annihilate(np.zeros((15, 0)), self.A), self.A)

    def test_rank_deficient(self):
        W = np.column_stack([self.W, 2.0 * self.W[:, 1]])
        with self.assertRaises(InternalError):
            annihilate(W, self.A)

    def test_residual_maker(self):
        M = residual_maker(self.W, 15)
        assert_allclose(M, M.T, atol=0)
        assert_allclose(M @ M, M, atol=1e-12)
        self.assertAlmostEqual(np.trace(M), 13.0, places=10)


class ColumnProjectionTestCase(unittest.TestCase):

    def test_rank(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal((10, 2))
        P, rank = column_projection(np.column_stack([a, a.sum(axis=1)]))
        self.assertEqual(rank, 2)
        assert_allclose(P @ a, a, atol=1e-12)

    def test_noise_columns(self):
        P, rank = column_projection(np.full((6, 1), 1e-14), scale=1.0)
        self.assertEqual(rank, 0)
        self.assertFalse(np.any(P))


class BaseProjectionTestCase(unittest.TestCase):

    def setUp(self):
        self.judge = np.array([0, 0, 1, 1, 1, 2, 2, 0])
        self.data = JudgeDesignData(y=np.arange(8.0), X=np.arange(8.0) % 3,
                                    judge=self.judge)

    def test_closed_form(self):
        assert_array_equal(base_projection(self.data),
                           build_judge_projection(self.judge))

    def test_with_intercept(self):
        data = self.data.with_controls(np.ones((8, 1)))
        P = base_projection(data)
        self.assertAlmostEqual(np.trace(P), 2.0, places=10)
        assert_allclose(P @ np.ones(8), 0.0, atol=1e-12)

    def test_judge_fixed_effects(self):
        data = self.data.with_controls(self.data.instruments())
        with self.assertRaises(IdentificationFailure):
            base_projection(data)


class JackknifeTestCase(unittest.TestCase):

    def test_dot(self):
        P = build_judge_projection([0, 0, 1, 1, 1])
        kit = jackknife(P)
        self.assertEqual(kit.variant, DOT)
        self.assertEqual(kit.zeroed, 5)
        assert_array_equal(np.diag(kit.matrix), 0.0)
        off = ~np.eye(5, dtype=bool)
        assert_array_equal(kit.matrix[off], P[off])

    def test_masked(self):
        clustering = MultiwayClustering(([0, 1, 0, 1, 1],), ("court",))
        P = build_judge_projection([0, 0, 1, 1, 1])
        mask = clustering.mask("court")
        kit = jackknife(P, mask)
        self.assertEqual(kit.variant, DDDOT)
        assert_array_equal(kit.matrix[mask], 0.0)
        assert_array_equal(kit.matrix[~mask], P[~mask])

    def test_judge_level_mask(self):
        judge = np.array([0, 0, 1, 1, 2])
        P = build_judge_projection(judge)
        with self.assertRaises(IdentificationFailure):
            jackknife(P, judge[:, None] == judge[None, :])

    def test_rounding_noise(self):
        labels = np.array([0, 0, 1, 1])
        mask = labels[:, None] == labels[None, :]
        P = np.where(mask, 0.5, 1e-17)
        with self.assertRaises(IdentificationFailure):
            jackknife(P, mask)

    def test_single_case_judges(self):
        with self.assertRaises(IdentificationFailure):
            jackknife(build_judge_projection([0, 1, 2]))

    def test_shape_mismatch(self):
        with self.assertRaises(InternalError):
            jackknife(np.eye(3), np.eye(4, dtype=bool))


class LeaveOutInstrumentTestCase(unittest.TestCase):

    def test_hand_computed(self):
        data = JudgeDesignData(
            y=np.zeros(5), X=[1.0, 2.0, 3.0, 4.0, 5.0],
            judge=[0, 0, 0, 1, 1],
            clustering=MultiwayClustering(([0, 0, 1, 1, 2],), ("court",)))
        L, D_n, D_tilde = leave_out_instrument(data, "court")
        assert_allclose(L[:, 0], [3.0, 3.0, 3.0, 5.0, 4.0])
        assert_array_equal(D_n, [3, 3, 3, 2, 2])
        assert_array_equal(D_tilde, [1, 1, 2, 1, 1])

    def test_individual(self):
        data = JudgeDesignData(y=np.zeros(4), X=[1.0, 2.0, 4.0, 8.0],
                               judge=[0, 0, 1, 1])
        L, D_n, D_tilde = leave_out_instrument(data)
        assert_allclose(L[:, 0], [2.0, 1.0, 8.0, 4.0])
        assert_array_equal(D_tilde, [1, 1, 1, 1])

    def test_undefined(self):
        data = JudgeDesignData(
            y=np.zeros(4), X=[1.0, 2.0, 3.0, 4.0], judge=["a", "a", "b", "b"],
            clustering=MultiwayClustering(([0, 0, 1, 2],), ("court",)))
        with self.assertRaises(LeaveOutUndefined) as cm:
            leave_out_instrument(data, "court")
        self.assertEqual(cm.exception.judge, "a")
        self.assertEqual(cm.exception.as_dict()["case"], 0)

    def test_matches_loop(self):
        rng = np.random.default_rng(5)
        data = oracles.random_design(rng, 40, 4, clusters=(12,),
                                     min_judge_size=5)
        labels = data.clustering.labels("dim1")
        try:
            L, _, _ = leave_out_instrument(data, "dim1")
        except LeaveOutUndefined:
            self.skipTest("random instance without leave-out variation")
        for i in range(data.n):
            others = (data.judge == data.judge[i]) & (labels != labels[i])
            self.assertAlmostEqual(L[i, 0], data.X[others, 0].sum(), places=10)


if __name__ == "__main__":
    unittest.main()
