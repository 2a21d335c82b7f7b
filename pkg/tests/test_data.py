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

import os
import tempfile
import unittest

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

from judgeiv import oracles
from judgeiv.data import (
    INTERCEPT_NAME,
    JudgeDesignData,
    MultiwayClustering,
    Schema,
    build_judge_projection,
    encode_labels,
    load_dataset,
    prune_controls,
    sparse_union_mask,
    union_mask,
    write_dataset,
)
from judgeiv.estimators import md_cjive
from judgeiv.exceptions import DataError, SchemaError
from judgeiv.fejackknife import fe_cjive
from judgeiv.simulation import DgpConfig, generate


def write_text(directory, name, text):
    path = os.path.join(directory, name)
    with open(path, "w") as fileobj:
        fileobj.write(text)
    return path


SCHEMA = {
    "outcome": "y",
    "treatment": "x",
    "judge": "judge",
    "controls": ["age"],
    "fixed-effects": ["year"],
    "clusters": {"individual": None, "district": "district"},
}

CSV = """y,x,judge,age,year,district
1.0,0,a,30,2010,n
2.0,1,a,41,2011,s
0.5,1,b,25,2010,n
3.0,0,b,52,2011,s
1.5,1,c,33,2010,s
2.5,0,c,47,2011,n
"""


class EncodeLabelsTestCase(unittest.TestCase):

    def test_first_appearance_order(self):
        codes, labels = encode_labels(["b", "a", "b", "c"])
        assert_array_equal(codes, [0, 1, 0, 2])
        self.assertEqual(labels, ["b", "a", "c"])

    def test_missing_label(self):
        with self.assertRaises(DataError):
            encode_labels(["a", None, "b"])


class MultiwayClusteringTestCase(unittest.TestCase):

    def test_lookup(self):
        clustering = MultiwayClustering(
            ([0, 0, 1, 1], [0, 1, 2, 0]), ("court", "day"))
        self.assertEqual(len(clustering), 2)
        self.assertEqual(clustering.n, 4)
        self.assertEqual(clustering.index("day"), 1)
        self.assertEqual(clustering.count("day"), 3)
        assert_array_equal(clustering.sizes("court"), [2, 2])
        assert_array_equal(clustering.labels(1), [0, 1, 2, 0])
        self.assertFalse(clustering.is_singleton("court"))
        self.assertEqual(clustering.dummies("day").sum(axis=0).tolist(),
                         [2.0, 1.0, 1.0])

    def test_singleton(self):
        clustering = MultiwayClustering.singleton(5)
        self.assertTrue(clustering.is_singleton("individual"))
        assert_array_equal(clustering.mask("individual"), np.eye(5, dtype=bool))

    def test_unknown_dimension(self):
        clustering = MultiwayClustering.singleton(3)
        with self.assertRaises(DataError):
            clustering.labels("court")
        with self.assertRaises(DataError):
            clustering.labels(1)

    def test_invalid(self):
        with self.assertRaises(DataError):
            MultiwayClustering(([0, 1], [0, 1, 2]), ("a", "b"))
        with self.assertRaises(DataError):
            MultiwayClustering(([0, 1], [1, 0]), ("a", "a"))
        with self.assertRaises(DataError):
            MultiwayClustering(([0, 2],), ("a",))

    def test_from_columns_and_add(self):
        clustering = MultiwayClustering.from_columns(
            {"court": ["x", "y", "x"]})
        clustering = clustering.add("day", ["mon", "mon", "tue"])
        self.assertEqual(clustering.names, ("court", "day"))
        assert_array_equal(clustering.labels("court"), [0, 1, 0])
        selected = clustering.select(["day"])
        self.assertEqual(selected.names, ("day",))

    def test_immutable(self):
        clustering = MultiwayClustering(([0, 0, 1],), ("court",))
        with self.assertRaises(ValueError):
            clustering.labels("court")[0] = 1


class JudgeDesignDataTestCase(unittest.TestCase):

    def test_defaults(self):
        data = JudgeDesignData(y=[1.0, 2.0, 3.0], X=[0.0, 1.0, 1.0],
                               judge=["j2", "j1", "j2"])
        self.assertEqual((data.n, data.p, data.k, data.l), (3, 1, 2, 0))
        assert_array_equal(data.judge, [0, 1, 0])
        self.assertEqual(data.judge_label(1), "j1")
        assert_array_equal(data.judge_sizes, [2, 1])
        self.assertEqual(data.treatment_names, ("x",))
        self.assertEqual(len(data.clustering), 0)
        assert_array_equal(data.instruments(), [[1, 0], [0, 1], [1, 0]])

    def test_integer_labels_reencoded(self):
        data = JudgeDesignData(y=[1.0, 2.0, 3.0, 4.0], X=[0.0, 1.0, 1.0, 0.0],
                               judge=[1, 1, 2, 2])
        assert_array_equal(data.judge, [0, 0, 1, 1])
        self.assertEqual(data.k, 2)
        self.assertEqual(data.judge_label(1), 2)
        data = JudgeDesignData(y=[1.0, 2.0, 3.0], X=[0.0, 1.0, 1.0],
                               judge=[7, -3, 7])
        assert_array_equal(data.judge, [0, 1, 0])

    def test_dense_codes_kept(self):
        data = JudgeDesignData(y=[1.0, 2.0, 3.0], X=[0.0, 1.0, 1.0],
                               judge=[1, 0, 1])
        assert_array_equal(data.judge, [1, 0, 1])
        self.assertEqual(data.judge_labels, (1, 2))

    def test_length_mismatch(self):
        with self.assertRaises(DataError):
            JudgeDesignData(y=[1.0, 2.0], X=[1.0, 2.0, 3.0], judge=[0, 1])
        with self.assertRaises(DataError):
            JudgeDesignData(
                y=[1.0, 2.0], X=[1.0, 2.0], judge=[0, 1],
                clustering=MultiwayClustering(([0, 1, 2],), ("a",)))

    def test_non_finite(self):
        with self.assertRaises(DataError):
            JudgeDesignData(y=[1.0, np.nan], X=[1.0, 2.0], judge=[0, 1])

    def test_with_controls(self):
        data = JudgeDesignData(y=[1.0, 2.0], X=[1.0, 2.0], judge=[0, 1])
        data = data.with_controls(np.ones((2, 1)), ["intercept"])
        self.assertEqual(data.l, 1)
        self.assertEqual(data.control_names, ("intercept",))


class ProjectionHelpersTestCase(unittest.TestCase):

    def test_prune_controls(self):
        rng = np.random.default_rng(7)
        x = rng.standard_normal(20)
        W = np.column_stack([np.ones(20), x, 2.0 * x, rng.standard_normal(20)])
        kept, dropped = prune_controls(W)
        self.assertEqual(len(dropped), 1)
        self.assertIn(dropped[0], (1, 2))
        self.assertEqual(kept.shape[1], 3)
        self.assertEqual(np.linalg.matrix_rank(kept), 3)

    def test_judge_projection(self):
        judge = np.array([0, 1, 0, 2, 1, 0])
        P = build_judge_projection(judge)
        assert_allclose(P, oracles.judge_projection(judge), rtol=0, atol=0)
        assert_allclose(P @ P, P, atol=1e-14)
        self.assertAlmostEqual(np.trace(P), 3.0, places=12)

    def test_union_mask(self):
        clustering = MultiwayClustering(
            ([0, 0, 1, 1, 2], [0, 1, 0, 1, 1]), ("a", "b"))
        s1 = clustering.mask("a").astype(int)
        s2 = clustering.mask("b").astype(int)
        mask = union_mask(clustering)
        assert_array_equal(mask.astype(int), s1 + s2 - s1 * s2)
        assert_array_equal(mask, oracles.union_mask(clustering, ("a", "b")))
        assert_array_equal(sparse_union_mask(clustering).toarray(),
                           mask.astype(float))
        assert_array_equal(union_mask(clustering, ()), np.eye(5, dtype=bool))


class SchemaTestCase(unittest.TestCase):

    def test_from_mapping(self):
        schema = Schema.from_mapping(SCHEMA)
        self.assertEqual(schema.treatment, ("x",))
        self.assertEqual(schema.clusters,
                         (("individual", None), ("district", "district")))
        self.assertTrue(schema.intercept)
        self.assertEqual(schema.columns(),
                         ["y", "x", "judge", "age", "year", "district"])

    def test_cluster_list(self):
        schema = Schema.from_mapping(dict(SCHEMA, clusters=["district"]))
        self.assertEqual(schema.clusters, (("district", "district"),))

    def test_missing_key(self):
        doc = dict(SCHEMA)
        del doc["judge"]
        with self.assertRaises(SchemaError):
            Schema.from_mapping(doc)
        with self.assertRaises(SchemaError):
            Schema.from_mapping(["outcome"])

    def test_load(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_text(tmp, "schema.yaml",
                              "outcome: y\ntreatment: [x]\njudge: judge\n")
            schema = Schema.load(path)
            self.assertEqual(schema.outcome, "y")
            with self.assertRaises(SchemaError):
                Schema.load(os.path.join(tmp, "missing.yaml"))


class LoadDatasetTestCase(unittest.TestCase):

    def test_load(self):
        with tempfile.TemporaryDirectory() as tmp:
            data = load_dataset(write_text(tmp, "data.csv", CSV), SCHEMA)
        self.assertEqual((data.n, data.k), (6, 3))
        self.assertEqual(data.judge_labels, ("a", "b", "c"))
        # intercept + age + two year dummies, one of which is redundant
        self.assertEqual(data.l, 3)
        self.assertEqual(np.linalg.matrix_rank(data.W), 3)
        self.assertIn("age", data.control_names)
        self.assertEqual(data.clustering.names, ("individual", "district"))
        self.assertTrue(data.clustering.is_singleton("individual"))
        assert_array_equal(data.clustering.labels("district"),
                           [0, 1, 0, 1, 1, 0])

    def test_intercept_kept(self):
        with tempfile.TemporaryDirectory() as tmp:
            data = load_dataset(write_text(tmp, "data.csv", CSV),
                                dict(SCHEMA, **{"fixed-effects": []}))
        self.assertEqual(data.control_names, (INTERCEPT_NAME, "age"))

    def test_missing_column(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_text(tmp, "data.csv", CSV)
            with self.assertRaises(SchemaError):
                load_dataset(path, dict(SCHEMA, controls=["income"]))

    def test_non_numeric(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_text(tmp, "data.csv", CSV.replace("0.5,", "low,"))
            with self.assertRaises(DataError) as cm:
                load_dataset(path, SCHEMA)
            self.assertIn("row 3", str(cm.exception))

    def test_incomplete_rows_dropped(self):
        text = CSV + "4.0,1,a,,2010,n\n"
        with tempfile.TemporaryDirectory() as tmp:
            data = load_dataset(write_text(tmp, "data.csv", text), SCHEMA)
        self.assertEqual(data.n, 6)

    def test_judge_without_cases(self):
        text = CSV + "4.0,1,d,,2010,n\n"
        with tempfile.TemporaryDirectory() as tmp:
            path = write_text(tmp, "data.csv", text)
            with self.assertRaises(DataError):
                load_dataset(path, SCHEMA)

    def test_empty(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(DataError):
                load_dataset(write_text(tmp, "empty.csv", ""), SCHEMA)
            with self.assertRaises(DataError):
                load_dataset(write_text(tmp, "header.csv",
                                        CSV.splitlines()[0] + "\n"), SCHEMA)

    def test_round_trip(self):
        config = DgpConfig(n=120, k=8, clusters=(10, 12), reps=1, seed=3)
        sample = generate(config, replication=2)
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "sample.csv")
            schema = write_dataset(sample.data, path)
            data = load_dataset(path, schema)
        assert_array_equal(data.y, sample.data.y)
        assert_array_equal(data.X, sample.data.X)
        assert_array_equal(data.judge, sample.data.judge)
        self.assertEqual(data.clustering.names, ("dim1", "dim2"))
        for name in data.clustering.names:
            assert_array_equal(data.clustering.labels(name),
                               sample.data.clustering.labels(name))
        assert_array_equal(md_cjive(data).beta, md_cjive(sample.data).beta)
        assert_array_equal(fe_cjive(data, ("dim1",), "dim2").beta,
                           fe_cjive(sample.data, ("dim1",), "dim2").beta)


if __name__ == "__main__":
    unittest.main()
