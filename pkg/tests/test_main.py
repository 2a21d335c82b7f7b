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

import json
import os
import tempfile
import unittest

import pandas as pd
import yaml

from judgeiv import config
from judgeiv import main
from judgeiv.exceptions import (
    EXIT_CHECK_FAILED,
    EXIT_INFEASIBLE,
    EXIT_INPUT,
    EXIT_OK,
    InvalidConfigurationError,
)

STUDY = """n=120
k=8
clusters=[10, 12]
reps=2
"""


class CommandTestCase(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = self.tmp.name
        self.config = os.path.join(self.dir, "study.conf")
        with open(self.config, "w") as fileobj:
            fileobj.write(STUDY)

    def tearDown(self):
        self.tmp.cleanup()
        config.reset()

    def path(self, name):
        return os.path.join(self.dir, name)

    def dgp(self):
        out = self.path("sample.csv")
        rc = main._main(["-q", "-c", self.config, "dgp", "--out", out,
                         "--seed", "3", "--replication", "1"])
        self.assertEqual(rc, EXIT_OK)
        return out

    def test_dgp(self):
        out = self.dgp()
        frame = pd.read_csv(out)
        self.assertEqual(len(frame), 120)
        self.assertEqual(list(frame.columns), ["y", "x", "judge", "dim1", "dim2"])
        with open(out + ".schema.yaml") as fileobj:
            schema = yaml.safe_load(fileobj)
        self.assertEqual(schema["outcome"], "y")
        self.assertFalse(schema["intercept"])

    def test_estimate(self):
        data = self.dgp()
        out = self.path("report.csv")
        rc = main._main(["-q", "estimate", "--data", data,
                         "--schema", data + ".schema.yaml",
                         "--dims", "dim1,dim2:general",
                         "--estimators", "md_cjive,cjive", "--out", out])
        self.assertEqual(rc, EXIT_OK)
        frame = pd.read_csv(out)
        self.assertEqual(len(frame), 4)
        self.assertEqual(list(frame["clusters"][:2]), ["Dim1", "+ Dim2 (SE)"])

    def test_estimate_all_rows_failed(self):
        data = self.dgp()
        with open(data + ".schema.yaml") as fileobj:
            schema = yaml.safe_load(fileobj)
        schema["clusters"] = {"judge": "judge"}
        schema_path = self.path("judge.yaml")
        with open(schema_path, "w") as fileobj:
            yaml.safe_dump(schema, fileobj)
        rc = main._main(["-q", "estimate", "--data", data,
                         "--schema", schema_path, "--dims", "judge",
                         "--estimators", "md_cjive", "--out",
                         self.path("report.json")])
        self.assertEqual(rc, EXIT_INFEASIBLE)

    def test_estimate_without_schema(self):
        with self.assertRaises(InvalidConfigurationError):
            main._main(["-q", "estimate", "--data", "x.csv", "--dims", "a"])

    def test_simulate(self):
        out = self.path("study.json")
        rc = main._main(["-q", "-c", self.config, "simulate", "--out", out,
                         "--estimators", "tsls,md_cjive"])
        self.assertEqual(rc, EXIT_OK)
        with open(out) as fileobj:
            doc = json.load(fileobj)
        self.assertEqual([e["name"] for e in doc["estimators"]],
                         ["tsls", "md_cjive"])
        self.assertEqual(doc["metadata"]["reps"], 2)
        self.assertEqual(doc["metadata"]["n"], 120)

    def test_simulate_unknown_estimator(self):
        with self.assertRaises(InvalidConfigurationError):
            main._main(["-q", "-c", self.config, "simulate", "--out",
                        self.path("study.csv"), "--estimators",
                        "leave_out_tsls"])

    def test_check_fault(self):
        rc = main._main(["-q", "check", "--fast", "--inject-fault"])
        self.assertEqual(rc, EXIT_CHECK_FAILED)

    def test_no_command(self):
        self.assertEqual(main._main(["-q"]), EXIT_INPUT)

    def test_dump_sample_configs(self):
        cwd = os.getcwd()
        os.chdir(self.dir)
        try:
            self.assertEqual(main._main(["-q", "--dump-sample-configs"]),
                             EXIT_OK)
            self.assertTrue(os.path.exists("judgeiv.yaml"))
            with open("schema.yaml") as fileobj:
                self.assertIn("outcome", yaml.safe_load(fileobj))
        finally:
            os.chdir(cwd)


if __name__ == "__main__":
    unittest.main()
