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

import logging
import sys

from judgeiv import config
from judgeiv import report
from judgeiv.data import Schema, load_dataset
from judgeiv.exceptions import EXIT_INFEASIBLE, EXIT_OK

logger = logging.getLogger()

DEFAULT_ESTIMATORS = ("md_cjive", "fe_cjive")

def register(parser):
    parser.add_argument("--data", metavar="<filename>",
                        help="CSV file with one row per case")
    parser.add_argument("--schema", metavar="<filename>",
                        help="YAML file mapping columns to their roles")
    parser.add_argument("--dims", metavar="<spec>",
                        help="Clustering dimensions as name:handling,... "
                        "(handling: leave-out, fe or general)")
    parser.add_argument("--estimators", metavar="<list>",
                        help="Comma separated estimators (default: %s)" % (
                            ",".join(DEFAULT_ESTIMATORS)))
    parser.add_argument("--out", metavar="<filename>",
                        help="Report file, JSON when it ends in .json, "
                        "CSV otherwise (default: print a table)")
    parser.add_argument("--dof-correction", action="store_true", default=None,
                        help="Scale variances by n/(n-p)")
    parser.add_argument("--max-system-size", metavar="<int>", type=int,
                        help="Largest FE CJIVE block system to solve "
                        "(default: 40000)")
    parser.set_defaults(func=estimate)

def estimate():
    run = config.run_config()
    schema = Schema.load(run.schema_path)
    data = load_dataset(run.data_path, schema)
    rows = report.build_report(
        data, run.estimators or DEFAULT_ESTIMATORS, run.dims,
        dof=run.dof_correction, max_system_size=run.max_system_size)

    if run.out_path:
        report.write_report(rows, run.out_path)
        logger.info("Wrote %d rows to %s", len(rows), run.out_path)
    else:
        report.print_report(rows, sys.stdout)

    failed = [row for row in rows if row["status"] != "ok"]
    if failed:
        logger.warning("%d of %d rows failed", len(failed), len(rows))
    if rows and len(failed) == len(rows):
        return EXIT_INFEASIBLE
    return EXIT_OK
