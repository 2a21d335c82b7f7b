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
from judgeiv import simulation
from judgeiv import util
from judgeiv.exceptions import EXIT_OK, InvalidConfigurationError
from judgeiv.report import write_simulation

logger = logging.getLogger()

def register(parser):
    parser.add_argument("--out", metavar="<filename>",
                        help="Summary file, JSON when it ends in .json, "
                        "CSV otherwise")
    parser.add_argument("--estimators", metavar="<list>",
                        help="Comma separated estimators (default: all six "
                        "of the scenario)")
    parser.add_argument("--reps", metavar="<int>", type=int,
                        help="Number of replications")
    parser.add_argument("--scenario", metavar="<name>",
                        help="figure1, figure2, figure3 or fe-only")
    parser.set_defaults(func=simulate)

def select_specs(scenario, names):
    """The default specs of the scenario, restricted to ``names``."""
    specs = simulation.FE_ONLY_ESTIMATORS \
        if scenario == simulation.FE_ONLY else simulation.DEFAULT_ESTIMATORS
    if not names:
        return list(specs)
    selected = [spec for spec in specs if spec.name in names]
    missing = [name for name in names
               if name not in [spec.name for spec in selected]]
    if missing:
        raise InvalidConfigurationError(
            "Estimator(s) not part of the %s study: %s" % (
                scenario, ", ".join(missing)))
    return selected

def print_summaries(result, stream=sys.stdout):
    for summary in result.summaries:
        stream.write("%-10s median %s  IQR %s  failures %d\n" % (
            util.bright_cyan(summary.name),
            util.format_sig(summary.median, 4),
            util.format_sig(summary.iqr, 4),
            summary.failures))

def simulate():
    run = config.run_config()
    dgp_config = simulation.DgpConfig.from_config(config.get)
    specs = select_specs(dgp_config.scenario, run.estimators)
    result = simulation.monte_carlo(dgp_config, specs)
    write_simulation(result, run.out_path)
    logger.info("Wrote summary of %d replications to %s", dgp_config.reps,
                run.out_path)
    if not config.args().quiet:
        print_summaries(result)
    return EXIT_OK
