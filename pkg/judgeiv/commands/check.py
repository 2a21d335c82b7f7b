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

import argparse
import logging

from judgeiv import config
from judgeiv import util
from judgeiv.checks import DEFAULT_SEED, run_checks
from judgeiv.exceptions import EXIT_CHECK_FAILED, EXIT_OK

logger = logging.getLogger()

def register(parser):
    parser.add_argument("--fast", action="store_true", default=False,
                        help="Run a tenth of the random instances")
    parser.add_argument("--inject-fault", action="store_true", default=False,
                        help=argparse.SUPPRESS)
    parser.set_defaults(func=check)

def check():
    run = config.run_config()
    seed = config.get("check-seed") or DEFAULT_SEED
    results = run_checks(fast=run.fast, inject_fault=run.inject_fault,
                         seed=seed)
    failed = [result for result in results if not result.passed]
    for result in results:
        status = util.green("ok") if result.passed else util.red("FAILED")
        print("%-24s %s  %s" % (result.name, status, result.detail))
    if failed:
        logger.error("%d of %d checks failed", len(failed), len(results))
        return EXIT_CHECK_FAILED
    logger.info("All %d checks passed", len(results))
    return EXIT_OK
