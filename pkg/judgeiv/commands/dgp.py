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

import yaml

from judgeiv import config
from judgeiv import simulation
from judgeiv.data import write_dataset
from judgeiv.exceptions import EXIT_OK, InvalidConfigurationError

logger = logging.getLogger()

def register(parser):
    parser.add_argument("--out", metavar="<filename>",
                        help="CSV file to write the dataset to")
    parser.add_argument("--replication", metavar="<int>", type=int,
                        default=0, help="Replication index to draw (default: 0)")
    parser.add_argument("--scenario", metavar="<name>",
                        help="figure1, figure2 or figure3 (default: figure1)")
    parser.set_defaults(func=dgp)

def schema_path(out):
    return out + ".schema.yaml"

def dgp():
    run = config.run_config()
    dgp_config = simulation.DgpConfig.from_config(config.get)
    if dgp_config.scenario == simulation.FE_ONLY:
        raise InvalidConfigurationError(
            "The fe-only scenario uses cluster instruments that the judge "
            "CSV layout cannot hold; use simulate instead")
    replication = config.get("replication") or 0
    if replication < 0:
        raise InvalidConfigurationError("replication must not be negative")

    sample = simulation.generate(dgp_config, replication)
    schema = write_dataset(sample.data, run.out_path)
    logger.info("Wrote %d cases (%d judges, true beta %g) to %s",
                sample.data.n, sample.data.k, dgp_config.beta, run.out_path)

    with open(schema_path(run.out_path), "w") as fileobj:
        yaml.safe_dump(schema.as_mapping(), fileobj, default_flow_style=False,
                       sort_keys=False)
    logger.info("Wrote schema to %s", schema_path(run.out_path))
    return EXIT_OK
