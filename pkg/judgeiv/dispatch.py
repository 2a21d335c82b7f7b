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
from dataclasses import dataclass

from judgeiv import estimators
from judgeiv import fejackknife
from judgeiv import variance
from judgeiv.exceptions import InvalidConfigurationError

logger = logging.getLogger()

ESTIMATORS = (
    "tsls",
    "jive",
    "cjive",
    "md_cjive",
    "leave_out_tsls",
    "leave_out_tsls_unweighted",
    "fe_jive",
    "fe_cjive",
)

# Estimators that come with a variance estimate.
WITH_VARIANCE = ("md_cjive", "fe_cjive")


@dataclass(frozen=True)
class EstimatorSpec:
    """An estimator together with the clustering dimensions it uses.

    ``dims`` are the dimensions whose within-cluster entries are removed
    (the first one only for cjive and leave-out 2SLS), ``fe_dims`` the
    dimensions absorbed as fixed effects and ``general_dim`` the
    dimension FE CJIVE jackknifes.
    """

    name: str
    dims: tuple = ()
    fe_dims: tuple = ()
    general_dim: str = None
    label: str = None

    def __post_init__(self):
        if self.name not in ESTIMATORS:
            raise InvalidConfigurationError(
                "Unknown estimator: %s (choose from %s)" % (
                    self.name, ", ".join(ESTIMATORS)))
        object.__setattr__(self, "dims", tuple(self.dims))
        object.__setattr__(self, "fe_dims", tuple(self.fe_dims))
        if self.label is None:
            object.__setattr__(self, "label", self.name)


def parse_estimators(value):
    """Parse a comma separated list of estimator names."""
    if isinstance(value, str):
        names = [name.strip() for name in value.split(",") if name.strip()]
    else:
        names = list(value)
    for name in names:
        if name not in ESTIMATORS:
            raise InvalidConfigurationError(
                "Unknown estimator: %s (choose from %s)" % (
                    name, ", ".join(ESTIMATORS)))
    return names


def estimate(spec, data, with_variance=False, dof=False,
             max_system_size=fejackknife.DEFAULT_MAX_SYSTEM_SIZE):
    """Run the estimator described by ``spec`` on ``data``."""
    first = spec.dims[0] if spec.dims else None
    if spec.name == "tsls":
        result = estimators.tsls(data)
    elif spec.name == "jive":
        result = estimators.jive(data)
    elif spec.name == "cjive":
        result = estimators.cjive(data, first)
    elif spec.name == "md_cjive":
        result = estimators.md_cjive(data, spec.dims)
    elif spec.name == "leave_out_tsls":
        result = estimators.leave_out_tsls(data, first)
    elif spec.name == "leave_out_tsls_unweighted":
        result = estimators.leave_out_tsls(data, first, weighted=False)
    elif spec.name == "fe_jive":
        result = fejackknife.fe_jive(data, spec.fe_dims)
    else:
        result = fejackknife.fe_cjive(data, spec.fe_dims, spec.general_dim,
                                      max_system_size)

    if with_variance and spec.name == "md_cjive":
        result.variance = variance.md_cjive_variance(
            data, spec.dims, result.beta, dof=dof)
    elif with_variance and spec.name == "fe_cjive":
        result.variance = variance.fe_cjive_variance(
            data, spec.fe_dims, spec.general_dim, result.beta, dof=dof,
            max_system_size=max_system_size)
    if result.variance is not None and not result.variance.psd:
        result.warnings.append("variance-not-psd")
    return result
