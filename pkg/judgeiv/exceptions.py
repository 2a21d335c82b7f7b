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

# Process exit codes.
EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3
EXIT_CHECK_FAILED = 4


class ApplicationError(Exception):
    code = "application-error"
    exit_code = 1

    def __init__(self, message, **details):
        super(ApplicationError, self).__init__(message)
        self.details = details

    def as_dict(self):
        doc = {"code": self.code, "message": str(self)}
        doc.update(self.details)
        return doc


class InvalidConfigurationError(ApplicationError):
    code = "invalid-configuration"
    exit_code = EXIT_INPUT


class DataError(ApplicationError):
    code = "data-error"
    exit_code = EXIT_INPUT


class SchemaError(DataError):
    code = "schema-error"


class InternalError(ApplicationError):
    code = "internal-error"
    exit_code = EXIT_INFEASIBLE


class EstimationError(ApplicationError):
    code = "estimation-error"
    exit_code = EXIT_INFEASIBLE


class IdentificationFailure(EstimationError):
    """The jackknifed projection carries no identifying variation."""
    code = "identification-failure"


class LeaveOutUndefined(EstimationError):
    """A case has no cases of its judge outside its own cluster."""
    code = "leave-out-undefined"

    def __init__(self, case, judge):
        super(LeaveOutUndefined, self).__init__(
            "Leave-out instrument undefined for case %d: judge %s handles "
            "no case outside the case's cluster" % (case, judge),
            case=int(case), judge=str(judge))
        self.case = case
        self.judge = judge


class AdjustmentInfeasible(EstimationError):
    code = "adjustment-infeasible"


class ResourceLimit(EstimationError):
    code = "resource-limit"
