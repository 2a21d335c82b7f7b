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

# The IV estimators that differ only in the matrix placed between X and
# y: two-stage least squares, JIVE, CJIVE, multi-dimensional CJIVE and
# the leave-out 2SLS formulation.

import logging
from dataclasses import dataclass, field

import numpy as np

from judgeiv.data import union_mask
from judgeiv.exceptions import IdentificationFailure
from judgeiv.projections import (
    DDOT,
    DDDOT,
    PLAIN,
    ProjectionKit,
    annihilate,
    base_projection,
    jackknife,
    leave_out_instrument,
)

logger = logging.getLogger()

# Relative size and reciprocal condition thresholds of X'PX.
DEGENERACY_TOLERANCE = 1e-12


@dataclass
class EstimateResult:
    beta: np.ndarray
    estimator: str
    variance: object = None
    diagnostics: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    @property
    def coef(self):
        """The first coefficient as a float."""
        return float(self.beta[0])

    @property
    def se(self):
        if self.variance is None:
            return None
        return self.variance.se


def _as_matrix(X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return X


def _solve(A, b, bound, what, tol=DEGENERACY_TOLERANCE):
    if bound == 0 or not np.all(np.isfinite(A)):
        raise IdentificationFailure(
            "%s: no identifying variation (zero scale)" % (what))
    if np.abs(A).max() <= tol * bound:
        raise IdentificationFailure(
            "%s: X'PX vanishes; the treatment carries no variation through "
            "the projection" % (what))
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > 1.0 / tol:
        raise IdentificationFailure(
            "%s: X'PX is singular (condition number %.3g)" % (what, cond))
    return np.linalg.solve(A, b), 1.0 / cond


def iv_kernel(P, X, y, estimator="iv"):
    """Solve beta = (X'PX)^-1 X'Py for any projection-like P.

    Raises IdentificationFailure when P is zero or X'PX is numerically
    singular.
    """
    kit = P if isinstance(P, ProjectionKit) else ProjectionKit(
        np.asarray(P, dtype=float))
    P = kit.matrix
    X = _as_matrix(X)
    y = np.asarray(y, dtype=float)
    if kit.is_zero():
        raise IdentificationFailure(
            "%s: projection is identically zero" % (estimator))
    A = X.T @ (P @ X)
    b = X.T @ (P @ y)
    bound = np.linalg.norm(P) * np.linalg.norm(X) ** 2
    beta, rcond = _solve(A, b, bound, estimator)
    diagnostics = {
        "variant": kit.variant,
        "zeroed_entries": kit.zeroed,
        "rcond": rcond,
    }
    logger.debug("%s: beta=%s rcond=%.3g", estimator, beta, rcond)
    return EstimateResult(beta=beta, estimator=estimator,
                          diagnostics=diagnostics)


def partial_out(data, W=None):
    """X and y after partialling out the controls."""
    W = data.W if W is None else W
    return annihilate(W, data.X), annihilate(W, data.y)


def tsls(data):
    P = base_projection(data)
    X, y = partial_out(data)
    return iv_kernel(ProjectionKit(P, PLAIN), X, y, "tsls")


def jive(data):
    kit = jackknife(base_projection(data))
    X, y = partial_out(data)
    return iv_kernel(kit, X, y, "jive")


def cjive(data, dim=None):
    """CJIVE: zero every entry of P between cases sharing a cluster in
    dimension ``dim``. With a singleton dimension (or none) this is
    JIVE."""
    if dim is None:
        return jive(data)
    mask = data.clustering.mask(dim)
    kit = jackknife(base_projection(data), mask, DDOT)
    X, y = partial_out(data)
    result = iv_kernel(kit, X, y, "cjive")
    result.diagnostics["dims"] = [dim]
    return result


def md_cjive(data, dims=None):
    """Multi-dimensional CJIVE over the union of the given dimensions
    (all clustering dimensions by default)."""
    dims = list(data.clustering.names if dims is None else dims)
    if not dims:
        result = jive(data)
        result.estimator = "md_cjive"
        return result
    mask = union_mask(data.clustering, dims)
    kit = jackknife(base_projection(data), mask, DDDOT)
    X, y = partial_out(data)
    result = iv_kernel(kit, X, y, "md_cjive")
    result.diagnostics["dims"] = dims
    return result


def leave_out_tsls(data, dim=None, weighted=True):
    """2SLS with the leave-out sum of the treatment as instrument.

    The weighted form (X'D_n^-1 L)^-1 L'D_n^-1 y equals CJIVE on the same
    dimension. The unweighted form instruments with the leave-out mean
    D_tilde^-1 L instead.
    """
    X, y = partial_out(data)
    L, D_n, D_tilde = leave_out_instrument(data, dim, X=X)
    if weighted:
        instrument = L / D_n[:, None]
        estimator = "leave_out_tsls"
    else:
        instrument = L / D_tilde[:, None]
        estimator = "leave_out_tsls_unweighted"
    A = instrument.T @ X
    b = instrument.T @ y
    bound = np.linalg.norm(instrument) * np.linalg.norm(X)
    beta, rcond = _solve(A, b, bound, estimator)
    logger.debug("%s: beta=%s", estimator, beta)
    return EstimateResult(
        beta=beta, estimator=estimator,
        diagnostics={"rcond": rcond,
                     "dims": [dim] if dim is not None else [],
                     "weighting": "weighted" if weighted else "unweighted"})

