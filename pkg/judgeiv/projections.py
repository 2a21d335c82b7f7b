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

# Projection matrices and their jackknifed variants.

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from judgeiv.data import RANK_TOLERANCE, build_judge_projection
from judgeiv.exceptions import (
    IdentificationFailure,
    InternalError,
    LeaveOutUndefined,
)

logger = logging.getLogger()

# Variant tags.
PLAIN = "plain"
DOT = "dot"
DDOT = "ddot"
DDDOT = "dddot"
FE_ADJUSTED = "fe-adjusted"

# Entries left after jackknifing that are this small relative to the
# largest entry of the base matrix are rounding noise.
ZERO_TOLERANCE = 1e-12


@dataclass(frozen=True)
class ProjectionKit:
    """An n x n projection-like matrix together with how it was made.

    ``zeroed`` counts the non-zero entries of the base matrix that the
    jackknife removed.
    """

    matrix: np.ndarray
    variant: str = PLAIN
    mask: np.ndarray = None
    zeroed: int = 0
    adjustment: object = None

    def is_zero(self):
        return not np.any(self.matrix)


def annihilate(W, A, tol=RANK_TOLERANCE):
    """Compute M_W A = A - W (W'W)^-1 W' A through a thin QR of W.

    W must have full column rank; run prune_controls first.
    """
    A = np.asarray(A, dtype=float)
    if W is None:
        return A.copy()
    W = np.asarray(W, dtype=float)
    if W.ndim == 1:
        W = W[:, None]
    if W.shape[1] == 0:
        return A.copy()
    q, r = scipy.linalg.qr(W, mode="economic")
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag.min() <= tol * diag.max():
        raise InternalError(
            "Control matrix is rank deficient; prune the controls first")
    return A - q @ (q.T @ A)


def residual_maker(W, n):
    """M_W = I - P_W as a dense n x n matrix."""
    M = annihilate(W, np.eye(n))
    return (M + M.T) / 2


def column_projection(A, scale=None, tol=RANK_TOLERANCE):
    """Orthogonal projection onto the column space of A.

    Columns are counted through a column-pivoted QR: a pivot counts when
    it exceeds ``tol`` times the larger of the first pivot and
    ``scale``. Pass the norm of the pre-annihilation matrix as ``scale``
    so that columns reduced to rounding noise count as zero.

    :returns: A tuple of the projection matrix and its rank.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if A.shape[1] == 0:
        return np.zeros((n, n)), 0
    q, r, _ = scipy.linalg.qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    reference = max(diag[0] if diag.size else 0.0, scale or 0.0)
    if reference == 0:
        return np.zeros((n, n)), 0
    rank = int(np.count_nonzero(diag > tol * reference))
    q = q[:, :rank]
    P = q @ q.T
    return (P + P.T) / 2, rank


def base_projection(data, W=None):
    """The projection the estimators start from.

    Without controls and with judge dummies as instruments this is the
    closed-form P_Z. Otherwise it is P_{M_W Z}, the projection onto the
    instruments after partialling out the controls.
    """
    if W is None:
        W = data.W
    W = np.asarray(W, dtype=float)
    if W.shape[1] == 0 and data.Z is None:
        return build_judge_projection(data.judge)
    Z = data.instruments()
    MZ = annihilate(W, Z)
    scale = float(np.sqrt((Z ** 2).sum(axis=0).max())) if Z.size else 0.0
    P, rank = column_projection(MZ, scale=scale)
    if rank == 0:
        raise IdentificationFailure(
            "Instruments are collinear with the controls: judge-level fixed "
            "effects leave no identifying variation")
    if rank < Z.shape[1]:
        logger.debug("Instrument rank %d after partialling out %d controls "
                     "(%d instruments)", rank, W.shape[1], Z.shape[1])
    return P


def jackknife(base, mask=None, variant=None):
    """Zero the entries of ``base`` selected by ``mask``.

    With no mask only the diagonal is zeroed (JIVE). The result is an
    IdentificationFailure when nothing survives.
    """
    if isinstance(base, ProjectionKit):
        base = base.matrix
    P = np.asarray(base, dtype=float)
    n = P.shape[0]
    if mask is None:
        mask = np.eye(n, dtype=bool)
        variant = variant or DOT
    else:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != P.shape:
            raise InternalError("Mask shape %s does not match projection %s" % (
                mask.shape, P.shape))
        variant = variant or DDDOT
    out = np.where(mask, 0.0, P)
    zeroed = int(np.count_nonzero(P[mask]))
    top = float(np.abs(P).max()) if P.size else 0.0
    if not np.any(out) or np.abs(out).max() <= ZERO_TOLERANCE * top:
        raise IdentificationFailure(
            "Jackknifed projection is identically zero: every pair of cases "
            "sharing a judge also shares a cluster (clustering at the judge "
            "level leaves the coefficient unidentified)")
    logger.debug("Jackknife (%s) zeroed %d entries", variant, zeroed)
    return ProjectionKit(out, variant, mask, zeroed)


def _group_sum(codes, values, count):
    out = np.zeros((count,) + values.shape[1:])
    np.add.at(out, codes, values)
    return out


def leave_out_instrument(data, dim=None, X=None):
    """The leave-out sum L_i: the treatment summed over cases of the same
    judge outside case i's cluster.

    :returns: A tuple (L, D_n, D_tilde) where D_n holds n_J(i) and
        D_tilde the number of cases counted in L_i.
    """
    X = data.X if X is None else np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = data.n
    if dim is None:
        labels = np.arange(n)
    else:
        labels = data.clustering.labels(dim)
    judge = data.judge
    cells, cell_codes = np.unique(
        np.column_stack((judge, labels)), axis=0, return_inverse=True)
    cell_codes = np.asarray(cell_codes).reshape(-1)
    judge_sum = _group_sum(judge, X, data.k)
    cell_sum = _group_sum(cell_codes, X, cells.shape[0])
    L = judge_sum[judge] - cell_sum[cell_codes]
    D_n = data.judge_sizes[judge].astype(float)
    D_tilde = D_n - np.bincount(cell_codes, minlength=cells.shape[0])[cell_codes]
    undefined = np.flatnonzero(D_tilde == 0)
    if undefined.size:
        case = int(undefined[0])
        logger.debug("Leave-out undefined for %d case(s)", undefined.size)
        raise LeaveOutUndefined(case, data.judge_label(judge[case]))
    return L, D_n, D_tilde
