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

# Jackknifed projections that absorb fixed effects.
#
# With controls W (typically cluster dummies) the projection is adjusted
# as P~ = P - M H M, where P = P_{M_W Z}, M = M_W - P and H solves
#
#   [M H M]_ij = P_ij for every pair (i, j) sharing a general cluster,
#
# with H supported on those pairs. For singleton general clusters H is
# the diagonal matrix of the vector theta solving (M * M) theta = diag(P).

import logging
import warnings
from collections import namedtuple
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from judgeiv.data import RANK_TOLERANCE, prune_controls
from judgeiv.estimators import iv_kernel
from judgeiv.exceptions import (
    AdjustmentInfeasible,
    IdentificationFailure,
    InvalidConfigurationError,
    ResourceLimit,
)
from judgeiv.projections import (
    FE_ADJUSTED,
    ZERO_TOLERANCE,
    ProjectionKit,
    annihilate,
    base_projection,
    residual_maker,
)

logger = logging.getLogger()

# Largest number of unknowns (sum of squared general cluster sizes) the
# dense block system may have.
DEFAULT_MAX_SYSTEM_SIZE = 40000

PIVOT_TOLERANCE = 1e-12
RESIDUAL_TOLERANCE = 1e-10

DIAGONAL = "diagonal"
BLOCK = "block"

FeProjection = namedtuple("FeProjection", ["kit", "W", "M", "P"])


@dataclass(frozen=True)
class FeAdjustment:
    """The solved adjustment H.

    For ``kind == "diagonal"`` ``values`` is the vector theta. For
    ``kind == "block"`` ``values`` is the vector of H entries on the pairs
    ``(rows[i], cols[i])``.
    """

    kind: str
    values: np.ndarray
    rows: np.ndarray = None
    cols: np.ndarray = None
    system_size: int = 0
    pivot_ratio: float = 1.0
    residual: float = 0.0

    def matrix(self, n):
        """H as a dense n x n matrix."""
        if self.kind == DIAGONAL:
            return np.diag(self.values)
        H = np.zeros((n, n))
        H[self.rows, self.cols] = self.values
        return H


def _lu_solve(S, rhs, what):
    """Solve S x = rhs with LU, rejecting near-singular systems."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(S, check_finite=False)
    pivots = np.abs(np.diag(lu))
    top = pivots.max() if pivots.size else 0.0
    ratio = pivots.min() / top if top > 0 else 0.0
    if not np.isfinite(ratio) or ratio <= PIVOT_TOLERANCE:
        raise AdjustmentInfeasible(
            "%s system is singular (pivot ratio %.3g)" % (what, ratio),
            pivot_ratio=float(ratio), weakest=int(np.argmin(pivots)))
    return scipy.linalg.lu_solve((lu, piv), rhs, check_finite=False), ratio


def _leverage_details(M):
    leverage = 1.0 - np.diag(M)
    return {"max_leverage": float(leverage.max()),
            "max_leverage_case": int(np.argmax(leverage))}


def solve_vartheta(M, diag_P):
    """Solve (M * M) theta = diag(P) for the diagonal adjustment."""
    M = np.asarray(M, dtype=float)
    diag_P = np.asarray(diag_P, dtype=float)
    S = M * M
    try:
        theta, ratio = _lu_solve(S, diag_P, "Diagonal adjustment")
    except AdjustmentInfeasible as err:
        err.details.update(_leverage_details(M))
        raise
    residual = float(np.abs(diag_P - S @ theta).max())
    scale = max(float(np.abs(diag_P).max()), np.finfo(float).tiny)
    if residual > RESIDUAL_TOLERANCE * scale:
        raise AdjustmentInfeasible(
            "Diagonal adjustment residual %.3g too large" % (residual),
            residual=residual)
    logger.debug("Diagonal adjustment: pivot ratio %.3g residual %.3g",
                 ratio, residual)
    return FeAdjustment(DIAGONAL, theta, system_size=theta.size,
                        pivot_ratio=float(ratio), residual=residual)


def block_pairs(labels):
    """Row and column indices of every ordered pair of cases that share
    a cluster, grouped cluster by cluster."""
    labels = np.asarray(labels)
    order = np.argsort(labels, kind="stable")
    sizes = np.bincount(labels)
    rows = []
    cols = []
    start = 0
    for size in sizes:
        members = order[start:start + size]
        start += size
        rows.append(np.repeat(members, size))
        cols.append(np.tile(members, size))
    return np.concatenate(rows), np.concatenate(cols)


def solve_block_H(M, P, labels, max_system_size=DEFAULT_MAX_SYSTEM_SIZE):
    """Solve for H supported on the within-cluster pairs of ``labels``.

    The system has one unknown per ordered pair (i, j) in the same
    cluster: sum_kl M_ik H_kl M_lj = P_ij, with (k, l) ranging over the
    same pairs.
    """
    M = np.asarray(M, dtype=float)
    P = np.asarray(P, dtype=float)
    labels = np.asarray(labels)
    size = int((np.bincount(labels).astype(np.int64) ** 2).sum())
    if size > max_system_size:
        raise ResourceLimit(
            "Block adjustment needs %d unknowns, more than the limit of %d" % (
                size, max_system_size),
            system_size=size, limit=int(max_system_size))
    rows, cols = block_pairs(labels)
    logger.debug("Solving block adjustment with %d unknowns", size)
    S = M[np.ix_(rows, rows)] * M[np.ix_(cols, cols)]
    rhs = P[rows, cols]
    try:
        values, ratio = _lu_solve(S, rhs, "Block adjustment")
    except AdjustmentInfeasible as err:
        err.details.update(_leverage_details(M))
        raise
    del S
    H = np.zeros_like(M)
    H[rows, cols] = values
    fitted = (M @ H @ M)[rows, cols]
    residual = float(np.abs(rhs - fitted).max())
    scale = max(float(np.abs(P).max()), np.finfo(float).tiny)
    if residual > RESIDUAL_TOLERANCE * scale:
        raise AdjustmentInfeasible(
            "Block adjustment residual %.3g too large" % (residual),
            residual=residual)
    return FeAdjustment(BLOCK, values, rows=rows, cols=cols,
                        system_size=size, pivot_ratio=float(ratio),
                        residual=residual)


def fe_design(data, fe_dims=()):
    """The control matrix [W, dummies of each fixed-effect dimension],
    pruned to full column rank."""
    blocks = [data.W]
    for dim in fe_dims:
        if data.clustering.is_singleton(dim):
            raise InvalidConfigurationError(
                "Fixed effects for the singleton dimension %s absorb every "
                "case" % (dim))
        blocks.append(data.clustering.dummies(dim))
    W = np.hstack(blocks) if blocks else data.W
    W, dropped = prune_controls(W, tol=RANK_TOLERANCE)
    if dropped:
        logger.debug("Fixed-effect design: dropped %d collinear column(s)",
                     len(dropped))
    return W


def fe_projection(data, fe_dims=(), general_dim=None,
                  max_system_size=DEFAULT_MAX_SYSTEM_SIZE):
    """Build the FE-adjusted projection P~ = P - M H M.

    Fixed effects are absorbed for ``fe_dims``; ``general_dim`` names the
    dimension whose within-cluster entries are removed. Without a general
    dimension (or with a singleton one) only the diagonal is removed.
    """
    W = fe_design(data, fe_dims)
    P = base_projection(data, W)
    M = residual_maker(W, data.n) - P
    M = (M + M.T) / 2
    if general_dim is None or data.clustering.is_singleton(general_dim):
        adjustment = solve_vartheta(M, np.diag(P))
        Ptilde = P - (M * adjustment.values[None, :]) @ M
    else:
        labels = data.clustering.labels(general_dim)
        adjustment = solve_block_H(M, P, labels, max_system_size)
        Ptilde = P - M @ adjustment.matrix(data.n) @ M
    if not np.any(Ptilde) or \
            np.abs(Ptilde).max() <= ZERO_TOLERANCE * np.abs(P).max():
        raise IdentificationFailure(
            "FE-adjusted projection is identically zero")
    kit = ProjectionKit(Ptilde, FE_ADJUSTED, adjustment=adjustment)
    return FeProjection(kit, W, M, P)


def fe_jive(data, fe_dims=()):
    """JIVE with the fixed effects of ``fe_dims`` absorbed."""
    projection = fe_projection(data, fe_dims)
    X = annihilate(projection.W, data.X)
    y = annihilate(projection.W, data.y)
    result = iv_kernel(projection.kit, X, y, "fe_jive")
    _annotate(result, projection, fe_dims, None)
    return result


def fe_cjive(data, fe_dims=(), general_dim=None,
             max_system_size=DEFAULT_MAX_SYSTEM_SIZE):
    """CJIVE on ``general_dim`` with the fixed effects of ``fe_dims``
    absorbed."""
    projection = fe_projection(data, fe_dims, general_dim, max_system_size)
    X = annihilate(projection.W, data.X)
    y = annihilate(projection.W, data.y)
    result = iv_kernel(projection.kit, X, y, "fe_cjive")
    _annotate(result, projection, fe_dims, general_dim)
    return result


def _annotate(result, projection, fe_dims, general_dim):
    adjustment = projection.kit.adjustment
    result.diagnostics.update({
        "fe_dims": list(fe_dims),
        "general_dim": general_dim,
        "adjustment": adjustment.kind,
        "system_size": adjustment.system_size,
        "pivot_ratio": adjustment.pivot_ratio,
        "residual": adjustment.residual,
        "controls": int(projection.W.shape[1]),
    })
