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

# Cluster-robust sandwich variance estimators for MD CJIVE and FE CJIVE.
#
# Both are V = A^-1 B A^-T with A = X'P~X. The middle matrix B is a sum
# of a "direct" term over pairs sharing a cluster and a "cross" term
# that picks up the dependence running through the projection itself.

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sps

from judgeiv.data import sparse_union_mask, union_mask
from judgeiv.estimators import iv_kernel, md_cjive, partial_out
from judgeiv.exceptions import IdentificationFailure
from judgeiv.fejackknife import DEFAULT_MAX_SYSTEM_SIZE, fe_projection
from judgeiv.projections import DDDOT, annihilate, base_projection, jackknife

logger = logging.getLogger()

# An eigenvalue above -PSD_TOLERANCE * trace counts as non-negative.
PSD_TOLERANCE = 1e-10

NORMAL_QUANTILE = 1.96


@dataclass
class VarianceResult:
    matrix: np.ndarray
    method: str
    terms: dict = field(default_factory=dict)
    psd: bool = True
    min_eigenvalue: float = 0.0
    dof_corrected: bool = False

    @property
    def se(self):
        """Standard errors; NaN where the diagonal is negative."""
        diag = np.diag(self.matrix)
        with np.errstate(invalid="ignore"):
            return np.where(diag >= 0, np.sqrt(np.abs(diag)), np.nan)


def _sandwich(A, middle, method, terms, n, dof):
    Ainv = np.linalg.inv(A)
    V = Ainv @ middle @ Ainv.T
    V = (V + V.T) / 2
    p = A.shape[0]
    if dof:
        if n <= p:
            raise IdentificationFailure(
                "Degrees-of-freedom correction needs more cases than "
                "coefficients")
        V = V * (n / (n - p))
    eigenvalues = np.linalg.eigvalsh(V)
    trace = float(np.trace(V))
    min_eigenvalue = float(eigenvalues.min())
    psd = min_eigenvalue >= -PSD_TOLERANCE * abs(trace)
    if not psd:
        logger.warning("%s variance estimate is not positive semi-definite "
                       "(smallest eigenvalue %.3g)", method, min_eigenvalue)
    return VarianceResult(V, method, terms, psd, min_eigenvalue, bool(dof))


def md_cjive_variance_terms(P_dddot, X, resid, U):
    """The direct and cross terms of the MD CJIVE variance.

    ``U`` is the sparse 0/1 union mask (diagonal included) and
    ``P_dddot`` the jackknifed projection, which must be symmetric.

    The cross term is entry-wise
    T[s, t] = sum_jk e_j e_k R_s[k, j] R_t[j, k] with R_s = U diag(X_s) P.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    p = X.shape[1]
    a = (P_dddot @ X) * resid[:, None]
    direct = a.T @ (U @ a)
    reach = [np.asarray(U @ (X[:, [s]] * P_dddot)) for s in range(p)]
    cross = np.empty((p, p))
    for s in range(p):
        for t in range(p):
            cross[s, t] = resid @ ((reach[s].T * reach[t]) @ resid)
    return direct, cross


def md_cjive_variance(data, dims=None, beta_hat=None, dof=False):
    """Variance of the multi-dimensional CJIVE estimate."""
    dims = list(data.clustering.names if dims is None else dims)
    if beta_hat is None:
        beta_hat = md_cjive(data, dims).beta
    beta_hat = np.atleast_1d(np.asarray(beta_hat, dtype=float))
    X, y = partial_out(data)
    if dims:
        mask = union_mask(data.clustering, dims)
        U = sparse_union_mask(data.clustering, dims)
    else:
        mask = None
        U = sps.identity(data.n, format="csr")
    kit = jackknife(base_projection(data), mask, DDDOT)
    P = (kit.matrix + kit.matrix.T) / 2
    resid = y - X @ beta_hat
    direct, cross = md_cjive_variance_terms(P, X, resid, U)
    A = X.T @ P @ X
    return _sandwich(A, direct + cross, "md_cjive",
                     {"direct": direct, "cross": cross}, data.n, dof)


def fe_cjive_variance_terms(P_tilde, X, resid, labels):
    """The within-cluster and between-cluster terms of the FE CJIVE
    variance for general clusters ``labels``.

    The between term is sum over clusters g != h of
    (X_g' P~_gh e_h)(e_g' P~_gh X_h).
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    p = X.shape[1]
    n = X.shape[0]
    labels = np.asarray(labels)
    G = int(labels.max()) + 1
    D = sps.csr_matrix((np.ones(n), (np.arange(n), labels)), shape=(n, G))
    S = D @ D.T
    left = (P_tilde.T @ X) * resid[:, None]
    right = (P_tilde @ X) * resid[:, None]
    within = left.T @ (S @ right)
    Dd = D.toarray()
    PE = P_tilde @ (resid[:, None] * Dd)
    C = [Dd.T @ (X[:, [s]] * PE) for s in range(p)]
    E = [Dd.T @ (resid[:, None] * (P_tilde @ (X[:, [t]] * Dd)))
         for t in range(p)]
    between = np.empty((p, p))
    for s in range(p):
        for t in range(p):
            product = C[s] * E[t]
            between[s, t] = product.sum() - np.trace(product)
    return within, between


def fe_cjive_variance(data, fe_dims=(), general_dim=None, beta_hat=None,
                      dof=False, max_system_size=DEFAULT_MAX_SYSTEM_SIZE):
    """Variance of the FE CJIVE estimate.

    Residuals are M_{W,Z}(y - X beta).
    """
    projection = fe_projection(data, fe_dims, general_dim, max_system_size)
    X = annihilate(projection.W, data.X)
    if beta_hat is None:
        y = annihilate(projection.W, data.y)
        beta_hat = iv_kernel(projection.kit, X, y, "fe_cjive").beta
    beta_hat = np.atleast_1d(np.asarray(beta_hat, dtype=float))
    resid = projection.M @ (data.y - data.X @ beta_hat)
    if general_dim is None:
        labels = np.arange(data.n)
    else:
        labels = data.clustering.labels(general_dim)
    P = projection.kit.matrix
    within, between = fe_cjive_variance_terms(P, X, resid, labels)
    A = X.T @ P @ X
    return _sandwich(A, within + between, "fe_cjive",
                     {"within": within, "between": between}, data.n, dof)


def heuristic_interval(beta, se, quantile=NORMAL_QUANTILE):
    """beta +/- 1.96 se. The normal approximation is a heuristic; no
    asymptotic theory backs it for these estimators."""
    beta = np.asarray(beta, dtype=float)
    se = np.asarray(se, dtype=float)
    return beta - quantile * se, beta + quantile * se
