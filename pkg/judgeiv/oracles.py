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

# Literal, loop-based versions of the masks and variance formulas. These
# are slow and only meant for small instances, as references for the
# vectorised code.

import numpy as np

from judgeiv.data import JudgeDesignData, MultiwayClustering


def shares_cluster(clustering, dims, i, j):
    return any(clustering.labels(d)[i] == clustering.labels(d)[j]
               for d in dims)


def union_mask(clustering, dims):
    n = clustering.n
    mask = np.zeros((n, n), dtype=bool)
    for i in range(n):
        for j in range(n):
            mask[i, j] = shares_cluster(clustering, dims, i, j)
    return mask


def judge_projection(judge):
    n = len(judge)
    P = np.zeros((n, n))
    for i in range(n):
        size = sum(1 for j in range(n) if judge[j] == judge[i])
        for j in range(n):
            if judge[i] == judge[j]:
                P[i, j] = 1.0 / size
    return P


def md_cjive_middle(P, X, resid, clustering, dims):
    """The middle matrix of the MD CJIVE sandwich by direct summation.

    ``P`` is the projection before jackknifing.
    """
    n, p = X.shape
    share = union_mask(clustering, dims)
    cross = np.zeros((p, p))
    for j in range(n):
        for k in range(n):
            a = np.zeros(p)
            for i in range(n):
                if share[k, i] and not share[i, j]:
                    a += X[i] * P[i, j]
            b = np.zeros(p)
            for l in range(n):
                if share[j, l] and not share[k, l]:
                    b += P[k, l] * X[l]
            cross += resid[j] * resid[k] * np.outer(a, b)
    P_dddot = np.where(share, 0.0, P)
    direct = np.zeros((p, p))
    for j in range(n):
        for k in range(n):
            if share[j, k]:
                left = X.T @ P_dddot[:, j]
                right = P_dddot[k, :] @ X
                direct += resid[j] * resid[k] * np.outer(left, right)
    return direct, cross


def fe_cjive_middle(P_tilde, X, resid, labels):
    """The middle matrix of the FE CJIVE sandwich by direct summation."""
    n, p = X.shape
    labels = np.asarray(labels)
    within = np.zeros((p, p))
    for j in range(n):
        for k in range(n):
            if labels[j] == labels[k]:
                left = X.T @ P_tilde[:, j]
                right = P_tilde[k, :] @ X
                within += resid[j] * resid[k] * np.outer(left, right)
    between = np.zeros((p, p))
    groups = [np.flatnonzero(labels == g) for g in np.unique(labels)]
    for g, members_g in enumerate(groups):
        for h, members_h in enumerate(groups):
            if g == h:
                continue
            first = np.zeros(p)
            second = np.zeros(p)
            for a in members_g:
                for b in members_h:
                    first += X[a] * P_tilde[a, b] * resid[b]
                    second += resid[a] * P_tilde[a, b] * X[b]
            between += np.outer(first, second)
    return within, between


def sandwich(P_tilde, X, middle):
    A = X.T @ P_tilde @ X
    Ainv = np.linalg.inv(A)
    V = Ainv @ middle @ Ainv.T
    return (V + V.T) / 2


def random_design(rng, n, k, clusters=(), p=1, min_judge_size=1, beta=1.0,
                  controls=0):
    """A random judge design with ``k`` judges and one clustering
    dimension per entry of ``clusters`` (the number of clusters).

    Every judge handles at least ``min_judge_size`` cases.
    """
    if k * min_judge_size > n:
        raise ValueError("Cannot give %d judges %d cases each out of %d" % (
            k, min_judge_size, n))
    judge = np.concatenate([
        np.repeat(np.arange(k), min_judge_size),
        rng.integers(0, k, n - k * min_judge_size)])
    judge = rng.permutation(judge)
    judge = np.unique(judge, return_inverse=True)[1].reshape(-1)
    dims = []
    for count in clusters:
        labels = rng.permutation(np.concatenate([
            np.arange(count), rng.integers(0, count, n - count)]))
        dims.append(np.unique(labels, return_inverse=True)[1].reshape(-1))
    names = tuple("dim%d" % (i + 1) for i in range(len(dims)))
    pi = rng.standard_normal((k, p)) * 2.0
    noise = rng.standard_normal((n, p))
    X = pi[judge] + noise
    y = X @ np.full(p, beta) + rng.standard_normal(n) + noise[:, 0] * 0.5
    W = rng.standard_normal((n, controls)) if controls else None
    return JudgeDesignData(
        y=y, X=X, judge=judge, W=W,
        clustering=MultiwayClustering(tuple(dims), names))
