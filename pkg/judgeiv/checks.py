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

# Self-checks: numerical identities and oracle comparisons on random
# instances.

import logging
import time
from dataclasses import dataclass

import numpy as np

from judgeiv import oracles
from judgeiv.data import MultiwayClustering, build_judge_projection, union_mask
from judgeiv.estimators import cjive, leave_out_tsls, md_cjive
from judgeiv.exceptions import (
    AdjustmentInfeasible,
    IdentificationFailure,
    LeaveOutUndefined,
)
from judgeiv.fejackknife import (
    block_pairs,
    fe_cjive,
    fe_projection,
    solve_block_H,
    solve_vartheta,
)
from judgeiv.projections import DDOT, annihilate, jackknife
from judgeiv.simulation import DgpConfig, FE_ONLY, generate_fe_only
from judgeiv.variance import fe_cjive_variance, md_cjive_variance

logger = logging.getLogger()

DEFAULT_SEED = 20240229


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def _relative(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    scale = max(float(np.abs(b).max()), np.finfo(float).tiny)
    return float(np.abs(a - b).max()) / scale


def check_zero_masks(rng, count, inject_fault=False):
    """Jackknifed projections vanish exactly on their masks."""
    worst = 0.0
    pending_fault = inject_fault
    for _ in range(count):
        n = int(rng.integers(10, 201))
        data = oracles.random_design(
            rng, n, int(rng.integers(2, max(3, n // 4))),
            clusters=(int(rng.integers(2, n)), int(rng.integers(2, n))))
        P = build_judge_projection(data.judge)
        mask = union_mask(data.clustering)
        try:
            dot = jackknife(P)
            ddot = jackknife(P, data.clustering.mask("dim1"), DDOT)
            dddot = jackknife(P, mask).matrix
        except IdentificationFailure:
            continue
        if pending_fault:
            dddot = dddot.copy()
            dddot[0, 0] = 1e-3
            pending_fault = False
        worst = max(worst,
                    float(np.abs(np.diag(dot.matrix)).max()),
                    float(np.abs(ddot.matrix[ddot.mask]).max()),
                    float(np.abs(dddot[mask]).max()))
    return worst == 0.0, "max violation %g over %d instances" % (worst, count)


def check_judge_projection(rng, count):
    """P_Z is idempotent with trace k."""
    worst = 0.0
    for _ in range(count):
        n = int(rng.integers(5, 121))
        judge = rng.integers(0, max(1, n // 3), n)
        judge = np.unique(judge, return_inverse=True)[1].reshape(-1)
        P = build_judge_projection(judge)
        k = int(judge.max()) + 1
        worst = max(worst, float(np.abs(P @ P - P).max()),
                    abs(float(np.trace(P)) - k))
    return worst <= 1e-12, "max deviation %g over %d instances" % (worst, count)


def check_union_mask(rng, count):
    """The union mask equals S1 + S2 - S1*S2 and the loop reference."""
    worst = 0
    for _ in range(count):
        n = int(rng.integers(4, 30))
        data = oracles.random_design(rng, n, 2, clusters=(
            int(rng.integers(1, n + 1)), int(rng.integers(1, n + 1))))
        s1 = data.clustering.mask("dim1").astype(int)
        s2 = data.clustering.mask("dim2").astype(int)
        mask = union_mask(data.clustering).astype(int)
        worst = max(worst, int(np.abs(mask - (s1 + s2 - s1 * s2)).max()))
        reference = oracles.union_mask(data.clustering, ("dim1", "dim2"))
        worst = max(worst, int(np.abs(mask - reference).max()))
    return worst == 0, "max mismatch %d over %d instances" % (worst, count)


def check_leave_out(rng, count):
    """CJIVE equals the weighted leave-out 2SLS."""
    worst = 0.0
    done = 0
    attempts = 0
    while done < count and attempts < 10 * count:
        attempts += 1
        n = int(rng.integers(20, 150))
        data = oracles.random_design(
            rng, n, int(rng.integers(2, 8)), clusters=(int(rng.integers(n // 2, n)),),
            min_judge_size=3)
        try:
            expected = cjive(data, "dim1").beta
            actual = leave_out_tsls(data, "dim1").beta
        except (LeaveOutUndefined, IdentificationFailure):
            continue
        worst = max(worst, _relative(actual, expected))
        done += 1
    return done == count and worst <= 1e-10, (
        "max relative difference %g over %d instances" % (worst, done))


def _fe_instance(rng):
    """A random design whose general clusters all have 3 to 5 cases."""
    G = int(rng.integers(3, 8))
    sizes = rng.integers(3, 6, G)
    labels = rng.permutation(np.repeat(np.arange(G), sizes))
    labels = np.unique(labels, return_inverse=True)[1].reshape(-1)
    n = labels.size
    data = oracles.random_design(rng, n, int(rng.integers(2, 4)),
                                 clusters=(int(rng.integers(2, 4)),),
                                 min_judge_size=3)
    return data.with_clustering(data.clustering.add("dim2", labels))


def check_fe_residuals(rng, count):
    """The FE adjustments zero the diagonal and the within-cluster
    blocks, and the block system reduces to the diagonal one for
    singleton clusters."""
    worst = 0.0
    singleton_gap = 0.0
    done = 0
    attempts = 0
    while done < count and attempts < 20 * count:
        attempts += 1
        data = _fe_instance(rng)
        try:
            diagonal = fe_projection(data, ("dim1",))
            block = fe_projection(data, ("dim1",), "dim2")
        except (AdjustmentInfeasible, IdentificationFailure):
            continue
        scale = float(np.abs(diagonal.P).max())
        worst = max(worst, float(np.abs(np.diag(diagonal.kit.matrix)).max()) / scale)
        rows, cols = block_pairs(data.clustering.labels("dim2"))
        worst = max(worst, float(np.abs(block.kit.matrix[rows, cols]).max()) / scale)
        theta = solve_vartheta(diagonal.M, np.diag(diagonal.P)).values
        H = solve_block_H(diagonal.M, diagonal.P, np.arange(data.n))
        singleton_gap = max(singleton_gap,
                            float(np.abs(np.diag(H.matrix(data.n)) - theta).max()))
        done += 1
    passed = done == count and worst <= 1e-10 and singleton_gap <= 1e-12
    return passed, ("max residual %g, singleton gap %g over %d instances" % (
        worst, singleton_gap, done))


def check_variance_oracles(rng, count):
    """Both variance estimators match their loop references."""
    worst = 0.0
    done = 0
    attempts = 0
    while done < count and attempts < 10 * count:
        attempts += 1
        n = int(rng.integers(8, 21))
        data = oracles.random_design(
            rng, n, int(rng.integers(2, 4)),
            clusters=(int(rng.integers(2, 6)), int(rng.integers(2, 6))),
            min_judge_size=2)
        try:
            fast = md_cjive_variance(data)
            beta = md_cjive(data).beta
        except IdentificationFailure:
            continue
        P = build_judge_projection(data.judge)
        P_dddot = np.where(union_mask(data.clustering), 0.0, P)
        resid = data.y - data.X @ beta
        middle = sum(oracles.md_cjive_middle(P, data.X, resid, data.clustering,
                                             ("dim1", "dim2")))
        reference = oracles.sandwich(P_dddot, data.X, middle)
        worst = max(worst, _relative(fast.matrix, reference))

        try:
            projection = fe_projection(data, ("dim1",), "dim2")
            fe = fe_cjive_variance(data, ("dim1",), "dim2")
        except (AdjustmentInfeasible, IdentificationFailure):
            done += 1
            continue
        X = annihilate(projection.W, data.X)
        y = annihilate(projection.W, data.y)
        Pt = projection.kit.matrix
        beta = np.linalg.solve(X.T @ Pt @ X, X.T @ Pt @ y)
        resid = projection.M @ (data.y - data.X @ beta)
        middle = sum(oracles.fe_cjive_middle(
            Pt, X, resid, data.clustering.labels("dim2")))
        reference = oracles.sandwich(Pt, X, middle)
        worst = max(worst, _relative(fe.matrix, reference))
        done += 1
    return done == count and worst <= 1e-10, (
        "max relative difference %g over %d instances" % (worst, done))


def check_fe_only(rng, fast):
    """MD CJIVE is not identified where FE CJIVE is."""
    n = 400 if fast else 2000
    reps = 3 if fast else 5
    config = DgpConfig.preset(FE_ONLY, n=n, k=n // 20,
                              clusters=(n // 20, n // 20),
                              seed=int(rng.integers(1 << 30)))
    estimates = []
    for replication in range(reps):
        sample = generate_fe_only(config, replication)
        try:
            md_cjive(sample.data, ("cluster",))
        except IdentificationFailure:
            pass
        else:
            return False, "md_cjive did not fail"
        estimates.append(fe_cjive(sample.data, ("cluster",)).coef)
    bias = abs(float(np.median(estimates)) - config.beta)
    limit = 0.15 if fast else 0.05
    return bias < limit, "fe_cjive median bias %.4f at n=%d (limit %g)" % (
        bias, n, limit)


def check_judge_level(rng, count):
    """Clustering on judges leaves both estimators undefined."""
    for _ in range(count):
        n = int(rng.integers(10, 80))
        data = oracles.random_design(rng, n, int(rng.integers(2, 6)),
                                     min_judge_size=2)
        data = data.with_clustering(
            MultiwayClustering((data.judge,), ("judge",)))
        for run in (lambda: md_cjive(data, ("judge",)),
                    lambda: fe_cjive(data, ("judge",))):
            try:
                run()
            except IdentificationFailure:
                continue
            return False, "estimate defined with judge-level clustering"
    return True, "%d instances undefined as expected" % (count)


def run_checks(fast=False, inject_fault=False, seed=DEFAULT_SEED):
    """Run every check.

    :returns: A list of CheckResult.
    """
    scale = 10 if fast else 1
    suite = [
        ("zero-masks",
         lambda rng: check_zero_masks(rng, 1000 // scale, inject_fault)),
        ("judge-projection", lambda rng: check_judge_projection(rng, 200 // scale)),
        ("union-mask", lambda rng: check_union_mask(rng, 200 // scale)),
        ("leave-out-equivalence", lambda rng: check_leave_out(rng, 1000 // scale)),
        ("fe-residuals", lambda rng: check_fe_residuals(rng, 200 // scale)),
        ("variance-oracles",
         lambda rng: check_variance_oracles(rng, 100 // scale)),
        ("fe-only-scenario", lambda rng: check_fe_only(rng, fast)),
        ("judge-level-clustering", lambda rng: check_judge_level(rng, 50 // scale)),
    ]
    results = []
    for i, (name, check) in enumerate(suite):
        rng = np.random.Generator(np.random.Philox(
            np.random.SeedSequence([seed, i])))
        start = time.time()
        passed, detail = check(rng)
        seconds = time.time() - start
        if passed:
            logger.info("%s: ok (%s, %.1fs)", name, detail, seconds)
        else:
            logger.error("%s: FAILED (%s)", name, detail)
        results.append(CheckResult(name, passed, detail, seconds))
    return results
