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

# The Monte-Carlo data-generating process for judge designs clustered in
# two dimensions, and the harness that runs estimators over many
# replications.
#
# Every replication draws from its own Philox stream keyed on
# (seed, replication), so results do not depend on the number of worker
# processes. The first-stage coefficients are drawn once per study from
# a separate stream keyed on the seed alone.

import collections
import concurrent.futures
import logging
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import scipy.linalg

from judgeiv.data import (
    JudgeDesignData,
    MultiwayClustering,
    build_judge_projection,
    encode_labels,
)
from judgeiv.dispatch import EstimatorSpec, estimate
from judgeiv.exceptions import EstimationError, InvalidConfigurationError

logger = logging.getLogger()

STUDY_STREAM = 0
REPLICATION_STREAM = 1

JUDGE_ASSIGNMENT = "random-permutation"

# The default estimators of a study, with the clustering each uses.
DEFAULT_ESTIMATORS = (
    EstimatorSpec("tsls"),
    EstimatorSpec("jive"),
    EstimatorSpec("cjive", dims=("dim1",)),
    EstimatorSpec("fe_jive", fe_dims=("dim1", "dim2")),
    EstimatorSpec("fe_cjive", fe_dims=("dim1",), general_dim="dim2"),
    EstimatorSpec("md_cjive", dims=("dim1", "dim2")),
)

PRESETS = {
    "figure1": {"omega": (0.0, 0.0)},
    "figure2": {"omega": (0.0, 1.0)},
    "figure3": {"omega": (1.0, 1.0)},
}

FE_ONLY = "fe-only"

Sample = collections.namedtuple("Sample", ["data", "beta", "eps", "eta", "pi"])


@dataclass(frozen=True)
class DgpConfig:
    n: int = 500
    k: int = 30
    clusters: tuple = (30, 30)
    gamma: tuple = (2.0, 2.0)
    judge_gamma: float = 2.0
    omega: tuple = (0.0, 0.0)
    rho: float = 0.5
    weights: tuple = (1.0 / 3, 1.0 / 3)
    beta: float = 0.0
    factor_variance: float = 9.0
    ridge: float = 0.01
    reps: int = 1000
    seed: int = 1
    workers: int = 1
    scenario: str = "figure1"

    def __post_init__(self):
        for name in ("clusters", "gamma", "omega", "weights"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if len(self.clusters) != 2 or len(self.gamma) != 2 \
           or len(self.omega) != 2 or len(self.weights) != 2:
            raise InvalidConfigurationError(
                "clusters, gamma, omega and weights need one value per "
                "clustering dimension (2)")
        for name in ("n", "k", "reps", "workers"):
            if int(getattr(self, name)) < 1:
                raise InvalidConfigurationError("%s must be at least 1" % (name))
        if min(self.clusters) < 1:
            raise InvalidConfigurationError("Cluster counts must be at least 1")
        if max(self.clusters) > self.n or self.k > self.n:
            raise InvalidConfigurationError(
                "More clusters or judges than cases (n=%d)" % (self.n))
        if not all(0.0 <= w <= 1.0 for w in self.omega):
            raise InvalidConfigurationError("omega must lie in [0, 1]")
        if min(self.weights) < 0 or sum(self.weights) > 1.0 + 1e-12:
            raise InvalidConfigurationError(
                "Weights must be non-negative with w1 + w2 <= 1")
        if not -1.0 <= self.rho <= 1.0:
            raise InvalidConfigurationError("rho must lie in [-1, 1]")
        if self.factor_variance < 0 or self.ridge <= 0:
            raise InvalidConfigurationError(
                "factor-variance must be non-negative and ridge positive")

    @classmethod
    def preset(cls, name, **overrides):
        if name == FE_ONLY:
            params = {"n": 2000, "k": 100, "clusters": (100, 100),
                      "scenario": FE_ONLY}
        elif name in PRESETS:
            params = dict(PRESETS[name], scenario=name)
        else:
            raise InvalidConfigurationError(
                "Unknown scenario: %s (choose from %s)" % (
                    name, ", ".join(sorted(PRESETS) + [FE_ONLY])))
        params.update(overrides)
        return cls(**params)

    @classmethod
    def from_config(cls, get):
        """Build from a config accessor such as judgeiv.config.get."""
        scenario = get("scenario") or "figure1"
        base = cls.preset(scenario)
        overrides = {}

        def pair(key, single):
            value = get(key)
            if value is None:
                return None
            if isinstance(value, (list, tuple)):
                return tuple(single(v) for v in value)
            return (single(value), single(value))

        for key, attr, convert in (
                ("n", "n", int), ("k", "k", int), ("rho", "rho", float),
                ("beta", "beta", float), ("reps", "reps", int),
                ("seed", "seed", int), ("workers", "workers", int),
                ("ridge", "ridge", float),
                ("factor-variance", "factor_variance", float),
                ("judge-gamma", "judge_gamma", float)):
            if get(key) is not None:
                overrides[attr] = convert(get(key))
        for key, attr, convert in (("clusters", "clusters", int),
                                   ("gamma", "gamma", float)):
            value = pair(key, convert)
            if value is not None:
                overrides[attr] = value
        omega = list(base.omega)
        for i, key in enumerate(("omega1", "omega2")):
            if get(key) is not None:
                omega[i] = float(get(key))
        overrides["omega"] = tuple(omega)
        weights = list(base.weights)
        for i, key in enumerate(("w1", "w2")):
            if get(key) is not None:
                weights[i] = float(get(key))
        overrides["weights"] = tuple(weights)
        if get("gamma") is not None and get("judge-gamma") is None:
            overrides["judge_gamma"] = overrides["gamma"][0]
        try:
            return replace(base, **overrides)
        except (TypeError, ValueError) as err:
            raise InvalidConfigurationError(
                "Invalid simulation configuration: %s" % (err))


def study_rng(seed):
    return np.random.Generator(np.random.Philox(
        np.random.SeedSequence([int(seed), STUDY_STREAM])))


def replication_rng(seed, replication):
    return np.random.Generator(np.random.Philox(
        np.random.SeedSequence([int(seed), REPLICATION_STREAM,
                                int(replication)])))


def cluster_sizes(n, G, gamma):
    """Exponentially unbalanced group sizes summing to n.

    Sizes for g < G follow n exp(gamma g / G) / (sum + 1) (at least 1),
    the last group takes what is left, everything is floored and the
    shortfall is handed out one case at a time to the largest groups.
    """
    n = int(n)
    G = int(G)
    if G < 1 or G > n:
        raise InvalidConfigurationError(
            "Cannot split %d cases into %d groups" % (n, G))
    if G == 1:
        return np.array([n])
    weights = np.exp(gamma * np.arange(1, G) / G)
    raw = np.maximum(1.0, n * weights / (weights.sum() + 1.0))
    last = max(1.0, n - raw.sum())
    sizes = np.floor(np.append(raw, last)).astype(int)
    remainder = n - int(sizes.sum())
    order = np.argsort(-sizes, kind="stable")
    i = 0
    while remainder > 0:
        sizes[order[i % G]] += 1
        remainder -= 1
        i += 1
    while remainder < 0:
        largest = int(np.argmax(sizes))
        sizes[largest] -= 1
        remainder += 1
    return sizes


def assign_groups(sizes, rng):
    """Randomly divide the cases over groups of the given sizes."""
    sizes = np.asarray(sizes)
    labels = np.empty(int(sizes.sum()), dtype=np.intp)
    labels[rng.permutation(labels.size)] = np.repeat(np.arange(sizes.size),
                                                     sizes)
    return labels


def draw_pi(config):
    """The first-stage coefficients, fixed across replications."""
    return study_rng(config.seed).standard_normal(config.k)


def correlated_draw(block, ridge, rng):
    """Draw e ~ N(0, D^-1/2 A D^-1/2) with A = block + ridge I."""
    m = block.shape[0]
    while True:
        A = block + ridge * np.eye(m)
        scale = 1.0 / np.sqrt(np.diag(A))
        sigma = scale[:, None] * A * scale[None, :]
        try:
            chol = scipy.linalg.cholesky(sigma, lower=True)
        except scipy.linalg.LinAlgError:
            logger.warning("Error correlation block of size %d is not "
                           "positive definite; regenerating with ridge %g",
                           m, ridge * 10)
            ridge *= 10
            continue
        return chol @ rng.standard_normal(m)


def cluster_errors(labels, P, omega, factor_variance, ridge, rng):
    """The error component of one clustering dimension:
    (sqrt(1 - omega^2) u_g + omega e_g) f_g for every member of g."""
    G = int(labels.max()) + 1
    u = rng.standard_normal(G)
    f = rng.normal(0.0, np.sqrt(factor_variance), G)
    out = np.empty(labels.size)
    for g in range(G):
        members = np.flatnonzero(labels == g)
        value = np.sqrt(1.0 - omega ** 2) * u[g]
        if omega > 0:
            e = correlated_draw(P[np.ix_(members, members)], ridge, rng)
            value = value + omega * e
        out[members] = value * f[g]
    return out


def generate(config, replication=0, pi=None):
    """Draw one dataset.

    :returns: A Sample with the dataset, the true beta and the error
        vectors eps and eta.
    """
    if config.scenario == FE_ONLY:
        return generate_fe_only(config, replication)
    rng = replication_rng(config.seed, replication)
    if pi is None:
        pi = draw_pi(config)
    n = config.n
    # Codes in order of first appearance, as load_dataset assigns them.
    judge = encode_labels(
        assign_groups(cluster_sizes(n, config.k, config.judge_gamma), rng))[0]
    dims = [encode_labels(assign_groups(cluster_sizes(n, G, gamma), rng))[0]
            for G, gamma in zip(config.clusters, config.gamma)]
    P = build_judge_projection(judge)
    components = [
        cluster_errors(labels, P, omega, config.factor_variance,
                       config.ridge, rng)
        for labels, omega in zip(dims, config.omega)]
    w1, w2 = config.weights
    eta = (w1 * components[0] + w2 * components[1]
           + (1.0 - w1 - w2) * rng.standard_normal(n))
    eps = config.rho * eta + np.sqrt(1.0 - config.rho ** 2) * rng.standard_normal(n)
    x = pi[judge] + eta
    y = x * config.beta + eps
    data = JudgeDesignData(
        y=y, X=x, judge=judge,
        clustering=MultiwayClustering(tuple(dims), ("dim1", "dim2")))
    return Sample(data, np.array([config.beta]), eps, eta, pi)


def generate_fe_only(config, replication=0):
    """One instrument per cluster that varies within the cluster, with
    errors made of a cluster effect plus independent noise.

    A cluster fixed effect captures all the dependence, while removing
    every within-cluster entry of P leaves nothing to identify beta.
    """
    rng = replication_rng(config.seed, replication)
    n = config.n
    G = config.clusters[0]
    labels = assign_groups(cluster_sizes(n, G, 0.0), rng)
    z = 1.0 + rng.standard_normal(n)
    pi = 1.0 + rng.standard_normal(G)
    Z = np.zeros((n, G))
    Z[np.arange(n), labels] = z
    effect_eta = rng.standard_normal(G)
    effect_eps = rng.standard_normal(G)
    eta = effect_eta[labels] + rng.standard_normal(n)
    noise = effect_eps[labels] + rng.standard_normal(n)
    eps = config.rho * eta + np.sqrt(1.0 - config.rho ** 2) * noise
    x = z * pi[labels] + eta
    y = x * config.beta + eps
    data = JudgeDesignData(
        y=y, X=x, judge=labels, Z=Z,
        clustering=MultiwayClustering((labels,), ("cluster",)))
    return Sample(data, np.array([config.beta]), eps, eta, pi)


FE_ONLY_ESTIMATORS = (
    EstimatorSpec("md_cjive", dims=("cluster",)),
    EstimatorSpec("fe_cjive", fe_dims=("cluster",)),
)


def run_replication(config, replication, specs, pi=None):
    """Run every estimator on one replication.

    :returns: A list of (beta, error_code) tuples, one per estimator,
        where beta is None on failure.
    """
    sample = generate(config, replication, pi)
    out = []
    for spec in specs:
        try:
            result = estimate(spec, sample.data)
            out.append((result.coef, None))
        except EstimationError as err:
            logger.debug("Replication %d: %s failed: %s", replication,
                         spec.label, err)
            out.append((None, err.code))
    return out


def _run_chunk(args):
    config, replications, specs, pi = args
    return [run_replication(config, r, specs, pi) for r in replications]


@dataclass
class EstimatorSummary:
    name: str
    count: int
    failures: int
    failure_codes: dict = field(default_factory=dict)
    mean: float = None
    median: float = None
    mean_bias: float = None
    median_bias: float = None
    q1: float = None
    q3: float = None
    iqr: float = None
    whisker_low: float = None
    whisker_high: float = None

    def as_dict(self):
        return asdict(self)


def summarize(name, values, beta, failure_codes=None):
    """Boxplot statistics of the estimates that succeeded."""
    values = np.asarray([v for v in values if v is not None], dtype=float)
    failure_codes = dict(failure_codes or {})
    summary = EstimatorSummary(name, int(values.size),
                               int(sum(failure_codes.values())),
                               failure_codes)
    if values.size == 0:
        return summary
    q1, median, q3 = np.percentile(values, [25, 50, 75])
    iqr = q3 - q1
    inside = values[(values >= q1 - 1.5 * iqr) & (values <= q3 + 1.5 * iqr)]
    summary.mean = float(values.mean())
    summary.median = float(median)
    summary.mean_bias = float(values.mean() - beta)
    summary.median_bias = float(median - beta)
    summary.q1 = float(q1)
    summary.q3 = float(q3)
    summary.iqr = float(iqr)
    summary.whisker_low = float(inside.min())
    summary.whisker_high = float(inside.max())
    return summary


@dataclass
class SimulationResult:
    config: DgpConfig
    summaries: list
    estimates: dict
    seconds: float = 0.0

    def summary(self, name):
        for summary in self.summaries:
            if summary.name == name:
                return summary
        raise KeyError(name)

    def metadata(self):
        doc = asdict(self.config)
        doc["judge_assignment"] = JUDGE_ASSIGNMENT
        return doc

    def as_dict(self):
        return {
            "metadata": self.metadata(),
            "estimators": [s.as_dict() for s in self.summaries],
        }


def _chunks(reps, workers):
    size = max(1, -(-reps // (workers * 4)))
    return [list(range(start, min(reps, start + size)))
            for start in range(0, reps, size)]


def monte_carlo(config, specs=None):
    """Run ``config.reps`` replications of every estimator.

    Failed estimates are left out of the statistics and counted.
    """
    if specs is None:
        specs = FE_ONLY_ESTIMATORS if config.scenario == FE_ONLY \
            else DEFAULT_ESTIMATORS
    specs = list(specs)
    pi = None if config.scenario == FE_ONLY else draw_pi(config)
    start = time.time()
    chunks = _chunks(config.reps, config.workers)
    jobs = [(config, chunk, specs, pi) for chunk in chunks]
    logger.info("Running %d replications of %d estimators (%d worker(s))",
                config.reps, len(specs), config.workers)
    if config.workers > 1:
        with concurrent.futures.ProcessPoolExecutor(
                max_workers=config.workers) as executor:
            results = list(executor.map(_run_chunk, jobs))
    else:
        results = [_run_chunk(job) for job in jobs]
    rows = [row for chunk in results for row in chunk]

    estimates = {}
    summaries = []
    for i, spec in enumerate(specs):
        values = [row[i][0] for row in rows]
        codes = collections.Counter(row[i][1] for row in rows
                                    if row[i][1] is not None)
        if codes:
            logger.info("%s failed in %d of %d replications", spec.label,
                        sum(codes.values()), len(rows))
        estimates[spec.label] = values
        summaries.append(summarize(spec.label, values, config.beta, codes))
    seconds = time.time() - start
    logger.info("Done in %.1f seconds", seconds)
    return SimulationResult(config, summaries, estimates, seconds)
