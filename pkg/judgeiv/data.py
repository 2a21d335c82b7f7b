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

# This module contains the case-level dataset, its clustering structure,
# the CSV ingestion and the selection masks used by the jackknifed
# projections.
#
# Labels (judges and clusters) are stored as dense 0-based integer
# codes assigned in order of first appearance.

import logging
from dataclasses import dataclass, replace

import numpy as np
import pandas as pd
import scipy.linalg
import scipy.sparse as sps
import yaml

from judgeiv.exceptions import DataError, SchemaError

logger = logging.getLogger()

# Relative threshold on the pivots of a column-pivoted QR factorisation
# below which a column counts as redundant.
RANK_TOLERANCE = 1e-10

INTERCEPT_NAME = "intercept"


def _frozen(array):
    array = np.ascontiguousarray(array)
    array.setflags(write=False)
    return array


def encode_labels(values):
    """Encode arbitrary labels to dense codes 0..G-1 in order of first
    appearance.

    :returns: A tuple of the integer code vector and the list of
        original labels indexed by code.
    """
    codes, uniques = pd.factorize(pd.Series(list(values)), sort=False)
    if (codes < 0).any():
        raise DataError("Missing label at row %d" % (
            int(np.flatnonzero(codes < 0)[0])))
    return codes.astype(np.intp), list(uniques)


def _is_dense(codes):
    """True for integer codes covering every value in 0..max."""
    if codes.dtype.kind not in "iu" or codes.ndim != 1:
        return False
    if codes.size == 0:
        return True
    if codes.min() < 0:
        return False
    return bool(np.bincount(codes).min() > 0)


def _check_codes(codes, what):
    if codes.ndim != 1:
        raise DataError("%s labels must be a vector" % (what))
    if codes.size == 0:
        return 0
    if codes.min() < 0:
        raise DataError("%s labels must be non-negative codes" % (what))
    count = int(codes.max()) + 1
    if np.bincount(codes, minlength=count).min() == 0:
        raise DataError(
            "%s labels are not contiguous; re-encode with encode_labels" % (
                what))
    return count


@dataclass(frozen=True)
class MultiwayClustering:
    """C clustering dimensions over the same n cases.

    Each dimension is a vector of contiguous codes 0..G^(c)-1. A
    dimension can be looked up by position or by name.
    """

    dims: tuple
    names: tuple

    def __post_init__(self):
        dims = tuple(_frozen(np.asarray(d, dtype=np.intp)) for d in self.dims)
        names = tuple(str(name) for name in self.names)
        if len(dims) != len(names):
            raise DataError("Got %d clustering dimensions but %d names" % (
                len(dims), len(names)))
        if len(set(names)) != len(names):
            raise DataError("Duplicate clustering dimension name in %s" % (
                ", ".join(names)))
        lengths = set(d.size for d in dims)
        if len(lengths) > 1:
            raise DataError(
                "Clustering dimensions have different lengths: %s" % (
                    sorted(lengths)))
        for name, codes in zip(names, dims):
            _check_codes(codes, "Cluster dimension %s" % (name))
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "names", names)

    @classmethod
    def singleton(cls, n, name="individual"):
        """Every case in its own cluster."""
        return cls((np.arange(n),), (name,))

    @classmethod
    def from_columns(cls, columns):
        """Build from an ordered mapping of name -> raw labels."""
        names = []
        dims = []
        for name, values in columns.items():
            codes, _ = encode_labels(values)
            names.append(name)
            dims.append(codes)
        return cls(tuple(dims), tuple(names))

    def __len__(self):
        return len(self.dims)

    @property
    def n(self):
        if not self.dims:
            return None
        return self.dims[0].size

    def index(self, dim):
        if isinstance(dim, (int, np.integer)):
            if not 0 <= dim < len(self.dims):
                raise DataError("No clustering dimension %d" % (dim))
            return int(dim)
        try:
            return self.names.index(dim)
        except ValueError:
            raise DataError("Unknown clustering dimension: %s (have %s)" % (
                dim, ", ".join(self.names) or "none"))

    def labels(self, dim):
        return self.dims[self.index(dim)]

    def count(self, dim):
        """The number of clusters G^(c)."""
        labels = self.labels(dim)
        return int(labels.max()) + 1 if labels.size else 0

    def sizes(self, dim):
        """The cluster sizes n_g^(c)."""
        return np.bincount(self.labels(dim))

    def is_singleton(self, dim):
        return self.count(dim) == self.labels(dim).size

    def mask(self, dim):
        return selection_mask(self.labels(dim))

    def dummies(self, dim):
        """Dense n x G^(c) 0/1 matrix of cluster indicators."""
        labels = self.labels(dim)
        out = np.zeros((labels.size, self.count(dim)))
        out[np.arange(labels.size), labels] = 1.0
        return out

    def select(self, dims):
        indices = [self.index(dim) for dim in dims]
        return MultiwayClustering(
            tuple(self.dims[i] for i in indices),
            tuple(self.names[i] for i in indices))

    def add(self, name, labels):
        codes, _ = encode_labels(labels)
        return MultiwayClustering(self.dims + (codes,), self.names + (name,))


@dataclass(frozen=True)
class JudgeDesignData:
    """The case-level data of a judge design.

    ``X`` is n x p, ``W`` is n x l (l may be zero) and ``judge`` holds the
    judge codes J(i). When ``Z`` is given it replaces the judge dummies as
    instrument matrix.
    """

    y: np.ndarray
    X: np.ndarray
    judge: np.ndarray
    W: np.ndarray = None
    clustering: MultiwayClustering = None
    Z: np.ndarray = None
    treatment_names: tuple = ()
    control_names: tuple = ()
    judge_labels: tuple = ()

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        if y.ndim == 2 and y.shape[1] == 1:
            y = y[:, 0]
        if y.ndim != 1:
            raise DataError("Outcome must be a vector")
        n = y.size
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        judge = np.asarray(self.judge)
        if judge.ndim == 1 and not _is_dense(judge):
            judge, labels = encode_labels(judge)
            if not self.judge_labels:
                object.__setattr__(self, "judge_labels", tuple(labels))
        judge = judge.astype(np.intp)
        k = _check_codes(judge, "Judge")
        if self.W is None:
            W = np.zeros((n, 0))
        else:
            W = np.asarray(self.W, dtype=float)
            if W.ndim == 1:
                W = W[:, None]
        clustering = self.clustering
        if clustering is None:
            clustering = MultiwayClustering((), ())
        for what, rows in (("treatment", X.shape[0]),
                           ("judge", judge.size),
                           ("control", W.shape[0])):
            if rows != n:
                raise DataError("Length mismatch: %s has %d rows, outcome %d" % (
                    what, rows, n))
        if clustering.n is not None and clustering.n != n:
            raise DataError("Length mismatch: clustering has %d rows, outcome %d" % (
                clustering.n, n))
        if not (np.isfinite(y).all() and np.isfinite(X).all()
                and np.isfinite(W).all()):
            raise DataError("Non-finite value in outcome, treatment or controls")
        Z = self.Z
        if Z is not None:
            Z = np.asarray(Z, dtype=float)
            if Z.ndim == 1:
                Z = Z[:, None]
            if Z.shape[0] != n:
                raise DataError("Length mismatch: instruments have %d rows, "
                                "outcome %d" % (Z.shape[0], n))
            Z = _frozen(Z)
        treatment_names = tuple(self.treatment_names) or tuple(
            "x%d" % (i + 1) if X.shape[1] > 1 else "x"
            for i in range(X.shape[1]))
        control_names = tuple(self.control_names) or tuple(
            "w%d" % (i + 1) for i in range(W.shape[1]))
        if len(treatment_names) != X.shape[1]:
            raise DataError("Got %d treatment names for %d columns" % (
                len(treatment_names), X.shape[1]))
        if len(control_names) != W.shape[1]:
            raise DataError("Got %d control names for %d columns" % (
                len(control_names), W.shape[1]))
        judge_labels = tuple(self.judge_labels) or tuple(range(1, k + 1))
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "judge", _frozen(judge))
        object.__setattr__(self, "W", _frozen(W))
        object.__setattr__(self, "clustering", clustering)
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "treatment_names", treatment_names)
        object.__setattr__(self, "control_names", control_names)
        object.__setattr__(self, "judge_labels", judge_labels)

    @property
    def n(self):
        return self.y.size

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def k(self):
        return int(self.judge.max()) + 1 if self.judge.size else 0

    @property
    def l(self):
        return self.W.shape[1]

    @property
    def judge_sizes(self):
        """n_j for every judge j."""
        return np.bincount(self.judge, minlength=self.k)

    def judge_label(self, code):
        return self.judge_labels[int(code)]

    def instruments(self):
        """The instrument matrix: Z when given, else judge dummies."""
        if self.Z is not None:
            return np.array(self.Z)
        out = np.zeros((self.n, self.k))
        out[np.arange(self.n), self.judge] = 1.0
        return out

    def with_controls(self, W, names=()):
        return replace(self, W=W, control_names=tuple(names))

    def with_clustering(self, clustering):
        return replace(self, clustering=clustering)


def prune_controls(W, tol=RANK_TOLERANCE):
    """Drop redundant control columns.

    The rank is read off a column-pivoted QR factorisation: a pivot
    counts when it exceeds ``tol`` times the largest pivot.

    :returns: A tuple of the pruned matrix (columns in their original
        order) and the sorted list of dropped column indices.
    """
    W = np.asarray(W, dtype=float)
    if W.ndim == 1:
        W = W[:, None]
    l = W.shape[1]
    if l == 0:
        return W, []
    _, r, pivots = scipy.linalg.qr(W, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[0] == 0:
        rank = 0
    else:
        rank = int(np.count_nonzero(diag > tol * diag[0]))
    keep = np.sort(pivots[:rank])
    dropped = sorted(set(range(l)) - set(int(i) for i in keep))
    if dropped:
        logger.debug("Dropping %d redundant control column(s): %s",
                     len(dropped), dropped)
    return W[:, keep], dropped


def build_judge_projection(judge):
    """P_Z for judge dummy instruments, from the closed form
    P_ij = 1/n_J(i) if J(i) = J(j) and 0 otherwise.

    The n x k dummy matrix is never formed.
    """
    judge = np.asarray(judge)
    sizes = np.bincount(judge)
    same = judge[:, None] == judge[None, :]
    return same / sizes[judge][:, None]


def selection_mask(labels):
    """S^(c): true where two cases share a cluster."""
    labels = np.asarray(labels)
    return labels[:, None] == labels[None, :]


def union_mask(clustering, dims=None):
    """True where two cases share a cluster in any of the selected
    dimensions. The diagonal is always true, so with no dimension
    selected this is the identity mask."""
    if dims is None:
        dims = clustering.names
    dims = list(dims)
    if not dims:
        if clustering.n is None:
            raise DataError("Cannot build a mask without any dimension")
        return np.eye(clustering.n, dtype=bool)
    mask = clustering.mask(dims[0])
    for dim in dims[1:]:
        mask |= clustering.mask(dim)
    return mask


def sparse_union_mask(clustering, dims=None, n=None):
    """The union mask as a sparse 0/1 matrix, built from the cluster
    dummies as the support of sum_c D_c D_c'."""
    if dims is None:
        dims = clustering.names
    dims = list(dims)
    n = n if n is not None else clustering.n
    total = sps.identity(n, format="csr")
    for dim in dims:
        labels = clustering.labels(dim)
        dummies = sps.csr_matrix(
            (np.ones(labels.size), (np.arange(labels.size), labels)),
            shape=(labels.size, clustering.count(dim)))
        total = total + dummies @ dummies.T
    total = total.tocsr()
    total.data = np.ones_like(total.data)
    return total


@dataclass(frozen=True)
class Schema:
    """Maps CSV columns to their role in the judge design."""

    outcome: str
    treatment: tuple
    judge: str
    controls: tuple = ()
    fixed_effects: tuple = ()
    clusters: tuple = ()
    intercept: bool = True

    @classmethod
    def from_mapping(cls, doc):
        if not isinstance(doc, dict):
            raise SchemaError("Schema must be a mapping of roles to columns")
        for key in ("outcome", "treatment", "judge"):
            if not doc.get(key):
                raise SchemaError("Schema is missing required key: %s" % (key))
        treatment = doc["treatment"]
        if isinstance(treatment, str):
            treatment = [treatment]
        controls = doc.get("controls") or []
        fixed_effects = doc.get("fixed-effects") or doc.get("fixed_effects") or []
        clusters = doc.get("clusters") or {}
        if isinstance(clusters, list):
            clusters = dict((name, name) for name in clusters)
        if not isinstance(clusters, dict):
            raise SchemaError("Schema clusters must map names to columns")
        for key, value in (("controls", controls),
                           ("fixed-effects", fixed_effects)):
            if not isinstance(value, list):
                raise SchemaError("Schema %s must be a list" % (key))
        return cls(
            outcome=str(doc["outcome"]),
            treatment=tuple(str(t) for t in treatment),
            judge=str(doc["judge"]),
            controls=tuple(str(c) for c in controls),
            fixed_effects=tuple(str(c) for c in fixed_effects),
            clusters=tuple((str(name), None if column is None else str(column))
                           for name, column in clusters.items()),
            intercept=bool(doc.get("intercept", True)))

    @classmethod
    def load(cls, filename):
        logger.info("Loading schema %s", filename)
        try:
            with open(filename, "rb") as fileobj:
                doc = yaml.safe_load(fileobj)
        except (IOError, OSError) as err:
            raise SchemaError("Failed to read schema %s: %s" % (filename, err))
        except yaml.YAMLError as err:
            raise SchemaError("Failed to parse schema %s: %s" % (filename, err))
        return cls.from_mapping(doc)

    def as_mapping(self):
        return {
            "outcome": self.outcome,
            "treatment": list(self.treatment),
            "judge": self.judge,
            "controls": list(self.controls),
            "fixed-effects": list(self.fixed_effects),
            "clusters": dict(self.clusters),
            "intercept": self.intercept,
        }

    def columns(self):
        """Every column the schema needs, in declaration order."""
        columns = [self.outcome] + list(self.treatment) + [self.judge]
        columns += list(self.controls) + list(self.fixed_effects)
        columns += [column for _, column in self.clusters if column]
        seen = set()
        return [c for c in columns if not (c in seen or seen.add(c))]


def _numeric(frame, column):
    values = pd.to_numeric(frame[column], errors="coerce")
    bad = values.isna() & frame[column].notna()
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        raise DataError("Non-numeric value %r in column %s (data row %d)" % (
            frame[column].iloc[row], column, row + 1))
    # Correctly rounded, so floats from write_dataset read back exactly.
    return frame[column].astype(float).to_numpy()


def load_dataset(path, schema, tol=RANK_TOLERANCE):
    """Read a CSV file into a validated JudgeDesignData.

    Rows with a missing value in any column the schema uses are dropped
    (never imputed). Fixed-effect columns are expanded to one dummy per
    level before the controls are pruned.
    """
    if not isinstance(schema, Schema):
        schema = Schema.from_mapping(schema)
    logger.info("Loading %s", path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=True,
                            encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise DataError("Empty data file: %s" % (path))
    except (IOError, OSError) as err:
        raise DataError("Failed to read %s: %s" % (path, err))
    if frame.shape[0] == 0:
        raise DataError("Data file has a header but no rows: %s" % (path))

    for column in schema.columns():
        if column not in frame.columns:
            raise SchemaError("Column %s declared in the schema is missing "
                              "from %s" % (column, path), column=column)

    columns = schema.columns()
    raw_judges = set(frame[schema.judge].dropna())
    complete = frame[columns].notna().all(axis=1)
    if not complete.all():
        logger.warning("Rejecting %d row(s) with missing required values",
                       int((~complete).sum()))
        frame = frame.loc[complete].reset_index(drop=True)
    if frame.shape[0] == 0:
        raise DataError("No complete rows left in %s" % (path))
    lost = raw_judges - set(frame[schema.judge])
    if lost:
        raise DataError("Judge label(s) with no complete case left: %s" % (
            ", ".join(sorted(str(j) for j in lost))))

    y = _numeric(frame, schema.outcome)
    X = np.column_stack([_numeric(frame, c) for c in schema.treatment])
    judge, judge_labels = encode_labels(frame[schema.judge])

    blocks = []
    names = []
    if schema.intercept:
        blocks.append(np.ones((frame.shape[0], 1)))
        names.append(INTERCEPT_NAME)
    for column in schema.controls:
        blocks.append(_numeric(frame, column)[:, None])
        names.append(column)
    for column in schema.fixed_effects:
        codes, levels = encode_labels(frame[column])
        dummies = np.zeros((codes.size, len(levels)))
        dummies[np.arange(codes.size), codes] = 1.0
        blocks.append(dummies)
        names.extend("%s=%s" % (column, level) for level in levels)
    if blocks:
        W = np.hstack(blocks)
    else:
        W = np.zeros((frame.shape[0], 0))
    W, dropped = prune_controls(W, tol=tol)
    if dropped:
        logger.info("Removed %d redundant control(s), %d remain",
                    len(dropped), W.shape[1])
    names = [name for i, name in enumerate(names) if i not in set(dropped)]

    columns = {}
    for name, column in schema.clusters:
        if column is None:
            columns[name] = np.arange(frame.shape[0])
        else:
            columns[name] = frame[column].to_numpy()
    clustering = MultiwayClustering.from_columns(columns)

    data = JudgeDesignData(
        y=y, X=X, judge=judge, W=W, clustering=clustering,
        treatment_names=schema.treatment, control_names=tuple(names),
        judge_labels=tuple(judge_labels))
    logger.info("Loaded %d cases, %d judges, %d controls, %d clustering "
                "dimension(s)", data.n, data.k, data.l, len(clustering))
    return data


def dataset_frame(data):
    """Lay a dataset out as a DataFrame with one column per variable."""
    columns = {"y": data.y}
    for i, name in enumerate(data.treatment_names):
        columns[name] = data.X[:, i]
    columns["judge"] = [data.judge_label(j) for j in data.judge]
    for name, labels in zip(data.clustering.names, data.clustering.dims):
        columns[name] = labels + 1
    for i, name in enumerate(data.control_names):
        columns[name] = data.W[:, i]
    return pd.DataFrame(columns)


def write_dataset(data, path):
    """Write a dataset as CSV and return the Schema that reads it back.

    Floats are written with shortest round-trip precision so reading
    the file back reproduces the data exactly.
    """
    frame = dataset_frame(data)
    frame.to_csv(path, index=False, float_format=None)
    return Schema(
        outcome="y",
        treatment=tuple(data.treatment_names),
        judge="judge",
        controls=tuple(data.control_names),
        clusters=tuple((name, name) for name in data.clustering.names),
        intercept=False)
