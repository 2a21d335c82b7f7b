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

# Estimation reports: one row per estimator and clustering
# accumulation.
#
# Clustering dimensions are applied cumulatively in declaration order.
# The first dimension is the one the leave-out instrument leaves out.

import logging
from collections import namedtuple
from dataclasses import replace

import numpy as np
import pandas as pd

from judgeiv import dispatch
from judgeiv import util
from judgeiv.data import prune_controls
from judgeiv.dispatch import EstimatorSpec
from judgeiv.exceptions import EstimationError, InvalidConfigurationError
from judgeiv.projections import annihilate
from judgeiv.variance import heuristic_interval

logger = logging.getLogger()

LEAVE_OUT = "leave-out"
FE = "fe"
GENERAL = "general"

HANDLINGS = (LEAVE_OUT, FE, GENERAL)

Dimension = namedtuple("Dimension", ["name", "handling"])

COLUMNS = [
    "clusters",
    "estimator",
    "treatment",
    "beta",
    "se_heuristic",
    "ci_low_heuristic",
    "ci_high_heuristic",
    "status",
    "error_code",
    "message",
    "zeroed_entries",
    "rcond",
]

ALL_CONTROLS = "+ All controls"


def parse_dims(value):
    """Parse ``name:handling,name:handling,...``.

    The handling defaults to leave-out for the first dimension and to
    general for the others.
    """
    if isinstance(value, (list, tuple)):
        items = list(value)
    else:
        items = [item.strip() for item in (value or "").split(",")
                 if item.strip()]
    dims = []
    for i, item in enumerate(items):
        if isinstance(item, Dimension):
            dims.append(item)
            continue
        if ":" in item:
            name, handling = [part.strip() for part in item.split(":", 1)]
        else:
            name, handling = item, LEAVE_OUT if i == 0 else GENERAL
        handling = handling.lower()
        if handling not in HANDLINGS:
            raise InvalidConfigurationError(
                "Invalid handling %s for dimension %s (choose from %s)" % (
                    handling, name, ", ".join(HANDLINGS)))
        if not name:
            raise InvalidConfigurationError("Empty dimension name in --dims")
        dims.append(Dimension(name, handling))
    names = [dim.name for dim in dims]
    if len(set(names)) != len(names):
        raise InvalidConfigurationError("Dimension declared twice in --dims")
    if any(dim.handling == LEAVE_OUT for dim in dims[1:]):
        raise InvalidConfigurationError(
            "Only the first dimension can be handled by leave-out")
    return dims


def dimension_label(dim, first=False):
    text = dim.name.replace("_", " ").replace("-", " ")
    if first:
        return text[:1].upper() + text[1:]
    suffix = "FE" if dim.handling == FE else "SE"
    return "+ %s (%s)" % (text[:1].upper() + text[1:], suffix)


def accumulation_specs(name, dims):
    """The (label, spec) pairs of one estimator over the cumulative
    dimension list.

    fe_cjive rows carry how the controls are removed: "naive" rows
    project them out before the FE adjustment (the first of them is
    plain CJIVE), the final "all" row removes every control through
    the adjustment.
    """
    if not dims:
        return [("No clustering", EstimatorSpec(name), None)]
    names = [dim.name for dim in dims]
    if name in ("tsls", "jive"):
        label = dimension_label(dims[0], first=True)
        return [(label, EstimatorSpec(name, label=label), None)]
    rows = []
    for r in range(len(dims)):
        label = dimension_label(dims[r], first=(r == 0))
        if name in ("cjive", "leave_out_tsls", "leave_out_tsls_unweighted"):
            spec = EstimatorSpec(name, dims=(names[0],), label=label)
        elif name == "md_cjive":
            spec = EstimatorSpec(name, dims=tuple(names[:r + 1]), label=label)
        elif name == "fe_cjive":
            if r == 0:
                spec = EstimatorSpec("cjive", dims=(names[0],), label=label)
            else:
                spec = EstimatorSpec(name, fe_dims=tuple(names[1:r + 1]),
                                     general_dim=names[0], label=label)
            rows.append((label, spec, "naive"))
            continue
        else:
            spec = EstimatorSpec(name, fe_dims=tuple(names[1:r + 1]),
                                 label=label)
        rows.append((label, spec, None))
    if name == "fe_cjive":
        rows.append((ALL_CONTROLS,
                     EstimatorSpec(name, fe_dims=tuple(names[1:]),
                                   general_dim=names[0], label=ALL_CONTROLS),
                     "all"))
    return rows


def naive_controls(data, fe_dims):
    """Project the controls out of y, X and the instruments, and keep the
    fixed effects of ``fe_dims`` (likewise projected) as the controls the
    FE adjustment removes."""
    if data.l == 0:
        return data
    W = data.W
    dummies = [data.clustering.dummies(dim) for dim in fe_dims]
    fe = annihilate(W, np.hstack(dummies)) if dummies else np.zeros((data.n, 0))
    fe, _ = prune_controls(fe)
    return replace(data, y=annihilate(W, data.y), X=annihilate(W, data.X),
                   Z=annihilate(W, data.instruments()), W=fe, control_names=())


def _row(label, name, data, result=None, error=None):
    rows = []
    treatments = data.treatment_names
    for i, treatment in enumerate(treatments):
        row = dict((column, None) for column in COLUMNS)
        row.update({"clusters": label, "estimator": name,
                    "treatment": treatment})
        if error is not None:
            row.update({"status": "failed", "error_code": error.code,
                        "message": str(error)})
        else:
            row["status"] = "ok"
            row["beta"] = float(result.beta[i])
            row["zeroed_entries"] = result.diagnostics.get("zeroed_entries")
            row["rcond"] = result.diagnostics.get("rcond")
            if result.variance is not None:
                se = float(result.variance.se[i])
                if np.isfinite(se):
                    low, high = heuristic_interval(row["beta"], se)
                    row.update({"se_heuristic": se,
                                "ci_low_heuristic": float(low),
                                "ci_high_heuristic": float(high)})
                else:
                    row["message"] = "negative variance estimate"
            if result.warnings:
                messages = [row["message"]] if row["message"] else []
                row["message"] = "; ".join(messages + result.warnings)
        rows.append(row)
    return rows


def build_report(data, estimator_names, dims, dof=False,
                 max_system_size=None):
    """Estimate every requested estimator over the cumulative clustering
    dimensions. Estimation failures become rows, never exceptions."""
    dims = parse_dims(dims)
    for dim in dims:
        data.clustering.index(dim.name)
    kwargs = {}
    if max_system_size is not None:
        kwargs["max_system_size"] = max_system_size
    rows = []
    for name in estimator_names:
        for label, spec, controls in accumulation_specs(name, dims):
            target = data
            if controls == "naive" and spec.name == "fe_cjive" and data.l:
                target = naive_controls(data, spec.fe_dims)
                spec = replace(spec, fe_dims=())
            try:
                result = dispatch.estimate(
                    spec, target,
                    with_variance=spec.name in dispatch.WITH_VARIANCE,
                    dof=dof, **kwargs)
            except EstimationError as err:
                logger.warning("%s (%s): %s", name, label, err)
                rows.extend(_row(label, name, data, error=err))
                continue
            rows.extend(_row(label, name, data, result=result))
    return rows


def report_frame(rows):
    return pd.DataFrame(rows, columns=COLUMNS)


def write_csv(rows, fileobj):
    """CSV with 6 significant digits; failed rows leave numbers empty."""
    frame = report_frame(rows)
    frame.to_csv(fileobj, index=False, float_format="%.6g", na_rep="")


def write_json(rows, fileobj):
    util.dump_json({"rows": rows}, fileobj)


def write_report(rows, path):
    """Write to ``path``; JSON when it ends in .json, CSV otherwise."""
    with open(path, "w", newline="") as fileobj:
        if path.endswith(".json"):
            write_json(rows, fileobj)
        else:
            write_csv(rows, fileobj)


def print_report(rows, stream):
    frame = report_frame(rows)[["clusters", "estimator", "treatment", "beta",
                                "se_heuristic", "status"]]
    for column in ("beta", "se_heuristic"):
        frame[column] = [util.format_sig(v, 4) for v in frame[column]]
    stream.write(frame.to_string(index=False) + "\n")


def simulation_rows(result):
    """One row per estimator of a SimulationResult."""
    return [summary.as_dict() for summary in result.summaries]


def write_simulation(result, path):
    with open(path, "w", newline="") as fileobj:
        if path.endswith(".json"):
            util.dump_json(result.as_dict(), fileobj)
        else:
            frame = pd.DataFrame(simulation_rows(result))
            frame["failure_codes"] = [
                ";".join("%s=%d" % item for item in sorted(codes.items()))
                for codes in frame["failure_codes"]]
            frame.to_csv(fileobj, index=False, float_format="%.6g", na_rep="")

