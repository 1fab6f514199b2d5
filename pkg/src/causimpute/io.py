"""Long-form CSV ingestion, truth sidecars, and JSON report emission.

CSV format: UTF-8, header ``a_id,b_id,y0,...,y{D-1}``, one row per observed
cell, '.' decimal separator, full round-trip precision (repr).  Pairs absent
from the file are unobserved.
"""

from __future__ import annotations

import csv
import importlib.resources
import json
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone

import numpy as np

from causimpute.errors import DuplicatePair, ParseError
from causimpute.evaluation import EvaluationReport
from causimpute.synthetic import SyntheticInstance
from causimpute.tensor import IncompleteTensor

REPORT_SCHEMA_VERSION = 1
TRUTH_SIDECAR_SUFFIX = ".truth.npz"


@dataclass
class LongFormDataset:
    """Label-indexed view of an incomplete tensor.

    a_labels / b_labels are in first-appearance order and map bijectively to
    tensor indices.
    """

    a_labels: list
    b_labels: list
    rows: list  # (a_label, b_label, value vector), canonical (a, b) order

    def a_index(self, label: str) -> int:
        try:
            return self.a_labels.index(label)
        except ValueError:
            raise KeyError(f"unknown a label {label!r}") from None

    def b_index(self, label: str) -> int:
        try:
            return self.b_labels.index(label)
        except ValueError:
            raise KeyError(f"unknown b label {label!r}") from None


@dataclass
class RunConfig:
    """Everything a benchmark/tune run needs, echoed into report metadata."""

    dataset_path: str
    estimators: list
    output_path: str | None = None
    seed: int | None = None
    sample_targets: int | None = None
    subset_a: list | None = None
    standardize: bool = False
    extra: dict = field(default_factory=dict)


def _expected_header(dim: int) -> list:
    return ["a_id", "b_id"] + [f"y{d}" for d in range(dim)]


def load_csv(path):
    """Parse a long-form CSV into (LongFormDataset, IncompleteTensor)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        if len(header) < 3 or header[:2] != ["a_id", "b_id"]:
            raise ParseError(f"{path}: header must be a_id,b_id,y0,...")
        dim = len(header) - 2
        if header != _expected_header(dim):
            raise ParseError(f"{path}: header must be a_id,b_id,y0,...,y{dim-1}")

        a_labels, b_labels = [], []
        a_map, b_map = {}, {}
        entries = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != dim + 2:
                raise ParseError(
                    f"{path}:{lineno}: expected {dim + 2} fields, got {len(row)}"
                )
            a_label, b_label = row[0], row[1]
            try:
                vec = np.array([float(v) for v in row[2:]])
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
            if not np.isfinite(vec).all():
                raise ParseError(f"{path}:{lineno}: non-finite value")
            if a_label not in a_map:
                a_map[a_label] = len(a_labels)
                a_labels.append(a_label)
            if b_label not in b_map:
                b_map[b_label] = len(b_labels)
                b_labels.append(b_label)
            key = (a_map[a_label], b_map[b_label])
            if key in entries:
                raise DuplicatePair(
                    f"{path}:{lineno}: duplicate pair (a={a_label}, b={b_label})"
                )
            entries[key] = vec

    if not entries:
        raise ParseError(f"{path}: no data rows")
    n_a, n_b = len(a_labels), len(b_labels)
    values = np.full((n_a, n_b, dim), np.nan)
    observed = np.zeros((n_a, n_b), dtype=bool)
    for (i, j), vec in entries.items():
        values[i, j, :] = vec
        observed[i, j] = True
    tensor = IncompleteTensor(values, observed)
    rows = [
        (a_labels[i], b_labels[j], entries[(i, j)])
        for i, j in sorted(entries)
    ]
    return LongFormDataset(a_labels=a_labels, b_labels=b_labels, rows=rows), tensor


def dataset_from_tensor(
    tensor: IncompleteTensor, a_labels=None, b_labels=None
) -> LongFormDataset:
    """Wrap a tensor with (default ``a0..``/``b0..``) labels."""
    if a_labels is None:
        a_labels = [f"a{i}" for i in range(tensor.n_a)]
    if b_labels is None:
        b_labels = [f"b{j}" for j in range(tensor.n_b)]
    if len(a_labels) != tensor.n_a or len(b_labels) != tensor.n_b:
        raise ValueError("label counts must match tensor shape")
    rows = [
        (a_labels[i], b_labels[j], tensor.values[i, j, :])
        for i, j in np.argwhere(tensor.observed)
    ]
    return LongFormDataset(a_labels=list(a_labels), b_labels=list(b_labels), rows=rows)


def save_csv(path, dataset: LongFormDataset) -> None:
    """Write observed cells in canonical order with round-trip precision."""
    if not dataset.rows:
        raise ValueError("dataset has no rows")
    dim = len(dataset.rows[0][2])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_expected_header(dim))
        for a_label, b_label, vec in dataset.rows:
            writer.writerow([a_label, b_label] + [repr(float(v)) for v in vec])


def save_truth_sidecar(path, instance: SyntheticInstance) -> None:
    """Persist factors, clean truth, and mask next to a generated CSV."""
    np.savez(
        path,
        clean=instance.clean,
        u_factors=instance.u_factors,
        v_factors=instance.v_factors,
        observed=instance.observed_tensor.observed,
        model=instance.spec.model.value,
        n_a=instance.spec.n_a,
        n_b=instance.spec.n_b,
        dim=instance.spec.dim,
        rank=instance.spec.rank,
        noise_std=instance.spec.noise_std,
        missing_fraction=instance.spec.missing_fraction,
        seed=instance.spec.seed,
    )


def load_truth_sidecar(path) -> dict:
    with np.load(path) as data:
        return {key: data[key] for key in data.files}


def report_schema() -> dict:
    """The versioned JSON schema shipped with the package."""
    text = (
        importlib.resources.files("causimpute")
        .joinpath("report_schema.json")
        .read_text(encoding="utf-8")
    )
    return json.loads(text)


def report_to_dict(
    report: EvaluationReport, run_config: RunConfig | None = None,
    no_timestamp: bool = False,
) -> dict:
    doc = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "metadata": dict(report.metadata),
        "per_target": [asdict(rec) for rec in report.per_target],
        "aggregates": report.aggregates,
        "comparisons": [asdict(c) for c in report.comparisons],
    }
    if run_config is not None:
        doc["metadata"]["run_config"] = asdict(run_config)
    if not no_timestamp:
        doc["metadata"]["timestamp"] = datetime.now(timezone.utc).isoformat()
    return doc


def write_report_json(
    report: EvaluationReport, path, run_config: RunConfig | None = None,
    no_timestamp: bool = False,
) -> None:
    """Serialize a report deterministically (byte-identical for identical
    inputs when ``no_timestamp`` is set)."""
    doc = report_to_dict(report, run_config, no_timestamp)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_nrmse_columns_csv(report: EvaluationReport, path) -> None:
    """Plot-ready per-estimator NRMSE columns, one row per target."""
    names = report.estimator_names()
    by_est = {name: report.errors_by_estimator(name, "nrmse") for name in names}
    targets = sorted({(r.a_index, r.b_index) for r in report.per_target})
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["a_index", "b_index"] + names)
        for t in targets:
            row = [t[0], t[1]]
            for name in names:
                value = by_est[name].get(t)
                row.append("" if value is None else repr(float(value)))
            writer.writerow(row)
