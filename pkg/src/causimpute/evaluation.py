"""Mask-and-impute benchmark harness, error metrics, paired Wilcoxon
signed-rank comparison, and hyperparameter grid search.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from causimpute.errors import (
    AllZeroDifferences,
    CausimputeError,
    DegenerateTruth,
)
from causimpute.estimators import EstimatorConfig, estimate, standardization_stats
from causimpute.tensor import IncompleteTensor, TargetQuery

THREADS_ENV_VAR = "CAUSIMPUTE_THREADS"
EXACT_WILCOXON_MAX_N = 20

ALTERNATIVES = ("less", "greater", "two-sided")


def mae(estimate_vec, truth_vec) -> float:
    """Mean absolute error across output dimensions."""
    estimate_vec = np.asarray(estimate_vec, dtype=np.float64)
    truth_vec = np.asarray(truth_vec, dtype=np.float64)
    if estimate_vec.shape != truth_vec.shape:
        raise ValueError("estimate and truth must have the same shape")
    return float(np.abs(estimate_vec - truth_vec).mean())


def nrmse(estimate_vec, truth_vec) -> float:
    """Root mean squared error normalized by the population standard
    deviation of the truth vector."""
    estimate_vec = np.asarray(estimate_vec, dtype=np.float64)
    truth_vec = np.asarray(truth_vec, dtype=np.float64)
    if estimate_vec.shape != truth_vec.shape:
        raise ValueError("estimate and truth must have the same shape")
    std = float(truth_vec.std())
    if std == 0.0:
        raise DegenerateTruth("truth vector has zero standard deviation")
    rmse = math.sqrt(float(((estimate_vec - truth_vec) ** 2).mean()))
    return rmse / std


def _midranks(values: np.ndarray) -> np.ndarray:
    """Average ranks (1-based) with ties sharing their rank mean."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _exact_tail_probs(ranks: np.ndarray, w: float):
    """P(W <= w) and P(W >= w) under random signs, by counting rank-subset
    sums.  Midranks are half-integers, so doubled ranks are exact ints."""
    ranks2 = np.rint(2.0 * ranks).astype(np.int64)
    total = int(ranks2.sum())
    counts = np.zeros(total + 1, dtype=np.int64)
    counts[0] = 1
    for r in ranks2:
        counts[r:] = counts[r:] + counts[:-r]
    denom = 2.0 ** len(ranks)
    w2 = int(np.rint(2.0 * w))
    p_less = float(counts[: w2 + 1].sum()) / denom
    p_greater = float(counts[w2:].sum()) / denom
    return p_less, p_greater


def _norm_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def _approx_tail_probs(ranks: np.ndarray, w: float, abs_diffs: np.ndarray):
    """Normal approximation with tie and continuity corrections."""
    n = len(ranks)
    mu = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    _, tie_counts = np.unique(abs_diffs, return_counts=True)
    var -= float((tie_counts**3 - tie_counts).sum()) / 48.0
    sigma = math.sqrt(var)
    p_less = 1.0 - _norm_sf((w + 0.5 - mu) / sigma)
    p_greater = _norm_sf((w - 0.5 - mu) / sigma)
    return p_less, p_greater


def wilcoxon_signed_rank(
    errors_a, errors_b, alternative: str = "two-sided", method: str = "auto"
):
    """Paired Wilcoxon signed-rank test.

    The statistic is the sum of the ranks of positive differences
    (a - b, zeros dropped, midranks for ties).  ``alternative='less'`` tests
    that ``errors_a`` is stochastically smaller.  The p-value is exact
    (full sign-assignment distribution) for n <= 20, and a tie- and
    continuity-corrected normal approximation above; ``method`` may force
    ``'exact'`` or ``'approx'``.

    Returns (statistic, p_value).
    """
    if alternative not in ALTERNATIVES:
        raise ValueError(f"alternative must be one of {ALTERNATIVES}")
    if method not in ("auto", "exact", "approx"):
        raise ValueError("method must be 'auto', 'exact' or 'approx'")
    a = np.asarray(errors_a, dtype=np.float64)
    b = np.asarray(errors_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("errors_a and errors_b must be 1-d and equal length")
    diffs = a - b
    diffs = diffs[diffs != 0.0]
    n = len(diffs)
    if n == 0:
        raise AllZeroDifferences("every paired difference is zero")
    abs_diffs = np.abs(diffs)
    ranks = _midranks(abs_diffs)
    w = float(ranks[diffs > 0].sum())

    if method == "exact" or (method == "auto" and n <= EXACT_WILCOXON_MAX_N):
        p_less, p_greater = _exact_tail_probs(ranks, w)
    else:
        p_less, p_greater = _approx_tail_probs(ranks, w, abs_diffs)

    if alternative == "less":
        p = p_less
    elif alternative == "greater":
        p = p_greater
    else:
        p = min(1.0, 2.0 * min(p_less, p_greater))
    return w, p


@dataclass
class TargetResult:
    a_index: int
    b_index: int
    estimator: str
    status: str  # "ok" or the failure's exception class name
    mae: float | None = None
    nrmse: float | None = None
    scale: str = "raw"  # metric scale: "raw" or "standardized"


@dataclass
class ComparisonResult:
    estimator_a: str
    estimator_b: str
    metric: str
    alternative: str
    n_pairs: int
    statistic: float
    p_value: float


@dataclass
class EvaluationReport:
    per_target: list
    aggregates: dict
    comparisons: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def errors_by_estimator(self, name: str, metric: str = "nrmse") -> dict:
        """{(a, b): value} over this estimator's successful targets."""
        out = {}
        for rec in self.per_target:
            if rec.estimator == name and rec.status == "ok":
                value = getattr(rec, metric)
                if value is not None:
                    out[(rec.a_index, rec.b_index)] = value
        return out

    def estimator_names(self) -> list:
        seen = []
        for rec in self.per_target:
            if rec.estimator not in seen:
                seen.append(rec.estimator)
        return seen


def config_names(configs) -> list:
    """Display names for a config list: the kind, disambiguated by position
    when the same kind appears more than once."""
    names = []
    for config in configs:
        base = config.kind.value
        name = base
        suffix = 2
        while name in names:
            name = f"{base}#{suffix}"
            suffix += 1
        names.append(name)
    return names


def _default_thread_count() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV_VAR, "1")))
    except ValueError:
        return 1


def _evaluate_target(tensor, truth, configs, names, pair):
    i, j = pair
    if tensor.observed[i, j]:
        masked = tensor.with_masked_cell(i, j)
        held = tensor.values[i, j, :]
    else:
        masked = tensor
        held = truth[i, j, :]
    results = []
    for name, config in zip(names, configs):
        try:
            pred = estimate(masked, TargetQuery(i, j), config)
        except CausimputeError as exc:
            results.append(
                TargetResult(i, j, name, status=type(exc).__name__)
            )
            continue
        est_vec, truth_vec = pred.estimate, held
        scale = "raw"
        if config.standardize:
            mu, sigma = standardization_stats(masked)
            est_vec = (est_vec - mu) / sigma
            truth_vec = (held - mu) / sigma
            scale = "standardized"
        rec = TargetResult(i, j, name, status="ok", scale=scale)
        rec.mae = mae(est_vec, truth_vec)
        try:
            rec.nrmse = nrmse(est_vec, truth_vec)
        except DegenerateTruth:
            rec.nrmse = None
        results.append(rec)
    return results


def mask_and_impute(
    tensor: IncompleteTensor,
    configs,
    targets=None,
    truth=None,
    n_threads: int | None = None,
) -> EvaluationReport:
    """Hide each target cell, impute it with every config, and score against
    the held-out value.

    Targets default to all observed cells (row-major).  Observed targets are
    temporarily masked and scored against their held-out (possibly noisy)
    value; unobserved targets are allowed only when ``truth`` (a full
    n_a x n_b x dim array) is supplied and are scored against it.  Estimator
    failures are recorded per target and never abort the sweep.  The input
    tensor is never mutated.
    """
    configs = list(configs)
    if not configs:
        raise ValueError("at least one estimator config is required")
    names = config_names(configs)
    if targets is None:
        targets = [tuple(idx) for idx in np.argwhere(tensor.observed)]
    else:
        targets = [(int(i), int(j)) for i, j in targets]
    if truth is not None:
        truth = np.asarray(truth, dtype=np.float64)
        if truth.shape != tensor.values.shape:
            raise ValueError("truth must match the tensor shape")
    for i, j in targets:
        if not tensor.observed[i, j] and truth is None:
            raise ValueError(
                f"target ({i}, {j}) is unobserved and no truth array was given"
            )

    if n_threads is None:
        n_threads = _default_thread_count()
    if n_threads > 1 and len(targets) > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            nested = list(
                pool.map(
                    lambda pair: _evaluate_target(tensor, truth, configs, names, pair),
                    targets,
                )
            )
    else:
        nested = [
            _evaluate_target(tensor, truth, configs, names, pair)
            for pair in targets
        ]
    per_target = [rec for group in nested for rec in group]

    aggregates = {}
    for name in names:
        aggregates[name] = {}
        for metric in ("mae", "nrmse"):
            vals = [
                getattr(r, metric)
                for r in per_target
                if r.estimator == name and r.status == "ok"
                and getattr(r, metric) is not None
            ]
            if vals:
                arr = np.asarray(vals)
                aggregates[name][metric] = {
                    "mean": float(arr.mean()),
                    "median": float(np.median(arr)),
                    "std": float(arr.std()),
                    "count": len(vals),
                }
            else:
                aggregates[name][metric] = {
                    "mean": None, "median": None, "std": None, "count": 0,
                }

    metadata = {
        "n_targets": len(targets),
        "truth_provided": truth is not None,
        "nrmse_normalizer": "population std of the truth vector",
    }
    return EvaluationReport(
        per_target=per_target, aggregates=aggregates, metadata=metadata
    )


def compare_estimators(
    report: EvaluationReport,
    name_a: str,
    name_b: str,
    alternative: str = "two-sided",
    metric: str = "nrmse",
) -> ComparisonResult:
    """Paired Wilcoxon test over targets where both estimators succeeded."""
    errs_a = report.errors_by_estimator(name_a, metric)
    errs_b = report.errors_by_estimator(name_b, metric)
    known = report.estimator_names()
    for name in (name_a, name_b):
        if name not in known:
            raise ValueError(f"estimator {name!r} not in report; have {known}")
    common = sorted(set(errs_a) & set(errs_b))
    if not common:
        raise ValueError(
            f"no targets where both {name_a!r} and {name_b!r} succeeded"
        )
    stat, p = wilcoxon_signed_rank(
        [errs_a[t] for t in common],
        [errs_b[t] for t in common],
        alternative=alternative,
    )
    result = ComparisonResult(
        estimator_a=name_a,
        estimator_b=name_b,
        metric=metric,
        alternative=alternative,
        n_pairs=len(common),
        statistic=stat,
        p_value=p,
    )
    report.comparisons.append(result)
    return result


@dataclass(frozen=True)
class GridSearchSpec:
    k_values: tuple
    lambda_values: tuple
    metric: str = "mae"
    selection: str = "mean"

    def __post_init__(self):
        if not self.k_values or not self.lambda_values:
            raise ValueError("grid axes must be non-empty")
        if self.metric not in ("mae", "nrmse"):
            raise ValueError("metric must be 'mae' or 'nrmse'")
        if self.selection not in ("mean", "median"):
            raise ValueError("selection must be 'mean' or 'median'")


@dataclass
class GridSearchResult:
    best_k: int
    best_lambda: float
    table: list  # rows: {"k", "lambda", "score", "n_success"}


def grid_search(
    tensor: IncompleteTensor,
    base_config: EstimatorConfig,
    spec: GridSearchSpec,
    targets=None,
    truth=None,
    n_threads: int | None = None,
) -> GridSearchResult:
    """Evaluate every (k, lambda) pair with mask_and_impute and return the
    argmin under the configured selection rule; ties break toward smaller k
    then smaller lambda.  Pairs with zero successes are excluded."""
    table = []
    best = None
    for k in spec.k_values:
        for lam in spec.lambda_values:
            config = replace(
                base_config,
                k=int(k),
                solver=replace(base_config.solver, lam=float(lam)),
            )
            report = mask_and_impute(
                tensor, [config], targets=targets, truth=truth,
                n_threads=n_threads,
            )
            name = config_names([config])[0]
            agg = report.aggregates[name][spec.metric]
            score = agg[spec.selection]
            row = {
                "k": int(k),
                "lambda": float(lam),
                "score": score,
                "n_success": agg["count"],
            }
            table.append(row)
            if score is None:
                continue
            key = (score, int(k), float(lam))
            if best is None or key < best:
                best = key
    if best is None:
        raise ValueError("no grid point produced a successful estimate")
    return GridSearchResult(best_k=best[1], best_lambda=best[2], table=table)
