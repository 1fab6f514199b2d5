"""The estimator family: four mean-based baselines, SI-A/SI-C (one shared
weight vector across output dimensions), GSI in both directions (one weight
vector per dimension), and the group-regularised GSI variant.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from causimpute.errors import EmptyDonorSet, MissingControl
from causimpute.regression import (
    DEFAULT_SVD_CUTOFF,
    SolverSettings,
    fit_regularized,
    fit_unregularized,
    least_squares_min_norm,
)
from causimpute.tensor import (
    Direction,
    IncompleteTensor,
    TargetQuery,
    assemble_problem,
    donor_set,
    greedy_donor_selection,
)


class EstimatorKind(enum.Enum):
    MEAN_OVER_A = "mean_over_a"
    MEAN_OVER_B = "mean_over_b"
    TWO_WAY_MEAN = "two_way_mean"
    FIXED_ACTION_EFFECT = "fixed_action_effect"
    SI_A = "si_a"
    SI_C = "si_c"
    GSI_AB = "gsi_ab"
    GSI_BA = "gsi_ba"
    GSI_REG_AB = "gsi_reg_ab"
    GSI_REG_BA = "gsi_reg_ba"


# With A as the action set and B as the context set, the column mean averages
# over actions and the row mean over contexts.
KIND_ALIASES = {
    "mean_over_actions": EstimatorKind.MEAN_OVER_A,
    "mean_over_contexts": EstimatorKind.MEAN_OVER_B,
}


def kind_from_name(name: str) -> EstimatorKind:
    """Resolve a kind from its canonical name or a paper-style alias."""
    name = name.strip().lower()
    if name in KIND_ALIASES:
        return KIND_ALIASES[name]
    try:
        return EstimatorKind(name)
    except ValueError:
        valid = sorted(k.value for k in EstimatorKind) + sorted(KIND_ALIASES)
        raise ValueError(f"unknown estimator {name!r}; choices: {valid}") from None


@dataclass(frozen=True)
class EstimatorConfig:
    """Estimator kind plus hyperparameters."""

    kind: EstimatorKind
    k: int = 1
    solver: SolverSettings = field(default_factory=SolverSettings)
    standardize: bool = False
    control_index: int | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        needs_control = self.kind is EstimatorKind.FIXED_ACTION_EFFECT
        if needs_control and self.control_index is None:
            raise ValueError("fixed_action_effect requires control_index")
        if not needs_control and self.control_index is not None:
            raise ValueError("control_index is only valid for fixed_action_effect")


@dataclass(frozen=True)
class Prediction:
    """An estimate plus the donors and training columns that produced it."""

    estimate: np.ndarray
    donors_used: tuple = ()
    training_columns_used: tuple = ()


def standardization_stats(tensor: IncompleteTensor):
    """Per-dimension mean and standard deviation over observed entries.

    Dimensions with zero spread get sigma = 1.
    """
    obs = tensor.values[tensor.observed]
    if obs.size == 0:
        raise EmptyDonorSet("tensor has no observed entries")
    mu = obs.mean(axis=0)
    sigma = obs.std(axis=0)
    sigma = np.where(sigma == 0.0, 1.0, sigma)
    return mu, sigma


def _standardized(tensor: IncompleteTensor, mu, sigma) -> IncompleteTensor:
    values = (tensor.values - mu) / sigma
    # keep unobserved garbage from tripping the finite check
    values = np.where(tensor.observed[:, :, None], values, np.nan)
    return IncompleteTensor(values, tensor.observed)


def mean_over_a(tensor: IncompleteTensor, target: TargetQuery) -> Prediction:
    """Mean of the observed entries in the target's column."""
    donors = donor_set(tensor, TargetQuery(target.a_index, target.b_index, Direction.OVER_A))
    est = tensor.values[donors, target.b_index, :].mean(axis=0)
    return Prediction(estimate=est, donors_used=tuple(donors))


def mean_over_b(tensor: IncompleteTensor, target: TargetQuery) -> Prediction:
    """Mean of the observed entries in the target's row."""
    cols = donor_set(tensor, TargetQuery(target.a_index, target.b_index, Direction.OVER_B))
    est = tensor.values[target.a_index, cols, :].mean(axis=0)
    return Prediction(estimate=est, donors_used=tuple(cols))


def two_way_mean(tensor: IncompleteTensor, target: TargetQuery) -> Prediction:
    """Row mean + column mean - grand mean, each over observed entries."""
    rows = donor_set(tensor, TargetQuery(target.a_index, target.b_index, Direction.OVER_A))
    cols = donor_set(tensor, TargetQuery(target.a_index, target.b_index, Direction.OVER_B))
    col_mean = tensor.values[rows, target.b_index, :].mean(axis=0)
    row_mean = tensor.values[target.a_index, cols, :].mean(axis=0)
    grand = tensor.values[tensor.observed].mean(axis=0)
    return Prediction(
        estimate=row_mean + col_mean - grand,
        donors_used=tuple(rows),
        training_columns_used=tuple(cols),
    )


def fixed_action_effect(
    tensor: IncompleteTensor, target: TargetQuery, control_index: int
) -> Prediction:
    """Control row's value at the target column plus the mean offset of the
    target row from the control row over their shared columns."""
    i, j = target.a_index, target.b_index
    if not 0 <= control_index < tensor.n_a:
        raise IndexError(f"control_index {control_index} out of range")
    if not tensor.observed[control_index, j]:
        raise MissingControl(
            f"control row {control_index} is unobserved at column {j}"
        )
    shared = tensor.observed[i] & tensor.observed[control_index]
    shared[j] = False
    cols = np.flatnonzero(shared)
    if cols.size == 0:
        raise MissingControl(
            f"rows {i} and {control_index} share no observed column"
        )
    offsets = tensor.values[i, cols, :] - tensor.values[control_index, cols, :]
    est = tensor.values[control_index, j, :] + offsets.mean(axis=0)
    return Prediction(
        estimate=est,
        donors_used=(control_index,),
        training_columns_used=tuple(cols.tolist()),
    )


def gsi(
    tensor: IncompleteTensor,
    target: TargetQuery,
    k: int = 1,
    direction: Direction = Direction.OVER_A,
    cutoff_factor: float = DEFAULT_SVD_CUTOFF,
) -> Prediction:
    """Per-dimension weights: greedy donor selection, one minimum-norm least
    squares per output dimension, estimate_d = x_test[:, d] . beta_d."""
    query = TargetQuery(target.a_index, target.b_index, direction)
    selection = greedy_donor_selection(tensor, query, k)
    problem = assemble_problem(tensor, query, selection)
    coeffs = fit_unregularized(problem, cutoff_factor)
    est = np.einsum("qd,dq->d", problem.x_test, coeffs.beta)
    return Prediction(
        estimate=est,
        donors_used=selection.donors,
        training_columns_used=selection.training_columns,
    )


def gsi_regularized(
    tensor: IncompleteTensor,
    target: TargetQuery,
    k: int,
    direction: Direction,
    solver: SolverSettings,
) -> Prediction:
    """GSI with the pairwise group penalty encouraging shared weights."""
    query = TargetQuery(target.a_index, target.b_index, direction)
    selection = greedy_donor_selection(tensor, query, k)
    problem = assemble_problem(tensor, query, selection)
    coeffs = fit_regularized(problem, solver)
    est = np.einsum("qd,dq->d", problem.x_test, coeffs.beta)
    return Prediction(
        estimate=est,
        donors_used=selection.donors,
        training_columns_used=selection.training_columns,
    )


def _si(tensor, target, k, direction, cutoff_factor):
    """Shared weights: flatten the per-dimension systems (dimension-major)
    into one stacked least squares, apply the single weight vector to every
    dimension of x_test."""
    query = TargetQuery(target.a_index, target.b_index, direction)
    selection = greedy_donor_selection(tensor, query, k)
    problem = assemble_problem(tensor, query, selection)
    dim = problem.dim
    x_stacked = np.concatenate([problem.x_train[:, :, d] for d in range(dim)])
    y_stacked = np.concatenate([problem.y_train[:, d] for d in range(dim)])
    beta = least_squares_min_norm(x_stacked, y_stacked, cutoff_factor)
    est = problem.x_test.T @ beta
    return Prediction(
        estimate=est,
        donors_used=selection.donors,
        training_columns_used=selection.training_columns,
    )


def si_a(tensor, target, k: int = 1, cutoff_factor: float = DEFAULT_SVD_CUTOFF):
    """Shared-weights synthetic interventions, regressing over the A axis."""
    return _si(tensor, target, k, Direction.OVER_A, cutoff_factor)


def si_c(tensor, target, k: int = 1, cutoff_factor: float = DEFAULT_SVD_CUTOFF):
    """Shared-weights synthetic interventions, regressing over the B axis."""
    return _si(tensor, target, k, Direction.OVER_B, cutoff_factor)


def _dispatch(tensor, target, config: EstimatorConfig) -> Prediction:
    kind = config.kind
    cutoff = config.solver.svd_cutoff_factor
    if kind is EstimatorKind.MEAN_OVER_A:
        return mean_over_a(tensor, target)
    if kind is EstimatorKind.MEAN_OVER_B:
        return mean_over_b(tensor, target)
    if kind is EstimatorKind.TWO_WAY_MEAN:
        return two_way_mean(tensor, target)
    if kind is EstimatorKind.FIXED_ACTION_EFFECT:
        return fixed_action_effect(tensor, target, config.control_index)
    if kind is EstimatorKind.SI_A:
        return si_a(tensor, target, config.k, cutoff)
    if kind is EstimatorKind.SI_C:
        return si_c(tensor, target, config.k, cutoff)
    if kind is EstimatorKind.GSI_AB:
        return gsi(tensor, target, config.k, Direction.OVER_A, cutoff)
    if kind is EstimatorKind.GSI_BA:
        return gsi(tensor, target, config.k, Direction.OVER_B, cutoff)
    if kind is EstimatorKind.GSI_REG_AB:
        return gsi_regularized(tensor, target, config.k, Direction.OVER_A, config.solver)
    if kind is EstimatorKind.GSI_REG_BA:
        return gsi_regularized(tensor, target, config.k, Direction.OVER_B, config.solver)
    raise ValueError(f"unhandled kind {kind}")


def estimate(
    tensor: IncompleteTensor, target: TargetQuery, config: EstimatorConfig
) -> Prediction:
    """Run the configured estimator on one (unobserved) target cell.

    With ``standardize`` set, per-dimension statistics over all observed
    entries are applied to the tensor first and inverted on the estimate.
    """
    target.validate(tensor)
    if tensor.observed[target.a_index, target.b_index]:
        raise ValueError(
            f"target cell ({target.a_index}, {target.b_index}) is observed; "
            "mask it before estimating"
        )
    if config.standardize:
        mu, sigma = standardization_stats(tensor)
        pred = _dispatch(_standardized(tensor, mu, sigma), target, config)
        return Prediction(
            estimate=pred.estimate * sigma + mu,
            donors_used=pred.donors_used,
            training_columns_used=pred.training_columns_used,
        )
    return _dispatch(tensor, target, config)
