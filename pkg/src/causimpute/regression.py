"""Numerical kernels: minimum-norm least squares and the group-penalised
subgradient solver.

The regularised objective is

    (1/c) * sum_d ||X_d b_d - y_d||^2  +  lam * sum_{d1<d2} ||b_d1 - b_d2||_2

where c is the number of training columns; the 1/c factor scales the loss
term only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from causimpute import kernels
from causimpute.errors import DivergenceDetected, NumericalFailure
from causimpute.tensor import RegressionProblem

DEFAULT_SVD_CUTOFF = 1e-12
DIVERGENCE_FACTOR = 1e6


@dataclass(frozen=True)
class SolverSettings:
    """Hyperparameters for the regularised fit.

    ``lam`` is the group-penalty weight; the step size at iteration t >= 1 is
    ``initial_step / sqrt(t)``; iteration stops at ``max_iters`` or when the
    objective changes by less than ``tolerance`` over one iteration.
    """

    lam: float = 0.0
    max_iters: int = 2000
    initial_step: float = 0.1
    tolerance: float = 1e-8
    svd_cutoff_factor: float = DEFAULT_SVD_CUTOFF

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        for name in ("initial_step", "tolerance", "svd_cutoff_factor"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")


@dataclass(frozen=True)
class CoefficientSet:
    """One weight vector per output dimension, stacked as (dim, n_donors)."""

    beta: np.ndarray


def least_squares_min_norm(
    x: np.ndarray, y: np.ndarray, cutoff_factor: float = DEFAULT_SVD_CUTOFF
) -> np.ndarray:
    """Minimum-Euclidean-norm least-squares solution via SVD.

    Singular values at or below ``cutoff_factor * max(p, q) * s_max`` are
    treated as zero.  For full-column-rank x this equals the normal-equations
    solution (X^T X)^{-1} X^T y.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 1 or y.shape[0] != x.shape[0]:
        raise ValueError(f"incompatible shapes {x.shape} and {y.shape}")
    try:
        u, s, vt = np.linalg.svd(x, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"SVD did not converge: {exc}") from exc
    cutoff = cutoff_factor * max(x.shape) * (s[0] if s.size else 0.0)
    keep = s > cutoff
    if not keep.any():
        return np.zeros(x.shape[1])
    return vt[keep].T @ ((u[:, keep].T @ y) / s[keep])


def fit_unregularized(
    problem: RegressionProblem, cutoff_factor: float = DEFAULT_SVD_CUTOFF
) -> CoefficientSet:
    """Independent minimum-norm least squares per output dimension."""
    beta = np.empty((problem.dim, problem.n_donors))
    for d in range(problem.dim):
        beta[d] = least_squares_min_norm(
            problem.x_train[:, :, d], problem.y_train[:, d], cutoff_factor
        )
    return CoefficientSet(beta=beta)


def _stacked_design(problem: RegressionProblem):
    """(dim, c, q) design and (dim, c) responses, dimension-major."""
    x = np.ascontiguousarray(problem.x_train.transpose(2, 0, 1))
    y = np.ascontiguousarray(problem.y_train.T)
    return x, y


def objective(problem: RegressionProblem, coeffs: CoefficientSet, lam: float) -> float:
    """Mean squared training loss plus lam times the pairwise group penalty."""
    x, y = _stacked_design(problem)
    r = np.einsum("dcq,dq->dc", x, coeffs.beta) - y
    loss = float(np.einsum("dc,dc->", r, r)) / problem.n_training_columns
    return loss + lam * kernels.group_penalty(coeffs.beta)


def objective_subgradient(
    problem: RegressionProblem, coeffs: CoefficientSet, lam: float
) -> np.ndarray:
    """Subgradient of :func:`objective` at ``coeffs``, shape (dim, q).

    The pairwise terms use the zero vector at exact ties.
    """
    x, y = _stacked_design(problem)
    r = np.einsum("dcq,dq->dc", x, coeffs.beta) - y
    grad = (2.0 / problem.n_training_columns) * np.einsum("dcq,dc->dq", x, r)
    if lam != 0.0:
        _, pen_grad = kernels.group_penalty_and_subgrad(coeffs.beta)
        grad += lam * pen_grad
    return grad


def fit_regularized(
    problem: RegressionProblem, settings: SolverSettings
) -> CoefficientSet:
    """Subgradient descent from the unregularised solution; returns the
    best-objective iterate.

    With lam == 0 the warm start is already optimal and is returned as is.
    """
    init = fit_unregularized(problem, settings.svd_cutoff_factor)
    if settings.lam == 0.0:
        return init
    x, y = _stacked_design(problem)
    best, _, _, diverged = kernels.subgradient_descent(
        x,
        y,
        init.beta,
        settings.lam,
        settings.initial_step,
        settings.max_iters,
        settings.tolerance,
        DIVERGENCE_FACTOR,
    )
    if diverged:
        raise DivergenceDetected(
            f"objective exceeded {DIVERGENCE_FACTOR:.0e} times its initial value"
        )
    return CoefficientSet(beta=best)
