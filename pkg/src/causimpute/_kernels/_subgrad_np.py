"""Pure-numpy twin of the Cython subgradient kernel.

Selected at import when the compiled extension is unavailable (or forced via
CAUSIMPUTE_BACKEND=numpy).  Must implement the same contract as
``_subgrad_cy``: see ``causimpute.kernels``.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "numpy"


def group_penalty(beta: np.ndarray) -> float:
    """Sum of Euclidean norms of all pairwise row differences of beta."""
    beta = np.asarray(beta, dtype=np.float64)
    total = 0.0
    for i in range(beta.shape[0] - 1):
        diff = beta[i] - beta[i + 1 :]
        total += float(np.sqrt(np.einsum("kq,kq->k", diff, diff)).sum())
    return total


def group_penalty_and_subgrad(beta: np.ndarray):
    """Penalty value and its subgradient; zero-difference pairs contribute
    the zero vector."""
    beta = np.asarray(beta, dtype=np.float64)
    grad = np.zeros_like(beta)
    total = 0.0
    for i in range(beta.shape[0] - 1):
        diff = beta[i] - beta[i + 1 :]
        norms = np.sqrt(np.einsum("kq,kq->k", diff, diff))
        total += float(norms.sum())
        nz = norms > 0.0
        if nz.any():
            unit = diff[nz] / norms[nz, None]
            grad[i] += unit.sum(axis=0)
            grad[i + 1 :][nz] -= unit
    return total, grad


def _objective_and_grad(x, y, beta, lam, inv_c):
    # residuals: (dim, c); loss gradient: (2/c) X^T r per dimension
    r = np.einsum("dcq,dq->dc", x, beta) - y
    loss = inv_c * float(np.einsum("dc,dc->", r, r))
    grad = (2.0 * inv_c) * np.einsum("dcq,dc->dq", x, r)
    if lam != 0.0:
        pen, pen_grad = group_penalty_and_subgrad(beta)
        return loss + lam * pen, grad + lam * pen_grad
    return loss, grad


def subgradient_descent(
    x: np.ndarray,
    y: np.ndarray,
    beta0: np.ndarray,
    lam: float,
    eta0: float,
    max_iters: int,
    tolerance: float,
    divergence_factor: float = 1e6,
):
    """Decreasing-step subgradient descent on the group-penalised objective.

    Parameters
    ----------
    x : array, shape (dim, c, q)
        Per-dimension design matrices.
    y : array, shape (dim, c)
    beta0 : array, shape (dim, q)
        Starting point (also the first recorded iterate).
    lam, eta0, max_iters, tolerance : solver settings; the step at iteration
        t >= 1 is eta0 / sqrt(t).

    Returns
    -------
    (best_beta, best_objective, iterations, diverged)
        Best-objective iterate among all recorded ones; ``diverged`` is True
        when the objective exceeded ``divergence_factor`` times its initial
        value (the caller decides how to surface that).
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    beta = np.array(beta0, dtype=np.float64)
    inv_c = 1.0 / x.shape[1]

    f, grad = _objective_and_grad(x, y, beta, lam, inv_c)
    f_init = f
    f_prev = f
    best = beta.copy()
    f_best = f

    for t in range(1, max_iters + 1):
        beta -= (eta0 / np.sqrt(t)) * grad
        f, grad = _objective_and_grad(x, y, beta, lam, inv_c)
        if f < f_best:
            f_best = f
            best[:] = beta
        if f_init > 0.0 and f > divergence_factor * f_init:
            return best, f_best, t, True
        if abs(f - f_prev) < tolerance:
            return best, f_best, t, False
        f_prev = f
    return best, f_best, max_iters, False
