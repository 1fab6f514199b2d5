# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled subgradient kernel: the hot loop of the regularized solver.

Same contract as the pure-numpy twin in ``_subgrad_np``.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()

BACKEND_NAME = "cython"


cdef double _penalty_and_subgrad(double[:, ::1] beta, double[:, ::1] grad,
                                 double lam, bint want_grad) noexcept nogil:
    cdef Py_ssize_t dim = beta.shape[0]
    cdef Py_ssize_t q = beta.shape[1]
    cdef Py_ssize_t i, k, j
    cdef double total = 0.0
    cdef double s, d, u
    for i in range(dim - 1):
        for k in range(i + 1, dim):
            s = 0.0
            for j in range(q):
                d = beta[i, j] - beta[k, j]
                s += d * d
            s = sqrt(s)
            total += s
            if want_grad and s > 0.0:
                for j in range(q):
                    u = lam * (beta[i, j] - beta[k, j]) / s
                    grad[i, j] += u
                    grad[k, j] -= u
    return total


def group_penalty(beta):
    """Sum of Euclidean norms of all pairwise row differences of beta."""
    cdef double[:, ::1] b = np.ascontiguousarray(beta, dtype=np.float64)
    cdef double[:, ::1] dummy = b  # unused when want_grad is 0
    return _penalty_and_subgrad(b, dummy, 0.0, 0)


def group_penalty_and_subgrad(beta):
    """Penalty value and its subgradient; zero-difference pairs contribute
    the zero vector."""
    b_arr = np.ascontiguousarray(beta, dtype=np.float64)
    grad = np.zeros_like(b_arr)
    cdef double[:, ::1] b = b_arr
    cdef double[:, ::1] g = grad
    value = _penalty_and_subgrad(b, g, 1.0, 1)
    return value, grad


cdef double _objective_and_grad(double[:, :, ::1] x, double[:, ::1] y,
                                double[:, ::1] beta, double lam,
                                double inv_c, double[:, ::1] grad,
                                double[::1] resid) noexcept nogil:
    cdef Py_ssize_t dim = x.shape[0]
    cdef Py_ssize_t c = x.shape[1]
    cdef Py_ssize_t q = x.shape[2]
    cdef Py_ssize_t d, i, j
    cdef double loss = 0.0
    cdef double r, scale
    for d in range(dim):
        for j in range(q):
            grad[d, j] = 0.0
        for i in range(c):
            r = -y[d, i]
            for j in range(q):
                r += x[d, i, j] * beta[d, j]
            resid[i] = r
            loss += r * r
        scale = 2.0 * inv_c
        for i in range(c):
            r = scale * resid[i]
            for j in range(q):
                grad[d, j] += x[d, i, j] * r
    loss *= inv_c
    if lam != 0.0:
        loss += lam * _penalty_and_subgrad(beta, grad, lam, 1)
    return loss


def subgradient_descent(x, y, beta0, double lam, double eta0,
                        long max_iters, double tolerance,
                        double divergence_factor=1e6):
    """Decreasing-step subgradient descent; see the numpy twin's docstring."""
    x_arr = np.ascontiguousarray(x, dtype=np.float64)
    y_arr = np.ascontiguousarray(y, dtype=np.float64)
    beta_arr = np.array(beta0, dtype=np.float64, order="C")
    best_arr = beta_arr.copy()
    grad_arr = np.zeros_like(beta_arr)
    resid_arr = np.zeros(x_arr.shape[1], dtype=np.float64)

    cdef double[:, :, ::1] xv = x_arr
    cdef double[:, ::1] yv = y_arr
    cdef double[:, ::1] beta = beta_arr
    cdef double[:, ::1] best = best_arr
    cdef double[:, ::1] grad = grad_arr
    cdef double[::1] resid = resid_arr

    cdef double inv_c = 1.0 / x_arr.shape[1]
    cdef Py_ssize_t dim = beta_arr.shape[0]
    cdef Py_ssize_t q = beta_arr.shape[1]
    cdef Py_ssize_t d, j
    cdef long t, iters
    cdef double f, f_init, f_prev, f_best, eta
    cdef bint diverged = 0

    with nogil:
        f = _objective_and_grad(xv, yv, beta, lam, inv_c, grad, resid)
        f_init = f
        f_prev = f
        f_best = f
        iters = 0
        for t in range(1, max_iters + 1):
            iters = t
            eta = eta0 / sqrt(<double> t)
            for d in range(dim):
                for j in range(q):
                    beta[d, j] -= eta * grad[d, j]
            f = _objective_and_grad(xv, yv, beta, lam, inv_c, grad, resid)
            if f < f_best:
                f_best = f
                for d in range(dim):
                    for j in range(q):
                        best[d, j] = beta[d, j]
            if f_init > 0.0 and f > divergence_factor * f_init:
                diverged = 1
                break
            if fabs(f - f_prev) < tolerance:
                break
            f_prev = f

    return best_arr, f_best, iters, bool(diverged)
