"""Backend selection for the subgradient solver kernel.

The compiled Cython kernel is preferred; a pure-numpy twin is used when the
extension is unavailable.  Set CAUSIMPUTE_BACKEND=numpy (or =cython) to force
one explicitly — forcing cython without the built extension raises.

Both backends export:

    subgradient_descent(x, y, beta0, lam, eta0, max_iters, tolerance,
                        divergence_factor=1e6)
        -> (best_beta, best_objective, iterations, diverged)
    group_penalty(beta) -> float
    group_penalty_and_subgrad(beta) -> (float, array)
"""

from __future__ import annotations

import os

from causimpute._kernels import _subgrad_np

try:
    from causimpute._kernels import _subgrad_cy
except ImportError:
    _subgrad_cy = None


def available_backends() -> dict:
    """Mapping of backend name -> kernel module, for benchmarks and tests."""
    backends = {"numpy": _subgrad_np}
    if _subgrad_cy is not None:
        backends["cython"] = _subgrad_cy
    return backends


def _select():
    forced = os.environ.get("CAUSIMPUTE_BACKEND", "").strip().lower()
    if forced:
        try:
            return available_backends()[forced]
        except KeyError:
            raise ImportError(
                f"CAUSIMPUTE_BACKEND={forced!r} is not available; "
                f"choices: {sorted(available_backends())}"
            ) from None
    return _subgrad_cy if _subgrad_cy is not None else _subgrad_np


_impl = _select()

BACKEND = _impl.BACKEND_NAME
subgradient_descent = _impl.subgradient_descent
group_penalty = _impl.group_penalty
group_penalty_and_subgrad = _impl.group_penalty_and_subgrad
