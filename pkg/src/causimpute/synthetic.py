"""Latent factor generators used as the ground-truth oracle in tests and
benchmarks.

Two models over sets A (size n_a) and B (size n_b) with output dimension d
and latent rank r:

  single  m[i,j,d] = sum_r u[i,d,r] * v[j,r]      (one factor set per j)
  multi   m[i,j,d] = sum_r u[i,d,r] * v[j,d,r]    (per-dimension factors)

Factors are i.i.d. standard normal, noise is additive i.i.d. Gaussian, and
the mask is uniform at the requested fraction subject to every row and
column keeping at least one observed entry.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from causimpute.errors import InfeasibleMask
from causimpute.tensor import IncompleteTensor

MASK_REDRAW_LIMIT = 1000


class Model(enum.Enum):
    SINGLE_LATENT = "single"
    MULTI_LATENT = "multi"


@dataclass(frozen=True)
class SyntheticSpec:
    model: Model
    n_a: int
    n_b: int
    dim: int
    rank: int
    noise_std: float = 0.0
    missing_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if min(self.n_a, self.n_b, self.dim, self.rank) < 1:
            raise ValueError("counts, dim and rank must be >= 1")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        if not 0 <= self.missing_fraction < 1:
            raise ValueError("missing_fraction must be in [0, 1)")


@dataclass(frozen=True)
class SyntheticInstance:
    """Generated factors, the complete clean tensor, and its noisy masked
    observation.  Unobserved cells of the observed tensor hold NaN."""

    spec: SyntheticSpec
    u_factors: np.ndarray  # (n_a, dim, rank)
    v_factors: np.ndarray  # (n_b, dim, rank) multi; (n_b, rank) single
    clean: np.ndarray  # (n_a, n_b, dim)
    observed_tensor: IncompleteTensor


def _rng(seed) -> np.random.Generator:
    # counter-based generator: identical streams on every platform
    return np.random.Generator(np.random.Philox(seed))


def _draw_mask(rng, n_a, n_b, missing_fraction):
    n_masked = int(round(missing_fraction * n_a * n_b))
    if n_masked == 0:
        return np.ones((n_a, n_b), dtype=bool)
    for _ in range(MASK_REDRAW_LIMIT):
        flat = rng.choice(n_a * n_b, size=n_masked, replace=False)
        observed = np.ones(n_a * n_b, dtype=bool)
        observed[flat] = False
        observed = observed.reshape(n_a, n_b)
        if observed.any(axis=1).all() and observed.any(axis=0).all():
            return observed
    raise InfeasibleMask(
        f"could not cover every row and column at missing fraction "
        f"{missing_fraction} within {MASK_REDRAW_LIMIT} redraws"
    )


def generate(spec: SyntheticSpec) -> SyntheticInstance:
    """Draw factors, noise, and a coverage-respecting mask, all from one
    seeded stream; identical seeds give bitwise-identical instances."""
    rng = _rng(spec.seed)
    u = rng.standard_normal((spec.n_a, spec.dim, spec.rank))
    if spec.model is Model.MULTI_LATENT:
        v = rng.standard_normal((spec.n_b, spec.dim, spec.rank))
        v_full = v
    else:
        v = rng.standard_normal((spec.n_b, spec.rank))
        v_full = np.broadcast_to(v[:, None, :], (spec.n_b, spec.dim, spec.rank))
    clean = np.einsum("idr,jdr->ijd", u, v_full)
    noisy = clean
    if spec.noise_std > 0:
        noisy = clean + spec.noise_std * rng.standard_normal(clean.shape)
    observed = _draw_mask(rng, spec.n_a, spec.n_b, spec.missing_fraction)
    values = np.where(observed[:, :, None], noisy, np.nan)
    return SyntheticInstance(
        spec=spec,
        u_factors=u,
        v_factors=v,
        clean=clean,
        observed_tensor=IncompleteTensor(values, observed),
    )


def ground_truth(instance: SyntheticInstance, i: int, j: int) -> np.ndarray:
    """The clean (noise-free) entry for cell (i, j)."""
    if not 0 <= i < instance.spec.n_a or not 0 <= j < instance.spec.n_b:
        raise IndexError(f"cell ({i}, {j}) out of range")
    return instance.clean[i, j, :]
