"""Incomplete interaction tensor, donor sets, and regression slice assembly.

The data model is an n_a x n_b x dim value array plus an n_a x n_b boolean
observation mask.  All operations are pure functions of immutable inputs;
values at unobserved positions are never read.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from causimpute.errors import EmptyDonorSet, EmptyTrainingSet, InfeasibleK


class Direction(enum.Enum):
    """Which axis supplies the donors for a regression."""

    OVER_A = "over_a"
    OVER_B = "over_b"


@dataclass(frozen=True)
class IncompleteTensor:
    """Dense value store with an explicit observation mask.

    Parameters
    ----------
    values : array, shape (n_a, n_b, dim)
        Interaction outputs.  Entries at unobserved positions may hold
        anything (including NaN); no operation reads them.
    observed : bool array, shape (n_a, n_b)
        True where the interaction is available.
    """

    values: np.ndarray
    observed: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        observed = np.asarray(self.observed, dtype=bool)
        if values.ndim != 3:
            raise ValueError(f"values must be 3-d, got shape {values.shape}")
        if observed.shape != values.shape[:2]:
            raise ValueError(
                f"mask shape {observed.shape} does not match "
                f"values shape {values.shape[:2]}"
            )
        if observed.any() and not np.isfinite(values[observed]).all():
            raise ValueError("values at observed positions must be finite")
        values.flags.writeable = False
        observed.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "observed", observed)

    @property
    def n_a(self) -> int:
        return self.values.shape[0]

    @property
    def n_b(self) -> int:
        return self.values.shape[1]

    @property
    def dim(self) -> int:
        return self.values.shape[2]

    def swap_axes(self) -> "IncompleteTensor":
        """The same tensor with the A and B axes exchanged."""
        return IncompleteTensor(self.values.transpose(1, 0, 2), self.observed.T)

    def with_masked_cell(self, a_index: int, b_index: int) -> "IncompleteTensor":
        """Copy of this tensor with one cell marked unobserved.

        The value array is shared; only the mask is copied.
        """
        mask = self.observed.copy()
        mask[a_index, b_index] = False
        return IncompleteTensor(self.values, mask)


@dataclass(frozen=True)
class TargetQuery:
    """A cell to impute, plus the regression direction."""

    a_index: int
    b_index: int
    direction: Direction = Direction.OVER_A

    def validate(self, tensor: IncompleteTensor) -> None:
        if not 0 <= self.a_index < tensor.n_a:
            raise IndexError(f"a_index {self.a_index} out of range")
        if not 0 <= self.b_index < tensor.n_b:
            raise IndexError(f"b_index {self.b_index} out of range")


@dataclass(frozen=True)
class DonorSelection:
    """Donor indices plus the training columns they share with the target."""

    donors: tuple
    training_columns: tuple


@dataclass(frozen=True)
class RegressionProblem:
    """Assembled slices for one target cell.

    x_train[c, k, :] is the entry for (donors[k], training_columns[c]),
    y_train[c, :] the target row's entry at training_columns[c], and
    x_test[k, :] the donors' entries at the target column.
    """

    x_train: np.ndarray  # (n_columns, n_donors, dim)
    y_train: np.ndarray  # (n_columns, dim)
    x_test: np.ndarray  # (n_donors, dim)

    @property
    def n_training_columns(self) -> int:
        return self.x_train.shape[0]

    @property
    def n_donors(self) -> int:
        return self.x_train.shape[1]

    @property
    def dim(self) -> int:
        return self.x_train.shape[2]


def _canonical(tensor: IncompleteTensor, target: TargetQuery):
    """Reduce OVER_B to OVER_A on the axis-swapped tensor.

    Mirror symmetry then holds entry for entry by construction.
    """
    if target.direction is Direction.OVER_B:
        return tensor.swap_axes(), target.b_index, target.a_index
    return tensor, target.a_index, target.b_index


def donor_set(tensor: IncompleteTensor, target: TargetQuery) -> list:
    """All indices observed at the target's column (mirrored for OVER_B),
    excluding the target's own index, in ascending order."""
    target.validate(tensor)
    t, i, j = _canonical(tensor, target)
    donors = np.flatnonzero(t.observed[:, j])
    donors = donors[donors != i]
    if donors.size == 0:
        raise EmptyDonorSet(
            f"no donors for target ({target.a_index}, {target.b_index}) "
            f"with direction {target.direction.value}"
        )
    return donors.tolist()


def training_columns(
    tensor: IncompleteTensor, target: TargetQuery, donors
) -> list:
    """Columns observed for every donor and for the target, ascending.

    The target column is excluded.
    """
    if len(donors) == 0:
        raise ValueError("donors must be non-empty")
    target.validate(tensor)
    t, i, j = _canonical(tensor, target)
    shared = t.observed[i].copy()
    shared[j] = False
    for k in donors:
        shared &= t.observed[k]
    cols = np.flatnonzero(shared)
    if cols.size == 0:
        raise EmptyTrainingSet(
            f"donor/target observation intersection is empty for target "
            f"({target.a_index}, {target.b_index})"
        )
    return cols.tolist()


def greedy_donor_selection(
    tensor: IncompleteTensor, target: TargetQuery, k: int
) -> DonorSelection:
    """Add donors by descending row-observation count while at least k
    shared training columns remain.

    Candidates are ranked by their total observed count (ties by ascending
    index) and added one at a time; the walk stops immediately before the
    first addition that would leave fewer than k columns.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    candidates = np.asarray(donor_set(tensor, target))
    t, i, j = _canonical(tensor, target)
    counts = t.observed[candidates].sum(axis=1)
    order = np.lexsort((candidates, -counts))
    candidates = candidates[order]

    shared = t.observed[i].copy()
    shared[j] = False
    donors = []
    for cand in candidates:
        new_shared = shared & t.observed[cand]
        if int(new_shared.sum()) < k:
            break
        donors.append(int(cand))
        shared = new_shared
    if not donors:
        raise InfeasibleK(
            f"best donor leaves fewer than k={k} training columns for "
            f"target ({target.a_index}, {target.b_index})"
        )
    return DonorSelection(
        donors=tuple(donors),
        training_columns=tuple(np.flatnonzero(shared).tolist()),
    )


def assemble_problem(
    tensor: IncompleteTensor, target: TargetQuery, selection: DonorSelection
) -> RegressionProblem:
    """Slice the tensor into x_train / y_train / x_test for one target."""
    target.validate(tensor)
    t, i, j = _canonical(tensor, target)
    donors = np.asarray(selection.donors, dtype=np.intp)
    cols = np.asarray(selection.training_columns, dtype=np.intp)
    if donors.size == 0 or cols.size == 0:
        raise ValueError("selection must contain donors and training columns")
    if j in selection.training_columns:
        raise ValueError("target column may not appear in training columns")
    if not t.observed[np.ix_(donors, cols)].all():
        raise ValueError("every (donor, training column) pair must be observed")
    if not t.observed[i, cols].all():
        raise ValueError("every (target, training column) pair must be observed")
    if not t.observed[donors, j].all():
        raise ValueError("every donor must be observed at the target column")

    x_train = np.ascontiguousarray(t.values[np.ix_(donors, cols)].transpose(1, 0, 2))
    y_train = np.ascontiguousarray(t.values[i, cols, :])
    x_test = np.ascontiguousarray(t.values[donors, j, :])
    return RegressionProblem(x_train=x_train, y_train=y_train, x_test=x_test)
