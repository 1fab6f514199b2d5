"""Exception types shared across the package."""


class CausimputeError(Exception):
    """Base class for all domain errors raised by this package."""


class EmptyDonorSet(CausimputeError):
    """No observed partner exists for the requested target."""


class EmptyTrainingSet(CausimputeError):
    """The donor/target observation intersection is empty."""


class InfeasibleK(CausimputeError):
    """Even the best single donor leaves fewer than k training columns."""


class MissingControl(CausimputeError):
    """The control row is unobserved at the target column, or shares no
    observed column with the target row."""


class NumericalFailure(CausimputeError):
    """A matrix decomposition failed to converge."""


class DivergenceDetected(CausimputeError):
    """The solver objective exceeded 10^6 times its initial value."""


class InfeasibleMask(CausimputeError):
    """Row/column coverage could not be achieved within the redraw budget."""


class DegenerateTruth(CausimputeError):
    """The ground-truth vector has zero standard deviation."""


class AllZeroDifferences(CausimputeError):
    """Every paired difference is exactly zero."""


class ParseError(CausimputeError):
    """A dataset file is malformed."""


class DuplicatePair(CausimputeError):
    """The same (a, b) pair appears twice in a dataset."""
