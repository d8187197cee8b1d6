"""Exception types raised across the package."""


class InteracteeError(Exception):
    """Base class for all package errors."""


class TooFewDistinctPoints(InteracteeError, ValueError):
    pass


class TooFewExamples(InteracteeError, ValueError):
    pass


class DuplicateBlockName(InteracteeError, ValueError):
    pass


class LayoutMismatch(InteracteeError, ValueError):
    pass


class DimensionMismatch(InteracteeError, ValueError):
    pass


class EmptyInput(InteracteeError, ValueError):
    pass


class TargetLargerThanSource(InteracteeError, ValueError):
    pass


class NonFiniteLoss(InteracteeError, FloatingPointError):
    """Training produced a NaN/inf loss.

    ``iteration`` and ``batch_indices`` locate the offending minibatch.
    """

    def __init__(self, iteration, batch_indices):
        self.iteration = iteration
        self.batch_indices = list(batch_indices)
        super().__init__(
            f"non-finite loss at iteration {iteration} "
            f"(batch indices {self.batch_indices[:10]}"
            f"{'...' if len(self.batch_indices) > 10 else ''})"
        )


class ParseError(InteracteeError, ValueError):
    pass


class ValidationError(InteracteeError, ValueError):
    """Invariant breach in an input file; ``path`` is a JSON-path locator."""

    def __init__(self, message, path="$"):
        self.path = path
        super().__init__(f"{path}: {message}")
