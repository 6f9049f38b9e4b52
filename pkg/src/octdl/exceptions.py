"""Exception hierarchy.

Validation problems (bad shapes, bad files, impossible parameters) derive from
:class:`ValidationError`; numerical breakdowns derive from
:class:`NumericalError`. The CLI maps the two families to exit codes 2 and 3.
"""


class OctDLError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(OctDLError, ValueError):
    exit_code = 2


class NumericalError(OctDLError, ArithmeticError):
    exit_code = 3


class DegenerateInputError(ValidationError):
    """Input carries no information (e.g. zero-variance image)."""


class InvalidInputError(ValidationError):
    """Non-finite values or otherwise malformed numeric input."""


class ShapeMismatchError(ValidationError):
    pass


class TooSmallError(ValidationError):
    """Image too small for the requested pyramid / HOG geometry."""


class OutOfBoundsError(ValidationError):
    def __init__(self, dimension, message):
        super().__init__(message)
        self.dimension = dimension


class InsufficientSupportError(ValidationError):
    """Not enough points to fit the requested polynomial."""


class InsufficientDataError(ValidationError):
    """Not enough samples to initialise the requested dictionary."""


class WrongAlgorithmError(ValidationError):
    pass


class ManifestError(ValidationError):
    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class UnknownClassError(ManifestError):
    pass


class DuplicateVolumeError(ManifestError):
    pass


class MissingDirectoryError(ManifestError):
    pass


class FormatError(ValidationError):
    """Unreadable feature / model file."""


class StageError(OctDLError):
    """A pipeline stage failed; wraps the original error with its location."""

    def __init__(self, stage, where, cause):
        super().__init__(f"stage {stage!r} failed at {where}: {cause}")
        self.stage = stage
        self.where = where
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 1)


class NonConvergenceError(NumericalError):
    def __init__(self, iterations, message=None):
        super().__init__(message or f"EM stopped improving the likelihood (iteration {iterations})")
        self.iterations = iterations
