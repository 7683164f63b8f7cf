"""Exception types shared across the package."""


class WeedoutError(Exception):
    """Base class for all package-specific errors."""


class ShapeMismatchError(WeedoutError, ValueError):
    """Tensor shapes do not agree for the requested operation."""


class SpecValidationError(WeedoutError, ValueError):
    """A layer stack is dimensionally inconsistent or otherwise malformed."""


class MaskMismatchError(WeedoutError, ValueError):
    """A mask set is not congruent with the network it is applied to."""


class InfeasibleSparsityError(WeedoutError, ValueError):
    """The requested sparsity ratio would deactivate an entire layer."""


class UnsupportedModeError(WeedoutError, ValueError):
    """The operation does not support this mask mode."""


class EvaluationIncompleteError(WeedoutError, RuntimeError):
    """Selection was requested before every candidate had a fitness value."""


class DivergenceError(WeedoutError, RuntimeError):
    """Training produced a non-finite loss; the run is aborted."""


class FormatError(WeedoutError, ValueError):
    """A binary file does not match its expected on-disk format."""


class ChecksumError(WeedoutError, RuntimeError):
    """Stored data does not match its recorded checksum or derivation."""


class ConfigError(WeedoutError, ValueError):
    """An experiment config failed validation.

    ``problems`` lists one human-readable message per offending field.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
