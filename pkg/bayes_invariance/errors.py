"""Exception hierarchy shared by the library, the CLI and the MCP tools.

Every error carries the process exit code the CLI reports for it:
0 success, 2 configuration or input data, 3 I/O, 4 support too large,
5 numerical failure.
"""
from typing import Optional

import numpy as np


class BIPError(Exception):
    """Base class for all errors raised by bayes_invariance."""

    exit_code = 1


class ConfigError(BIPError):
    """Invalid or incomplete run configuration."""

    exit_code = 2


class ConfigInvalid(ConfigError):
    """Simulation configuration violates its invariants."""


class UnknownExample(ConfigError):
    """Requested uncertainty-quantification example does not exist."""


class DatasetError(BIPError):
    """Dataset failed validation."""

    exit_code = 2


class ShapeMismatch(DatasetError):
    pass


class NonFiniteValue(DatasetError):
    pass


class EmptyEnvironment(DatasetError):
    pass


class DimensionMismatch(BIPError):
    """A selector or vector does not match the feature count it is used with."""

    exit_code = 2


class PriorNotUniform(BIPError):
    """Closed-form KL gradient requested for a prior that is not uniform on its support."""

    exit_code = 2


class TruthOutsideSupport(BIPError):
    exit_code = 2


class NonPositiveVariance(BIPError):
    exit_code = 2


class DataIOError(BIPError):
    """Reading or writing a run artefact failed."""

    exit_code = 3


class SupportTooLarge(BIPError):
    """Prior support is too large to enumerate."""

    exit_code = 4


class NumericalError(BIPError):
    exit_code = 5


class SingularCovariance(NumericalError):
    pass


class NonFiniteGradient(NumericalError):
    """VI produced a NaN/Inf gradient; carries the last finite parameters."""

    def __init__(self, message: str, last_good_phi: Optional[np.ndarray] = None, step: int = 0):
        super().__init__(message)
        self.last_good_phi = last_good_phi
        self.step = step
