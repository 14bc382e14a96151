"""Exception hierarchy shared across the toolkit."""


class SoftTrajOptError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(SoftTrajOptError):
    """Invalid problem setup: dimension mismatches, bad parameters, bad configs."""


class InputError(SoftTrajOptError):
    """Non-finite or otherwise invalid numerical input."""


class NumericalError(SoftTrajOptError):
    """Hard numerical failure, e.g. a non-PD mass matrix."""


class IntegrationError(SoftTrajOptError):
    """An implicit step failed to converge."""

    def __init__(self, message, residual_norm=None, step_index=None):
        super().__init__(message)
        self.residual_norm = residual_norm
        self.step_index = step_index


class UnsupportedOperationError(SoftTrajOptError):
    """A capability (e.g. second-order dynamics derivatives) is not available."""
