"""Shared exception types.

The CLI maps these onto exit codes: configuration problems exit with 2,
numerical failures with 3.
"""


class ParameterError(ValueError):
    """A caller-supplied parameter is outside its admissible range."""


class ConfigError(ValueError):
    """A config file failed validation; message carries key paths."""


class NumericalError(RuntimeError):
    """A numerical procedure failed to converge or produced garbage."""


class KernelError(ParameterError):
    """Kernel evaluated where it is undefined, or spec is inadmissible."""


class KernelDegenerateError(NumericalError):
    """No window with the kernel bounded below could be found."""


class InvalidPotentialError(ParameterError):
    """Potential violates the double-well growth requirements."""
