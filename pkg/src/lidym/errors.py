"""Exception taxonomy shared across the package.

Contract violations (bad shapes, invalid argument combinations, malformed
requests) raise :class:`ContractError`; values outside a routine's numeric
domain raise :class:`InputDomainError`.  Both map to exit code 1 in the CLI.
File parsing and other I/O problems raise :class:`FileFormatError` (exit
code 2).
"""


class LidymError(Exception):
    """Base class for package errors."""


class ContractError(LidymError, ValueError):
    """An argument combination or shape violates a documented contract."""


class InputDomainError(LidymError, ValueError):
    """A numeric input is outside the routine's domain (NaN, inf, empty...)."""


class InfeasibilityError(LidymError, RuntimeError):
    """A sampling or optimization routine exhausted its budget."""


class TrainingFault(LidymError, RuntimeError):
    """Training produced a non-finite loss or gradient."""


class FileFormatError(LidymError, ValueError):
    """A data file does not conform to its documented format."""
