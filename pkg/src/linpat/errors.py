"""Exception hierarchy shared by all modules and mapped to CLI exit codes."""


class LinpatError(Exception):
    exit_code = 1


class ValidationError(LinpatError, ValueError):
    """Input violates a documented precondition."""

    exit_code = 1


class BudgetError(LinpatError, RuntimeError):
    """An enumeration or step budget would be exceeded."""

    exit_code = 2


class CertificationError(LinpatError, RuntimeError):
    """A runtime certificate (postcondition re-evaluation) failed."""

    exit_code = 3
