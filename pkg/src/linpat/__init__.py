"""Executable number theory for linear patterns: exact linear-system analysis,
GPY sieve weights, Fourier and Bohr-set machinery over prime cyclic groups,
and the density-increment and transference pipelines."""

from .errors import BudgetError, CertificationError, LinpatError, ValidationError

__all__ = ["BudgetError", "CertificationError", "IntMatrix", "LinearSystem", "LinpatError",
           "ValidationError"]
__version__ = "0.1.0"


def __getattr__(name):
    # numpy is imported lazily so the CLI can cap BLAS threads before it loads
    if name in ("IntMatrix", "LinearSystem"):
        from . import linsys
        return getattr(linsys, name)
    raise AttributeError(f"module 'linpat' has no attribute {name!r}")
