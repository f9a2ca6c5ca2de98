"""Exception hierarchy shared by all modules.

Every error raised on purpose by the toolkit derives from ``QspertError`` so
the CLI can map it to exit status 1 in one place.
"""


class QspertError(Exception):
    pass


class DomainError(QspertError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class CapacityError(QspertError):
    """A construction would exceed a configured size cap."""


class ContractError(QspertError, ValueError):
    """Inputs violate a documented precondition."""


class DegeneracyError(QspertError):
    """Ground state is (numerically) degenerate."""


class InfeasibleBudgetError(QspertError):
    """Error budget leaves no room for the filter window (delta0 >= gap)."""


class ConsistencyError(QspertError):
    """Internal cross-check failed (e.g. imaginary residue after mapping)."""


class ParseError(QspertError, ValueError):
    pass
