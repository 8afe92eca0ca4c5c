"""Exception hierarchy. Each error kind carries its own process exit code."""

from __future__ import annotations


class KGlueError(Exception):
    exit_code = 10


class StructuralError(KGlueError):
    """The input data is malformed or incomplete."""

    exit_code = 3


class DomainError(KGlueError):
    """A point lies outside the domain where an operation is defined."""

    exit_code = 4


class MembershipRejection(DomainError):
    """A candidate point of a thickened space fails one or more defining conditions."""

    def __init__(self, conditions: list[str]):
        self.conditions = list(conditions)
        super().__init__("rejected: " + "; ".join(self.conditions))


class EvaluationError(KGlueError):
    """A user-supplied function raised or returned non-finite values."""

    exit_code = 5


class PreconditionError(KGlueError):
    """A stage was invoked with inputs that violate its preconditions."""

    exit_code = 6


class CoverError(PreconditionError):
    """A shrinking no longer covers the zero set."""

    exit_code = 7

    def __init__(self, message: str, uncovered=None):
        self.uncovered = [] if uncovered is None else list(uncovered)
        super().__init__(message)


class InfeasibleError(PreconditionError):
    """No admissible constant system exists for the given product structures."""

    exit_code = 8


class CollarOverflowError(DomainError):
    """A collar step would leave its width budget; the constants must shrink."""

    exit_code = 9


class TransversalityError(KGlueError):
    """A located zero has a near-singular Jacobian."""

    exit_code = 11


class ConfigError(KGlueError):
    exit_code = 2
