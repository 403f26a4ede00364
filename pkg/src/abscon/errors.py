"""Exception types shared across the package."""


class AbsconError(Exception):
    """Base class for all package errors."""


class UnknownNode(AbsconError):
    """An edge endpoint does not reference an existing node."""


class DuplicateEdge(AbsconError):
    """An edge with the same (source, target, normalized label) already exists."""


class ModelSyntaxError(AbsconError):
    """Candidate text cannot be parsed; the candidate must be dropped."""

    def __init__(self, message: str, line: int = 0):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line
        self.message = message


class IncompatibleNotation(AbsconError):
    """Graph cannot be represented in the requested notation."""


class ProviderFailure(AbsconError):
    """An embedding provider failed to produce vectors."""


class TooLarge(AbsconError):
    """Input exceeds the size bound of an exhaustive oracle."""


class UnknownDomain(AbsconError):
    """Domain name is not one of flowchart, taxonomy, clevr."""


class InfeasibleModel(AbsconError):
    """No combination of candidate elements yields a constraint-consistent graph."""


class EndpointError(AbsconError):
    """All completion requests to the LLM endpoint failed."""


class EmptyPool(AbsconError):
    """No parsable candidate is available."""


class IoError(AbsconError):
    """File or directory level failure in candidate/dataset handling."""
