"""Exception hierarchy shared by all modules."""


class PhysarumError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(PhysarumError, ValueError):
    """Invalid numeric or structural configuration."""


class ScenarioError(PhysarumError, ValueError):
    """A scenario entity (source, seed, body) is placed or referenced illegally."""


class QueryError(PhysarumError, ValueError):
    """A field or geometry query outside its domain."""


class TortuosityError(PhysarumError, ValueError):
    """Tortuosity requested for a tube whose endpoints coincide."""


class GraphStoreError(PhysarumError):
    """A storage-graph operation was rejected; the graph is left unchanged."""


class ValidationError(ConfigurationError):
    """Scenario file failed schema validation.

    ``field`` is the dotted path of the offending key and ``constraint``
    the rule it broke.
    """

    def __init__(self, field: str, constraint: str):
        self.field = field
        self.constraint = constraint
        super().__init__(f"{field}: {constraint}")


class ParseError(ConfigurationError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{where}")


class InputError(PhysarumError):
    """An input file could not be read."""
