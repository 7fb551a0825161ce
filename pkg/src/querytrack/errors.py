"""Exception hierarchy shared across the package.

Every error carries a short machine-parsable category used by the CLI to
produce one-line diagnostics and a stable exit code.
"""


class QueryTrackError(Exception):
    category = "internal"


class ShapeError(QueryTrackError):
    """Operands have incompatible dimensions."""

    category = "shape"


class ConfigError(QueryTrackError):
    """Invalid configuration file, key, or value combination."""

    category = "config"


class ContractError(QueryTrackError):
    """A documented precondition of an operation was violated."""

    category = "contract"


class InvariantError(QueryTrackError):
    """Internal state broke a stated invariant (e.g. query-window length)."""

    category = "invariant"


class NumericError(QueryTrackError):
    """Non-finite values where finite ones are required (e.g. training loss)."""

    category = "numeric"
