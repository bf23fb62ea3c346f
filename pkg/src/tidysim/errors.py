"""Exception hierarchy shared by all tidysim modules."""


class TidysimError(Exception):
    """Base class for all errors raised by tidysim."""


class GridError(TidysimError):
    """Invalid factor/grid definition or grid operation."""


class SchemaError(TidysimError):
    """Table on disk or in memory does not match the expected schema."""


class StudyError(TidysimError):
    """A study's generate/analyze contract was violated or misused."""


class RunError(TidysimError):
    """Invalid run configuration or unusable checkpoint."""


class AggregateError(TidysimError):
    """Aggregation asked for columns or groups that do not exist."""


class PlotError(TidysimError):
    """Plot specification does not match the aggregate table."""


class ConfigError(TidysimError):
    """Malformed or inconsistent TOML study configuration."""
