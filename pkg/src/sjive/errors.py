"""Exception types shared across the package."""


class SJiveError(Exception):
    """Base class for all errors raised by this package."""


class InputError(SJiveError):
    """Numeric input contains NaN/Inf or is otherwise unusable."""


class ShapeError(SJiveError):
    """Matrix or vector dimensions do not conform."""


class RankError(SJiveError):
    """A requested rank is outside its feasible range."""


class ParseError(SJiveError):
    """Malformed CSV input; the message names the offending cell or id."""


class DegeneracyError(SJiveError):
    """Degenerate numeric situation: zero variance, rank deficiency, or
    a quantity that the requested operation cannot be computed from."""


class ConfigError(SJiveError):
    """Invalid configuration values."""
