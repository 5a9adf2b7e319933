"""Exception types raised across smartboost."""


class SmartBoostError(Exception):
    """Base class for all smartboost errors."""


class MalformedSpanError(SmartBoostError, ValueError):
    pass


class ShapeError(SmartBoostError, ValueError):
    """Array or score-table dimensions do not match what was expected."""


class InvalidGoldError(SmartBoostError, ValueError):
    """A gold assignment links two overlapping candidates."""


class OracleTooLargeError(SmartBoostError, ValueError):
    pass


class EmptyDataError(SmartBoostError, ValueError):
    pass


class MissingLexiconEntryError(SmartBoostError, KeyError):
    pass


class KeyingError(SmartBoostError, KeyError):
    """Predictions refer to a tweet id that the gold data does not know."""


class ConfigError(SmartBoostError, ValueError):
    pass


class ModelFormatError(SmartBoostError, ValueError):
    pass
