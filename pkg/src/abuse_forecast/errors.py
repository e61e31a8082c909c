"""Exception types shared across the package.

Every error raised by library code derives from AbuseForecastError so
callers (and the CLI) can catch one base class and map it to an exit
code or an HTTP status.
"""
from __future__ import annotations


class AbuseForecastError(Exception):
    """Base class for all package-specific errors."""


class ParseError(AbuseForecastError):
    """Malformed input that could not be decoded at all."""


class SchemaError(AbuseForecastError):
    """Structurally decoded input that violates the expected shape."""


class ConfigError(AbuseForecastError):
    """Invalid configuration value."""


class UnlabeledError(AbuseForecastError):
    """An operation needed labels that have not been assigned yet."""


class EmptyCorpusError(AbuseForecastError):
    """A corpus with zero conversations where at least one is required."""


class EmptyTextError(AbuseForecastError):
    """A token stream with no tokens where content is required."""


class EmptyLexiconError(AbuseForecastError):
    """A lexicon that ended up with zero usable entries."""


class MissingVocabError(AbuseForecastError):
    """A bag-of-words vector was requested without a fitted vocabulary."""


class InsufficientDataError(AbuseForecastError):
    """Too few rows to fit the requested statistic."""


class TooFewMinorityError(AbuseForecastError):
    """Minority class too small for the requested neighbour count."""


class WidthMismatchError(AbuseForecastError):
    """Two matrices or vectors disagree on feature width."""


class EmptyDataError(AbuseForecastError):
    """An empty matrix or target vector where rows are required."""


class LengthMismatchError(AbuseForecastError):
    """Paired sequences of unequal length."""


class ZeroVarianceError(AbuseForecastError):
    """A statistic that is undefined when its input has no variance."""


class TooSmallError(AbuseForecastError):
    """Not enough rows for the requested fold count."""


class TooWideError(AbuseForecastError):
    """Feature width above the supported bound for an exact method."""


class DegenerateError(AbuseForecastError):
    """A fit collapsed into a degenerate state that cannot proceed."""


class ManifestMismatchError(AbuseForecastError):
    """A model artifact whose recorded manifest digest does not match."""


class StageMismatchError(AbuseForecastError):
    """A model trained at the wrong stage for the requested operation."""
