"""Exception hierarchy.

CLI exit-code mapping: ConfigError -> 1, DataError and its subclasses -> 2,
anything else under TriageKitError -> 3.
"""


class TriageKitError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(TriageKitError):
    """Invalid or incomplete run configuration (bad flag, missing file path)."""


class DataError(TriageKitError):
    """Malformed or inconsistent input data."""


class CorpusFormatError(DataError):
    """Corpus or label-map file violates the documented format."""


class UnknownLabelError(DataError):
    """A label string is not a known coarse class or granular tag."""


class EmbeddingFormatError(DataError):
    """Embedding file violates the documented format or corpus alignment."""


class LexiconFormatError(DataError):
    """Lexicon file violates the documented format."""


class FeatureMismatchError(TriageKitError):
    """Feature table columns do not match what a fitted pipeline was trained on."""


class ModelFormatError(TriageKitError):
    """Model file is corrupted, truncated, or has an unsupported version."""


class SearchBudgetError(TriageKitError):
    """Pipeline search budget exhausted before a single full evaluation.

    Carries the partial evaluation log in ``records``.
    """

    def __init__(self, message, records=()):
        super().__init__(message)
        self.records = list(records)
