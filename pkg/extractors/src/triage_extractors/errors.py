"""Error taxonomy mapped to command-line exit codes.

UsageError -> exit 1 (bad flags, missing files, invalid parameters),
CorpusError -> exit 2 (corpus file does not parse or validate),
EncoderError -> exit 3 (encoder failed to load or run).
Verification findings are reported, not raised; `verify` exits 2 when any
finding is present.
"""


class ExtractorError(Exception):
    """Base class for this package's failures."""


class UsageError(ExtractorError):
    """Bad invocation: unusable flags, parameters, or missing input files."""


class CorpusError(ExtractorError):
    """The corpus file is malformed; the message carries file:line."""


class EncoderError(ExtractorError):
    """A sentence encoder could not be loaded or returned unusable output."""
