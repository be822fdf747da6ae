"""Exception taxonomy shared across the package.

The CLI maps these onto distinct exit codes: configuration problems (2),
bad or missing input data (3), and failures inside a running pipeline (4).
"""


class PixadaptError(Exception):
    """Base class for all package errors."""


class ConfigError(PixadaptError):
    """Invalid, missing, or out-of-range configuration."""


class DataError(PixadaptError):
    """Invalid input data: files, masks, feature maps, sampled sets."""


class PipelineError(PixadaptError):
    """A pipeline stage failed; the message names the stage."""


class FormatError(DataError):
    """A binary artifact file violates its on-disk format."""


class BadMagicError(FormatError):
    """File does not start with the expected magic bytes."""


class TruncatedPayloadError(FormatError):
    """Payload shorter (or longer) than the header declares."""


class NonFiniteValueError(FormatError):
    """Feature payload contains NaN or Inf components."""


class LabelRangeError(FormatError):
    """Mask payload contains a label above the declared label count."""
