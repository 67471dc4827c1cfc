"""Exception hierarchy shared across the package."""


class SmallCNNError(Exception):
    """Base class for all package errors."""


class ShapeError(SmallCNNError, ValueError):
    """Array shapes are incompatible with an operation."""


class ConfigError(SmallCNNError, ValueError):
    """A hyperparameter or option is outside its valid range."""


class ConsistencyError(SmallCNNError, ValueError):
    """Two related structures (params/grads, predictions/labels) disagree."""


class InputError(SmallCNNError, ValueError):
    """A dataset or other input is empty or otherwise unusable."""


class DecodeError(SmallCNNError, ValueError):
    """An image byte stream could not be decoded."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class ManifestError(SmallCNNError, ValueError):
    """One or more manifest lines could not be loaded.

    ``errors`` holds ``(line_number, message)`` pairs, 1-based.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        lines = "; ".join(f"line {n}: {msg}" for n, msg in self.errors)
        super().__init__(f"manifest has {len(self.errors)} bad line(s): {lines}")


class CheckpointError(SmallCNNError, ValueError):
    """A checkpoint file is malformed. ``field`` names the offending part."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"checkpoint {field}: {message}")


class UnsupportedVersionError(CheckpointError):
    def __init__(self, version, supported):
        self.version = version
        super().__init__("version", f"unsupported version {version} (supported: {supported})")
