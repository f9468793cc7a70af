"""Exception types shared across the library."""


class WavekitError(Exception):
    """Base class for library-specific failures."""


class ZeroDistanceError(WavekitError):
    """A propagation distance collapsed below the 1 nm guard."""


class EmptySupportError(WavekitError):
    """Wavenumber enumeration produced no admissible index."""


class ShapeMismatchError(WavekitError):
    """Matrix operands have incompatible shapes."""


class NonFiniteError(WavekitError):
    """An input contains NaN or infinite entries."""


class RfChainLimitError(WavekitError):
    """Requested stream count exceeds the configured RF chains."""


class IndexOutOfRangeError(WavekitError, IndexError):
    """A stream pair points outside the harmonic channel matrix."""


class ConfigError(WavekitError):
    """Experiment config is malformed; message carries the field path."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
