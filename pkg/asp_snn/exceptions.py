class AspSnnError(Exception):
    """Base class for all errors raised by asp_snn."""
    pass

class ConfigurationError(AspSnnError):
    """Exception raised when a configuration value, key or dimension is invalid."""
    pass

class DimensionMismatchError(ConfigurationError):
    """Exception raised when stored weights do not match the configured network size."""
    pass

class NumericalFaultError(AspSnnError):
    """Exception raised when the simulation produces a non-finite state."""
    pass

class IdxFormatError(AspSnnError):
    """Exception raised when an IDX file is malformed."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset

class InsufficientDataError(AspSnnError):
    """Exception raised when a schedule asks for more images than a class has."""
    pass

class SnapshotFormatError(AspSnnError):
    """Exception raised when a weight snapshot file cannot be decoded."""
    pass

class DatasetDownloadError(AspSnnError):
    """Exception raised when a dataset file fails to download."""
    pass
