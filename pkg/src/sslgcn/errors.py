"""Exception types shared across the package."""


class SslGcnError(Exception):
    """Base class for all package errors."""


class ShapeError(SslGcnError, ValueError):
    """Operands have incompatible shapes; message reports both."""


class ConfigError(SslGcnError, ValueError):
    """A configuration value is out of range or inconsistent."""


class UsageError(SslGcnError, ValueError):
    """An operation was called in a way its contract forbids."""


class DataFormatError(SslGcnError, ValueError):
    """A dataset file is malformed; carries file name and line number."""

    def __init__(self, path, lineno, message):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = str(path)
        self.lineno = lineno


class DatasetValidationError(SslGcnError, ValueError):
    """Loaded dataset contradicts its declared metadata."""


class ResourceLimitError(SslGcnError, RuntimeError):
    """An operation would exceed a configured size cap."""


class DegenerateInputError(SslGcnError, ValueError):
    """Input is so trivial the requested quantity is undefined."""


class TransferError(SslGcnError, ValueError):
    """Weight transfer failed; the target model is unmodified."""


class DivergenceError(SslGcnError, RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch, message="non-finite loss"):
        super().__init__(f"{message} at epoch {epoch}")
        self.epoch = epoch
