from .convert import ConversionError, convert, read_bundle, verify

__version__ = "0.1.0"
