"""Exception hierarchy shared across the package."""


class GlassForgeError(Exception):
    """Base class for all package errors."""


class ValidationError(GlassForgeError):
    """Invalid argument or configuration value."""


class ImageFormatError(GlassForgeError):
    """Unreadable or unsupported image file."""


class CoverageError(GlassForgeError):
    """Scene geometry cannot cover the required frusta, or too many rays miss."""
