"""Exception types shared across the package.

File-system failures (missing files, unwritable paths) use the builtin
``FileNotFoundError`` / ``OSError``; everything content- or contract-level
lives here.
"""


class StyleForgeError(Exception):
    """Base class for all package-specific errors."""


class DecodeError(StyleForgeError):
    """Image file is malformed or uses an unsupported pixel format."""


class FormatError(StyleForgeError):
    """Tensor, annotation, or snapshot file violates the expected format."""


class ShapeMismatch(StyleForgeError):
    """Array arguments disagree on shape or channel count."""


class EmptyRegion(StyleForgeError):
    """A region selects zero cells."""


class InvalidConfig(StyleForgeError):
    """A configuration value violates an invariant."""
