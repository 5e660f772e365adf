"""Binding-boundary errors."""


class ViewError(Exception):
    """Buffer does not match the declared dtype, shape, or layout."""


class SessionClosed(Exception):
    """Operation on a session that has already been closed."""
