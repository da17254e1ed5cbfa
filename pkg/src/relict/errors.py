"""Exception hierarchy shared by every relict module."""


class RelictError(Exception):
    """Base class for all library errors."""


class InvalidURI(RelictError, ValueError):
    pass


class TransientError(RelictError):
    """A remote call failed in a way that may succeed on retry.

    ``context`` names what was being fetched (a term batch, a query, a URI)
    so callers can log or re-queue it.
    """

    def __init__(self, message: str, context=None):
        super().__init__(message)
        self.context = context


class FixtureMiss(RelictError, LookupError):
    """A replay/fixture backend has no recorded answer for a request."""


class CacheCorrupt(RelictError):
    pass
