"""Exception types shared across the package."""


class ProtocolError(RuntimeError):
    """A protocol step was invoked out of order (reused Bell pair, missing send, ...)."""


class ResourceError(RuntimeError):
    """A finite quantum resource ran out: state copies, Bell pairs."""


class DecodeError(ValueError):
    """Tomographic decoding produced values that are not bits."""
