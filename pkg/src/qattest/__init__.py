"""Statevector simulation of quantum-assisted remote memory attestation."""
from .errors import DecodeError, ProtocolError, ResourceError

__version__ = "0.1.0"
__all__ = ["DecodeError", "ProtocolError", "ResourceError", "__version__"]
