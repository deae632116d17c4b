"""CRL-blacklist OCSP responder: in-CRL means revoked, otherwise good."""

from .blacklist import BlacklistIndex, build_index
from .config import ResponderConfig
from .core import HybridResponder

__all__ = ["BlacklistIndex", "HybridResponder", "ResponderConfig", "build_index"]
