"""Exception hierarchy shared by every subsystem.

Codec errors are raised while parsing or encoding wire formats; the
remaining classes belong to the responder, cache, and simulator layers.
Anything raised deliberately by this package derives from StaplegridError,
so callers can catch the whole family in one clause.
"""

from __future__ import annotations


class StaplegridError(Exception):
    """Base class for all errors raised by this package."""


# --- codec ---------------------------------------------------------------

class MalformedDer(StaplegridError):
    """Input is not well-formed DER (truncated, over-long, or inconsistent)."""


class UnsupportedVersion(StaplegridError):
    """Certificate version other than v3."""


class UnsupportedAlgorithm(StaplegridError):
    """Algorithm OID outside the supported set; carries the OID."""

    def __init__(self, oid: str, context: str = "") -> None:
        self.oid = oid
        msg = f"unsupported algorithm OID {oid}"
        if context:
            msg += f" ({context})"
        super().__init__(msg)


class SignatureFieldMissing(MalformedDer):
    """A signed structure is missing its signature algorithm or value."""


class IssuerMismatch(StaplegridError):
    """Subject certificate's issuer DN does not match the issuer certificate."""


class InvalidWindow(StaplegridError):
    """thisUpdate/nextUpdate (or revocation time) ordering is invalid."""


# --- signature verification ----------------------------------------------

class SignatureInvalid(StaplegridError):
    """Cryptographic signature does not verify."""


class UntrustedSigner(StaplegridError):
    """Signer does not chain to any configured trust anchor."""


class SignerCertExpired(StaplegridError):
    """Signer certificate validity does not cover the verification time."""


# --- fixture authority ----------------------------------------------------

class UnknownSerial(StaplegridError):
    """Serial was never issued by this authority."""


class AlreadyRevoked(StaplegridError):
    """Serial is already on the revocation list; state unchanged."""


# --- hybrid responder -----------------------------------------------------

class SourceUnavailable(StaplegridError):
    """CRL source could not be read; previous blacklist stays in effect."""


class BindFailure(StaplegridError):
    """Listen address could not be bound."""


# --- staple cache ----------------------------------------------------------

class NoOcspUrl(StaplegridError):
    """Certificate carries no AIA OCSP URL."""


class UpstreamUnreachable(StaplegridError):
    """Upstream OCSP server could not be reached."""


class UpstreamError(StaplegridError):
    """Upstream answered with a non-successful OCSP status."""

    def __init__(self, status, detail: str = "") -> None:
        self.status = status
        msg = f"upstream OCSP error: {status}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class NotCached(StaplegridError):
    """No cache row exists for the requested serial."""


class StoreCorrupt(StaplegridError):
    """Cache store file header is unreadable."""


# --- signed collections -----------------------------------------------------

class CollectionFull(StaplegridError):
    """Every index of the collection is assigned."""


class IndexOutOfRange(StaplegridError, IndexError):
    """Bit index is >= the collection's bit count."""
