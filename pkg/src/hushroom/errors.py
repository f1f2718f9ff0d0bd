"""Exception types shared across the package.

Every error carries a machine-readable `reason` code so the engine can
surface drops as warnings without parsing message strings.
"""


class HushroomError(Exception):
    """Base class for all errors raised by this package."""

    reason = "malformed"

    def __init__(self, *args, reason: str | None = None):
        super().__init__(*args)
        if reason is not None:
            self.reason = reason


class SeedLengthError(HushroomError):
    """CSPRNG seed material has the wrong length."""


class StreamExhaustedError(HushroomError):
    """CSPRNG hit its reseed ceiling; build a fresh state from OS entropy."""


class ProtocolError(HushroomError):
    """A peer sent a value that violates the protocol (range, phase, shape)."""


class AuthenticationError(HushroomError):
    """A signature or identity check failed during key exchange."""

    reason = "bad_sig"


class ForgeryError(HushroomError):
    """A MAC or signature over message content did not verify."""

    reason = "bad_mac"


class ReplayError(HushroomError):
    """A message counter was reused or went backwards."""

    reason = "replay"


class NoKeyError(HushroomError):
    """The message carries no wrapped key for this recipient."""

    reason = "no_key"


class IntegrityError(HushroomError):
    """A file transfer MAC did not verify; plaintext is discarded."""

    reason = "bad_mac"


class StreamGapError(HushroomError):
    """A bytestream frame arrived out of sequence."""


class UsageError(HushroomError):
    """The caller passed arguments that make no sense."""
