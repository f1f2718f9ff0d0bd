"""Canonical byte encodings shared by the crypto modules.

Everything that gets hashed or signed goes through these helpers so that
both ends of a conversation serialize bit-identically.  The rules are
documented in docs/wire.md.
"""

import base64
import binascii

from .errors import ProtocolError, UsageError


def int_to_bytes(n: int) -> bytes:
    """Minimal-length big-endian encoding of a nonnegative integer (0 -> b'\\x00')."""
    if n < 0:
        raise UsageError("negative integer")
    return n.to_bytes(max(1, (n.bit_length() + 7) // 8), "big")


def int_from_bytes(b: bytes) -> int:
    return int.from_bytes(b, "big")


def lp(*fields: bytes) -> bytes:
    """Length-prefixed concatenation: each field as 4-byte big-endian length + bytes."""
    out = bytearray()
    for f in fields:
        out += len(f).to_bytes(4, "big")
        out += f
    return bytes(out)


def lp_int(*values: int) -> bytes:
    """Length-prefixed concatenation of big-endian integer encodings."""
    return lp(*(int_to_bytes(v) for v in values))


def b64encode(b: bytes) -> str:
    return base64.b64encode(b).decode("ascii")


def b64decode(s: str) -> bytes:
    try:
        # validate=True so garbage payloads fail here instead of decoding to junk
        return base64.b64decode(s.encode("ascii"), validate=True)
    except (binascii.Error, UnicodeEncodeError, ValueError) as err:
        raise ProtocolError(f"invalid base64: {err}") from err
