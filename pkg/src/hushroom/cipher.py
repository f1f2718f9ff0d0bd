"""Thin wrappers over the symmetric primitives used everywhere else:
AES-256 in counter mode and HMAC-SHA512."""

import hmac as _hmac
from hashlib import sha512

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from .errors import UsageError


def aes256_ctr(key: bytes, iv: bytes, data: bytes) -> bytes:
    """Encrypt/decrypt (identical in CTR mode) with the 16-byte iv as the
    initial counter block; the whole 128-bit block increments big-endian."""
    if len(key) != 32:
        raise UsageError("AES-256 key must be 32 bytes")
    if len(iv) != 16:
        raise UsageError("counter block must be 16 bytes")
    enc = Cipher(algorithms.AES(key), modes.CTR(iv)).encryptor()
    return enc.update(data) + enc.finalize()


def hmac_sha512(key: bytes, data: bytes) -> bytes:
    return _hmac.new(key, data, sha512).digest()


def constant_time_eq(a: bytes, b: bytes) -> bool:
    return _hmac.compare_digest(a, b)
