"""Salsa20-backed cryptographically secure pseudorandom number generator.

The OS entropy pool is touched exactly once per generator, for a 40-byte
batch (32-byte key + 8-byte nonce).  All subsequent randomness is Salsa20
keystream.  A generator may emit at most ``RESEED_CEILING`` 64-byte blocks
(64 MiB); past that it raises and the caller must build a fresh one.
"""

import os
import struct

from .errors import SeedLengthError, StreamExhaustedError, UsageError

SEED_BYTES = 40
BLOCK_BYTES = 64
RESEED_CEILING = 2**20  # blocks

_SIGMA = (0x61707865, 0x3320646E, 0x79622D32, 0x6B206574)  # "expand 32-byte k"

# quarterround targets for one double-round: four columns, then four rows
_COLUMNS = ((0, 4, 8, 12), (5, 9, 13, 1), (10, 14, 2, 6), (15, 3, 7, 11))
_ROWS = ((0, 1, 2, 3), (5, 6, 7, 4), (10, 11, 8, 9), (15, 12, 13, 14))

_MASK = 0xFFFFFFFF


def _quarter(x: list[int], a: int, b: int, c: int, d: int) -> None:
    t = (x[a] + x[d]) & _MASK
    x[b] ^= ((t << 7) | (t >> 25)) & _MASK
    t = (x[b] + x[a]) & _MASK
    x[c] ^= ((t << 9) | (t >> 23)) & _MASK
    t = (x[c] + x[b]) & _MASK
    x[d] ^= ((t << 13) | (t >> 19)) & _MASK
    t = (x[d] + x[c]) & _MASK
    x[a] ^= ((t << 18) | (t >> 14)) & _MASK


def salsa20_block(key: bytes, nonce: bytes, counter: int) -> bytes:
    """One 64-byte keystream block of Salsa20/20 for (key, nonce, block counter)."""
    if len(key) != 32:
        raise SeedLengthError("key must be 32 bytes")
    if len(nonce) != 8:
        raise SeedLengthError("nonce must be 8 bytes")
    if not 0 <= counter < 2**64:
        raise UsageError("block counter out of range")

    k = struct.unpack("<8I", key)
    n = struct.unpack("<2I", nonce)
    init = [
        _SIGMA[0], k[0], k[1], k[2],
        k[3], _SIGMA[1], n[0], n[1],
        counter & _MASK, (counter >> 32) & _MASK, _SIGMA[2], k[4],
        k[5], k[6], k[7], _SIGMA[3],
    ]
    x = init[:]
    for _ in range(10):  # 20 rounds = 10 double-rounds
        for a, b, c, d in _COLUMNS:
            _quarter(x, a, b, c, d)
        for a, b, c, d in _ROWS:
            _quarter(x, a, b, c, d)
    return struct.pack("<16I", *((x[i] + init[i]) & _MASK for i in range(16)))


class Csprng:
    """Keystream-consuming generator state.

    Owned by exactly one task at a time; never share an instance across
    concurrent consumers.  Components wanting independent randomness call
    :meth:`from_os_entropy` themselves.
    """

    def __init__(self, entropy: bytes):
        if len(entropy) != SEED_BYTES:
            raise SeedLengthError(
                f"need exactly {SEED_BYTES} bytes of entropy, got {len(entropy)}"
            )
        self.key = entropy[:32]
        self.nonce = entropy[32:40]
        self.block_counter = 0
        self.buffer = b""
        self.blocks_emitted = 0

    @classmethod
    def from_os_entropy(cls) -> "Csprng":
        return cls(os.urandom(SEED_BYTES))

    def _next_block(self) -> bytes:
        if self.blocks_emitted >= RESEED_CEILING:
            raise StreamExhaustedError(
                "keystream ceiling reached; reseed from OS entropy"
            )
        block = salsa20_block(self.key, self.nonce, self.block_counter)
        self.block_counter += 1
        self.blocks_emitted += 1
        return block

    def random_bytes(self, n: int) -> bytes:
        """The next n keystream bytes; consecutive calls never overlap."""
        if n < 0:
            raise UsageError("byte count must be nonnegative")
        out = bytearray()
        while len(out) < n:
            if not self.buffer:
                self.buffer = self._next_block()
            take = min(n - len(out), len(self.buffer))
            out += self.buffer[:take]
            self.buffer = self.buffer[take:]
        return bytes(out)

    def random_below(self, m: int) -> int:
        """Uniform integer in [0, m), by rejection sampling (no modulo bias)."""
        if m < 1:
            raise UsageError("modulus must be positive")
        if m == 1:
            return 0
        bits = (m - 1).bit_length()
        nbytes = (bits + 7) // 8
        mask = (1 << bits) - 1
        while True:
            candidate = int.from_bytes(self.random_bytes(nbytes), "big") & mask
            if candidate < m:
                return candidate

    def random_int_bits(self, bits: int) -> int:
        """Uniform integer with exactly `bits` bits (top bit forced to 1)."""
        if bits < 1:
            raise UsageError("bit count must be positive")
        nbytes = (bits + 7) // 8
        value = int.from_bytes(self.random_bytes(nbytes), "big")
        value &= (1 << bits) - 1
        value |= 1 << (bits - 1)
        return value
