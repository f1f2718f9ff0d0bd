"""Independent reference implementations used only to cross-check the package.

Everything here is written from primary definitions (FIPS 197 for AES,
textbook Miller-Rabin, sieve of Eratosthenes) and deliberately shares no
code with src/.  Keep it that way: the whole point is a second route to
the same answers.
"""

import random

# ---------------------------------------------------------------------------
# primes


def sieve_primes(limit: int) -> set[int]:
    """All primes below `limit`, by the sieve of Eratosthenes."""
    flags = bytearray([1]) * limit
    flags[0:2] = b"\x00\x00"
    for n in range(2, int(limit**0.5) + 1):
        if flags[n]:
            flags[n * n :: n] = bytearray(len(flags[n * n :: n]))
    return {n for n in range(limit) if flags[n]}


def miller_rabin_oracle(n: int, rounds: int = 64, rnd: random.Random | None = None) -> bool:
    """Probabilistic primality check, independent of the package's version."""
    if n < 2:
        return False
    for p in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    rnd = rnd or random.Random(0xACE)
    for _ in range(rounds):
        a = rnd.randrange(2, n - 1)
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


# ---------------------------------------------------------------------------
# AES-256 (encryption only), straight from FIPS 197


_SBOX = bytes.fromhex(
    "637c777bf26b6fc53001672bfed7ab76ca82c97dfa5947f0add4a2af9ca472c0"
    "b7fd9326363ff7cc34a5e5f171d8311504c723c31896059a071280e2eb27b275"
    "09832c1a1b6e5aa0523bd6b329e32f8453d100ed20fcb15b6acbbe394a4c58cf"
    "d0efaafb434d338545f9027f503c9fa851a3408f929d38f5bcb6da2110fff3d2"
    "cd0c13ec5f974417c4a77e3d645d197360814fdc222a908846eeb814de5e0bdb"
    "e0323a0a4906245cc2d3ac629195e479e7c8376d8dd54ea96c56f4ea657aae08"
    "ba78252e1ca6b4c6e8dd741f4bbd8b8a703eb5664803f60e613557b986c11d9e"
    "e1f8981169d98e949b1e87e9ce5528df8ca1890dbfe6426841992d0fb054bb16"
)

_RCON = (0x01, 0x02, 0x04, 0x08, 0x10, 0x20, 0x40)


def _xtime(b: int) -> int:
    b <<= 1
    if b & 0x100:
        b ^= 0x11B
    return b & 0xFF


def _expand_key_256(key: bytes) -> list[bytes]:
    words = [key[4 * i : 4 * i + 4] for i in range(8)]
    for i in range(8, 60):
        temp = words[i - 1]
        if i % 8 == 0:
            temp = bytes(_SBOX[b] for b in temp[1:] + temp[:1])
            temp = bytes([temp[0] ^ _RCON[i // 8 - 1]]) + temp[1:]
        elif i % 8 == 4:
            temp = bytes(_SBOX[b] for b in temp)
        words.append(bytes(a ^ b for a, b in zip(words[i - 8], temp)))
    return [b"".join(words[4 * r : 4 * r + 4]) for r in range(15)]


def _shift_rows(state: list[int]) -> list[int]:
    out = state[:]
    for row in range(1, 4):
        for col in range(4):
            out[row + 4 * col] = state[row + 4 * ((col + row) % 4)]
    return out


def _mix_columns(state: list[int]) -> list[int]:
    out = [0] * 16
    for col in range(4):
        a = state[4 * col : 4 * col + 4]
        out[4 * col + 0] = _xtime(a[0]) ^ _xtime(a[1]) ^ a[1] ^ a[2] ^ a[3]
        out[4 * col + 1] = a[0] ^ _xtime(a[1]) ^ _xtime(a[2]) ^ a[2] ^ a[3]
        out[4 * col + 2] = a[0] ^ a[1] ^ _xtime(a[2]) ^ _xtime(a[3]) ^ a[3]
        out[4 * col + 3] = _xtime(a[0]) ^ a[0] ^ a[1] ^ a[2] ^ _xtime(a[3])
    return out


def aes256_encrypt_block(key: bytes, block: bytes) -> bytes:
    assert len(key) == 32 and len(block) == 16
    round_keys = _expand_key_256(key)
    # state kept column-major as a flat list: byte (row, col) at row + 4*col;
    # the flat wire order IS that layout, so no transposition is needed
    state = [b ^ k for b, k in zip(block, round_keys[0])]
    for rnd in range(1, 14):
        state = [_SBOX[b] for b in state]
        state = _shift_rows(state)
        state = _mix_columns(state)
        state = [b ^ k for b, k in zip(state, round_keys[rnd])]
    state = [_SBOX[b] for b in state]
    state = _shift_rows(state)
    state = [b ^ k for b, k in zip(state, round_keys[14])]
    return bytes(state)


def aes256_ctr_oracle(key: bytes, iv: bytes, data: bytes) -> bytes:
    """CTR keystream: the full 16-byte block is a big-endian counter."""
    assert len(iv) == 16
    counter = int.from_bytes(iv, "big")
    out = bytearray()
    for offset in range(0, len(data), 16):
        block = counter.to_bytes(16, "big")
        keystream = aes256_encrypt_block(key, block)
        chunk = data[offset : offset + 16]
        out += bytes(a ^ b for a, b in zip(chunk, keystream))
        counter = (counter + 1) % (1 << 128)
    return bytes(out)


# FIPS 197 appendix C.3 example; guards the oracle itself at import time.
_KAT_KEY = bytes(range(32))
_KAT_PT = bytes.fromhex("00112233445566778899aabbccddeeff")
_KAT_CT = bytes.fromhex("8ea2b7ca516745bfeafc49904b496089")
assert aes256_encrypt_block(_KAT_KEY, _KAT_PT) == _KAT_CT
