"""One-to-one encrypted sessions.

A session starts with a signed ephemeral Diffie-Hellman exchange: each
side signs the exchange transcript with its per-session DSA identity.
From the shared secret we derive four directional keys (AES-256-CTR
encryption and HMAC-SHA512 authentication, each way) plus one extra
symmetric key reserved for the file-transfer channel.

Also here: public-key fingerprints and the color codes derived from them,
the two human-facing identity checks.
"""

from dataclasses import dataclass, field
from hashlib import sha256, sha512

from .cipher import aes256_ctr, constant_time_eq, hmac_sha512
from .encoding import lp_int
from .errors import AuthenticationError, ForgeryError, ProtocolError, ReplayError, UsageError
from .numtheory import DsaKeyPair, DsaParams, DsaSignature, dsa_sign, dsa_verify, truncated_digest
from .rng import Csprng

# RFC 3526 group 5: the 1536-bit MODP prime, generator 2.
DH_PRIME = int(
    "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD1"
    "29024E088A67CC74020BBEA63B139B22514A08798E3404DD"
    "EF9519B3CD3A431B302B0A6DF25F14374FE1356D6D51C245"
    "E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED"
    "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3D"
    "C2007CB8A163BF0598DA48361C55D39A69163FA8FD24CF5F"
    "83655D23DCA3AD961C62F356208552BB9ED529077096966D"
    "670C354E4ABC9804F1746C08CA237327FFFFFFFFFFFFFFFF",
    16,
)
DH_GENERATOR = 2
DH_EXPONENT_BITS = 320  # private exponent size; ample for this group

SHARED_BYTES = (DH_PRIME.bit_length() + 7) // 8  # fixed-width encoding of secrets


def check_dh_element(v: int) -> None:
    if not 2 <= v <= DH_PRIME - 2:
        raise ProtocolError("DH value outside [2, p-2]")


def dh_keypair(rng: Csprng) -> tuple[int, int]:
    x = rng.random_int_bits(DH_EXPONENT_BITS)
    return x, pow(DH_GENERATOR, x, DH_PRIME)


def shared_secret_bytes(my_private: int, peer_public: int) -> bytes:
    check_dh_element(peer_public)
    s = pow(peer_public, my_private, DH_PRIME)
    return s.to_bytes(SHARED_BYTES, "big")


@dataclass
class SessionKeys:
    send_enc: bytes
    send_mac: bytes
    recv_enc: bytes
    recv_mac: bytes
    extra_key: bytes
    send_counter: int = 0
    recv_seen: set = field(default_factory=set)


def derive_session_keys(shared: bytes, initiator: bool) -> SessionKeys:
    # initiator->responder keys from SHA-512(shared); the reverse direction
    # and the extra key are domain-separated the same way
    fwd = sha512(shared).digest()
    rev = sha512(b"resp" + shared).digest()
    extra = sha512(b"extra" + shared).digest()[:32]
    if initiator:
        return SessionKeys(fwd[:32], fwd[32:], rev[:32], rev[32:], extra)
    return SessionKeys(rev[:32], rev[32:], fwd[:32], fwd[32:], extra)


@dataclass(frozen=True)
class AkeMessage1:
    dh_public: int
    dsa_params: DsaParams
    dsa_y: int
    sig: DsaSignature


@dataclass(frozen=True)
class AkeMessage2:
    dh_public: int
    dsa_params: DsaParams
    dsa_y: int
    sig: DsaSignature


@dataclass
class AkeState:
    my_key: DsaKeyPair
    dh_private: int
    dh_public: int


def _msg1_digest(dh_a: int) -> bytes:
    return truncated_digest(b"\x01" + lp_int(dh_a))


def _msg2_digest(dh_a: int, dh_b: int) -> bytes:
    return truncated_digest(b"\x02" + lp_int(dh_a, dh_b))


def ake_initiate(my_key: DsaKeyPair, rng: Csprng) -> tuple[AkeState, AkeMessage1]:
    x, gx = dh_keypair(rng)
    sig = dsa_sign(my_key, _msg1_digest(gx), rng)
    state = AkeState(my_key=my_key, dh_private=x, dh_public=gx)
    msg = AkeMessage1(dh_public=gx, dsa_params=my_key.params, dsa_y=my_key.y, sig=sig)
    return state, msg


def ake_respond(my_key: DsaKeyPair, msg1: AkeMessage1, rng: Csprng) -> tuple[SessionKeys, AkeMessage2]:
    check_dh_element(msg1.dh_public)
    if not dsa_verify(msg1.dsa_params, msg1.dsa_y, _msg1_digest(msg1.dh_public), msg1.sig):
        raise AuthenticationError("initiator signature did not verify")
    y, gy = dh_keypair(rng)
    shared = shared_secret_bytes(y, msg1.dh_public)
    keys = derive_session_keys(shared, initiator=False)
    sig = dsa_sign(my_key, _msg2_digest(msg1.dh_public, gy), rng)
    msg2 = AkeMessage2(dh_public=gy, dsa_params=my_key.params, dsa_y=my_key.y, sig=sig)
    return keys, msg2


def ake_finalize(state: AkeState, msg2: AkeMessage2) -> SessionKeys:
    check_dh_element(msg2.dh_public)
    digest = _msg2_digest(state.dh_public, msg2.dh_public)
    if not dsa_verify(msg2.dsa_params, msg2.dsa_y, digest, msg2.sig):
        raise AuthenticationError("responder signature did not verify")
    shared = shared_secret_bytes(state.dh_private, msg2.dh_public)
    return derive_session_keys(shared, initiator=True)


# ---------------------------------------------------------------------------
# message protection

TAG_BYTES = 32


@dataclass(frozen=True)
class SealedMessage:
    iv: bytes  # 8 random bytes || 64-bit big-endian send counter
    tag: bytes
    ciphertext: bytes

    def to_bytes(self) -> bytes:
        return self.iv + self.tag + self.ciphertext

    @classmethod
    def from_bytes(cls, raw: bytes) -> "SealedMessage":
        if len(raw) < 16 + TAG_BYTES:
            raise ProtocolError("sealed message too short")
        return cls(iv=raw[:16], tag=raw[16 : 16 + TAG_BYTES], ciphertext=raw[16 + TAG_BYTES :])


def seal_message(keys: SessionKeys, plaintext: bytes, rng: Csprng) -> SealedMessage:
    keys.send_counter += 1
    iv = rng.random_bytes(8) + keys.send_counter.to_bytes(8, "big")
    ciphertext = aes256_ctr(keys.send_enc, iv, plaintext)
    tag = hmac_sha512(keys.send_mac, iv + ciphertext)[:TAG_BYTES]
    return SealedMessage(iv=iv, tag=tag, ciphertext=ciphertext)


def open_message(keys: SessionKeys, sealed: SealedMessage) -> bytes:
    if len(sealed.iv) != 16:
        raise ProtocolError("bad iv length")
    expected = hmac_sha512(keys.recv_mac, sealed.iv + sealed.ciphertext)[:TAG_BYTES]
    if not constant_time_eq(expected, sealed.tag):
        raise ForgeryError("message tag did not verify")
    counter = int.from_bytes(sealed.iv[8:], "big")
    if counter in keys.recv_seen:
        raise ReplayError(f"counter {counter} already delivered")
    keys.recv_seen.add(counter)
    return aes256_ctr(keys.recv_enc, sealed.iv, sealed.ciphertext)


# ---------------------------------------------------------------------------
# identity display


@dataclass(frozen=True)
class Fingerprint:
    digest: bytes
    display: str


@dataclass(frozen=True)
class ColorCode:
    colors: tuple  # four (r, g, b) triples


def fingerprint(y: int, params: DsaParams) -> Fingerprint:
    digest = sha256(lp_int(params.p, params.q, params.g, y)).digest()
    hexstr = digest.hex()
    display = " ".join(hexstr[i : i + 8] for i in range(0, 64, 8))
    return Fingerprint(digest=digest, display=display)


def fingerprint_from_digest(digest: bytes) -> Fingerprint:
    if len(digest) != 32:
        raise UsageError("fingerprint digest must be 32 bytes")
    hexstr = digest.hex()
    return Fingerprint(digest=digest, display=" ".join(hexstr[i : i + 8] for i in range(0, 64, 8)))


def color_code(fp: Fingerprint) -> ColorCode:
    d = fp.digest
    return ColorCode(colors=tuple((d[3 * i], d[3 * i + 1], d[3 * i + 2]) for i in range(4)))
