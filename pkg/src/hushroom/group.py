"""Room encryption: pairwise-DH key agreement plus per-message key wrapping.

Every occupant holds one ephemeral DH identity per room.  To send, a fresh
32-byte message key encrypts the plaintext once; that key is then wrapped
separately for each intended recipient under the pairwise keys, MAC'd per
recipient, and the whole message is DSA-signed by the sender.  Someone
holding the full ciphertext transcript but no member's DH private key gets
nothing.

This construction is this codebase's own, assembled from the same
primitives used elsewhere (DH agreement, AES-256-CTR, HMAC-SHA512, DSA).
"""

from dataclasses import dataclass, field
from hashlib import sha256, sha512

from .cipher import aes256_ctr, constant_time_eq, hmac_sha512
from .encoding import int_to_bytes, lp
from .errors import ForgeryError, NoKeyError, ProtocolError, ReplayError, UsageError
from .numtheory import DsaKeyPair, DsaParams, DsaSignature, dsa_sign, dsa_verify, truncated_digest
from .rng import Csprng
from .session import DH_PRIME, dh_keypair, shared_secret_bytes

MAX_NICKNAME = 32

WRAP_IV_BYTES = 16
WRAP_KEY_BYTES = 32
WRAP_TAG_BYTES = 32
WRAP_BLOB_BYTES = WRAP_IV_BYTES + WRAP_KEY_BYTES + WRAP_TAG_BYTES


@dataclass
class GroupIdentity:
    dh_private: int
    dh_public: int
    dsa: DsaKeyPair
    nickname: str
    send_counter: int = 0
    recv_counters: dict = field(default_factory=dict)  # sender nickname -> last counter

    def __post_init__(self):
        if not 1 <= len(self.nickname) <= MAX_NICKNAME:
            raise UsageError("nickname must be 1-32 characters")
        if pow(2, self.dh_private, DH_PRIME) != self.dh_public:
            raise UsageError("dh_public inconsistent with dh_private")


def new_group_identity(dsa: DsaKeyPair, nickname: str, rng: Csprng) -> GroupIdentity:
    x, gx = dh_keypair(rng)
    return GroupIdentity(dh_private=x, dh_public=gx, dsa=dsa, nickname=nickname)


def pairwise_key(me: GroupIdentity, peer_dh_public: int) -> tuple[bytes, bytes]:
    """Shared (enc, mac) pair with one peer; both sides compute the same."""
    shared = shared_secret_bytes(me.dh_private, peer_dh_public)
    digest = sha512(shared).digest()
    return digest[:32], digest[32:]


@dataclass(frozen=True)
class GroupMessage:
    sender: str
    iv: bytes
    ciphertext: bytes
    wrapped_keys: dict  # nickname -> wrap_iv(16) || wrapped(32) || tag(32)
    sig: DsaSignature
    counter: int


def _signed_encoding(sender: str, iv: bytes, ciphertext: bytes, wrapped_keys: dict) -> bytes:
    """Canonical length-prefixed encoding of the signed fields, wrapped_keys
    sorted by nickname (see docs/wire.md)."""
    parts = [sender.encode("utf-8"), iv, ciphertext]
    for nick in sorted(wrapped_keys):
        parts.append(nick.encode("utf-8"))
        parts.append(wrapped_keys[nick])
    return lp(*parts)


def _wrap_tag_input(wrap_iv: bytes, wrapped: bytes, iv: bytes, ciphertext: bytes, counter: int) -> bytes:
    return wrap_iv + wrapped + iv + ciphertext + counter.to_bytes(8, "big")


def group_seal(me: GroupIdentity, roster: dict, plaintext: bytes, rng: Csprng) -> GroupMessage:
    """Seal `plaintext` for every member of `roster` (nickname -> (dh_public, dsa_public)).

    The sender's own entry need not be present; it is ignored if it is.
    """
    recipients = {n: keys for n, keys in roster.items() if n != me.nickname}
    if not recipients:
        raise UsageError("roster has no recipients")
    me.send_counter += 1
    counter = me.send_counter
    mk = rng.random_bytes(32)
    iv = rng.random_bytes(16)
    ciphertext = aes256_ctr(mk, iv, plaintext)
    wrapped_keys = {}
    for nick, (peer_dh, _peer_dsa) in recipients.items():
        enc, mac = pairwise_key(me, peer_dh)
        wrap_iv = rng.random_bytes(WRAP_IV_BYTES)
        wrapped = aes256_ctr(enc, wrap_iv, mk)
        tag = hmac_sha512(mac, _wrap_tag_input(wrap_iv, wrapped, iv, ciphertext, counter))[:WRAP_TAG_BYTES]
        wrapped_keys[nick] = wrap_iv + wrapped + tag
    digest = truncated_digest(_signed_encoding(me.nickname, iv, ciphertext, wrapped_keys))
    sig = dsa_sign(me.dsa, digest, rng)
    return GroupMessage(
        sender=me.nickname,
        iv=iv,
        ciphertext=ciphertext,
        wrapped_keys=wrapped_keys,
        sig=sig,
        counter=counter,
    )


def group_open(me: GroupIdentity, sender_keys: tuple, msg: GroupMessage) -> bytes:
    """Verify and decrypt a room message from `sender_keys` = (dh_public, (params, y))."""
    sender_dh, (sender_params, sender_y) = sender_keys
    digest = truncated_digest(_signed_encoding(msg.sender, msg.iv, msg.ciphertext, msg.wrapped_keys))
    if not dsa_verify(sender_params, sender_y, digest, msg.sig):
        raise ForgeryError("sender signature did not verify", reason="bad_sig")
    blob = msg.wrapped_keys.get(me.nickname)
    if blob is None:
        raise NoKeyError(f"no wrapped key for {me.nickname!r}")
    if len(blob) != WRAP_BLOB_BYTES:
        raise ProtocolError("malformed wrapped key entry")
    wrap_iv = blob[:WRAP_IV_BYTES]
    wrapped = blob[WRAP_IV_BYTES : WRAP_IV_BYTES + WRAP_KEY_BYTES]
    tag = blob[WRAP_IV_BYTES + WRAP_KEY_BYTES :]
    enc, mac = pairwise_key(me, sender_dh)
    expected = hmac_sha512(mac, _wrap_tag_input(wrap_iv, wrapped, msg.iv, msg.ciphertext, msg.counter))[:WRAP_TAG_BYTES]
    if not constant_time_eq(expected, tag):
        raise ForgeryError("wrapped-key tag did not verify")
    last = me.recv_counters.get(msg.sender, 0)
    if msg.counter <= last:
        raise ReplayError(f"counter {msg.counter} not above {last} for {msg.sender!r}")
    me.recv_counters[msg.sender] = msg.counter
    mk = aes256_ctr(enc, wrap_iv, wrapped)
    return aes256_ctr(mk, msg.iv, msg.ciphertext)


# ---------------------------------------------------------------------------
# transcript consistency


def transcript_digest(messages: list) -> bytes:
    """Order-sensitive digest of a member's received-ciphertext log."""
    h = sha256()
    for msg in messages:
        h.update(lp(msg.sender.encode("utf-8"), msg.iv, msg.ciphertext, int_to_bytes(msg.counter)))
    return h.digest()


def transcript_consistency_check(received: list) -> bool:
    """True iff every member's ordered log digests identically."""
    digests = {transcript_digest(log) for log in received}
    return len(digests) <= 1


# ---------------------------------------------------------------------------
# wire encoding (binary; carried base64 inside relay stanzas)


def encode_group_message(msg: GroupMessage) -> bytes:
    parts = [
        msg.sender.encode("utf-8"),
        msg.iv,
        msg.ciphertext,
        int_to_bytes(msg.sig.r),
        int_to_bytes(msg.sig.s),
        msg.counter.to_bytes(8, "big"),
    ]
    for nick in sorted(msg.wrapped_keys):
        parts.append(nick.encode("utf-8"))
        parts.append(msg.wrapped_keys[nick])
    return lp(*parts)


def decode_group_message(raw: bytes) -> GroupMessage:
    fields = _lp_split(raw)
    if len(fields) < 6 or len(fields) % 2 != 0:
        raise ProtocolError("malformed group message")
    sender = fields[0].decode("utf-8")
    iv, ciphertext = fields[1], fields[2]
    sig = DsaSignature(r=int.from_bytes(fields[3], "big"), s=int.from_bytes(fields[4], "big"))
    counter = int.from_bytes(fields[5], "big")
    wrapped = {}
    rest = fields[6:]
    for i in range(0, len(rest), 2):
        wrapped[rest[i].decode("utf-8")] = rest[i + 1]
    if len(iv) != 16:
        raise ProtocolError("bad group message iv")
    return GroupMessage(sender=sender, iv=iv, ciphertext=ciphertext,
                        wrapped_keys=wrapped, sig=sig, counter=counter)


def _lp_split(raw: bytes) -> list:
    fields = []
    pos = 0
    while pos < len(raw):
        if pos + 4 > len(raw):
            raise ProtocolError("truncated length prefix")
        n = int.from_bytes(raw[pos : pos + 4], "big")
        pos += 4
        if pos + n > len(raw):
            raise ProtocolError("field overruns buffer")
        fields.append(raw[pos : pos + n])
        pos += n
    return fields
