"""Encrypted file transfer over an in-band bytestream.

The session's extra symmetric key is expanded with one SHA-512 into an
encryption half and a MAC half.  The whole file is encrypted as a single
AES-256-CTR stream under a fresh 16-byte iv, authenticated with a full
64-byte HMAC-SHA512 over iv plus ciphertext, then cut into 64 KiB chunks
framed as open / data / close.  The receiver verifies the MAC before a
single byte of plaintext is surfaced.
"""

from dataclasses import dataclass
from hashlib import sha512

from .cipher import aes256_ctr, constant_time_eq, hmac_sha512
from .encoding import b64decode, b64encode
from .errors import IntegrityError, ProtocolError, StreamGapError, UsageError
from .rng import Csprng

CHUNK_BYTES = 65536
SEQ_MOD = 65536
FILE_IV_BYTES = 16
FILE_MAC_BYTES = 64

KIND_OPEN = "open"
KIND_DATA = "data"
KIND_CLOSE = "close"


@dataclass(frozen=True)
class FileKeys:
    enc: bytes
    mac: bytes


def derive_file_keys(extra_key: bytes) -> FileKeys:
    """Expand the 32-byte session extra key into distinct enc and mac keys."""
    if len(extra_key) != 32:
        raise UsageError(f"extra key must be 32 bytes, got {len(extra_key)}")
    expanded = sha512(extra_key).digest()
    return FileKeys(enc=expanded[:32], mac=expanded[32:])


def encrypt_file(keys: FileKeys, file_iv: bytes, content: bytes) -> tuple[bytes, bytes]:
    """One continuous CTR stream over the whole file, MAC over iv ‖ ciphertext."""
    if len(file_iv) != FILE_IV_BYTES:
        raise UsageError(f"file iv must be {FILE_IV_BYTES} bytes")
    ciphertext = aes256_ctr(keys.enc, file_iv, content)
    mac = hmac_sha512(keys.mac, file_iv + ciphertext)
    return ciphertext, mac


def decrypt_file(keys: FileKeys, file_iv: bytes, ciphertext: bytes, mac: bytes) -> bytes:
    """MAC check first; plaintext exists only after it passes."""
    if len(file_iv) != FILE_IV_BYTES:
        raise UsageError(f"file iv must be {FILE_IV_BYTES} bytes")
    expected = hmac_sha512(keys.mac, file_iv + ciphertext)
    if not constant_time_eq(expected, mac):
        raise IntegrityError("file MAC did not verify")
    return aes256_ctr(keys.enc, file_iv, ciphertext)


def new_stream_id(rng: Csprng) -> str:
    return rng.random_bytes(8).hex()


@dataclass(frozen=True)
class IbbFrame:
    kind: str
    sid: str
    seq: int | None = None
    block_size: int | None = None
    payload: bytes | None = None
    mac: bytes | None = None
    meta: dict | None = None

    def to_obj(self) -> dict:
        """JSON-ready dict with unused fields omitted."""
        obj: dict = {"kind": self.kind, "sid": self.sid}
        if self.seq is not None:
            obj["seq"] = self.seq
        if self.block_size is not None:
            obj["block_size"] = self.block_size
        if self.payload is not None:
            obj["payload"] = b64encode(self.payload)
        if self.mac is not None:
            obj["mac"] = b64encode(self.mac)
        if self.meta is not None:
            obj["meta"] = self.meta
        return obj

    @classmethod
    def from_obj(cls, obj: dict) -> "IbbFrame":
        try:
            kind = obj["kind"]
            sid = obj["sid"]
            if kind not in (KIND_OPEN, KIND_DATA, KIND_CLOSE):
                raise ProtocolError(f"unknown frame kind {kind!r}")
            if not isinstance(sid, str) or not sid:
                raise ProtocolError("bad stream id")
            payload = b64decode(obj["payload"]) if "payload" in obj else None
            mac = b64decode(obj["mac"]) if "mac" in obj else None
            return cls(
                kind=kind,
                sid=sid,
                seq=obj.get("seq"),
                block_size=obj.get("block_size"),
                payload=payload,
                mac=mac,
                meta=obj.get("meta"),
            )
        except (KeyError, TypeError, ValueError) as err:
            raise ProtocolError(f"malformed bytestream frame: {err}") from err


def chunk_stream(sid: str, file_iv: bytes, ciphertext: bytes, mac: bytes,
                 meta: dict) -> list[IbbFrame]:
    """Frame a whole encrypted file: open, ceil(len/64Ki) data frames, close.

    The open frame's meta carries the file iv (hex) alongside the caller's
    name field; the receiver needs it for both the MAC input and CTR setup.
    """
    if len(mac) != FILE_MAC_BYTES:
        raise UsageError(f"mac must be {FILE_MAC_BYTES} bytes")
    open_meta = dict(meta)
    open_meta["iv"] = file_iv.hex()
    open_meta["length"] = len(ciphertext)
    frames = [IbbFrame(kind=KIND_OPEN, sid=sid, block_size=CHUNK_BYTES, meta=open_meta)]
    for index, offset in enumerate(range(0, len(ciphertext), CHUNK_BYTES)):
        frames.append(IbbFrame(
            kind=KIND_DATA,
            sid=sid,
            seq=index % SEQ_MOD,
            payload=ciphertext[offset : offset + CHUNK_BYTES],
        ))
    frames.append(IbbFrame(kind=KIND_CLOSE, sid=sid, mac=mac))
    return frames


def reassemble(frames: list[IbbFrame], keys: FileKeys) -> bytes:
    """Rebuild, authenticate, and decrypt one complete stream.

    Frames must be the full ordered stream for a single sid.  Sequence
    gaps and duplicates are stream errors; a MAC mismatch discards
    everything.
    """
    if len(frames) < 2 or frames[0].kind != KIND_OPEN or frames[-1].kind != KIND_CLOSE:
        raise ProtocolError("stream must be open, data*, close")
    head = frames[0]
    sid = head.sid
    if head.block_size != CHUNK_BYTES:
        raise ProtocolError(f"unsupported block size {head.block_size}")
    meta = head.meta or {}
    try:
        file_iv = bytes.fromhex(meta["iv"])
        declared_len = int(meta["length"])
    except (KeyError, TypeError, ValueError) as err:
        raise ProtocolError(f"open frame meta incomplete: {err}") from err
    if len(file_iv) != FILE_IV_BYTES:
        raise ProtocolError("bad file iv length")

    chunks = []
    expected_seq = 0
    for frame in frames[1:-1]:
        if frame.kind != KIND_DATA:
            raise ProtocolError(f"unexpected {frame.kind} frame mid-stream")
        if frame.sid != sid:
            raise ProtocolError(f"frame for unknown stream {frame.sid!r}")
        if frame.seq != expected_seq:
            raise StreamGapError(f"expected seq {expected_seq}, got {frame.seq}")
        if frame.payload is None or len(frame.payload) > CHUNK_BYTES:
            raise ProtocolError("bad data frame payload")
        chunks.append(frame.payload)
        expected_seq = (expected_seq + 1) % SEQ_MOD
    tail = frames[-1]
    if tail.sid != sid:
        raise ProtocolError(f"frame for unknown stream {tail.sid!r}")
    if tail.mac is None or len(tail.mac) != FILE_MAC_BYTES:
        raise ProtocolError("close frame missing mac")

    ciphertext = b"".join(chunks)
    if len(ciphertext) != declared_len:
        raise ProtocolError(f"stream length {len(ciphertext)} != declared {declared_len}")
    return decrypt_file(keys, file_iv, ciphertext, tail.mac)
