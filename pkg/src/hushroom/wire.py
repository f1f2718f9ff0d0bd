"""Length-delimited JSON framing shared by the relay, the engine's relay
client, and the engine's local API.

Every message is one UTF-8 JSON object prefixed by a 4-byte big-endian
byte length.  The frame cap guards the transport; payload-level size
policy lives with the relay.
"""

import asyncio
import json
import struct

from .errors import ProtocolError

LENGTH_BYTES = 4
# Worst case the relay accepts: a 128 KiB binary payload grows ~4/3 under
# base64 plus envelope fields; anything past this is hostile or broken.
DEFAULT_MAX_FRAME = 192 * 1024


def encode_frame(obj: dict, max_bytes: int = DEFAULT_MAX_FRAME) -> bytes:
    if not isinstance(obj, dict):
        raise ProtocolError("frame must be a JSON object")
    body = json.dumps(obj, separators=(",", ":"), ensure_ascii=False).encode("utf-8")
    if len(body) > max_bytes:
        raise ProtocolError(f"frame of {len(body)} bytes exceeds cap {max_bytes}")
    return struct.pack(">I", len(body)) + body


def decode_body(body: bytes) -> dict:
    try:
        obj = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise ProtocolError(f"frame is not valid JSON: {err}") from err
    if not isinstance(obj, dict):
        raise ProtocolError("frame must be a JSON object")
    return obj


class FrameDecoder:
    """Incremental decoder for the same framing, for synchronous callers."""

    def __init__(self, max_bytes: int = DEFAULT_MAX_FRAME):
        self.max_bytes = max_bytes
        self._buf = bytearray()

    def feed(self, data: bytes) -> list[dict]:
        self._buf.extend(data)
        frames = []
        while True:
            if len(self._buf) < LENGTH_BYTES:
                return frames
            (length,) = struct.unpack_from(">I", self._buf)
            if length > self.max_bytes:
                raise ProtocolError(f"frame of {length} bytes exceeds cap {self.max_bytes}")
            if len(self._buf) < LENGTH_BYTES + length:
                return frames
            body = bytes(self._buf[LENGTH_BYTES : LENGTH_BYTES + length])
            del self._buf[: LENGTH_BYTES + length]
            frames.append(decode_body(body))


async def read_frame(reader: asyncio.StreamReader,
                     max_bytes: int = DEFAULT_MAX_FRAME) -> dict | None:
    """Next frame from the stream, or None on a clean end-of-stream."""
    try:
        header = await reader.readexactly(LENGTH_BYTES)
    except asyncio.IncompleteReadError as err:
        if not err.partial:
            return None
        raise ProtocolError("stream ended inside a frame header") from err
    (length,) = struct.unpack(">I", header)
    if length > max_bytes:
        raise ProtocolError(f"frame of {length} bytes exceeds cap {max_bytes}")
    try:
        body = await reader.readexactly(length)
    except asyncio.IncompleteReadError as err:
        raise ProtocolError("stream ended inside a frame body") from err
    return decode_body(body)


async def write_frame(writer: asyncio.StreamWriter, obj: dict,
                      max_bytes: int = DEFAULT_MAX_FRAME) -> None:
    writer.write(encode_frame(obj, max_bytes))
    await writer.drain()
