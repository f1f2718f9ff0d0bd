"""Ciphertext relay: ephemeral identities, chat rooms, ordered fan-out.

The server never decrypts, never inspects payloads beyond a size bound,
and keeps no durable state of any kind; rooms and identities live exactly
as long as the connections behind them.  Each stanza is a length-prefixed
JSON object (see wire).  Per-room sequence numbers are assigned and the
fan-out enqueued in a single event-loop step, so every receiver observes
the same order without any global lock.
"""

import asyncio
import os
import time
from collections import deque
from dataclasses import dataclass, field

from .errors import ProtocolError
from .wire import read_frame, write_frame

MAX_NICKNAME_CHARS = 32
MAX_ROOM_CHARS = 64

ERR_THROTTLE = "throttle"
ERR_CONFLICT = "conflict"
ERR_VALIDATION = "validation"
ERR_AUTHORIZATION = "authorization"
ERR_DELIVERY = "delivery"
ERR_SIZE = "size"
ERR_MALFORMED = "malformed"
ERR_STATE = "state"
ERR_FULL = "full"


@dataclass
class RelayConfig:
    host: str = "127.0.0.1"
    port: int = 0  # 0 = pick a free port
    max_frame_bytes: int = 192 * 1024
    max_payload_bytes: int = 128 * 1024  # decoded ciphertext envelope cap
    max_occupants: int = 64
    registrations_per_minute: int = 30
    messages_per_second: float = 10.0
    send_queue_limit: int = 1024


def _valid_name(name, limit: int) -> bool:
    return (isinstance(name, str) and 1 <= len(name) <= limit and name.isprintable())


class _Connection:
    def __init__(self, server: "RelayServer", reader, writer):
        self.server = server
        self.reader = reader
        self.writer = writer
        peer = writer.get_extra_info("peername")
        self.address = peer[0] if peer else "?"
        self.conn_id: str | None = None
        self.rooms: dict[str, str] = {}  # room name -> my nickname
        self.queue: asyncio.Queue = asyncio.Queue(maxsize=server.config.send_queue_limit)
        self.closing = False
        # message token bucket
        self.tokens = server.config.messages_per_second
        self.last_refill = time.monotonic()

    def send(self, stanza: dict) -> None:
        if self.closing:
            return
        try:
            self.queue.put_nowait(stanza)
        except asyncio.QueueFull:
            # consumer too slow to matter; cut it loose
            self.closing = True
            self.writer.close()

    def send_error(self, code: str, detail: str, room: str | None = None) -> None:
        stanza = {"type": "error", "info": {"code": code, "detail": detail}}
        if room is not None:
            stanza["room"] = room
        self.send(stanza)

    async def throttle(self) -> None:
        """Token-bucket pacing: over-rate senders are slowed, not dropped."""
        rate = self.server.config.messages_per_second
        now = time.monotonic()
        self.tokens = min(rate, self.tokens + (now - self.last_refill) * rate)
        self.last_refill = now
        if self.tokens < 1.0:
            await asyncio.sleep((1.0 - self.tokens) / rate)
            self.last_refill = time.monotonic()
            self.tokens = 1.0
        self.tokens -= 1.0


@dataclass
class _Room:
    name: str
    created_at: float = field(default_factory=time.time)
    occupants: dict = field(default_factory=dict)  # nickname -> _Connection
    seq: int = 0
    sender_counts: dict = field(default_factory=dict)  # nickname -> messages sent


class RelayServer:
    def __init__(self, config: RelayConfig | None = None):
        self.config = config or RelayConfig()
        self.rooms: dict[str, _Room] = {}
        self.identities: dict[str, _Connection] = {}  # conn_id -> connection
        self._reg_times: dict[str, deque] = {}  # address -> successful registration times
        self._server: asyncio.AbstractServer | None = None
        self._conn_tasks: set[asyncio.Task] = set()

    # -- lifecycle ----------------------------------------------------------

    async def start(self) -> None:
        self._server = await asyncio.start_server(
            self._on_connection, self.config.host, self.config.port)

    @property
    def port(self) -> int:
        assert self._server is not None
        return self._server.sockets[0].getsockname()[1]

    async def close(self) -> None:
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
        for task in list(self._conn_tasks):
            task.cancel()
        if self._conn_tasks:
            await asyncio.gather(*self._conn_tasks, return_exceptions=True)

    def snapshot(self) -> dict:
        """Observable state, for ephemerality assertions in tests."""
        return {
            "rooms": {name: sorted(room.occupants) for name, room in self.rooms.items()},
            "identities": len(self.identities),
        }

    # -- connection plumbing -------------------------------------------------

    def _on_connection(self, reader, writer) -> None:
        conn = _Connection(self, reader, writer)
        task = asyncio.get_running_loop().create_task(self._serve(conn))
        self._conn_tasks.add(task)
        task.add_done_callback(self._conn_tasks.discard)

    async def _serve(self, conn: _Connection) -> None:
        sender = asyncio.get_running_loop().create_task(self._pump_out(conn))
        try:
            while True:
                try:
                    stanza = await read_frame(conn.reader, self.config.max_frame_bytes)
                except ProtocolError:
                    break  # unframeable peer: nothing sane to reply to
                if stanza is None:
                    break
                await self._dispatch(conn, stanza)
        except (ConnectionError, asyncio.CancelledError):
            pass
        finally:
            self._drop(conn)
            sender.cancel()
            try:
                await sender
            except asyncio.CancelledError:
                pass
            conn.writer.close()
            try:
                await conn.writer.wait_closed()
            except (ConnectionError, OSError):
                pass

    async def _pump_out(self, conn: _Connection) -> None:
        while True:
            stanza = await conn.queue.get()
            try:
                await write_frame(conn.writer, stanza, self.config.max_frame_bytes)
            except (ConnectionError, OSError):
                return

    def _drop(self, conn: _Connection) -> None:
        conn.closing = True
        for room_name, nick in list(conn.rooms.items()):
            self._leave_room(conn, room_name, nick)
        if conn.conn_id is not None:
            self.identities.pop(conn.conn_id, None)
            conn.conn_id = None

    # -- stanza dispatch ------------------------------------------------------

    async def _dispatch(self, conn: _Connection, stanza: dict) -> None:
        kind = stanza.get("type")
        if kind == "ping":
            reply = {"type": "pong"}
            if "info" in stanza:
                reply["info"] = stanza["info"]
            conn.send(reply)
            return
        if kind == "register":
            self._register(conn)
            return
        if kind not in ("join", "leave", "groupchat", "private"):
            conn.send_error(ERR_MALFORMED, f"unknown stanza type {kind!r}")
            return
        if conn.conn_id is None:
            conn.send_error(ERR_AUTHORIZATION, "not registered")
            return
        if kind == "join":
            self._join(conn, stanza)
        elif kind == "leave":
            self._leave(conn, stanza)
        else:
            await conn.throttle()
            if kind == "groupchat":
                self._groupchat(conn, stanza)
            else:
                self._private(conn, stanza)

    def _register(self, conn: _Connection) -> None:
        if conn.conn_id is not None:
            conn.send_error(ERR_STATE, "already registered")
            return
        window = self._reg_times.setdefault(conn.address, deque())
        now = time.monotonic()
        while window and now - window[0] > 60.0:
            window.popleft()
        if len(window) >= self.config.registrations_per_minute:
            conn.send_error(ERR_THROTTLE, "registration rate limit exceeded")
            return
        window.append(now)
        conn.conn_id = os.urandom(16).hex()
        self.identities[conn.conn_id] = conn
        conn.send({"type": "register", "info": {"conn_id": conn.conn_id}})

    def _join(self, conn: _Connection, stanza: dict) -> None:
        room_name = stanza.get("room")
        nick = stanza.get("from")
        if not _valid_name(room_name, MAX_ROOM_CHARS):
            conn.send_error(ERR_VALIDATION, "bad room name")
            return
        if not _valid_name(nick, MAX_NICKNAME_CHARS):
            conn.send_error(ERR_VALIDATION, "bad nickname", room_name)
            return
        if room_name in conn.rooms:
            conn.send_error(ERR_STATE, "already in room", room_name)
            return
        room = self.rooms.get(room_name)
        if room is None:
            room = self.rooms[room_name] = _Room(name=room_name)
        if nick in room.occupants:
            conn.send_error(ERR_CONFLICT, f"nickname {nick!r} in use", room_name)
            return
        if len(room.occupants) >= self.config.max_occupants:
            conn.send_error(ERR_FULL, "room is full", room_name)
            return
        room.occupants[nick] = conn
        conn.rooms[room_name] = nick
        conn.send({
            "type": "joined",
            "room": room_name,
            "info": {"occupants": sorted(room.occupants), "seq": room.seq},
        })
        self._presence(room, nick, "join", exclude=conn)

    def _leave(self, conn: _Connection, stanza: dict) -> None:
        room_name = stanza.get("room")
        nick = conn.rooms.get(room_name) if isinstance(room_name, str) else None
        if nick is None:
            conn.send_error(ERR_STATE, "not in that room", room_name if isinstance(room_name, str) else None)
            return
        self._leave_room(conn, room_name, nick)
        conn.send({"type": "left", "room": room_name})

    def _leave_room(self, conn: _Connection, room_name: str, nick: str) -> None:
        conn.rooms.pop(room_name, None)
        room = self.rooms.get(room_name)
        if room is None or room.occupants.get(nick) is not conn:
            return
        del room.occupants[nick]
        if room.occupants:
            self._presence(room, nick, "leave", exclude=None)
        else:
            del self.rooms[room_name]  # rooms exist only while occupied

    def _presence(self, room: _Room, nick: str, event: str, exclude) -> None:
        stanza = {"type": "presence", "room": room.name, "from": nick,
                  "info": {"event": event}}
        for member in room.occupants.values():
            if member is not exclude:
                member.send(stanza)

    def _check_payload(self, conn: _Connection, stanza: dict, room_name) -> str | None:
        payload = stanza.get("payload")
        if not isinstance(payload, str):
            conn.send_error(ERR_MALFORMED, "payload must be base64 text", room_name)
            return None
        # size policy without inspecting content: base64 grows by exactly 4/3
        if len(payload) * 3 // 4 > self.config.max_payload_bytes:
            conn.send_error(ERR_SIZE, "payload exceeds size cap", room_name)
            return None
        return payload

    def _sender_room(self, conn: _Connection, stanza: dict):
        room_name = stanza.get("room")
        nick = conn.rooms.get(room_name) if isinstance(room_name, str) else None
        if nick is None:
            conn.send_error(ERR_AUTHORIZATION, "not an occupant",
                            room_name if isinstance(room_name, str) else None)
            return None
        return self.rooms[room_name], nick

    def _groupchat(self, conn: _Connection, stanza: dict) -> None:
        located = self._sender_room(conn, stanza)
        if located is None:
            return
        room, nick = located
        payload = self._check_payload(conn, stanza, room.name)
        if payload is None:
            return
        room.seq += 1
        room.sender_counts[nick] = room.sender_counts.get(nick, 0) + 1
        out = {"type": "groupchat", "room": room.name, "from": nick,
               "seq": room.seq, "payload": payload}
        for member_nick, member in room.occupants.items():
            if member_nick != nick:
                member.send(out)

    def _private(self, conn: _Connection, stanza: dict) -> None:
        located = self._sender_room(conn, stanza)
        if located is None:
            return
        room, nick = located
        payload = self._check_payload(conn, stanza, room.name)
        if payload is None:
            return
        target_nick = stanza.get("to")
        target = room.occupants.get(target_nick) if isinstance(target_nick, str) else None
        if target is None:
            conn.send_error(ERR_DELIVERY, f"no occupant {target_nick!r}", room.name)
            return
        room.seq += 1
        room.sender_counts[nick] = room.sender_counts.get(nick, 0) + 1
        target.send({"type": "private", "room": room.name, "from": nick,
                     "to": target_nick, "seq": room.seq, "payload": payload})


async def serve_forever(config: RelayConfig | None = None,
                        ready: asyncio.Event | None = None,
                        announce=None) -> None:
    server = RelayServer(config)
    await server.start()
    if announce is not None:
        announce(server.port)
    if ready is not None:
        ready.set()
    try:
        await asyncio.Event().wait()  # runs until cancelled
    finally:
        await server.close()
