"""Client daemon: owns all key material and every cryptographic decision.

The engine generates its ephemeral identity in a worker process (the
control path stays responsive), joins one room on a relay, announces its
public keys, seals and opens group traffic, runs signed-DH sessions for
private messages, drives SMP verification and file transfer over those
sessions, and exposes a loopback JSON API for UIs.  Anything inbound that
fails to decode, decrypt, or authenticate is dropped and surfaced as a
warning event with a reason code; it never becomes a message.
"""

import asyncio
import concurrent.futures
import json
import multiprocessing
import os
import time
from dataclasses import dataclass, field
from hashlib import sha256
from pathlib import Path

from . import group as groupmod
from . import smp as smpmod
from . import xfer as xfermod
from .catfacts import fact
from .encoding import b64decode, b64encode, int_to_bytes, lp
from .errors import (
    AuthenticationError,
    HushroomError,
    NoKeyError,
    ProtocolError,
    UsageError,
)
from .numtheory import (
    PROFILES,
    DsaKeyPair,
    DsaParams,
    DsaSignature,
    dsa_sign,
    dsa_verify,
    generate_keypair,
    generate_params,
    truncated_digest,
)
from .rng import Csprng
from .session import (
    AkeMessage1,
    AkeMessage2,
    ColorCode,
    Fingerprint,
    SealedMessage,
    SessionKeys,
    ake_finalize,
    ake_initiate,
    ake_respond,
    check_dh_element,
    color_code,
    dh_keypair,
    fingerprint,
    open_message,
    seal_message,
)
from .wire import read_frame, write_frame

# envelope kinds: first byte of every stanza payload
ENV_ANNOUNCE = 0x01
ENV_GROUP = 0x02
ENV_AKE1 = 0x03
ENV_AKE2 = 0x04
ENV_PAIR = 0x05

WARN_BAD_MAC = "bad_mac"
WARN_BAD_SIG = "bad_sig"
WARN_REPLAY = "replay"
WARN_MALFORMED = "malformed"
WARN_NO_KEY = "no_key"

AUTH_UNVERIFIED = "unverified"
AUTH_SMP = "smp_verified"
AUTH_FINGERPRINT = "fingerprint_verified"

SESSION_TIMEOUT = 15.0
MAX_HEX_CHARS = 2048  # caps attacker-chosen integers at 8192 bits
VIEW_MESSAGE_CAP = 1000


def _keygen_worker(profile_name: str) -> tuple:
    rng = Csprng.from_os_entropy()
    params = generate_params(PROFILES[profile_name], rng)
    key = generate_keypair(params, rng)
    return params.p, params.q, params.g, key.x, key.y


def _hex_int(obj: dict, key: str) -> int:
    value = obj.get(key)
    if not isinstance(value, str) or not value or len(value) > MAX_HEX_CHARS:
        raise ProtocolError(f"bad integer field {key!r}")
    try:
        return int(value, 16)
    except ValueError as err:
        raise ProtocolError(f"bad integer field {key!r}") from err


def _announce_digest(nick: str, dh_public: int, params: DsaParams, y: int) -> bytes:
    return truncated_digest(lp(
        b"announce",
        nick.encode("utf-8"),
        int_to_bytes(dh_public),
        int_to_bytes(params.p),
        int_to_bytes(params.q),
        int_to_bytes(params.g),
        int_to_bytes(y),
    ))


def _check_params(params: DsaParams) -> None:
    """Sanity on peer-asserted DSA parameters: shape, not primality.

    A peer lying about its own parameters only weakens its own
    authenticity; substitution across peers is what fingerprints and SMP
    exist to catch.
    """
    if params.p.bit_length() != 1024 or params.q.bit_length() != 160:
        raise ProtocolError("bad DSA parameter sizes")
    if (params.p - 1) % params.q != 0 or not 1 < params.g < params.p:
        raise ProtocolError("bad DSA group structure")
    if pow(params.g, params.q, params.p) != 1:
        raise ProtocolError("DSA generator has wrong order")


def _ake_to_obj(msg) -> dict:
    return {
        "dh": format(msg.dh_public, "x"),
        "p": format(msg.dsa_params.p, "x"),
        "q": format(msg.dsa_params.q, "x"),
        "g": format(msg.dsa_params.g, "x"),
        "y": format(msg.dsa_y, "x"),
        "r": format(msg.sig.r, "x"),
        "s": format(msg.sig.s, "x"),
    }


def _ake_from_obj(cls, obj: dict):
    params = DsaParams(p=_hex_int(obj, "p"), q=_hex_int(obj, "q"), g=_hex_int(obj, "g"))
    return cls(
        dh_public=_hex_int(obj, "dh"),
        dsa_params=params,
        dsa_y=_hex_int(obj, "y"),
        sig=DsaSignature(r=_hex_int(obj, "r"), s=_hex_int(obj, "s")),
    )


@dataclass
class EngineConfig:
    keygen_profile: str = "optimized"
    # "thread" keeps the API responsive (the longest GIL-held primitive is
    # one ~1024-bit modexp, a few ms); "process" moves keygen out entirely
    # but requires an importable __main__, so it is opt-in for the daemon.
    keygen_executor: str = "thread"
    default_server: str | None = None
    api_host: str = "127.0.0.1"
    api_port: int = 0
    file_size_cap: int = 256 * 1024 * 1024
    session_timeout: float = SESSION_TIMEOUT


@dataclass
class Buddy:
    nickname: str
    dh_public: int
    params: DsaParams
    y: int
    fp: Fingerprint
    colors: ColorCode
    auth_status: str = AUTH_UNVERIFIED
    session: SessionKeys | None = None
    session_id: bytes | None = None
    file_keys: xfermod.FileKeys | None = None
    pending_ake: object | None = None
    session_waiters: list = field(default_factory=list)
    smp: smpmod.SmpState | None = None
    smp_pending: smpmod.SmpMsg1 | None = None  # question awaiting a local answer

    def public_view(self) -> dict:
        return {
            "nickname": self.nickname,
            "fingerprint": self.fp.display,
            "colors": [list(c) for c in self.colors.colors],
            "auth_status": self.auth_status,
            "session": self.session is not None,
        }


class Engine:
    def __init__(self, config: EngineConfig | None = None):
        self.config = config or EngineConfig()
        self._rng = Csprng.from_os_entropy()
        self._dsa: DsaKeyPair | None = None
        self._fp: Fingerprint | None = None
        self._colors: ColorCode | None = None
        self._keygen_done = asyncio.Event()
        self._keygen_error: Exception | None = None
        self._keygen_task: asyncio.Task | None = None
        self._keygen_phase = "idle"
        self._keygen_started = 0.0

        # room state
        self._room: str | None = None
        self._me: str | None = None
        self._identity: groupmod.GroupIdentity | None = None
        self._buddies: dict[str, Buddy] = {}
        self._transcript: list[groupmod.GroupMessage] = []
        self._messages: list[dict] = []  # conversation view entries

        # relay connection
        self._reader = None
        self._writer = None
        self._reader_task: asyncio.Task | None = None
        self._pending: dict[str, asyncio.Future] = {}
        self._closing = False

        # transfers
        self._outgoing: dict[str, dict] = {}  # sid -> frames awaiting accept
        self._offers: dict[str, dict] = {}  # sid -> inbound offer metadata
        self._incoming: dict[str, dict] = {}  # sid -> accepted, accumulating
        self._tasks: set[asyncio.Task] = set()

        # events
        self._events: list[dict] = []
        self._event_cond: asyncio.Condition = asyncio.Condition()
        self._subscribers: list[asyncio.Queue] = []

        # local API
        self._api_server: asyncio.AbstractServer | None = None

    # -- events ---------------------------------------------------------------

    def _emit(self, kind: str, **data) -> None:
        event = {"seq": len(self._events) + 1, "kind": kind, "data": data}
        self._events.append(event)
        for queue in self._subscribers:
            try:
                queue.put_nowait({"event": kind, "data": data, "seq": event["seq"]})
            except asyncio.QueueFull:
                pass
        self._spawn(self._notify_events())

    async def _notify_events(self) -> None:
        async with self._event_cond:
            self._event_cond.notify_all()

    def events(self, kind: str | None = None) -> list[dict]:
        if kind is None:
            return list(self._events)
        return [e for e in self._events if e["kind"] == kind]

    async def wait_for(self, kind: str, pred=None, timeout: float = 10.0,
                       after_seq: int = 0) -> dict:
        """Block until an event of `kind` (matching `pred`) exists."""
        loop = asyncio.get_running_loop()
        deadline = loop.time() + timeout
        index = 0
        async with self._event_cond:
            while True:
                while index < len(self._events):
                    event = self._events[index]
                    index += 1
                    if (event["kind"] == kind and event["seq"] > after_seq
                            and (pred is None or pred(event))):
                        return event
                remaining = deadline - loop.time()
                if remaining <= 0:
                    raise TimeoutError(f"no {kind!r} event within {timeout}s")
                try:
                    await asyncio.wait_for(self._event_cond.wait(), remaining)
                except asyncio.TimeoutError:
                    raise TimeoutError(f"no {kind!r} event within {timeout}s") from None

    def _spawn(self, coro) -> asyncio.Task:
        task = asyncio.get_running_loop().create_task(coro)
        self._tasks.add(task)
        task.add_done_callback(self._tasks.discard)
        return task

    # -- lifecycle --------------------------------------------------------------

    async def start(self) -> None:
        """Kick off identity generation; returns immediately."""
        if self._keygen_task is not None:
            raise UsageError("session already started")
        self._keygen_task = self._spawn(self._run_keygen())

    async def wait_ready(self, timeout: float = 120.0) -> None:
        await asyncio.wait_for(self._keygen_done.wait(), timeout)
        if self._keygen_error is not None:
            raise self._keygen_error

    def _keygen_pool(self):
        if self.config.keygen_executor == "process":
            ctx = multiprocessing.get_context("spawn")
            return concurrent.futures.ProcessPoolExecutor(max_workers=1, mp_context=ctx)
        return concurrent.futures.ThreadPoolExecutor(max_workers=1)

    async def _run_keygen(self) -> None:
        self._keygen_phase = "searching"
        self._keygen_started = time.monotonic()
        fact_index = int.from_bytes(os.urandom(2), "big")
        self._emit("keygen_progress", phase="searching", elapsed_ms=0,
                   fact=fact(fact_index))
        loop = asyncio.get_running_loop()
        pool = self._keygen_pool()
        try:
            future = loop.run_in_executor(pool, _keygen_worker, self.config.keygen_profile)
            while True:
                done, _ = await asyncio.wait([future], timeout=0.4)
                elapsed_ms = int((time.monotonic() - self._keygen_started) * 1000)
                if done:
                    break
                fact_index += 1
                self._emit("keygen_progress", phase="searching",
                           elapsed_ms=elapsed_ms, fact=fact(fact_index))
            p, q, g, x, y = future.result()
        except Exception as err:
            self._keygen_phase = "failed"
            self._keygen_error = err
            self._keygen_done.set()
            self._emit("error", code="keygen_failed", detail=str(err))
            return
        finally:
            pool.shutdown(wait=False)
        params = DsaParams(p=p, q=q, g=g)
        self._dsa = DsaKeyPair(params=params, x=x, y=y)
        self._fp = fingerprint(y, params)
        self._colors = color_code(self._fp)
        self._keygen_phase = "done"
        self._emit("keygen_progress", phase="done",
                   elapsed_ms=int((time.monotonic() - self._keygen_started) * 1000),
                   fact=fact(fact_index + 1))
        self._keygen_done.set()

    async def aclose(self) -> None:
        self._closing = True
        if self._api_server is not None:
            self._api_server.close()
            await self._api_server.wait_closed()
        await self._disconnect()
        for task in list(self._tasks):
            task.cancel()
        if self._tasks:
            await asyncio.gather(*self._tasks, return_exceptions=True)

    async def _disconnect(self) -> None:
        if self._reader_task is not None:
            self._reader_task.cancel()
            try:
                await self._reader_task
            except (asyncio.CancelledError, Exception):
                pass
            self._reader_task = None
        if self._writer is not None:
            self._writer.close()
            try:
                await self._writer.wait_closed()
            except (ConnectionError, OSError):
                pass
            self._writer = None
            self._reader = None
        self._room = None
        self._me = None
        self._identity = None
        self._buddies = {}
        self._transcript = []
        self._outgoing = {}
        self._offers = {}
        self._incoming = {}

    # -- status -------------------------------------------------------------------

    def status(self) -> dict:
        elapsed = 0
        if self._keygen_phase != "idle":
            elapsed = int((time.monotonic() - self._keygen_started) * 1000)
        transcript_digest = None
        if self._transcript:
            transcript_digest = groupmod.transcript_digest(self._transcript).hex()
        return {
            "ready": self._dsa is not None,
            "keygen": {"phase": self._keygen_phase, "elapsed_ms": elapsed},
            "fingerprint": self._fp.display if self._fp else None,
            "colors": [list(c) for c in self._colors.colors] if self._colors else None,
            "room": self._room,
            "me": self._me,
            "buddies": [b.public_view() for b in self._buddies.values()],
            "messages": self._messages[-50:],
            "transcript_digest": transcript_digest,
        }

    # -- relay plumbing --------------------------------------------------------------

    async def _send_stanza(self, stanza: dict) -> None:
        if self._writer is None:
            raise UsageError("not connected to a relay")
        await write_frame(self._writer, stanza)

    def _await_reply(self, kind: str) -> asyncio.Future:
        future = asyncio.get_running_loop().create_future()
        self._pending[kind] = future
        return future

    async def _rpc(self, stanza: dict, reply_kind: str, timeout: float = 10.0) -> dict:
        future = self._await_reply(reply_kind)
        try:
            await self._send_stanza(stanza)
            return await asyncio.wait_for(future, timeout)
        finally:
            self._pending.pop(reply_kind, None)

    async def join_room(self, server: str | None, room: str, nickname: str) -> dict:
        await self.wait_ready()
        if self._room is not None:
            raise UsageError("already in a room; leave first")
        if server is None:
            server = self.config.default_server
        if server is None:
            raise UsageError("no relay address: pass one or configure a default")
        host, _, port_text = server.rpartition(":")
        if not host or not port_text.isdigit():
            raise UsageError(f"server address must be host:port, got {server!r}")
        if not 1 <= len(nickname) <= groupmod.MAX_NICKNAME:
            raise UsageError("nickname must be 1-32 characters")
        self._reader, self._writer = await asyncio.open_connection(host, int(port_text))
        self._reader_task = self._spawn(self._read_loop())
        await self._rpc({"type": "register"}, "register")
        joined = await self._rpc({"type": "join", "room": room, "from": nickname}, "joined")
        dh_private, dh_public = dh_keypair(self._rng)
        self._identity = groupmod.GroupIdentity(
            dh_private=dh_private, dh_public=dh_public,
            dsa=self._dsa, nickname=nickname)
        self._room = room
        self._me = nickname
        occupants = joined.get("info", {}).get("occupants", [])
        self._emit("joined", room=room, me=nickname, occupants=occupants)
        await self._send_announce()
        return {"room": room, "occupants": occupants}

    async def leave_room(self) -> None:
        if self._room is None:
            raise UsageError("not in a room")
        try:
            await self._rpc({"type": "leave", "room": self._room}, "left", timeout=5.0)
        finally:
            await self._disconnect()

    async def _read_loop(self) -> None:
        try:
            while True:
                stanza = await read_frame(self._reader)
                if stanza is None:
                    break
                await self._on_stanza(stanza)
        except asyncio.CancelledError:
            raise
        except (ConnectionError, ProtocolError, OSError):
            pass
        if not self._closing:
            self._emit("error", code="disconnected", detail="relay connection lost")

    # -- inbound dispatch ---------------------------------------------------------------

    async def _on_stanza(self, stanza: dict) -> None:
        try:
            kind = stanza.get("type")
            if kind in ("register", "joined", "left"):
                future = self._pending.pop(kind, None)
                if future is not None and not future.done():
                    future.set_result(stanza)
                return
            if kind == "error":
                self._on_relay_error(stanza)
                return
            if kind == "presence":
                self._spawn(self._guarded(self._on_presence(stanza)))
                return
            if kind == "groupchat":
                self._on_groupchat(stanza)
                return
            if kind == "private":
                await self._on_private(stanza)
                return
            if kind == "pong":
                return
            self._warn(WARN_MALFORMED, f"unhandled stanza type {kind!r}")
        except HushroomError as err:
            self._warn(err.reason, str(err))
        except Exception as err:  # discard policy: nothing inbound may crash us
            self._warn(WARN_MALFORMED, f"{type(err).__name__}: {err}")

    def _warn(self, reason: str, detail: str) -> None:
        self._emit("warning", reason=reason, detail=detail)

    async def _guarded(self, coro) -> None:
        """Discard policy for handlers that run as their own task."""
        try:
            await coro
        except HushroomError as err:
            self._warn(err.reason, str(err))
        except Exception as err:
            self._warn(WARN_MALFORMED, f"{type(err).__name__}: {err}")

    def _on_relay_error(self, stanza: dict) -> None:
        info = stanza.get("info") or {}
        code = info.get("code", "unknown")
        detail = info.get("detail", "")
        if self._pending:
            kind = next(iter(self._pending))
            future = self._pending.pop(kind)
            if not future.done():
                future.set_exception(ProtocolError(
                    f"relay rejected {kind}: {code}: {detail}", reason=code))
                return
        self._emit("error", code=code, detail=detail)

    async def _on_presence(self, stanza: dict) -> None:
        nick = stanza.get("from")
        info = stanza.get("info")
        event = info.get("event") if isinstance(info, dict) else None
        if not isinstance(nick, str) or nick == self._me:
            return
        if event == "join":
            # newcomer needs our keys; announces are idempotent
            await self._send_announce()
        elif event == "leave":
            buddy = self._buddies.pop(nick, None)
            if buddy is not None:
                for waiter in buddy.session_waiters:
                    if not waiter.done():
                        waiter.set_exception(ProtocolError(f"{nick} left"))
                self._emit("buddy_left", nickname=nick)

    # -- announces -----------------------------------------------------------------------

    async def _send_announce(self) -> None:
        if self._identity is None:
            return
        me = self._identity
        params = me.dsa.params
        digest = _announce_digest(me.nickname, me.dh_public, params, me.dsa.y)
        sig = dsa_sign(me.dsa, digest, self._rng)
        body = {
            "nick": me.nickname,
            "dh": format(me.dh_public, "x"),
            "p": format(params.p, "x"),
            "q": format(params.q, "x"),
            "g": format(params.g, "x"),
            "y": format(me.dsa.y, "x"),
            "r": format(sig.r, "x"),
            "s": format(sig.s, "x"),
        }
        await self._send_envelope("groupchat", None, ENV_ANNOUNCE,
                                  json.dumps(body).encode("utf-8"))

    def _on_announce(self, sender: str, body: bytes) -> None:
        obj = json.loads(body.decode("utf-8"))
        nick = obj.get("nick")
        if nick != sender:
            raise ProtocolError("announce nickname does not match stanza origin")
        params = DsaParams(p=_hex_int(obj, "p"), q=_hex_int(obj, "q"), g=_hex_int(obj, "g"))
        _check_params(params)
        y = _hex_int(obj, "y")
        if not 1 < y < params.p:
            raise ProtocolError("announce public key out of range")
        dh_public = _hex_int(obj, "dh")
        check_dh_element(dh_public)
        sig = DsaSignature(r=_hex_int(obj, "r"), s=_hex_int(obj, "s"))
        digest = _announce_digest(nick, dh_public, params, y)
        if not dsa_verify(params, y, digest, sig):
            raise AuthenticationError("announce signature did not verify")
        existing = self._buddies.get(nick)
        if existing is not None:
            same = (existing.dh_public == dh_public and existing.params == params
                    and existing.y == y)
            if not same:
                raise AuthenticationError(
                    f"announce from {nick!r} changed keys mid-room; rejected")
            return
        fp = fingerprint(y, params)
        self._buddies[nick] = Buddy(
            nickname=nick, dh_public=dh_public, params=params, y=y,
            fp=fp, colors=color_code(fp))
        self._emit("buddy_joined", **self._buddies[nick].public_view())

    # -- envelopes ------------------------------------------------------------------------

    async def _send_envelope(self, stanza_type: str, to: str | None,
                             env_kind: int, body: bytes) -> None:
        stanza = {
            "type": stanza_type,
            "room": self._room,
            "payload": b64encode(bytes([env_kind]) + body),
        }
        if to is not None:
            stanza["to"] = to
        await self._send_stanza(stanza)

    @staticmethod
    def _decode_envelope(stanza: dict) -> tuple[int, bytes]:
        payload = stanza.get("payload")
        if not isinstance(payload, str):
            raise ProtocolError("stanza payload missing")
        raw = b64decode(payload)
        if not raw:
            raise ProtocolError("empty envelope")
        return raw[0], raw[1:]

    def _require_buddy(self, nick) -> Buddy:
        if not isinstance(nick, str):
            raise ProtocolError("stanza origin missing")
        buddy = self._buddies.get(nick)
        if buddy is None:
            raise NoKeyError(f"no announced keys for {nick!r}")
        return buddy

    # -- group traffic ----------------------------------------------------------------------

    async def send_group(self, text: str) -> dict:
        if self._identity is None:
            raise UsageError("not in a room")
        roster = {n: (b.dh_public, (b.params, b.y)) for n, b in self._buddies.items()}
        roster[self._me] = (self._identity.dh_public, (self._dsa.params, self._dsa.y))
        if len(roster) < 2:
            raise UsageError("nobody else has announced keys in this room yet")
        message = groupmod.group_seal(self._identity, roster, text.encode("utf-8"), self._rng)
        await self._send_envelope("groupchat", None, ENV_GROUP,
                                  groupmod.encode_group_message(message))
        self._record_message(self._me, text, private=False, state="sent")
        return {"counter": message.counter}

    def _on_groupchat(self, stanza: dict) -> None:
        env_kind, body = self._decode_envelope(stanza)
        sender = stanza.get("from")
        if env_kind == ENV_ANNOUNCE:
            if not isinstance(sender, str):
                raise ProtocolError("announce without origin")
            self._on_announce(sender, body)
            return
        if env_kind != ENV_GROUP:
            raise ProtocolError(f"unexpected envelope kind {env_kind} in groupchat")
        buddy = self._require_buddy(sender)
        message = groupmod.decode_group_message(body)
        if message.sender != sender:
            raise ProtocolError("group message sender does not match stanza origin")
        plaintext = groupmod.group_open(
            self._identity, (buddy.dh_public, (buddy.params, buddy.y)), message)
        self._transcript.append(message)
        text = plaintext.decode("utf-8")
        self._record_message(sender, text, private=False, state="received")
        self._emit("message", room=self._room, sender=sender, text=text, private=False)

    def _record_message(self, sender: str, text: str, private: bool, state: str) -> None:
        self._messages.append({
            "sender": sender, "text": text, "timestamp": time.time(),
            "private": private, "state": state,
        })
        if len(self._messages) > VIEW_MESSAGE_CAP:
            del self._messages[: len(self._messages) - VIEW_MESSAGE_CAP]

    # -- private sessions -----------------------------------------------------------------------

    def _adopt_session(self, buddy: Buddy, keys: SessionKeys) -> None:
        buddy.session = keys
        buddy.session_id = sha256(b"session-id" + keys.extra_key).digest()[:16]
        buddy.file_keys = xfermod.derive_file_keys(keys.extra_key)
        buddy.pending_ake = None
        buddy.smp = None
        buddy.smp_pending = None
        for waiter in buddy.session_waiters:
            if not waiter.done():
                waiter.set_result(None)
        buddy.session_waiters.clear()

    async def _ensure_session(self, nick: str) -> Buddy:
        buddy = self._buddies.get(nick)
        if buddy is None:
            raise UsageError(f"no announced buddy {nick!r}")
        if buddy.session is not None:
            return buddy
        if buddy.pending_ake is None:
            state, msg1 = ake_initiate(self._dsa, self._rng)
            buddy.pending_ake = state
            await self._send_envelope(
                "private", nick, ENV_AKE1,
                json.dumps(_ake_to_obj(msg1)).encode("utf-8"))
        waiter = asyncio.get_running_loop().create_future()
        buddy.session_waiters.append(waiter)
        await asyncio.wait_for(waiter, self.config.session_timeout)
        return buddy

    def _pin_identity(self, buddy: Buddy, msg) -> None:
        if msg.dsa_params != buddy.params or msg.dsa_y != buddy.y:
            raise AuthenticationError(
                f"key exchange identity does not match announce from {buddy.nickname!r}")

    async def _on_ake1(self, nick: str, body: bytes) -> None:
        buddy = self._require_buddy(nick)
        msg1 = _ake_from_obj(AkeMessage1, json.loads(body.decode("utf-8")))
        self._pin_identity(buddy, msg1)
        if buddy.pending_ake is not None:
            if self._fp.digest < buddy.fp.digest:
                return  # peer will answer our offer; drop theirs
            buddy.pending_ake = None  # yield: answer theirs instead
        keys, msg2 = ake_respond(self._dsa, msg1, self._rng)
        await self._send_envelope(
            "private", nick, ENV_AKE2,
            json.dumps(_ake_to_obj(msg2)).encode("utf-8"))
        self._adopt_session(buddy, keys)

    async def _on_ake2(self, nick: str, body: bytes) -> None:
        buddy = self._require_buddy(nick)
        if buddy.pending_ake is None:
            raise ProtocolError(f"unrequested key exchange reply from {nick!r}")
        msg2 = _ake_from_obj(AkeMessage2, json.loads(body.decode("utf-8")))
        self._pin_identity(buddy, msg2)
        keys = ake_finalize(buddy.pending_ake, msg2)
        self._adopt_session(buddy, keys)

    async def _send_pair(self, buddy: Buddy, obj: dict) -> None:
        sealed = seal_message(buddy.session, json.dumps(obj).encode("utf-8"), self._rng)
        await self._send_envelope("private", buddy.nickname, ENV_PAIR, sealed.to_bytes())

    async def _on_private(self, stanza: dict) -> None:
        env_kind, body = self._decode_envelope(stanza)
        nick = stanza.get("from")
        if env_kind == ENV_AKE1:
            await self._on_ake1(nick, body)
            return
        if env_kind == ENV_AKE2:
            await self._on_ake2(nick, body)
            return
        if env_kind != ENV_PAIR:
            raise ProtocolError(f"unexpected envelope kind {env_kind} in private")
        buddy = self._require_buddy(nick)
        if buddy.session is None:
            raise NoKeyError(f"sealed message from {nick!r} before key exchange")
        sealed = SealedMessage.from_bytes(body)
        plaintext = open_message(buddy.session, sealed)
        obj = json.loads(plaintext.decode("utf-8"))
        if not isinstance(obj, dict):
            raise ProtocolError("sealed body must be a JSON object")
        await self._on_pair(buddy, obj)

    async def _on_pair(self, buddy: Buddy, obj: dict) -> None:
        kind = obj.get("t")
        if kind == "chat":
            text = obj.get("text")
            if not isinstance(text, str):
                raise ProtocolError("chat body missing text")
            self._record_message(buddy.nickname, text, private=True, state="received")
            self._emit("message", room=self._room, sender=buddy.nickname,
                       text=text, private=True)
        elif kind == "smp":
            await self._on_smp(buddy, obj)
        elif kind == "file_offer":
            self._on_file_offer(buddy, obj)
        elif kind == "file_accept":
            self._on_file_accept(buddy, obj)
        elif kind == "ibb":
            self._on_ibb(buddy, obj)
        else:
            raise ProtocolError(f"unknown sealed message type {kind!r}")

    async def send_private(self, to: str, text: str) -> dict:
        buddy = await self._ensure_session(to)
        await self._send_pair(buddy, {"t": "chat", "text": text})
        self._record_message(self._me, text, private=True, state="sent")
        return {"to": to}

    def confirm_fingerprint(self, nickname: str) -> dict:
        buddy = self._buddies.get(nickname)
        if buddy is None:
            raise UsageError(f"no announced buddy {nickname!r}")
        buddy.auth_status = AUTH_FINGERPRINT
        return buddy.public_view()

    # -- SMP ----------------------------------------------------------------------------------------

    async def start_smp(self, to: str, question: str, answer: str) -> dict:
        buddy = await self._ensure_session(to)
        if buddy.smp is not None and buddy.smp.phase not in (smpmod.PHASE_IDLE, smpmod.PHASE_DONE):
            raise UsageError(f"verification with {to!r} already running")
        buddy.smp = smpmod.SmpState()
        secret = smpmod.smp_secret(self._fp, buddy.fp, buddy.session_id, answer)
        msg1 = smpmod.smp_start(buddy.smp, secret, question, self._rng)
        await self._send_pair(buddy, {"t": "smp", "step": 1,
                                      "body": smpmod.msg_to_dict(msg1)})
        return {"to": to, "question": question}

    async def answer_smp(self, to: str, answer: str) -> dict:
        buddy = self._buddies.get(to)
        if buddy is None or buddy.smp_pending is None:
            raise UsageError(f"no verification request from {to!r}")
        msg1 = buddy.smp_pending
        buddy.smp_pending = None
        buddy.smp = smpmod.SmpState()
        secret = smpmod.smp_secret(buddy.fp, self._fp, buddy.session_id, answer)
        try:
            msg2 = smpmod.smp_msg2(buddy.smp, secret, msg1, self._rng)
        except smpmod.SmpAbortedError:
            await self._finish_smp(buddy, smpmod.ABORTED, notify=True)
            return {"to": to, "outcome": smpmod.ABORTED}
        await self._send_pair(buddy, {"t": "smp", "step": 2,
                                      "body": smpmod.msg_to_dict(msg2)})
        return {"to": to}

    async def _finish_smp(self, buddy: Buddy, outcome: str, notify: bool) -> None:
        buddy.smp = None
        buddy.smp_pending = None
        if outcome == smpmod.MATCH:
            buddy.auth_status = AUTH_SMP
        if notify and buddy.session is not None:
            try:
                await self._send_pair(buddy, {"t": "smp", "step": 0})
            except (HushroomError, ConnectionError, OSError):
                pass
        self._emit("smp_result", nickname=buddy.nickname, outcome=outcome)

    async def _on_smp(self, buddy: Buddy, obj: dict) -> None:
        step = obj.get("step")
        if step == 0:
            if buddy.smp is not None or buddy.smp_pending is not None:
                buddy.smp = None
                buddy.smp_pending = None
                self._emit("smp_result", nickname=buddy.nickname, outcome=smpmod.ABORTED)
            return
        body = obj.get("body")
        if not isinstance(body, dict):
            raise ProtocolError("verification message missing body")
        try:
            if step == 1:
                msg1 = smpmod.msg_from_dict(smpmod.SmpMsg1, body)
                if not isinstance(msg1.question, str):
                    raise ProtocolError("verification question must be text")
                buddy.smp_pending = msg1
                self._emit("smp_request", nickname=buddy.nickname, question=msg1.question)
            elif step == 2:
                if buddy.smp is None:
                    raise ProtocolError("verification reply without a running exchange")
                msg2 = smpmod.msg_from_dict(smpmod.SmpMsg2, body)
                msg3 = smpmod.smp_msg3(buddy.smp, msg2, self._rng)
                await self._send_pair(buddy, {"t": "smp", "step": 3,
                                              "body": smpmod.msg_to_dict(msg3)})
            elif step == 3:
                if buddy.smp is None:
                    raise ProtocolError("verification continuation without state")
                msg3 = smpmod.msg_from_dict(smpmod.SmpMsg3, body)
                msg4 = smpmod.smp_msg4(buddy.smp, msg3, self._rng)
                outcome = buddy.smp.outcome
                await self._send_pair(buddy, {"t": "smp", "step": 4,
                                              "body": smpmod.msg_to_dict(msg4)})
                await self._finish_smp(buddy, outcome, notify=False)
            elif step == 4:
                if buddy.smp is None:
                    raise ProtocolError("verification conclusion without state")
                msg4 = smpmod.msg_from_dict(smpmod.SmpMsg4, body)
                outcome = smpmod.smp_complete(buddy.smp, msg4)
                await self._finish_smp(buddy, outcome, notify=False)
            else:
                raise ProtocolError(f"bad verification step {step!r}")
        except smpmod.SmpAbortedError as err:
            await self._finish_smp(buddy, smpmod.ABORTED, notify=True)
            self._warn(WARN_BAD_SIG, f"verification proof failed: {err}")
        except ProtocolError:
            if buddy.smp is not None:
                await self._finish_smp(buddy, smpmod.ABORTED, notify=True)
            raise

    # -- file transfer ----------------------------------------------------------------------------------

    async def offer_file(self, to: str, path: str) -> dict:
        buddy = await self._ensure_session(to)
        source = Path(path)
        size = source.stat().st_size
        if size > self.config.file_size_cap:
            raise UsageError(f"file exceeds {self.config.file_size_cap} byte cap")
        loop = asyncio.get_running_loop()
        content = await loop.run_in_executor(None, source.read_bytes)
        file_iv = self._rng.random_bytes(xfermod.FILE_IV_BYTES)
        ciphertext, mac = xfermod.encrypt_file(buddy.file_keys, file_iv, content)
        sid = xfermod.new_stream_id(self._rng)
        frames = xfermod.chunk_stream(sid, file_iv, ciphertext, mac,
                                      {"name": source.name})
        self._outgoing[sid] = {"to": to, "frames": frames,
                               "name": source.name, "size": size}
        await self._send_pair(buddy, {"t": "file_offer", "sid": sid,
                                      "name": source.name, "size": size})
        return {"sid": sid, "name": source.name, "size": size}

    def _on_file_offer(self, buddy: Buddy, obj: dict) -> None:
        sid = obj.get("sid")
        name = obj.get("name")
        size = obj.get("size")
        if not isinstance(sid, str) or not sid or not isinstance(name, str) \
                or not isinstance(size, int) or size < 0:
            raise ProtocolError("malformed file offer")
        self._offers[sid] = {"from": buddy.nickname, "name": name, "size": size}
        self._emit("file_offer", nickname=buddy.nickname, sid=sid,
                   name=name, size=size)

    async def accept_file(self, offer_id: str, dest_path: str) -> dict:
        offer = self._offers.pop(offer_id, None)
        if offer is None:
            raise UsageError(f"no pending file offer {offer_id!r}")
        buddy = self._buddies.get(offer["from"])
        if buddy is None or buddy.session is None:
            raise UsageError("offering buddy is gone")
        self._incoming[offer_id] = {
            "from": offer["from"], "frames": [], "dest": dest_path,
            "name": offer["name"], "size": offer["size"], "received": 0,
        }
        await self._send_pair(buddy, {"t": "file_accept", "sid": offer_id})
        return {"sid": offer_id, "dest": dest_path}

    def _on_file_accept(self, buddy: Buddy, obj: dict) -> None:
        sid = obj.get("sid")
        transfer = self._outgoing.get(sid) if isinstance(sid, str) else None
        if transfer is None or transfer["to"] != buddy.nickname:
            raise ProtocolError(f"acceptance for unknown transfer {sid!r}")
        self._spawn(self._stream_file(buddy, sid))

    async def _stream_file(self, buddy: Buddy, sid: str) -> None:
        transfer = self._outgoing.pop(sid)
        frames = transfer["frames"]
        total = len(frames)
        try:
            for index, frame in enumerate(frames):
                await self._send_pair(buddy, {"t": "ibb", "frame": frame.to_obj()})
                self._emit("file_progress", sid=sid, direction="send",
                           frames_sent=index + 1, frames_total=total)
            self._emit("file_done", sid=sid, direction="send",
                       nickname=buddy.nickname, name=transfer["name"],
                       size=transfer["size"])
        except (HushroomError, ConnectionError, OSError) as err:
            self._emit("error", code="transfer_failed", detail=f"{sid}: {err}")

    def _on_ibb(self, buddy: Buddy, obj: dict) -> None:
        frame = xfermod.IbbFrame.from_obj(obj.get("frame") or {})
        state = self._incoming.get(frame.sid)
        if state is None or state["from"] != buddy.nickname:
            raise ProtocolError(f"bytestream frame for unknown transfer {frame.sid!r}")
        state["frames"].append(frame)
        if frame.kind == xfermod.KIND_DATA and frame.payload is not None:
            state["received"] += len(frame.payload)
            self._emit("file_progress", sid=frame.sid, direction="recv",
                       bytes_received=state["received"])
        if frame.kind != xfermod.KIND_CLOSE:
            return
        del self._incoming[frame.sid]
        content = xfermod.reassemble(state["frames"], buddy.file_keys)
        Path(state["dest"]).write_bytes(content)
        self._emit("file_done", sid=frame.sid, direction="recv",
                   nickname=buddy.nickname, name=state["name"],
                   size=len(content), path=state["dest"])

    # -- local API -----------------------------------------------------------------------------------------

    async def start_local_api(self) -> int:
        self._api_server = await asyncio.start_server(
            self._on_api_conn, self.config.api_host, self.config.api_port)
        return self._api_server.sockets[0].getsockname()[1]

    @property
    def api_port(self) -> int:
        assert self._api_server is not None
        return self._api_server.sockets[0].getsockname()[1]

    async def _on_api_conn(self, reader, writer) -> None:
        outbox: asyncio.Queue = asyncio.Queue(maxsize=4096)
        pump = self._spawn(self._api_pump(outbox, writer))
        subscribed = False
        try:
            while True:
                request = await read_frame(reader)
                if request is None:
                    break
                response = await self._api_dispatch(request, outbox)
                if response.pop("_subscribe", False) and not subscribed:
                    subscribed = True
                    self._subscribers.append(outbox)
                await outbox.put(response)
        except (ProtocolError, ConnectionError, OSError):
            pass
        finally:
            if subscribed and outbox in self._subscribers:
                self._subscribers.remove(outbox)
            pump.cancel()
            writer.close()
            try:
                await writer.wait_closed()
            except (ConnectionError, OSError):
                pass

    async def _api_pump(self, outbox: asyncio.Queue, writer) -> None:
        while True:
            message = await outbox.get()
            try:
                await write_frame(writer, message)
            except (ConnectionError, OSError):
                return

    async def _api_dispatch(self, request: dict, outbox: asyncio.Queue) -> dict:
        request_id = request.get("id")
        method = request.get("method")
        params = request.get("params") or {}
        if not isinstance(params, dict):
            return {"id": request_id, "error": {"code": "usage",
                                                "message": "params must be an object"}}
        try:
            if method == "status":
                return {"id": request_id, "result": self.status()}
            if method == "subscribe_events":
                return {"id": request_id, "result": {"subscribed": True},
                        "_subscribe": True}
            if method == "join_room":
                result = await self.join_room(params.get("server"), params["room"],
                                              params["nickname"])
            elif method == "send_group":
                result = await self.send_group(params["text"])
            elif method == "send_private":
                result = await self.send_private(params["to"], params["text"])
            elif method == "start_smp":
                result = await self.start_smp(params["to"], params.get("question", ""),
                                              params["answer"])
            elif method == "answer_smp":
                result = await self.answer_smp(params["to"], params["answer"])
            elif method == "offer_file":
                result = await self.offer_file(params["to"], params["path"])
            elif method == "accept_file":
                result = await self.accept_file(params["offer_id"], params["dest"])
            elif method == "leave_room":
                await self.leave_room()
                result = {"left": True}
            elif method == "confirm_fingerprint":
                result = self.confirm_fingerprint(params["to"])
            else:
                return {"id": request_id, "error": {"code": "usage",
                                                    "message": f"unknown method {method!r}"}}
            return {"id": request_id, "result": result}
        except KeyError as err:
            return {"id": request_id, "error": {"code": "usage",
                                                "message": f"missing parameter {err}"}}
        except UsageError as err:
            return {"id": request_id, "error": {"code": "usage", "message": str(err)}}
        except asyncio.TimeoutError:
            return {"id": request_id, "error": {"code": "timeout",
                                                "message": f"{method} timed out"}}
        except HushroomError as err:
            return {"id": request_id, "error": {"code": err.reason, "message": str(err)}}
        except (ConnectionError, OSError) as err:
            return {"id": request_id, "error": {"code": "relay", "message": str(err)}}
