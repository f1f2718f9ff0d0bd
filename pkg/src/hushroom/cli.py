"""Command-line entry points.

`server` runs the relay, `engine` runs the client daemon with its local
API (and optional browser UI bridge), `bench` measures keygen profiles,
`vectors` emits known-answer vectors for cross-implementation checks, and
`headless` drives one or more scripted clients for end-to-end tests.

No subcommand ever logs message plaintext or key material; the only
stdout output is machine-readable status lines and requested reports.
"""

import argparse
import asyncio
import json
import shlex
import signal
import sys
from pathlib import Path

from .cipher import aes256_ctr
from .engine import Engine, EngineConfig
from .relay import RelayConfig, RelayServer
from .rng import salsa20_block
from .session import color_code, fingerprint_from_digest
from .xfer import derive_file_keys, encrypt_file


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        loaded = json.loads(Path(path).read_text("utf-8"))
    except (OSError, json.JSONDecodeError) as err:
        raise SystemExit(f"error: cannot read config {path}: {err}")
    if not isinstance(loaded, dict):
        raise SystemExit(f"error: config {path} must hold a JSON object")
    return loaded


def _split_host_port(text: str, what: str) -> tuple[str, int]:
    host, _, port_text = text.rpartition(":")
    if not host or not port_text.isdigit():
        raise SystemExit(f"error: {what} must be host:port, got {text!r}")
    return host, int(port_text)


# ---------------------------------------------------------------------------
# server


def cmd_server(args) -> int:
    config_values = _load_config(args.config)
    listen = args.listen or config_values.get("listen", "127.0.0.1:7677")
    host, port = _split_host_port(listen, "--listen")
    relay_config = RelayConfig(host=host, port=port)
    for key in ("max_payload_bytes", "max_occupants", "registrations_per_minute",
                "messages_per_second", "send_queue_limit"):
        if key in config_values:
            setattr(relay_config, key, config_values[key])

    async def run() -> int:
        server = RelayServer(relay_config)
        try:
            await server.start()
        except OSError as err:
            print(f"error: cannot bind {host}:{port}: {err}", file=sys.stderr)
            return 1
        # Handlers must be in place before the ready line: callers treat that
        # line as permission to signal us, even straight away.
        stop = asyncio.Event()
        loop = asyncio.get_running_loop()
        for sig in (signal.SIGINT, signal.SIGTERM):
            loop.add_signal_handler(sig, stop.set)
        print(json.dumps({"listening": {"host": host, "port": server.port}}), flush=True)
        print(f"relay up on {host}:{server.port}", file=sys.stderr)
        await stop.wait()
        print("shutting down", file=sys.stderr)
        await server.close()
        return 0

    return asyncio.run(run())


# ---------------------------------------------------------------------------
# engine


def cmd_engine(args) -> int:
    config_values = _load_config(args.config)
    engine_config = EngineConfig()
    if args.keygen_executor:
        engine_config.keygen_executor = args.keygen_executor
    if "keygen_profile" in config_values:
        engine_config.keygen_profile = config_values["keygen_profile"]
    engine_config.default_server = args.server or config_values.get("server")

    async def run() -> int:
        engine = Engine(engine_config)
        await engine.start()
        api: dict = {}
        if args.api_socket:
            server = await asyncio.start_unix_server(
                engine._on_api_conn, path=args.api_socket)
            engine._api_server = server
            api["socket"] = args.api_socket
        else:
            port = int(args.api_port if args.api_port is not None
                       else config_values.get("api_port", 0))
            engine.config.api_port = port
            api["port"] = await engine.start_local_api()
            api["host"] = engine.config.api_host
        ui_site = None
        if args.ui:
            ui_site = await _start_ui_bridge(engine, args.ui, args.ui_port)
            api["ui_port"] = ui_site
        # Handlers must be in place before the ready line: callers treat that
        # line as permission to signal us, even straight away.
        stop = asyncio.Event()
        loop = asyncio.get_running_loop()
        for sig in (signal.SIGINT, signal.SIGTERM):
            loop.add_signal_handler(sig, stop.set)
        print(json.dumps({"api": api}), flush=True)
        print(f"engine api ready: {api}", file=sys.stderr)
        await stop.wait()
        await engine.aclose()
        return 0

    return asyncio.run(run())


async def _start_ui_bridge(engine: Engine, ui_dir: str, ui_port: int) -> int:
    """Static assets plus a websocket speaking the same JSON as the local API."""
    from aiohttp import WSMsgType, web

    async def ws_handler(request):
        ws = web.WebSocketResponse()
        await ws.prepare(request)
        outbox: asyncio.Queue = asyncio.Queue(maxsize=4096)

        async def pump():
            while True:
                message = await outbox.get()
                await ws.send_json(message)

        pump_task = asyncio.get_running_loop().create_task(pump())
        subscribed = False
        try:
            async for msg in ws:
                if msg.type != WSMsgType.TEXT:
                    continue
                try:
                    request_obj = json.loads(msg.data)
                except json.JSONDecodeError:
                    continue
                if not isinstance(request_obj, dict):
                    continue
                response = await engine._api_dispatch(request_obj, outbox)
                if response.pop("_subscribe", False) and not subscribed:
                    subscribed = True
                    engine._subscribers.append(outbox)
                await outbox.put(response)
        finally:
            if subscribed and outbox in engine._subscribers:
                engine._subscribers.remove(outbox)
            pump_task.cancel()
        return ws

    async def index(request):
        return web.FileResponse(Path(ui_dir) / "index.html")

    app = web.Application()
    app.router.add_get("/ws", ws_handler)
    app.router.add_get("/", index)
    app.router.add_static("/", ui_dir)
    runner = web.AppRunner(app)
    await runner.setup()
    site = web.TCPSite(runner, "127.0.0.1", ui_port)
    await site.start()
    return runner.addresses[0][1]


# ---------------------------------------------------------------------------
# bench


def cmd_bench(args) -> int:
    from .numtheory import PROFILES, bench_keygen

    profile_names = [name.strip() for name in args.profiles.split(",") if name.strip()]
    if not profile_names:
        raise SystemExit("error: --profiles needs at least one profile name")
    for name in profile_names:
        if name not in PROFILES:
            raise SystemExit(
                f"error: unknown profile {name!r}; choices: {', '.join(sorted(PROFILES))}")
    if args.runs < 1:
        raise SystemExit("error: --runs must be at least 1")
    report = bench_keygen([(name, PROFILES[name]) for name in profile_names],
                          args.runs, seed_policy=args.seed_policy)
    if args.out:
        Path(args.out).write_text(report.to_csv(), "utf-8")
        print(f"wrote {args.out}", file=sys.stderr)
    print(report.summary())
    return 0


# ---------------------------------------------------------------------------
# vectors


def cmd_vectors(_args) -> int:
    out = []

    out.append("# salsa20 keystream: key, nonce, block counter -> 64-byte block")
    salsa_cases = [
        (bytes(32), bytes(8), 0),
        (bytes(32), bytes(8), 1),
        (bytes(range(32)), bytes(range(32, 40)), 0),
        (bytes.fromhex("0053a6f94c9ff24598eb3e91e4378add"
                       "3083d6297ccf2275c81b6ec11467ba0d"),
         bytes.fromhex("0d74db42a91077de"), 0),
    ]
    for key, nonce, counter in salsa_cases:
        block = salsa20_block(key, nonce, counter)
        out.append(f"salsa20 key={key.hex()} nonce={nonce.hex()} counter={counter}")
        out.append(f"  keystream={block.hex()}")

    out.append("# file keys: SHA-512 expansion of a 32-byte extra key, split 32/32")
    keys = derive_file_keys(bytes(32))
    out.append(f"file-keys extra={bytes(32).hex()}")
    out.append(f"  enc={keys.enc.hex()}")
    out.append(f"  mac={keys.mac.hex()}")

    out.append("# file encryption: AES-256-CTR whole-file stream + HMAC-SHA512")
    iv = bytes(range(16))
    content = b"attack at dawn" * 3
    ciphertext, mac = encrypt_file(keys, iv, content)
    out.append(f"file-encrypt iv={iv.hex()} content={content.hex()}")
    out.append(f"  ciphertext={ciphertext.hex()}")
    out.append(f"  mac={mac.hex()}")

    out.append("# raw AES-256-CTR block keystream (encrypting 64 zero bytes)")
    aes_key = bytes(range(32))
    aes_stream = aes256_ctr(aes_key, iv, bytes(64))
    out.append(f"aes-ctr key={aes_key.hex()} iv={iv.hex()}")
    out.append(f"  keystream={aes_stream.hex()}")

    out.append("# fingerprint display formatting and color code from a fixed digest")
    fp = fingerprint_from_digest(bytes(range(32)))
    colors = color_code(fp)
    out.append(f"fingerprint digest={fp.digest.hex()}")
    out.append(f"  display={fp.display}")
    out.append(f"  colors={[list(c) for c in colors.colors]}")

    print("\n".join(out))
    return 0


# ---------------------------------------------------------------------------
# headless


class ScriptError(Exception):
    pass


class HeadlessRun:
    """Drives one or more in-process engines from a line-oriented script."""

    def __init__(self, server: str | None):
        self.external_server = server
        self.relay: RelayServer | None = None
        self.engines: dict[str, Engine] = {}
        self.cursors: dict[tuple, int] = {}
        self.default_timeout = 20.0

    @property
    def server_address(self) -> str:
        if self.relay is not None:
            return f"127.0.0.1:{self.relay.port}"
        if self.external_server:
            return self.external_server
        raise ScriptError("no relay: use the `relay` command or pass --server")

    def engine(self, name: str) -> Engine:
        engine = self.engines.get(name)
        if engine is None:
            raise ScriptError(f"unknown client {name!r}")
        return engine

    async def wait_event(self, client: str, kind: str, pred, cursor_key: tuple,
                         timeout: float | None = None) -> dict:
        after = self.cursors.get(cursor_key, 0)
        event = await self.engine(client).wait_for(
            kind, pred, timeout or self.default_timeout, after_seq=after)
        self.cursors[cursor_key] = event["seq"]
        return event

    async def run_line(self, tokens: list[str]) -> None:
        command, rest = tokens[0], tokens[1:]
        if command == "relay":
            self.relay = RelayServer(RelayConfig())
            await self.relay.start()
        elif command == "client":
            (name,) = rest
            engine = Engine(EngineConfig())
            self.engines[name] = engine
            await engine.start()
        elif command == "join":
            name, room = rest
            await self.engine(name).join_room(self.server_address, room, name)
        elif command == "expect-roster":
            name, count = rest[0], int(rest[1])
            engine = self.engine(name)
            deadline = asyncio.get_running_loop().time() + self.default_timeout
            while len(engine.status()["buddies"]) < count:
                if asyncio.get_running_loop().time() > deadline:
                    raise ScriptError(f"{name} roster never reached {count}")
                await asyncio.sleep(0.05)
        elif command == "send":
            name, text = rest[0], " ".join(rest[1:])
            await self.engine(name).send_group(text)
        elif command == "expect":
            name, sender, text = rest[0], rest[1], " ".join(rest[2:])
            await self.wait_event(
                name, "message",
                lambda ev: (not ev["data"]["private"]
                            and ev["data"]["sender"] == sender
                            and ev["data"]["text"] == text),
                (name, "message", sender))
        elif command == "send-private":
            name, to, text = rest[0], rest[1], " ".join(rest[2:])
            await self.engine(name).send_private(to, text)
        elif command == "expect-private":
            name, sender, text = rest[0], rest[1], " ".join(rest[2:])
            await self.wait_event(
                name, "message",
                lambda ev: (ev["data"]["private"]
                            and ev["data"]["sender"] == sender
                            and ev["data"]["text"] == text),
                (name, "message", sender))
        elif command == "smp-start":
            name, peer, question, answer = rest
            await self.engine(name).start_smp(peer, question, answer)
        elif command == "smp-answer":
            name, peer, answer = rest
            await self.wait_event(
                name, "smp_request",
                lambda ev: ev["data"]["nickname"] == peer,
                (name, "smp_request", peer))
            await self.engine(name).answer_smp(peer, answer)
        elif command == "expect-smp":
            name, peer, outcome = rest
            event = await self.wait_event(
                name, "smp_result",
                lambda ev: ev["data"]["nickname"] == peer,
                (name, "smp_result", peer))
            if event["data"]["outcome"] != outcome:
                raise ScriptError(
                    f"smp outcome {event['data']['outcome']!r}, wanted {outcome!r}")
        elif command == "gen-file":
            path, size = rest[0], int(rest[1])
            import os
            Path(path).write_bytes(os.urandom(size))
        elif command == "offer":
            name, peer, path = rest
            await self.engine(name).offer_file(peer, path)
        elif command == "accept":
            name, peer, dest = rest
            event = await self.wait_event(
                name, "file_offer",
                lambda ev: ev["data"]["nickname"] == peer,
                (name, "file_offer", peer))
            await self.engine(name).accept_file(event["data"]["sid"], dest)
        elif command == "expect-file-done":
            name, direction = rest[0], rest[1]
            timeout = float(rest[2]) if len(rest) > 2 else 60.0
            await self.wait_event(
                name, "file_done",
                lambda ev: ev["data"]["direction"] == direction,
                (name, "file_done", direction), timeout)
        elif command == "expect-file-equal":
            path_a, path_b = rest
            if Path(path_a).read_bytes() != Path(path_b).read_bytes():
                raise ScriptError(f"{path_a} differs from {path_b}")
        elif command == "sleep":
            await asyncio.sleep(float(rest[0]))
        elif command == "timeout":
            self.default_timeout = float(rest[0])
        elif command == "leave":
            (name,) = rest
            await self.engine(name).leave_room()
        else:
            raise ScriptError(f"unknown command {command!r}")

    async def close(self) -> None:
        for engine in self.engines.values():
            await engine.aclose()
        if self.relay is not None:
            await self.relay.close()


def cmd_headless(args) -> int:
    try:
        raw = Path(args.script).read_text("utf-8")
    except OSError as err:
        raise SystemExit(f"error: cannot read script: {err}")
    lines = []
    for number, line in enumerate(raw.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        try:
            tokens = shlex.split(stripped)
        except ValueError as err:
            raise SystemExit(f"error: line {number}: {err}")
        lines.append((number, tokens))

    async def run() -> int:
        runner = HeadlessRun(args.server)
        try:
            for number, tokens in lines:
                if tokens[0] == "client":
                    await runner.run_line(tokens)
            for engine in runner.engines.values():
                await engine.wait_ready()
            for number, tokens in lines:
                if tokens[0] == "client":
                    continue
                try:
                    await runner.run_line(tokens)
                except (ScriptError, ValueError) as err:
                    print(f"FAIL line {number}: {' '.join(tokens)}: {err}", file=sys.stderr)
                    return 1
                except (TimeoutError, asyncio.TimeoutError) as err:
                    print(f"FAIL line {number}: {' '.join(tokens)}: timeout: {err}",
                          file=sys.stderr)
                    return 1
                except Exception as err:
                    print(f"FAIL line {number}: {' '.join(tokens)}: "
                          f"{type(err).__name__}: {err}", file=sys.stderr)
                    return 1
            print("all expectations met", file=sys.stderr)
            return 0
        finally:
            await runner.close()

    return asyncio.run(run())


# ---------------------------------------------------------------------------


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="hushroom",
        description="Ephemeral end-to-end-encrypted group chat: relay, "
                    "client engine, and supporting tools.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_server = sub.add_parser("server", help="run the ciphertext relay")
    p_server.add_argument("--listen", help="host:port (default 127.0.0.1:7677; port 0 picks one)")
    p_server.add_argument("--config", help="JSON config file")
    p_server.set_defaults(func=cmd_server)

    p_engine = sub.add_parser("engine", help="run the client daemon")
    p_engine.add_argument("--server", help="default relay host:port for join requests")
    p_engine.add_argument("--api-socket", help="serve the local API on this unix socket path")
    p_engine.add_argument("--api-port", help="serve the local API on this loopback TCP port")
    p_engine.add_argument("--ui", help="serve this directory plus a /ws bridge for browsers")
    p_engine.add_argument("--ui-port", type=int, default=0)
    p_engine.add_argument("--keygen-executor", choices=("thread", "process"))
    p_engine.add_argument("--config", help="JSON config file")
    p_engine.set_defaults(func=cmd_engine)

    p_bench = sub.add_parser("bench", help="benchmark keygen profiles")
    p_bench.add_argument("--profiles", default="baseline,optimized",
                         help="comma-separated profile names")
    p_bench.add_argument("--runs", type=int, default=50)
    p_bench.add_argument("--out", help="write per-run CSV here")
    p_bench.add_argument("--seed-policy", default="os",
                         help='"os" or "fixed:<hex>" for reproducible runs')
    p_bench.set_defaults(func=cmd_bench)

    p_vectors = sub.add_parser("vectors", help="print known-answer vectors")
    p_vectors.set_defaults(func=cmd_vectors)

    p_headless = sub.add_parser("headless", help="run a scripted client session")
    p_headless.add_argument("--script", required=True)
    p_headless.add_argument("--server", help="external relay host:port")
    p_headless.set_defaults(func=cmd_headless)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
