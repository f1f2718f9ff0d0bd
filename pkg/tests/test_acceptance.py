"""Acceptance gate: one test per shipping criterion.

Each test here re-checks a whole subsystem end to end, against independent
oracles where the module tests use them, at the sample sizes the criteria
demand.  The terminal summary prints one PASS/FAIL line per test.
"""

import asyncio
import base64
import csv
import dataclasses
import io
import math
import os
import random
import statistics
import subprocess
import sys
import time
from hashlib import sha512

import pytest
import scipy.stats

from hushroom.errors import HushroomError
from hushroom.group import (
    group_open,
    group_seal,
    new_group_identity,
    transcript_consistency_check,
)
from hushroom.numtheory import (
    PROFILES,
    dsa_sign,
    dsa_verify,
    generate_keypair,
    generate_params,
    is_probable_prime,
    truncated_digest,
)
from hushroom.relay import RelayConfig, RelayServer
from hushroom.rng import salsa20_block
from hushroom.session import fingerprint_from_digest
from hushroom.smp import (
    ABORTED,
    MATCH,
    NO_MATCH,
    P,
    SmpAbortedError,
    SmpState,
    smp_complete,
    smp_msg2,
    smp_msg3,
    smp_msg4,
    smp_secret,
    smp_start,
)
from hushroom.xfer import (
    CHUNK_BYTES,
    chunk_stream,
    derive_file_keys,
    encrypt_file,
    new_stream_id,
    reassemble,
)

from conftest import fixed_rng
from oracles import miller_rabin_oracle, sieve_primes
from test_engine import Net, fuzz_stanzas
from test_relay import Client, payload_of
from test_rng import SALSA20_KATS


def run(coro):
    return asyncio.run(coro)


# ---------------------------------------------------------------------------
# keygen optimization


def test_keygen_optimization_is_measurably_faster(tmp_path):
    """50 benchmark runs per profile: the optimized profile must beat the
    baseline median by at least 15% with lower spread, inside 10 minutes."""
    out_csv = tmp_path / "bench.csv"
    t0 = time.monotonic()
    result = subprocess.run(
        [sys.executable, "-m", "hushroom.cli", "bench",
         "--profiles", "baseline,optimized", "--runs", "50",
         "--out", str(out_csv)],
        capture_output=True, text=True, timeout=600,
    )
    elapsed = time.monotonic() - t0
    assert result.returncode == 0, result.stderr
    assert elapsed < 600.0, f"benchmark took {elapsed:.0f}s"

    samples: dict[str, list[float]] = {"baseline": [], "optimized": []}
    rows = list(csv.reader(io.StringIO(out_csv.read_text())))
    assert rows[0] == ["profile", "run_index", "millis"]
    for profile, _index, millis in rows[1:]:
        samples[profile].append(float(millis))
    assert len(samples["baseline"]) == 50 and len(samples["optimized"]) == 50

    base_median = statistics.median(samples["baseline"])
    opt_median = statistics.median(samples["optimized"])
    speedup = (base_median - opt_median) / base_median * 100.0
    assert opt_median < base_median
    assert speedup >= 15.0, f"median speedup only {speedup:.1f}%"
    assert statistics.stdev(samples["optimized"]) < statistics.stdev(samples["baseline"])


# ---------------------------------------------------------------------------
# DSA validity


def test_dsa_parameters_and_signatures_validate():
    """10 fresh parameter sets survive 64-round independent primality
    re-checks and the group-structure identities; 100 signatures verify and
    100 tampered ones do not.  Budget: 5 minutes."""
    t0 = time.monotonic()
    rng = fixed_rng(b"acceptance-dsa")
    rnd = random.Random(0xD5A)
    profile = PROFILES["optimized"]

    param_sets = [generate_params(profile, rng) for _ in range(10)]
    for params in param_sets:
        assert miller_rabin_oracle(params.p, rounds=64, rnd=rnd)
        assert miller_rabin_oracle(params.q, rounds=64, rnd=rnd)
        assert (params.p - 1) % params.q == 0
        assert 1 < params.g < params.p
        assert pow(params.g, params.q, params.p) == 1

    keys = [generate_keypair(params, rng) for params in param_sets]
    for i in range(100):
        key = keys[i % 10]
        digest = truncated_digest(f"round trip {i}".encode())
        sig = dsa_sign(key, digest, rng)
        assert dsa_verify(key.params, key.y, digest, sig)

    wrong_key = generate_keypair(param_sets[0], rng)
    for i in range(100):
        key = keys[i % 10]
        digest = truncated_digest(f"tamper target {i}".encode())
        sig = dsa_sign(key, digest, rng)
        variant = i % 4
        if variant == 0:
            bad = dataclasses.replace(sig, r=(sig.r + 1) % key.params.q)
            assert not dsa_verify(key.params, key.y, digest, bad)
        elif variant == 1:
            bad = dataclasses.replace(sig, s=sig.s ^ 1)
            assert not dsa_verify(key.params, key.y, digest, bad)
        elif variant == 2:
            flipped = bytes([digest[0] ^ 0x80]) + digest[1:]
            assert not dsa_verify(key.params, key.y, flipped, sig)
        else:
            assert not dsa_verify(param_sets[0], wrong_key.y, digest, sig)

    assert time.monotonic() - t0 < 300.0


# ---------------------------------------------------------------------------
# primality oracle equivalence


def test_primality_agrees_with_sieve_below_100k():
    primes = sieve_primes(100_000)
    rng = fixed_rng(b"acceptance-primality")
    with_td = PROFILES["optimized"]
    without_td = PROFILES["baseline"]
    assert with_td.trial_division and not without_td.trial_division
    for n in range(100_000):
        expected = n in primes
        assert is_probable_prime(n, with_td, rng) == expected, n
        assert is_probable_prime(n, without_td, rng) == expected, n


# ---------------------------------------------------------------------------
# CSPRNG conformance


def test_csprng_known_answers_and_uniformity():
    assert len(SALSA20_KATS) >= 4
    for key, nonce, counter, expected in SALSA20_KATS:
        assert salsa20_block(key, nonce, counter).hex() == expected

    rng = fixed_rng(b"acceptance-uniformity")
    for m in (2, 6, 256):
        counts = [0] * m
        for _ in range(60_000):
            counts[rng.random_below(m)] += 1
        _, p_value = scipy.stats.chisquare(counts)
        assert p_value > 0.001, f"m={m}: chi-square p={p_value:.6f}"


# ---------------------------------------------------------------------------
# file transfer


def test_file_transfer_roundtrip_chunking_and_tamper_rejection():
    rng = fixed_rng(b"acceptance-xfer")
    rnd = random.Random(0xF17E)
    extra_key = bytes(range(32))
    keys = derive_file_keys(extra_key)
    expanded = sha512(extra_key).digest()
    assert keys.enc == expanded[:32] and keys.mac == expanded[32:]

    for size in (0, 1, 65535, 65536, 65537, 5 * 1024 * 1024):
        content = rnd.randbytes(size)
        file_iv = rng.random_bytes(16)
        ciphertext, mac = encrypt_file(keys, file_iv, content)
        frames = chunk_stream(new_stream_id(rng), file_iv, ciphertext, mac,
                              {"name": "payload.bin"})
        data_frames = [f for f in frames if f.kind == "data"]
        assert len(data_frames) == math.ceil(size / CHUNK_BYTES), size
        assert reassemble(frames, keys) == content

    content = rnd.randbytes(200_001)
    file_iv = rng.random_bytes(16)
    ciphertext, mac = encrypt_file(keys, file_iv, content)
    frames = chunk_stream(new_stream_id(rng), file_iv, ciphertext, mac,
                          {"name": "payload.bin"})
    data_indexes = [i for i, f in enumerate(frames) if f.kind == "data"]
    rejected = 0
    for trial in range(1000):
        mutated = list(frames)
        surface = rnd.randrange(3)
        if surface == 0:
            at = rnd.choice(data_indexes)
            payload = bytearray(mutated[at].payload)
            payload[rnd.randrange(len(payload))] ^= 1 << rnd.randrange(8)
            mutated[at] = dataclasses.replace(mutated[at], payload=bytes(payload))
        elif surface == 1:
            tag = bytearray(mutated[-1].mac)
            tag[rnd.randrange(len(tag))] ^= 1 << rnd.randrange(8)
            mutated[-1] = dataclasses.replace(mutated[-1], mac=bytes(tag))
        else:
            meta = dict(mutated[0].meta)
            iv = bytearray(bytes.fromhex(meta["iv"]))
            iv[rnd.randrange(len(iv))] ^= 1 << rnd.randrange(8)
            meta["iv"] = bytes(iv).hex()
            mutated[0] = dataclasses.replace(mutated[0], meta=meta)
        try:
            plaintext = reassemble(mutated, keys)
        except HushroomError:
            rejected += 1
            continue
        pytest.fail(f"tamper trial {trial} yielded {len(plaintext)} plaintext bytes")
    assert rejected == 1000


# ---------------------------------------------------------------------------
# SMP outcomes


FP_X = fingerprint_from_digest(bytes(range(32)))
FP_Y = fingerprint_from_digest(bytes(range(32, 64)))
SMP_SESSION = bytes(range(16))

# (step, field, is_group_element); elements are perturbed multiplicatively by
# a square so they stay inside the QR subgroup and reach the proof check
# itself rather than the structural membership test
SMP_PERTURBATIONS = [
    (1, "c2", False), (1, "g2a", True), (2, "d6", False), (2, "pb", True),
    (3, "cp", False), (3, "ra", True), (4, "cr", False),
]


def smp_exchange(init_answer, resp_answer, label):
    rng = fixed_rng(label)
    init_secret = smp_secret(FP_X, FP_Y, SMP_SESSION, init_answer)
    resp_secret = smp_secret(FP_X, FP_Y, SMP_SESSION, resp_answer)
    initiator, responder = SmpState(), SmpState()
    msg1 = smp_start(initiator, init_secret, "shared memory?", rng)
    msg2 = smp_msg2(responder, resp_secret, msg1, rng)
    msg3 = smp_msg3(initiator, msg2, rng)
    msg4 = smp_msg4(responder, msg3, rng)
    smp_complete(initiator, msg4)
    return initiator, responder


def test_smp_matches_mismatches_and_aborts():
    for i in range(100):
        initiator, responder = smp_exchange("oolong", "oolong", b"eq%d" % i)
        assert (initiator.outcome, responder.outcome) == (MATCH, MATCH), i

    for i in range(100):
        initiator, responder = smp_exchange("oolong", f"oolong {i}", b"ne%d" % i)
        assert (initiator.outcome, responder.outcome) == (NO_MATCH, NO_MATCH), i

    for i in range(100):
        step, fieldname, is_element = SMP_PERTURBATIONS[i % len(SMP_PERTURBATIONS)]

        def corrupt(at, msg):
            if at != step:
                return msg
            value = getattr(msg, fieldname)
            value = (value * 4) % P if is_element else value + 1
            return dataclasses.replace(msg, **{fieldname: value})

        states = {}

        def tracked(init_answer, resp_answer, label):
            rng = fixed_rng(label)
            init_secret = smp_secret(FP_X, FP_Y, SMP_SESSION, init_answer)
            resp_secret = smp_secret(FP_X, FP_Y, SMP_SESSION, resp_answer)
            initiator, responder = SmpState(), SmpState()
            states["i"], states["r"] = initiator, responder
            msg1 = corrupt(1, smp_start(initiator, init_secret, "q", rng))
            msg2 = corrupt(2, smp_msg2(responder, resp_secret, msg1, rng))
            msg3 = corrupt(3, smp_msg3(initiator, msg2, rng))
            msg4 = corrupt(4, smp_msg4(responder, msg3, rng))
            smp_complete(initiator, msg4)

        with pytest.raises(SmpAbortedError):
            tracked("oolong", "oolong", b"ab%d" % i)
        victim = states["r"] if step in (1, 3) else states["i"]
        assert victim.outcome == ABORTED, (i, step, fieldname)


# ---------------------------------------------------------------------------
# group crypto


def test_group_room_confidentiality_and_transcript_consistency(dsa_material):
    params, _ = dsa_material
    rng = fixed_rng(b"acceptance-group")
    rnd = random.Random(0x6E0)
    nicks = ["ada", "bob", "cyn", "dee", "eli"]
    members = {n: new_group_identity(generate_keypair(params, rng), n, rng)
               for n in nicks}
    roster = {n: (m.dh_public, (m.dsa.params, m.dsa.y))
              for n, m in members.items()}
    sender_keys = {n: roster[n] for n in nicks}

    transcript = []
    for i in range(20):
        nick = nicks[i % 5]
        text = f"confidential {i}: {rnd.getrandbits(64):016x}".encode()
        transcript.append((nick, text, group_seal(members[nick], roster, text, rng)))

    # every member decrypts every message from everyone else
    for reader in nicks:
        for nick, text, msg in transcript:
            if nick == reader:
                continue
            assert group_open(members[reader], sender_keys[nick], msg) == text

    # a transcript-holding outsider: 1,000 attempts, zero plaintexts, zero
    # accepted forgeries
    eve = new_group_identity(generate_keypair(params, rng), "eve", rng)
    recovered = 0
    accepted = 0
    for trial in range(1000):
        nick, text, msg = transcript[rnd.randrange(len(transcript))]
        mode = rnd.randrange(6)
        if mode == 0:
            # read it as-is with her own identity
            forged, reader = msg, eve
        elif mode == 1:
            # graft her nickname onto a stolen wrapped-key blob
            wrapped = dict(msg.wrapped_keys)
            wrapped["eve"] = rnd.choice(list(msg.wrapped_keys.values()))
            forged, reader = dataclasses.replace(msg, wrapped_keys=wrapped), eve
        elif mode == 2:
            # flip a ciphertext bit and hand it to a member
            ct = bytearray(msg.ciphertext)
            ct[rnd.randrange(len(ct))] ^= 1 << rnd.randrange(8)
            forged = dataclasses.replace(msg, ciphertext=bytes(ct))
            reader = members["bob" if nick != "bob" else "cyn"]
        elif mode == 3:
            # claim a higher counter to dodge replay protection
            forged = dataclasses.replace(msg, counter=msg.counter + 100 + trial)
            reader = members["bob" if nick != "bob" else "cyn"]
        elif mode == 4:
            # replay the untouched message to someone who already read it
            forged = msg
            reader = members["bob" if nick != "bob" else "cyn"]
        else:
            # splice one message's key blobs onto another's ciphertext
            _, _, other = transcript[rnd.randrange(len(transcript))]
            forged = dataclasses.replace(msg, ciphertext=other.ciphertext)
            reader = members["bob" if nick != "bob" else "cyn"]
        try:
            plaintext = group_open(reader, sender_keys[nick], forged)
        except HushroomError:
            continue
        accepted += 1
        if plaintext == text:
            recovered += 1
    assert accepted == 0, f"{accepted} forgeries accepted"
    assert recovered == 0

    # transcript consistency flags a relay that drops or reorders a message
    wire = [msg for _, _, msg in transcript]
    logs = [list(wire) for _ in nicks]
    assert transcript_consistency_check(logs)
    dropped = [list(wire) for _ in nicks]
    del dropped[1][7]
    assert not transcript_consistency_check(dropped)
    reordered = [list(wire) for _ in nicks]
    reordered[2][3], reordered[2][4] = reordered[2][4], reordered[2][3]
    assert not transcript_consistency_check(reordered)


# ---------------------------------------------------------------------------
# end-to-end desk scale


def test_end_to_end_three_client_session(tmp_path):
    """One relay, three full clients: roster, 20 group messages, 2 private
    messages, an SMP verification, and a 1 MiB file, all inside 60 seconds."""
    src = tmp_path / "payload.bin"
    dst = tmp_path / "received.bin"
    lines = ["relay"]
    lines += [f"client {n}" for n in ("ada", "bob", "cyn")]
    lines += [f"join {n} parlor" for n in ("ada", "bob", "cyn")]
    lines += [f"expect-roster {n} 2" for n in ("ada", "bob", "cyn")]
    senders = ["ada", "bob", "cyn"]
    for i in range(20):
        sender = senders[i % 3]
        others = [n for n in senders if n != sender]
        lines.append(f'send {sender} "group message {i}"')
        lines += [f'expect {other} {sender} "group message {i}"' for other in others]
    lines += [
        'send-private ada bob "psst bob"',
        'expect-private bob ada "psst bob"',
        'send-private bob ada "psst ada"',
        'expect-private ada bob "psst ada"',
        'smp-start ada bob "favorite tea?" "oolong"',
        'smp-answer bob ada "oolong"',
        "expect-smp ada bob match",
        "expect-smp bob ada match",
        f"gen-file {src} 1048576",
        f"offer ada cyn {src}",
        f"accept cyn ada {dst}",
        "expect-file-done cyn recv",
        "expect-file-done ada send",
        f"expect-file-equal {src} {dst}",
        "leave ada",
        "leave bob",
        "leave cyn",
    ]
    script = tmp_path / "session.script"
    script.write_text("\n".join(lines) + "\n")

    t0 = time.monotonic()
    result = subprocess.run(
        [sys.executable, "-m", "hushroom.cli", "headless", "--script", str(script)],
        capture_output=True, text=True, timeout=120,
    )
    elapsed = time.monotonic() - t0
    assert result.returncode == 0, result.stderr
    assert elapsed < 60.0, f"session took {elapsed:.1f}s"


# ---------------------------------------------------------------------------
# relay properties


def test_relay_fanout_ordering_and_zero_retention():
    async def scenario():
        server = RelayServer(RelayConfig(messages_per_second=10000.0))
        await server.start()

        # byte-identical fan-out of one payload to three receivers
        sender = await Client.connect(server.port)
        await sender.register_and_join("hall", "send0")
        receivers = []
        for i in range(3):
            client = await Client.connect(server.port)
            await client.register_and_join("hall", f"recv{i}")
            receivers.append(client)
        blob = base64.b64encode(os.urandom(333)).decode()
        await sender.send(type="groupchat", room="hall", payload=blob)
        copies = [await c.recv_until("groupchat") for c in receivers]
        assert all(copy == copies[0] for copy in copies[1:])
        assert copies[0]["payload"] == blob
        assert copies[0]["from"] == "send0"

        # two concurrent senders, 100 messages each; the relay does not echo
        # a groupchat back to its sender, so the pure watchers see all 200
        # and each sender sees exactly the other's 100
        async def blast(client: Client, who: str):
            for i in range(100):
                await client.send(type="groupchat", room="hall",
                                  payload=payload_of(f"{who}:{i}"))

        await asyncio.gather(blast(sender, "a"), blast(receivers[0], "b"))

        async def collect(client: Client, count: int) -> list:
            seen = []
            while len(seen) < count:
                stanza = await client.recv_until("groupchat", timeout=30.0)
                seen.append((stanza["seq"], stanza["from"], stanza["payload"]))
            return seen

        watcher_logs = [await collect(c, 200) for c in receivers[1:]]
        assert watcher_logs[1] == watcher_logs[0]
        reference = watcher_logs[0]
        seqs = [seq for seq, _, _ in reference]
        assert seqs == sorted(seqs) and len(set(seqs)) == 200
        for who, prefix in (("send0", "a"), ("recv0", "b")):
            texts = [base64.b64decode(payload).decode()
                     for _, sender_nick, payload in reference if sender_nick == who]
            assert texts == [f"{prefix}:{i}" for i in range(100)]
        assert await collect(sender, 100) == [
            entry for entry in reference if entry[1] == "recv0"]
        assert await collect(receivers[0], 100) == [
            entry for entry in reference if entry[1] == "send0"]

        # zero retained state once everyone disconnects
        for client in [sender, *receivers]:
            await client.close()
        deadline = asyncio.get_running_loop().time() + 10.0
        while server.snapshot() != {"rooms": {}, "identities": 0}:
            assert asyncio.get_running_loop().time() < deadline, server.snapshot()
            await asyncio.sleep(0.02)
        await server.close()

    run(scenario())


# ---------------------------------------------------------------------------
# inbound discard policy


def test_inbound_stanza_discard_policy():
    """10,000 hostile stanzas: no message events, no crash, engine still
    relays real traffic afterwards."""
    async def scenario():
        net = await Net().up(["ada", "bob"])
        ada = net.engines["ada"]
        before = len(ada.events("message"))
        rnd = random.Random(0xACCE97)
        for count, stanza in enumerate(fuzz_stanzas(rnd, 10_000, ["ada", "bob"])):
            await ada._on_stanza(stanza)
            if count % 1000 == 999:
                await asyncio.sleep(0.05)
        await asyncio.sleep(0.5)
        assert len(ada.events("message")) == before
        assert ada.events("warning")
        await ada.send_group("still standing")
        await net.engines["bob"].wait_for(
            "message", lambda ev: ev["data"]["text"] == "still standing",
            timeout=10.0)
        await net.down()

    run(scenario())
