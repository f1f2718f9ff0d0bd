import dataclasses
import random

import pytest

from hushroom.errors import (
    ForgeryError,
    HushroomError,
    NoKeyError,
    ProtocolError,
    ReplayError,
    UsageError,
)
from hushroom.group import (
    WRAP_BLOB_BYTES,
    decode_group_message,
    encode_group_message,
    group_open,
    group_seal,
    new_group_identity,
    pairwise_key,
    transcript_consistency_check,
    transcript_digest,
)
from hushroom.numtheory import generate_keypair

from conftest import fixed_rng


def make_room(dsa_material, nicknames, label=b"room"):
    """Identities plus the roster mapping nickname -> (dh_public, dsa_public)."""
    params, keys = dsa_material
    rng = fixed_rng(label)
    members = {}
    for i, nick in enumerate(nicknames):
        dsa = keys[i] if i < len(keys) else generate_keypair(params, rng)
        members[nick] = new_group_identity(dsa, nick, rng)
    roster = {nick: (m.dh_public, (m.dsa.params, m.dsa.y))
              for nick, m in members.items()}
    return members, roster, rng


def test_pairwise_keys_agree(dsa_material):
    members, roster, _ = make_room(dsa_material, ["ada", "bob"])
    ada, bob = members["ada"], members["bob"]
    assert pairwise_key(ada, bob.dh_public) == pairwise_key(bob, ada.dh_public)
    assert pairwise_key(ada, bob.dh_public)[0] != pairwise_key(ada, bob.dh_public)[1]


def test_every_member_decrypts_every_message(dsa_material):
    nicknames = ["ada", "bob", "cyn", "dee", "eli"]
    members, roster, rng = make_room(dsa_material, nicknames)
    for sender_nick in nicknames:
        sender = members[sender_nick]
        text = f"from {sender_nick}".encode()
        msg = group_seal(sender, roster, text, rng)
        for reader_nick in nicknames:
            if reader_nick == sender_nick:
                continue
            sender_keys = (sender.dh_public, (sender.dsa.params, sender.dsa.y))
            assert group_open(members[reader_nick], sender_keys, msg) == text


def test_wrapped_key_blob_shape(dsa_material):
    members, roster, rng = make_room(dsa_material, ["ada", "bob", "cyn"])
    msg = group_seal(members["ada"], roster, b"shape", rng)
    assert set(msg.wrapped_keys) == {"bob", "cyn"}
    assert all(len(blob) == WRAP_BLOB_BYTES for blob in msg.wrapped_keys.values())
    assert "ada" not in msg.wrapped_keys


def test_non_member_recovers_nothing(dsa_material):
    members, roster, rng = make_room(dsa_material, ["ada", "bob", "cyn"])
    ada = members["ada"]
    sender_keys = (ada.dh_public, (ada.dsa.params, ada.dsa.y))
    secret = b"the plaintext the outsider must never see"
    msg = group_seal(ada, roster, secret, rng)

    params, _ = dsa_material
    out_rng = fixed_rng(b"outside")
    eve = new_group_identity(generate_keypair(params, out_rng), "eve", out_rng)

    rnd = random.Random(99)
    recovered, accepted = 0, 0
    for _ in range(50):
        mutated = mutate_message(msg, eve, rnd)
        try:
            plaintext = group_open(eve, sender_keys, mutated)
        except HushroomError:
            continue
        accepted += 1
        if secret in plaintext:
            recovered += 1
    assert accepted == 0
    assert recovered == 0


def mutate_message(msg, eve, rnd):
    """An outsider's forgery attempt: graft their own nickname in, reuse or
    perturb existing blobs, or flip ciphertext bits."""
    choice = rnd.randrange(4)
    wrapped = dict(msg.wrapped_keys)
    if choice == 0:
        wrapped[eve.nickname] = rnd.choice(list(msg.wrapped_keys.values()))
        return dataclasses.replace(msg, wrapped_keys=wrapped)
    if choice == 1:
        blob = bytearray(rnd.choice(list(msg.wrapped_keys.values())))
        blob[rnd.randrange(len(blob))] ^= 1 << rnd.randrange(8)
        wrapped[eve.nickname] = bytes(blob)
        return dataclasses.replace(msg, wrapped_keys=wrapped)
    if choice == 2:
        ct = bytearray(msg.ciphertext)
        ct[rnd.randrange(len(ct))] ^= 1 << rnd.randrange(8)
        return dataclasses.replace(msg, ciphertext=bytes(ct))
    wrapped[eve.nickname] = bytes(WRAP_BLOB_BYTES)
    return dataclasses.replace(msg, wrapped_keys=wrapped)


def test_unlisted_member_gets_no_key_error(dsa_material):
    members, roster, rng = make_room(dsa_material, ["ada", "bob", "cyn"])
    ada = members["ada"]
    partial = {n: roster[n] for n in ("ada", "bob")}
    msg = group_seal(ada, partial, b"for bob only", rng)
    sender_keys = (ada.dh_public, (ada.dsa.params, ada.dsa.y))
    with pytest.raises(NoKeyError):
        group_open(members["cyn"], sender_keys, msg)


def test_signature_binds_all_fields(dsa_material):
    members, roster, rng = make_room(dsa_material, ["ada", "bob"])
    ada, bob = members["ada"], members["bob"]
    sender_keys = (ada.dh_public, (ada.dsa.params, ada.dsa.y))
    msg = group_seal(ada, roster, b"bound", rng)
    tampered_ct = dataclasses.replace(
        msg, ciphertext=bytes([msg.ciphertext[0] ^ 1]) + msg.ciphertext[1:])
    with pytest.raises(ForgeryError):
        group_open(bob, sender_keys, tampered_ct)
    tampered_iv = dataclasses.replace(msg, iv=bytes(16))
    with pytest.raises(ForgeryError):
        group_open(bob, sender_keys, tampered_iv)
    renamed = dataclasses.replace(msg, sender="eve")
    with pytest.raises(ForgeryError):
        group_open(bob, sender_keys, renamed)


def test_counter_is_bound_even_though_unsigned_directly(dsa_material):
    # the counter rides outside the signature but inside every wrap tag
    members, roster, rng = make_room(dsa_material, ["ada", "bob"])
    ada, bob = members["ada"], members["bob"]
    sender_keys = (ada.dh_public, (ada.dsa.params, ada.dsa.y))
    msg = group_seal(ada, roster, b"counted", rng)
    bumped = dataclasses.replace(msg, counter=msg.counter + 1)
    with pytest.raises(ForgeryError):
        group_open(bob, sender_keys, bumped)


def test_replay_rejected_per_sender(dsa_material):
    members, roster, rng = make_room(dsa_material, ["ada", "bob"])
    ada, bob = members["ada"], members["bob"]
    sender_keys = (ada.dh_public, (ada.dsa.params, ada.dsa.y))
    msg = group_seal(ada, roster, b"fresh", rng)
    assert group_open(bob, sender_keys, msg) == b"fresh"
    with pytest.raises(ReplayError):
        group_open(bob, sender_keys, msg)
    newer = group_seal(ada, roster, b"newer", rng)
    even_newer = group_seal(ada, roster, b"newest", rng)
    assert group_open(bob, sender_keys, even_newer) == b"newest"
    # monotone rule also rejects held-back older messages
    with pytest.raises(ReplayError):
        group_open(bob, sender_keys, newer)


def test_roster_must_have_recipients(dsa_material):
    members, roster, rng = make_room(dsa_material, ["ada"])
    with pytest.raises(UsageError):
        group_seal(members["ada"], {"ada": roster["ada"]}, b"echo", rng)


def test_wire_roundtrip(dsa_material):
    members, roster, rng = make_room(dsa_material, ["ada", "bob", "cyn"])
    msg = group_seal(members["ada"], roster, b"wire me", rng)
    assert decode_group_message(encode_group_message(msg)) == msg
    with pytest.raises(ProtocolError):
        decode_group_message(b"\x00\x00\x00\xffshort")
    with pytest.raises(ProtocolError):
        decode_group_message(encode_group_message(msg)[:-3])


def test_transcript_digest_is_order_sensitive(dsa_material):
    members, roster, rng = make_room(dsa_material, ["ada", "bob", "cyn"])
    ada = members["ada"]
    a = group_seal(ada, roster, b"one", rng)
    b = group_seal(ada, roster, b"two", rng)
    assert transcript_digest([a, b]) != transcript_digest([b, a])
    assert transcript_digest([a, b]) == transcript_digest([a, b])
    assert transcript_digest([]) != transcript_digest([a])


def test_consistency_check_detects_drop_and_reorder(dsa_material):
    members, roster, rng = make_room(dsa_material, ["ada", "bob", "cyn"])
    ada = members["ada"]
    log = [group_seal(ada, roster, f"m{i}".encode(), rng) for i in range(5)]
    assert transcript_consistency_check([log, list(log), list(log)])
    dropped = log[:2] + log[3:]
    assert not transcript_consistency_check([log, dropped, list(log)])
    reordered = [log[1], log[0]] + log[2:]
    assert not transcript_consistency_check([log, list(log), reordered])
    assert transcript_consistency_check([])
    assert transcript_consistency_check([log])
