import csv
import io
import random

import pytest

from hushroom.errors import UsageError
from hushroom.numtheory import (
    PROFILES,
    SMALL_PRIMES,
    bench_keygen,
    dsa_sign,
    dsa_verify,
    generate_keypair,
    generate_params,
    is_probable_prime,
    jacobi,
    truncated_digest,
)
from hushroom.rng import Csprng

from conftest import fixed_rng
from oracles import miller_rabin_oracle, sieve_primes


def test_small_primes_table():
    assert len(SMALL_PRIMES) == 168
    assert SMALL_PRIMES[0] == 2 and SMALL_PRIMES[-1] == 997
    assert set(SMALL_PRIMES) == sieve_primes(1000)


@pytest.mark.parametrize("profile_name", ["baseline", "optimized"])
def test_primality_matches_sieve_small_range(profile_name):
    # quick slice; the acceptance suite covers the full n < 100,000 range
    primes = sieve_primes(20_000)
    rng = fixed_rng(b"primality")
    profile = PROFILES[profile_name]
    for n in range(20_000):
        assert is_probable_prime(n, profile, rng) == (n in primes), n


def test_trial_division_agrees_on_small_prime_products():
    rng = fixed_rng(b"products")
    rnd = random.Random(7)
    for _ in range(200):
        n = rnd.choice(SMALL_PRIMES) * rnd.choice(SMALL_PRIMES)
        assert not is_probable_prime(n, PROFILES["baseline"], rng)
        assert not is_probable_prime(n, PROFILES["optimized"], rng)


def test_profile_catalog():
    assert set(PROFILES) == {"baseline", "trialdiv", "seedless", "optimized"}
    assert not PROFILES["baseline"].trial_division
    assert PROFILES["trialdiv"].trial_division
    assert PROFILES["optimized"].trial_division


@pytest.mark.parametrize("profile_name", ["baseline", "optimized"])
def test_generated_params_are_valid(profile_name, rng):
    params = generate_params(PROFILES[profile_name], rng)
    assert params.p.bit_length() == 1024
    assert params.q.bit_length() == 160
    assert (params.p - 1) % params.q == 0
    assert pow(params.g, params.q, params.p) == 1
    assert params.g > 1
    assert miller_rabin_oracle(params.p)
    assert miller_rabin_oracle(params.q)


def test_keypair_relation(dsa_material):
    params, keys = dsa_material
    for key in keys:
        assert 1 <= key.x < params.q
        assert key.y == pow(params.g, key.x, params.p)


def test_sign_verify_roundtrip(dsa_material, rng):
    params, keys = dsa_material
    key = keys[0]
    for i in range(20):
        digest = truncated_digest(b"message %d" % i)
        sig = dsa_sign(key, digest, rng)
        assert dsa_verify(params, key.y, digest, sig)


def test_tampered_signatures_fail(dsa_material, rng):
    params, keys = dsa_material
    key = keys[0]
    digest = truncated_digest(b"authentic")
    sig = dsa_sign(key, digest, rng)
    assert not dsa_verify(params, key.y, truncated_digest(b"forged"), sig)
    assert not dsa_verify(params, key.y, digest, type(sig)(r=sig.r + 1, s=sig.s))
    assert not dsa_verify(params, key.y, digest, type(sig)(r=sig.r, s=sig.s ^ 1))
    assert not dsa_verify(params, keys[1].y, digest, sig)
    assert not dsa_verify(params, key.y, digest, type(sig)(r=0, s=sig.s))
    assert not dsa_verify(params, key.y, digest, type(sig)(r=sig.r, s=params.q))


def test_fresh_nonce_per_signature(dsa_material):
    params, keys = dsa_material
    rng = fixed_rng(b"nonces")
    digest = truncated_digest(b"same message")
    sig_a = dsa_sign(keys[0], digest, rng)
    sig_b = dsa_sign(keys[0], digest, rng)
    assert (sig_a.r, sig_a.s) != (sig_b.r, sig_b.s)


def test_truncated_digest_width(dsa_material):
    params, _ = dsa_material
    digest = truncated_digest(b"x")
    assert len(digest) * 8 == params.q.bit_length()


def test_seeded_profile_is_reproducible():
    seedless = generate_params(PROFILES["seedless"], fixed_rng(b"route"))
    again = generate_params(PROFILES["seedless"], fixed_rng(b"route"))
    assert (seedless.p, seedless.q, seedless.g) == (again.p, again.q, again.g)
    seeded = generate_params(PROFILES["baseline"], fixed_rng(b"route"))
    replay = generate_params(PROFILES["baseline"], fixed_rng(b"route"))
    assert (seeded.p, seeded.q, seeded.g) == (replay.p, replay.q, replay.g)


def test_jacobi_symbol():
    # cross-check against Euler's criterion for an odd prime
    p = 1009
    for a in range(1, 50):
        euler = pow(a, (p - 1) // 2, p)
        want = 1 if euler == 1 else (-1 if euler == p - 1 else 0)
        assert jacobi(a, p) == want
    assert jacobi(0, 9) == 0
    assert jacobi(15, 15) == 0


def test_bench_report_shape():
    report = bench_keygen(
        [("baseline", PROFILES["baseline"]), ("optimized", PROFILES["optimized"])],
        runs=1, seed_policy="fixed:bench-shape")
    rows = list(csv.reader(io.StringIO(report.to_csv())))
    assert rows[0] == ["profile", "run_index", "millis"]
    assert len(rows) == 1 + 2
    assert {row[0] for row in rows[1:]} == {"baseline", "optimized"}
    assert all(float(row[2]) > 0 for row in rows[1:])
    summary = report.summary()
    assert "median" in summary and "vs baseline" in summary


def test_bench_rejects_bad_usage():
    with pytest.raises(UsageError):
        bench_keygen([], runs=1)
    with pytest.raises(UsageError):
        bench_keygen([("baseline", PROFILES["baseline"])], runs=0)
