"""Probable-prime testing, DSA parameter/key generation, signing, and the
key-generation benchmark.

Two independent speedups are toggled by :class:`KeygenProfile`:

* ``trial_division`` screens candidates against every prime below 1,000
  before any Miller-Rabin round.
* ``seedless`` draws prime candidates directly from the CSPRNG instead of
  deriving them from a hash-chained verification seed, discarding the
  ability to re-verify provenance in exchange for speed.

Parameter sizes are fixed at 1024-bit p / 160-bit q.  Big-integer
arithmetic is CPython's; none of it is constant-time (see README).
"""

import csv
import io
import statistics
import time
from dataclasses import dataclass, field
from hashlib import sha256

from .errors import UsageError
from .rng import Csprng

L_BITS = 1024
N_BITS = 160


def _sieve(limit: int) -> list[int]:
    flags = bytearray([1]) * limit
    flags[0:2] = b"\x00\x00"
    for i in range(2, int(limit**0.5) + 1):
        if flags[i]:
            flags[i * i :: i] = bytes(len(flags[i * i :: i]))
    return [i for i in range(limit) if flags[i]]


SMALL_PRIMES = tuple(_sieve(1000))  # the 168 primes below 1,000
assert len(SMALL_PRIMES) == 168


@dataclass(frozen=True)
class KeygenProfile:
    trial_division: bool
    seedless: bool
    mr_rounds: int = 40

    def __post_init__(self):
        if self.mr_rounds < 1:
            raise UsageError("mr_rounds must be at least 1")


PROFILES = {
    "baseline": KeygenProfile(trial_division=False, seedless=False),
    "trialdiv": KeygenProfile(trial_division=True, seedless=False),
    "seedless": KeygenProfile(trial_division=False, seedless=True),
    "optimized": KeygenProfile(trial_division=True, seedless=True),
}


@dataclass(frozen=True)
class DsaParams:
    p: int
    q: int
    g: int

    def check(self) -> None:
        assert self.p.bit_length() == L_BITS
        assert self.q.bit_length() == N_BITS
        assert (self.p - 1) % self.q == 0
        assert 1 < self.g < self.p
        assert pow(self.g, self.q, self.p) == 1


@dataclass(frozen=True)
class DsaKeyPair:
    params: DsaParams
    x: int  # private, in [1, q-1]
    y: int  # public, g^x mod p


@dataclass(frozen=True)
class DsaSignature:
    r: int
    s: int


def _miller_rabin(n: int, rounds: int, rng: Csprng) -> bool:
    # n is odd and >= 5 here
    d = n - 1
    s = 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for _ in range(rounds):
        a = 2 + rng.random_below(n - 3)  # uniform in [2, n-2]
        x = pow(a, d, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def is_probable_prime(n: int, profile: KeygenProfile, rng: Csprng) -> bool:
    if n < 2:
        return False
    if profile.trial_division:
        for sp in SMALL_PRIMES:
            if n == sp:
                return True
            if n % sp == 0:
                return False
    else:
        if n in (2, 3):
            return True
        if n % 2 == 0:
            return False
    if n < 9:  # 5 and 7 are the only survivors this small
        return True
    return _miller_rabin(n, profile.mr_rounds, rng)


def _find_generator(p: int, q: int) -> int:
    e = (p - 1) // q
    h = 2
    while True:
        g = pow(h, e, p)
        if g > 1:
            return g
        h += 1


def _params_seedless(profile: KeygenProfile, rng: Csprng) -> DsaParams:
    # Candidates come straight off the keystream; nothing about their
    # derivation is kept.
    while True:
        q = rng.random_int_bits(N_BITS) | 1
        if not is_probable_prime(q, profile, rng):
            continue
        for _ in range(4 * L_BITS):
            c = rng.random_int_bits(L_BITS)
            p = c - (c % (2 * q)) + 1
            if p.bit_length() != L_BITS:
                continue
            if is_probable_prime(p, profile, rng):
                return DsaParams(p=p, q=q, g=_find_generator(p, q))


def _params_seeded(profile: KeygenProfile, rng: Csprng) -> DsaParams:
    # FIPS-shaped derivation: a random verification seed drives a hash
    # chain from which q and every p candidate are expanded.  The seed is
    # thrown away at the end, which is exactly why the seedless path can
    # skip all of this.
    outlen = 256
    n_blocks = (L_BITS + outlen - 1) // outlen - 1
    b = L_BITS - 1 - n_blocks * outlen
    seedlen = N_BITS // 8
    while True:
        seed = rng.random_bytes(seedlen)
        seed_int = int.from_bytes(seed, "big")
        u = int.from_bytes(sha256(seed).digest(), "big") % (1 << (N_BITS - 1))
        q = (1 << (N_BITS - 1)) | u | 1
        if not is_probable_prime(q, profile, rng):
            continue
        offset = 1
        for _ in range(4 * L_BITS):
            v = []
            for j in range(n_blocks + 1):
                block_seed = (seed_int + offset + j) % (1 << N_BITS)
                v.append(sha256(block_seed.to_bytes(seedlen, "big")).digest())
            w = 0
            for j in range(n_blocks):
                w += int.from_bytes(v[j], "big") << (j * outlen)
            w += (int.from_bytes(v[n_blocks], "big") % (1 << b)) << (n_blocks * outlen)
            x = w + (1 << (L_BITS - 1))
            c = x % (2 * q)
            p = x - (c - 1)
            offset += n_blocks + 1
            if p.bit_length() != L_BITS:
                continue
            if is_probable_prime(p, profile, rng):
                return DsaParams(p=p, q=q, g=_find_generator(p, q))


def generate_params(profile: KeygenProfile, rng: Csprng) -> DsaParams:
    if profile.seedless:
        return _params_seedless(profile, rng)
    return _params_seeded(profile, rng)


def generate_keypair(params: DsaParams, rng: Csprng) -> DsaKeyPair:
    x = 1 + rng.random_below(params.q - 1)  # uniform in [1, q-1]
    y = pow(params.g, x, params.p)
    return DsaKeyPair(params=params, x=x, y=y)


def truncated_digest(message: bytes) -> bytes:
    """SHA-256 truncated to the leftmost 160 bits, sized to q."""
    return sha256(message).digest()[:20]


def dsa_sign(key: DsaKeyPair, digest: bytes, rng: Csprng) -> DsaSignature:
    if len(digest) != 20:
        raise UsageError("digest must be 20 bytes (160-bit truncated hash)")
    p, q, g = key.params.p, key.params.q, key.params.g
    z = int.from_bytes(digest, "big")
    while True:
        k = 1 + rng.random_below(q - 1)
        r = pow(g, k, p) % q
        if r == 0:
            continue
        s = pow(k, -1, q) * (z + key.x * r) % q
        if s == 0:
            continue
        return DsaSignature(r=r, s=s)


def dsa_verify(params: DsaParams, y: int, digest: bytes, sig: DsaSignature) -> bool:
    if len(digest) != 20:
        return False
    p, q, g = params.p, params.q, params.g
    if not (0 < sig.r < q and 0 < sig.s < q):
        return False
    z = int.from_bytes(digest, "big")
    w = pow(sig.s, -1, q)
    u1 = z * w % q
    u2 = sig.r * w % q
    v = pow(g, u1, p) * pow(y, u2, p) % p % q
    return v == sig.r


def jacobi(a: int, n: int) -> int:
    """Jacobi symbol (a|n) for odd n > 0.

    For a safe prime p this decides membership in the prime-order
    subgroup of quadratic residues without a full exponentiation.
    """
    if n <= 0 or n % 2 == 0:
        raise UsageError("n must be a positive odd integer")
    a %= n
    result = 1
    while a != 0:
        while a % 2 == 0:
            a //= 2
            if n % 8 in (3, 5):
                result = -result
        a, n = n, a
        if a % 4 == 3 and n % 4 == 3:
            result = -result
        a %= n
    return result if n == 1 else 0


# ---------------------------------------------------------------------------
# benchmark harness


@dataclass
class BenchReport:
    profile_names: list[str]
    durations_ms: dict[str, list[float]] = field(default_factory=dict)

    def median(self, name: str) -> float:
        return statistics.median(self.durations_ms[name])

    def mean(self, name: str) -> float:
        return statistics.fmean(self.durations_ms[name])

    def stdev(self, name: str) -> float:
        runs = self.durations_ms[name]
        return statistics.stdev(runs) if len(runs) > 1 else 0.0

    def speedup_percent(self, name: str) -> float:
        """Median speedup of `name` relative to the first (baseline) profile."""
        base = self.median(self.profile_names[0])
        return (base - self.median(name)) / base * 100.0

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out)
        writer.writerow(["profile", "run_index", "millis"])
        for name in self.profile_names:
            for i, ms in enumerate(self.durations_ms[name]):
                writer.writerow([name, i, f"{ms:.3f}"])
        return out.getvalue()

    def summary(self) -> str:
        lines = []
        base = self.profile_names[0]
        for name in self.profile_names:
            lines.append(
                f"{name:>12}: median {self.median(name):9.1f} ms   "
                f"mean {self.mean(name):9.1f} ms   stdev {self.stdev(name):8.1f} ms"
            )
        for name in self.profile_names[1:]:
            lines.append(
                f"{name:>12}: {self.speedup_percent(name):+.1f}% vs {base} (median)"
            )
        return "\n".join(lines)


def _run_rng(seed_policy: str, name: str, run_index: int) -> Csprng:
    if seed_policy == "os":
        return Csprng.from_os_entropy()
    if seed_policy.startswith("fixed:"):
        base = seed_policy[len("fixed:") :].encode()
        material = sha256(base + name.encode() + run_index.to_bytes(4, "big")).digest()
        material += sha256(material).digest()
        return Csprng(material[:40])
    raise UsageError(f"unknown seed policy {seed_policy!r}")


def bench_keygen(
    profiles: list[tuple[str, KeygenProfile]],
    runs: int,
    seed_policy: str = "os",
) -> BenchReport:
    """Time `runs` full parameter+keypair generations per profile.

    The first profile in the list is the comparison baseline.
    """
    if not profiles:
        raise UsageError("at least one profile required")
    if runs < 1:
        raise UsageError("runs must be at least 1")
    report = BenchReport(profile_names=[name for name, _ in profiles])
    for name, profile in profiles:
        samples = []
        for i in range(runs):
            rng = _run_rng(seed_policy, name, i)
            t0 = time.perf_counter()
            params = generate_params(profile, rng)
            generate_keypair(params, rng)
            samples.append((time.perf_counter() - t0) * 1000.0)
        report.durations_ms[name] = samples
    return report
