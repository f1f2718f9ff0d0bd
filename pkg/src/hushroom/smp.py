"""Socialist Millionaires' Protocol: interactive equality test of two
low-entropy secrets that reveals nothing but match / no-match.

Four messages over the prime-order subgroup of quadratic residues of the
same 1536-bit safe prime the sessions use (order q = (p-1)/2, generator
g1 = 4).  Both sides blind the shared generators with fresh exponents,
encode their secrets into P/Q pairs, and compare the ratio raised to the
combined blinding.  Every transmitted exponentiation carries a Schnorr
proof with a SHA-256 Fiat-Shamir challenge, domain-separated by a step
tag; any proof failure aborts the run.
"""

from dataclasses import dataclass, fields
from hashlib import sha256

from .encoding import lp_int
from .errors import HushroomError, ProtocolError
from .numtheory import jacobi
from .rng import Csprng
from .session import DH_PRIME, Fingerprint

P = DH_PRIME
Q = (P - 1) // 2  # prime order of the QR subgroup
G1 = 4  # generator of that subgroup

PHASE_IDLE = "idle"
PHASE_EXPECT2 = "expect2"
PHASE_EXPECT3 = "expect3"
PHASE_EXPECT4 = "expect4"
PHASE_DONE = "done"

PENDING = "pending"
MATCH = "match"
NO_MATCH = "no_match"
ABORTED = "aborted"


class SmpAbortedError(HushroomError):
    """A zero-knowledge proof failed to verify; the run is dead."""


def smp_secret(initiator_fp: Fingerprint, responder_fp: Fingerprint,
               session_id: bytes, answer: str) -> int:
    """Map the human answer plus both identities into the exponent group.

    Binding the fingerprints and session id means the same answer typed in
    a different conversation (or with roles swapped) produces a different
    secret.  The answer is trimmed of surrounding whitespace, nothing more.
    """
    h = sha256()
    h.update(b"\x01")
    h.update(initiator_fp.digest)
    h.update(responder_fp.digest)
    h.update(session_id)
    h.update(answer.strip().encode("utf-8"))
    return int.from_bytes(h.digest(), "big") % Q


def _check_element(v: int) -> None:
    if not 2 <= v <= P - 2:
        raise ProtocolError("SMP element outside [2, p-2]")
    if jacobi(v, P) != 1:
        raise ProtocolError("SMP element not in the prime-order subgroup")


def _challenge(step: int, *values: int) -> int:
    return int.from_bytes(sha256(bytes([step]) + lp_int(*values)).digest(), "big")


def _rand_exponent(rng: Csprng) -> int:
    return 1 + rng.random_below(Q - 1)


def _prove_log(step: int, generator: int, exponent: int, rng: Csprng) -> tuple[int, int]:
    """Schnorr proof of knowledge of `exponent` for generator^exponent."""
    r = _rand_exponent(rng)
    c = _challenge(step, pow(generator, r, P))
    return c, (r - exponent * c) % Q


def _verify_log(step: int, generator: int, value: int, c: int, d: int) -> None:
    w = pow(generator, d, P) * pow(value, c, P) % P
    if _challenge(step, w) != c:
        raise SmpAbortedError(f"discrete-log proof failed at step {step}")


def _prove_pq(step: int, g2: int, g3: int, r: int, secret: int, rng: Csprng) -> tuple[int, int, int]:
    """Proof of (r, secret) for P = g3^r and Q = g1^r * g2^secret."""
    r5 = _rand_exponent(rng)
    r6 = _rand_exponent(rng)
    w1 = pow(g3, r5, P)
    w2 = pow(G1, r5, P) * pow(g2, r6, P) % P
    c = _challenge(step, w1, w2)
    return c, (r5 - r * c) % Q, (r6 - secret * c) % Q


def _verify_pq(step: int, g2: int, g3: int, p_val: int, q_val: int,
               c: int, d5: int, d6: int) -> None:
    w1 = pow(g3, d5, P) * pow(p_val, c, P) % P
    w2 = pow(G1, d5, P) * pow(g2, d6, P) % P * pow(q_val, c, P) % P
    if _challenge(step, w1, w2) != c:
        raise SmpAbortedError(f"P/Q proof failed at step {step}")


def _prove_eq(step: int, base: int, exponent: int, rng: Csprng) -> tuple[int, int]:
    """Proof that the same `exponent` links g1 and `base` (R = base^exponent)."""
    r7 = _rand_exponent(rng)
    c = _challenge(step, pow(G1, r7, P), pow(base, r7, P))
    return c, (r7 - exponent * c) % Q


def _verify_eq(step: int, base: int, blinded_gen: int, r_val: int,
               c: int, d7: int) -> None:
    w1 = pow(G1, d7, P) * pow(blinded_gen, c, P) % P
    w2 = pow(base, d7, P) * pow(r_val, c, P) % P
    if _challenge(step, w1, w2) != c:
        raise SmpAbortedError(f"equality proof failed at step {step}")


@dataclass(frozen=True)
class SmpMsg1:
    question: str
    g2a: int
    c2: int
    d2: int
    g3a: int
    c3: int
    d3: int


@dataclass(frozen=True)
class SmpMsg2:
    g2b: int
    c2: int
    d2: int
    g3b: int
    c3: int
    d3: int
    pb: int
    qb: int
    cp: int
    d5: int
    d6: int


@dataclass(frozen=True)
class SmpMsg3:
    pa: int
    qa: int
    cp: int
    d5: int
    d6: int
    ra: int
    cr: int
    d7: int


@dataclass(frozen=True)
class SmpMsg4:
    rb: int
    cr: int
    d7: int


def msg_to_dict(msg) -> dict:
    out = {}
    for f in fields(msg):
        v = getattr(msg, f.name)
        out[f.name] = format(v, "x") if isinstance(v, int) else v
    return out


def msg_from_dict(cls, data: dict):
    kwargs = {}
    try:
        for f in fields(cls):
            v = data[f.name]
            wants_int = f.type is int or f.type == "int"
            kwargs[f.name] = int(v, 16) if wants_int else v
    except (KeyError, TypeError, ValueError) as err:
        raise ProtocolError(f"malformed {cls.__name__}: {err}") from err
    if not isinstance(kwargs.get("question", ""), str):
        raise ProtocolError("question must be text")
    return cls(**kwargs)


class SmpState:
    """One run of the protocol, strictly one phase forward per message."""

    def __init__(self):
        self.phase = PHASE_IDLE
        self.outcome = PENDING
        self.question = ""
        # exponents and intermediates, filled in as the run progresses
        self.a2 = self.a3 = None
        self.b3 = None
        self.g2 = self.g3 = None
        self.g3a = self.g3b = None
        self.pa_over_pb = None
        self.qa_over_qb = None
        self.pa = self.qa = None
        self.pb = self.qb = None
        self.secret = None

    def _expect(self, phase: str) -> None:
        if self.phase != phase:
            raise ProtocolError(f"SMP message out of phase (state {self.phase}, wanted {phase})")

    def _abort(self, err: SmpAbortedError):
        self.outcome = ABORTED
        self.phase = PHASE_DONE
        raise err


def smp_start(state: SmpState, secret: int, question: str, rng: Csprng) -> SmpMsg1:
    state._expect(PHASE_IDLE)
    state.secret = secret % Q
    state.question = question
    state.a2 = _rand_exponent(rng)
    state.a3 = _rand_exponent(rng)
    g2a = pow(G1, state.a2, P)
    g3a = pow(G1, state.a3, P)
    c2, d2 = _prove_log(1, G1, state.a2, rng)
    c3, d3 = _prove_log(2, G1, state.a3, rng)
    state.phase = PHASE_EXPECT2
    return SmpMsg1(question=question, g2a=g2a, c2=c2, d2=d2, g3a=g3a, c3=c3, d3=d3)


def smp_msg2(state: SmpState, secret: int, msg1: SmpMsg1, rng: Csprng) -> SmpMsg2:
    state._expect(PHASE_IDLE)
    _check_element(msg1.g2a)
    _check_element(msg1.g3a)
    try:
        _verify_log(1, G1, msg1.g2a, msg1.c2, msg1.d2)
        _verify_log(2, G1, msg1.g3a, msg1.c3, msg1.d3)
    except SmpAbortedError as err:
        state._abort(err)
    state.secret = secret % Q
    state.question = msg1.question
    b2 = _rand_exponent(rng)
    state.b3 = _rand_exponent(rng)
    g2b = pow(G1, b2, P)
    g3b = pow(G1, state.b3, P)
    c2, d2 = _prove_log(3, G1, b2, rng)
    c3, d3 = _prove_log(4, G1, state.b3, rng)
    state.g2 = pow(msg1.g2a, b2, P)
    state.g3 = pow(msg1.g3a, state.b3, P)
    state.g3a = msg1.g3a
    r = _rand_exponent(rng)
    state.pb = pow(state.g3, r, P)
    state.qb = pow(G1, r, P) * pow(state.g2, state.secret, P) % P
    cp, d5, d6 = _prove_pq(5, state.g2, state.g3, r, state.secret, rng)
    state.phase = PHASE_EXPECT3
    return SmpMsg2(g2b=g2b, c2=c2, d2=d2, g3b=g3b, c3=c3, d3=d3,
                   pb=state.pb, qb=state.qb, cp=cp, d5=d5, d6=d6)


def smp_msg3(state: SmpState, msg2: SmpMsg2, rng: Csprng) -> SmpMsg3:
    state._expect(PHASE_EXPECT2)
    for v in (msg2.g2b, msg2.g3b, msg2.pb, msg2.qb):
        _check_element(v)
    try:
        _verify_log(3, G1, msg2.g2b, msg2.c2, msg2.d2)
        _verify_log(4, G1, msg2.g3b, msg2.c3, msg2.d3)
    except SmpAbortedError as err:
        state._abort(err)
    state.g2 = pow(msg2.g2b, state.a2, P)
    state.g3 = pow(msg2.g3b, state.a3, P)
    state.g3b = msg2.g3b
    try:
        _verify_pq(5, state.g2, state.g3, msg2.pb, msg2.qb, msg2.cp, msg2.d5, msg2.d6)
    except SmpAbortedError as err:
        state._abort(err)
    r = _rand_exponent(rng)
    state.pa = pow(state.g3, r, P)
    state.qa = pow(G1, r, P) * pow(state.g2, state.secret, P) % P
    cp, d5, d6 = _prove_pq(6, state.g2, state.g3, r, state.secret, rng)
    state.qa_over_qb = state.qa * pow(msg2.qb, -1, P) % P
    state.pa_over_pb = state.pa * pow(msg2.pb, -1, P) % P
    ra = pow(state.qa_over_qb, state.a3, P)
    cr, d7 = _prove_eq(7, state.qa_over_qb, state.a3, rng)
    state.phase = PHASE_EXPECT4
    return SmpMsg3(pa=state.pa, qa=state.qa, cp=cp, d5=d5, d6=d6, ra=ra, cr=cr, d7=d7)


def smp_msg4(state: SmpState, msg3: SmpMsg3, rng: Csprng) -> SmpMsg4:
    state._expect(PHASE_EXPECT3)
    for v in (msg3.pa, msg3.qa, msg3.ra):
        _check_element(v)
    try:
        _verify_pq(6, state.g2, state.g3, msg3.pa, msg3.qa, msg3.cp, msg3.d5, msg3.d6)
    except SmpAbortedError as err:
        state._abort(err)
    qa_over_qb = msg3.qa * pow(state.qb, -1, P) % P
    try:
        _verify_eq(7, qa_over_qb, state.g3a, msg3.ra, msg3.cr, msg3.d7)
    except SmpAbortedError as err:
        state._abort(err)
    rb = pow(qa_over_qb, state.b3, P)
    cr, d7 = _prove_eq(8, qa_over_qb, state.b3, rng)
    rab = pow(msg3.ra, state.b3, P)
    pa_over_pb = msg3.pa * pow(state.pb, -1, P) % P
    state.outcome = MATCH if rab == pa_over_pb else NO_MATCH
    state.phase = PHASE_DONE
    return SmpMsg4(rb=rb, cr=cr, d7=d7)


def smp_complete(state: SmpState, msg4: SmpMsg4) -> str:
    state._expect(PHASE_EXPECT4)
    _check_element(msg4.rb)
    try:
        _verify_eq(8, state.qa_over_qb, state.g3b, msg4.rb, msg4.cr, msg4.d7)
    except SmpAbortedError as err:
        state._abort(err)
    rab = pow(msg4.rb, state.a3, P)
    state.outcome = MATCH if rab == state.pa_over_pb else NO_MATCH
    state.phase = PHASE_DONE
    return state.outcome
