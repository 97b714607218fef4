"""Verifier-initiated quantum signatures compiled from the protocol.

Signer = prover, verifier = verifier, message = statement, private key =
witness, public key = the witness eigenstates. Each message key may be an
l-fold concatenation; a signature is then l field values and verification is
the AND of the component checks.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np

from .adversaries import (Povm, acceptance_for_witness, averaged_witness_povm,
                          constant_povm, random_povm, type2_acceptance)
from .field_linalg import require_prime
from .vis_core import (ABORT, PublicState, Witness, born_table, challenge,
                       decide, exact_acceptance, prover_step, public_state,
                       run_seeds)

_creation_order = itertools.count()

STRATEGY_KINDS = ("constant", "povm", "relay", "misdirect")


@dataclass(frozen=True)
class KeyPair:
    p: int
    l: int
    sk: dict  # message -> tuple of l Witness
    created: int = field(default_factory=lambda: next(_creation_order))

    @property
    def messages(self) -> tuple:
        return tuple(self.sk)

    def pk(self, m: Hashable) -> tuple[PublicState, ...]:
        return tuple(public_state(w) for w in self.sk[m])


@dataclass
class Participant:
    id: int
    memory: dict = field(default_factory=dict)  # message -> tuple of PublicState
    _sealed: bool = field(default=False, repr=False)

    def store(self, m: Hashable, copy: tuple[PublicState, ...]) -> None:
        if self._sealed:
            raise RuntimeError("participant memory is read-only after distribution")
        self.memory[m] = copy

    def seal(self) -> None:
        self._sealed = True


@dataclass(frozen=True)
class SignatureRecord:
    message: Hashable
    challenge: tuple[int, ...]
    signature: tuple  # field values or ABORT, one per component
    accept: int
    seed: int | None = None
    verifier: int | None = None

    def to_dict(self) -> dict:
        msg = list(self.message) if isinstance(self.message, tuple) else self.message
        return {"message": msg, "challenge": list(self.challenge),
                "signature": list(self.signature), "accept": self.accept,
                "seed": self.seed, "verifier": self.verifier}


def _uniform_key(p: int, l: int, rng: np.random.Generator) -> tuple[Witness, ...]:
    return tuple(Witness.random(p, rng) for _ in range(l))


def keygen(p: int, L: int | Sequence[Hashable], N: int, rng: np.random.Generator, l: int = 1
           ) -> tuple[KeyPair, list[Participant]]:
    """Independent uniform witnesses per message; one public-key copy per
    message for each of the N participants."""
    p = require_prime(p)
    messages = list(range(L)) if isinstance(L, int) else list(L)
    if len(messages) < 2:
        raise ValueError("message space needs at least two messages")
    if N < 1 or l < 1:
        raise ValueError("need N >= 1 and l >= 1")
    keys = KeyPair(p, l, {m: _uniform_key(p, l, rng) for m in messages})
    participants = []
    for i in range(1, N + 1):
        part = Participant(i)
        for m in messages:
            part.store(m, keys.pk(m))
        part.seal()
        participants.append(part)
    return keys, participants


def keygen_bitwise(p: int, n_bits: int, N: int, rng: np.random.Generator, l: int = 1
                   ) -> tuple[KeyPair, list[Participant]]:
    """Repeated single-bit scheme: one key per (position, bit value)."""
    return keygen(p, [(i, b) for i in range(n_bits) for b in (0, 1)], N, rng, l)


def _verifier_challenges(rng: np.random.Generator, p: int, l: int) -> tuple[int, ...]:
    return tuple(int(x) for x in rng.integers(0, p, size=l))


def sign_session(keys: KeyPair, verifier: Participant, m: Hashable, seed: int, *,
                 sign_with: Hashable | None = None) -> SignatureRecord:
    """Pre-signing, signing and verification for message ``m``.

    ``sign_with`` makes the signer answer with the key of another message,
    which models a signer holding the wrong private key.
    """
    if m not in verifier.memory:
        raise KeyError(f"participant {verifier.id} holds no public key for message {m!r}")
    rng = np.random.default_rng(seed)
    sk = keys.sk[m if sign_with is None else sign_with]
    pk = verifier.memory[m]
    js = _verifier_challenges(rng, keys.p, keys.l)
    sig = []
    for w, state, j in zip(sk, pk, js):
        _, _, resp = prover_step(w, challenge(state, j), rng)
        sig.append(resp)
    accept = int(all(decide(j, r) for j, r in zip(js, sig)))
    return SignatureRecord(m, js, tuple(sig), accept, int(seed), verifier.id)


def exact_session_acceptance(keys: KeyPair, m: Hashable, sign_with: Hashable | None = None) -> float:
    sk_true = keys.sk[m]
    sk_used = keys.sk[m if sign_with is None else sign_with]
    return float(np.prod([exact_acceptance(a, b) for a, b in zip(sk_true, sk_used)]))


# --------------------------------------------------------------------------- #
# forging                                                                     #
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class ForgeryScenario:
    """The adversary wants a signature on ``m`` accepted while the signer is
    asked about ``m_prime``.

    ``kind`` is one of: ``constant`` (always answer ``value``), ``povm``
    (measure the intercepted challenge with ``povm``), ``relay`` (run an
    honest session on m' and forward its signature), ``misdirect`` (forward
    the intercepted challenge to the signer as a request for m').
    """

    p: int
    m: Hashable
    m_prime: Hashable
    kind: str
    value: int = 0
    povm: Povm | None = field(default=None, repr=False)
    created: int = field(default_factory=lambda: next(_creation_order))

    def __post_init__(self):
        if self.m == self.m_prime:
            raise ValueError("forged message must differ from the signed one")
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"unknown strategy {self.kind!r}")
        if self.kind == "povm" and (self.povm is None or self.povm.p != self.p):
            raise ValueError("povm strategy needs a POVM over the same field")

    def effective_povm(self) -> Povm | None:
        """Key-independent POVM realised by the strategy, when it has one."""
        if self.kind == "constant":
            return constant_povm(self.p, self.value)
        if self.kind == "povm":
            return self.povm
        if self.kind == "relay":
            d = self.p ** 2
            el = np.repeat(np.eye(d, dtype=complex)[None] / self.p, self.p, axis=0)
            return Povm(self.p, el, np.zeros((d, d), dtype=complex))
        return averaged_witness_povm(self.p)  # misdirect, averaged over sk(m')


@dataclass(frozen=True)
class ForgeryResult:
    empirical: float
    trials: int
    exact: float  # averaged over key generation
    exact_given_keys: float | None  # for the supplied keys, if any
    bound: float  # p^{-l}

    def to_dict(self) -> dict:
        return {"empirical": self.empirical, "trials": self.trials, "exact": self.exact,
                "exact_given_keys": self.exact_given_keys, "bound": self.bound}


def _relay_exact(p: int, sk_prime: Witness) -> float:
    """P(J' of an honest m' session == J of the m session), enumerating both sessions."""
    pk_prime = public_state(sk_prime)
    total = 0.0
    for j, j2 in itertools.product(range(p), repeat=2):
        probs = born_table(sk_prime, challenge(pk_prime, j2))
        for k1, k2 in itertools.product(range(p), repeat=2):
            a = (sk_prime.w2 - k1) % p
            if a == (sk_prime.w4 - k2) % p and a == j:
                total += probs[k1, k2]
    return total / p ** 2


def _component_exact_given(scn: ForgeryScenario, w_m: Witness, w_mp: Witness) -> float:
    if scn.kind == "misdirect":
        return exact_acceptance(w_m, w_mp)
    if scn.kind == "relay":
        return _relay_exact(scn.p, w_mp)
    return acceptance_for_witness(scn.effective_povm(), w_m)


def _forge_component(scn: ForgeryScenario, w_m: Witness, w_mp: Witness,
                     rng: np.random.Generator) -> int:
    p = scn.p
    j = int(rng.integers(0, p))
    intercepted = challenge(public_state(w_m), j)
    if scn.kind == "misdirect":
        _, _, resp = prover_step(w_mp, intercepted, rng)
    elif scn.kind == "relay":
        j2 = int(rng.integers(0, p))
        _, _, resp = prover_step(w_mp, challenge(public_state(w_mp), j2), rng)
    else:
        probs = scn.effective_povm().outcome_probabilities(intercepted.state)
        k = int(rng.choice(p + 1, p=probs / probs.sum()))
        resp = ABORT if k == p else k
    return decide(j, resp)


def forge_attack(scenario: ForgeryScenario, keys: KeyPair | None, seed: int, trials: int = 10_000,
                 *, l: int = 1) -> ForgeryResult:
    """Estimate and compute the forging success of ``scenario``.

    The strategy must exist before the key it attacks; this is checked from
    creation order. With ``keys=None`` every trial draws fresh keys, so the
    empirical rate estimates the key-averaged exact value.
    """
    if keys is not None:
        if scenario.created > keys.created:
            raise ValueError("strategy was built after the key it attacks; independence not guaranteed")
        if keys.p != scenario.p:
            raise ValueError("scenario and keys use different fields")
        l = keys.l
    p = scenario.p
    per_component = type2_acceptance(scenario.effective_povm())
    exact = per_component ** l
    given = None
    if keys is not None:
        given = float(np.prod([_component_exact_given(scenario, a, b)
                               for a, b in zip(keys.sk[scenario.m], keys.sk[scenario.m_prime])]))
    wins = 0
    for s in run_seeds(seed, trials):
        rng = np.random.default_rng(s)
        if keys is None:
            sk_m = _uniform_key(p, l, rng)
            sk_mp = _uniform_key(p, l, rng)
        else:
            sk_m, sk_mp = keys.sk[scenario.m], keys.sk[scenario.m_prime]
        wins += all(_forge_component(scenario, a, b, rng) for a, b in zip(sk_m, sk_mp))
    return ForgeryResult(wins / trials, trials, float(exact), given, float(p ** -l))


def relay_exact_enumerated(p: int) -> float:
    """Key-averaged relay success, enumerating keys and both sessions."""
    from .vis_core import all_witnesses
    ws = list(all_witnesses(p))
    return float(np.mean([_relay_exact(p, w) for w in ws]))


# --------------------------------------------------------------------------- #
# repeated single-bit scheme                                                  #
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class BitwiseResult:
    records: tuple[SignatureRecord, ...]
    accept_all: int
    key_systems: int  # public-key states per participant
    challenges: int
    qudits_per_participant: int
    exact_accept: float

    def to_dict(self) -> dict:
        return {"records": [r.to_dict() for r in self.records], "accept_all": self.accept_all,
                "key_systems": self.key_systems, "challenges": self.challenges,
                "qudits_per_participant": self.qudits_per_participant,
                "exact_accept": self.exact_accept}


def bitwise_sign(bits: str | Sequence[int], keys: KeyPair, verifier: Participant, seed: int,
                 *, forgeries: dict[int, ForgeryScenario] | None = None) -> BitwiseResult:
    """Sign each bit as its own session on key (position, bit).

    ``forgeries`` maps a position to a strategy: at that position the
    verifier expects the flipped bit while the signer is asked about the
    original one, and the adversary's reply replaces the signature.
    """
    bits = [int(b) for b in bits]
    forgeries = forgeries or {}
    n = len(bits)
    expected = {(i, b) for i in range(n) for b in (0, 1)}
    if set(keys.sk) != expected:
        raise ValueError("keys do not match the single-bit layout for this message length")
    for scn in forgeries.values():
        if scn.created > keys.created:
            raise ValueError("strategy was built after the key it attacks")
    records = []
    exact = 1.0
    for i, (b, s) in enumerate(zip(bits, run_seeds(seed, n))):
        if i in forgeries:
            scn = forgeries[i]
            target = (i, 1 - b)
            rng = np.random.default_rng(s)
            ok = all(_forge_component(scn, a, c, rng)
                     for a, c in zip(keys.sk[target], keys.sk[(i, b)]))
            records.append(SignatureRecord(target, (), (), int(ok), int(s), verifier.id))
            exact *= float(np.prod([_component_exact_given(scn, a, c)
                                    for a, c in zip(keys.sk[target], keys.sk[(i, b)])]))
        else:
            records.append(sign_session(keys, verifier, (i, b), s))
            exact *= exact_session_acceptance(keys, (i, b))
    return BitwiseResult(tuple(records), int(all(r.accept for r in records)),
                         key_systems=2 * n, challenges=n,
                         qudits_per_participant=2 * n * 2 * keys.l, exact_accept=exact)


# --------------------------------------------------------------------------- #
# scenario files                                                              #
# --------------------------------------------------------------------------- #

def _strategy_from_spec(p: int, m, m_prime, spec: dict, rng: np.random.Generator) -> ForgeryScenario:
    kind = spec.get("kind", "constant")
    params = spec.get("parameters", {})
    if kind == "random_povm":
        return ForgeryScenario(p, m, m_prime, "povm",
                               povm=random_povm(p, rng, with_abort=bool(params.get("abort", False))))
    if kind == "povm":
        return ForgeryScenario(p, m, m_prime, "povm", povm=Povm.from_dict(params["povm"]))
    return ForgeryScenario(p, m, m_prime, kind, value=int(params.get("value", 0)))


def run_scenario(scn: dict) -> tuple[list[dict], dict]:
    """Execute a scenario description; returns (session lines, summary).

    Keys: p, L, N, l, messages, sessions, seed, scheme ("direct" or
    "bitwise"), adversary {kind, parameters}, deterrent_rate.
    """
    try:
        p = require_prime(int(scn["p"]))
        seed = int(scn["seed"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed scenario: {exc}") from exc
    l = int(scn.get("l", 1))
    N = int(scn.get("N", 1))
    n_sessions = int(scn.get("sessions", 1))
    scheme = scn.get("scheme", "direct")
    adversary = scn.get("adversary") or {"kind": "none"}
    rng = np.random.default_rng(seed)
    lines: list[dict] = []
    if scheme == "bitwise":
        bits = str(scn.get("bits", "0"))
        if set(bits) - {"0", "1"}:
            raise ValueError("bits must be a 0/1 string")
        forged = {}
        if adversary.get("kind", "none") != "none":
            for pos in adversary.get("parameters", {}).get("positions", [0]):
                forged[int(pos)] = _strategy_from_spec(p, (pos, 1), (pos, 0), adversary, rng)
        keys, parts = keygen_bitwise(p, len(bits), N, rng, l)
        accepts = 0
        exact = None
        res = None
        for i, s in enumerate(run_seeds(seed, n_sessions)):
            res = bitwise_sign(bits, keys, parts[0], s, forgeries=forged)
            accepts += res.accept_all
            exact = res.exact_accept
            lines.append({"session": i, "accept_all": res.accept_all,
                          "records": [r.to_dict() for r in res.records]})
        summary = {"scheme": "bitwise", "sessions": n_sessions, "accept_rate": accepts / n_sessions,
                   "exact_accept": exact, "key_systems": res.key_systems,
                   "challenges": res.challenges, "qudits_per_participant": res.qudits_per_participant}
        if forged:
            summary["forgery_bound"] = float(p ** -l)
        return lines, summary

    messages = scn.get("messages", [0, 1])
    L = int(scn.get("L", len(messages)))
    if adversary.get("kind", "none") == "none":
        keys, parts = keygen(p, L, N, rng, l)
        deterrent = float(scn.get("deterrent_rate", 0.0))
        accepts = 0
        for i, s in enumerate(run_seeds(seed, n_sessions)):
            srng = np.random.default_rng(s)
            m = messages[i % len(messages)]
            verifier = parts[0]
            if deterrent > 0 and srng.random() < deterrent:
                verifier = parts[int(srng.integers(0, N))]
            rec = sign_session(keys, verifier, m, int(srng.integers(0, 2 ** 63)))
            accepts += rec.accept
            lines.append({"session": i, **rec.to_dict()})
        return lines, {"scheme": "direct", "sessions": n_sessions,
                       "completeness_rate": accepts / n_sessions, "exact_completeness": 1.0}

    m, m_prime = messages[0], messages[1]
    strategy = _strategy_from_spec(p, m, m_prime, adversary, rng)
    keys, _ = keygen(p, L, N, rng, l)
    res = forge_attack(strategy, None, seed, n_sessions, l=l)
    given = forge_attack(strategy, keys, seed, 1)
    lines.append({"strategy": strategy.kind, **res.to_dict()})
    return lines, {"scheme": "direct", "sessions": n_sessions, "forgery_rate": res.empirical,
                   "exact_forgery": res.exact, "exact_given_keys": given.exact_given_keys,
                   "exact_bound": res.bound}


def load_scenario(path: str) -> dict:
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"malformed scenario file: {exc}") from exc
