"""The three-round protocol V[p]: challenge, eigenbasis measurement, comparison.

Both sampled runs (seeded, replayable) and exact acceptance probabilities are
provided. Field values are carried as plain ints reduced mod p.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass
from typing import Iterator

import numpy as np

from .field_linalg import FieldElement, require_prime
from .heisenberg import eigenbasis, phase_op

ABORT = "abort"
BORN_ATOL = 1e-9


@dataclass(frozen=True)
class ProtocolParams:
    p: int
    n: int = 1

    def __post_init__(self):
        require_prime(self.p)
        if self.n < 1:
            raise ValueError("statement count must be at least 1")


@dataclass(frozen=True)
class Witness:
    """Private witness (w1, w2, w3, w4) over F_p."""

    p: int
    w1: int
    w2: int
    w3: int
    w4: int

    def __post_init__(self):
        require_prime(self.p)
        for name in ("w1", "w2", "w3", "w4"):
            object.__setattr__(self, name, int(getattr(self, name)) % self.p)

    @classmethod
    def from_elements(cls, *elems: FieldElement) -> "Witness":
        moduli = {e.modulus for e in elems}
        if len(elems) != 4 or len(moduli) != 1:
            raise ValueError("a witness is four elements of one field")
        return cls(moduli.pop(), *(e.value for e in elems))

    @classmethod
    def random(cls, p: int, rng: np.random.Generator) -> "Witness":
        return cls(p, *(int(x) for x in rng.integers(0, p, size=4)))

    @property
    def values(self) -> tuple[int, int, int, int]:
        return (self.w1, self.w2, self.w3, self.w4)

    def elements(self) -> tuple[FieldElement, ...]:
        return tuple(FieldElement(v, self.p) for v in self.values)

    def shifted(self, c: int) -> "Witness":
        """Shift the two eigenvalue labels (w2, w4) by the same amount."""
        return Witness(self.p, self.w1, self.w2 + c, self.w3, self.w4 + c)


def all_witnesses(p: int) -> Iterator[Witness]:
    for vals in itertools.product(range(p), repeat=4):
        yield Witness(p, *vals)


@dataclass(frozen=True)
class PublicState:
    p: int
    state: np.ndarray  # length p**2, qudit 1 major


@dataclass(frozen=True)
class Transcript:
    p: int
    j: int
    k1: int
    k2: int
    response: int | str  # field value or ABORT
    accept: int
    seed: int | None = None
    statement: int = 0

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: d[k] for k in ("p", "statement", "j", "k1", "k2", "response", "accept", "seed")}

    @classmethod
    def from_dict(cls, d: dict) -> "Transcript":
        return cls(p=d["p"], j=d["j"], k1=d["k1"], k2=d["k2"], response=d["response"],
                   accept=d["accept"], seed=d.get("seed"), statement=d.get("statement", 0))


def _check_moduli(*ws: Witness) -> int:
    ps = {w.p for w in ws}
    if len(ps) != 1:
        raise ValueError(f"witness moduli disagree: {sorted(ps)}")
    return ps.pop()


def public_state(w: Witness) -> PublicState:
    """|phi(w1, w2)> (x) |phi(w3, w4)>."""
    v = np.kron(eigenbasis(w.p, w.w1)[w.w2], eigenbasis(w.p, w.w3)[w.w4])
    return PublicState(w.p, v)


def challenge_operator(p: int, j: int) -> np.ndarray:
    z = phase_op(p, j)
    return np.kron(z, z)


def challenge(state: PublicState, j: int) -> PublicState:
    """Verifier step 1: apply Z(j) (x) Z(j)."""
    if state.state.shape != (state.p ** 2,):
        raise ValueError("public state must live on two qudits")
    return PublicState(state.p, challenge_operator(state.p, j) @ state.state)


def response_for(w: Witness, k1: int, k2: int) -> int | str:
    """Prover's classical reply: w2 - k1 when it equals w4 - k2, else abort."""
    a = (w.w2 - k1) % w.p
    b = (w.w4 - k2) % w.p
    return a if a == b else ABORT


def born_table(w: Witness, state: PublicState) -> np.ndarray:
    """Probabilities of (k1, k2) when measuring in the bases of w1 and w3."""
    p = w.p
    if state.p != p or state.state.shape != (p * p,):
        raise ValueError("state dimension does not match the witness field")
    b1 = eigenbasis(p, w.w1).vectors
    b3 = eigenbasis(p, w.w3).vectors
    amps = b1.conj() @ state.state.reshape(p, p) @ b3.conj().T
    probs = np.abs(amps) ** 2
    if abs(probs.sum() - 1.0) > BORN_ATOL:
        raise ValueError(f"Born weights sum to {probs.sum():.12f}")
    return probs


def prover_step(w: Witness, state: PublicState, rng: np.random.Generator) -> tuple[int, int, int | str]:
    """Prover step 2: measure, then answer or abort."""
    probs = born_table(w, state).ravel()
    idx = int(rng.choice(probs.size, p=probs / probs.sum()))
    k1, k2 = divmod(idx, w.p)
    return k1, k2, response_for(w, k1, k2)


def decide(j: int, response: int | str) -> int:
    """Verifier step 3."""
    return int(response != ABORT and response == j)


def run_protocol(w_true: Witness, w_prover: Witness, seed: int, statement: int = 0) -> Transcript:
    """One sampled run; the transcript records ``seed`` for replay."""
    p = _check_moduli(w_true, w_prover)
    rng = np.random.default_rng(seed)
    j = int(rng.integers(0, p))
    state = challenge(public_state(w_true), j)
    k1, k2, resp = prover_step(w_prover, state, rng)
    return Transcript(p, j, k1, k2, resp, decide(j, resp), seed=int(seed), statement=statement)


def run_seeds(seed: int, n: int) -> list[int]:
    """Independent per-run seeds derived from one master seed."""
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(n, dtype=np.uint64)]


def sample_acceptance(w_true: Witness, w_prover: Witness, n: int, seed: int) -> float:
    hits = sum(run_protocol(w_true, w_prover, s).accept for s in run_seeds(seed, n))
    return hits / n


def _single_qudit_overlaps(p: int, t_true: int, t_prover: int) -> np.ndarray:
    # |<phi(t_prover, k) | phi(t_true, l)>|^2 indexed [k, l]
    a = eigenbasis(p, t_prover).vectors.conj() @ eigenbasis(p, t_true).vectors.T
    return np.abs(a) ** 2


def exact_acceptance(w_true: Witness, w_prover: Witness) -> float:
    """Exact acceptance probability of the honest procedure run with ``w_prover``
    against the public state of ``w_true``, averaged over the uniform challenge."""
    p = _check_moduli(w_true, w_prover)
    q1 = _single_qudit_overlaps(p, w_true.w1, w_prover.w1)
    q2 = _single_qudit_overlaps(p, w_true.w3, w_prover.w3)
    total = 0.0
    for j in range(p):
        # the challenge moves the true labels to w2 - j and w4 - j
        l1 = (w_true.w2 - j) % p
        l2 = (w_true.w4 - j) % p
        # passing outcomes: w2' - k1 = w4' - k2 = j
        k1 = (w_prover.w2 - j) % p
        k2 = (w_prover.w4 - j) % p
        total += q1[k1, l1] * q2[k2, l2]
    return float(total / p)


def exact_acceptance_by_simulation(w_true: Witness, w_prover: Witness) -> float:
    """Same quantity computed from state vectors and the full Born table."""
    p = _check_moduli(w_true, w_prover)
    psi = public_state(w_true)
    total = 0.0
    for j in range(p):
        probs = born_table(w_prover, challenge(psi, j))
        for k1, k2 in itertools.product(range(p), repeat=2):
            if decide(j, response_for(w_prover, k1, k2)):
                total += probs[k1, k2]
    return float(total / p)
