"""Deviating parties: witness-independent provers and curious verifiers.

Choi matrices put the input factors first. For a channel E on ``din``
dimensions, ``D = sum_{kl} |k><l| (x) E(|k><l|)`` so that
``Tr[D (A^T (x) B)] = Tr[E(A) B]``. On the two public qudits the global factor
order is therefore (in1, in2, out1, out2).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

import numpy as np

from .field_linalg import (hermitian_part, partial_trace, permute_factors,
                           psd_sqrt_inv, require_prime, vectorize)
from .heisenberg import eigenbasis, phase_op
from .serialization import decode_matrix, encode_matrix
from .vis_core import (ABORT, PublicState, Witness, all_witnesses,
                       challenge_operator, public_state, response_for)

PSD_ATOL = 1e-10
CHOI_ORDERING = "in1,in2,out1,out2"


# --------------------------------------------------------------------------- #
# Choi matrices                                                               #
# --------------------------------------------------------------------------- #

def kraus_from_unitaries(mix: Iterable[tuple[float, np.ndarray]]) -> list[np.ndarray]:
    return [np.sqrt(prob) * np.asarray(u, dtype=complex) for prob, u in mix]


def choi_of_channel(kraus: Sequence[np.ndarray], *, trace_preserving: bool = True) -> np.ndarray:
    """Choi matrix (input factor first) of the map rho -> sum_i K_i rho K_i^dag."""
    kraus = [np.asarray(k, dtype=complex) for k in kraus]
    din = kraus[0].shape[1]
    if trace_preserving:
        s = sum(k.conj().T @ k for k in kraus)
        if np.max(np.abs(s - np.eye(din))) > PSD_ATOL:
            raise ValueError("channel is not trace preserving")
    # |v_i> = sum_a |a> (x) K_i|a>, amplitude at (a, m) is K_i[m, a]
    vs = np.array([k.T.reshape(-1) for k in kraus])
    return vs.T @ vs.conj()


def apply_choi(choi: np.ndarray, rho: np.ndarray, din: int) -> np.ndarray:
    """Evaluate E(rho) = Tr_in[D (rho^T (x) I)]."""
    dout = choi.shape[0] // din
    t = choi.reshape(din, dout, din, dout)
    return np.einsum("aibj,ab->ij", t, np.asarray(rho))


def is_psd(m: np.ndarray, atol: float = PSD_ATOL) -> bool:
    m = np.asarray(m)
    if np.max(np.abs(m - m.conj().T), initial=0.0) > atol:
        return False
    return bool(np.linalg.eigvalsh(hermitian_part(m)).min() > -atol)


# --------------------------------------------------------------------------- #
# POVMs for witness-independent provers                                        #
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class Povm:
    """Prover measurement on the two challenged qudits.

    ``elements[j']`` answers j'; ``abort`` is the outcome the verifier always
    rejects.
    """

    p: int
    elements: np.ndarray  # (p, p^2, p^2)
    abort: np.ndarray  # (p^2, p^2)

    def __post_init__(self):
        require_prime(self.p)
        d = self.p ** 2
        if self.elements.shape != (self.p, d, d) or self.abort.shape != (d, d):
            raise ValueError("POVM element shapes do not match p")
        for m in [*self.elements, self.abort]:
            if not is_psd(m):
                raise ValueError("POVM element is not positive semidefinite")
        total = self.elements.sum(axis=0) + self.abort
        if np.max(np.abs(total - np.eye(d))) > PSD_ATOL:
            raise ValueError("POVM elements do not sum to the identity")

    def outcome_probabilities(self, state: np.ndarray) -> np.ndarray:
        """Length p+1 vector; the last entry is the abort probability."""
        probs = [np.vdot(state, m @ state).real for m in self.elements]
        probs.append(np.vdot(state, self.abort @ state).real)
        return np.clip(np.array(probs), 0.0, None)

    def to_dict(self) -> dict:
        return {"kind": "povm", "p": self.p, "ordering": "q1,q2",
                "elements": [encode_matrix(m) for m in self.elements],
                "abort": encode_matrix(self.abort)}

    @classmethod
    def from_dict(cls, d: dict) -> "Povm":
        if d.get("ordering", "q1,q2") != "q1,q2":
            raise ValueError(f"unsupported POVM ordering {d['ordering']!r}")
        return cls(d["p"], np.array([decode_matrix(m) for m in d["elements"]]),
                   decode_matrix(d["abort"]))


def constant_povm(p: int, answer: int) -> Povm:
    """Always answer ``answer``, never abort."""
    d = p * p
    el = np.zeros((p, d, d), dtype=complex)
    el[answer % p] = np.eye(d)
    return Povm(p, el, np.zeros((d, d), dtype=complex))


def abort_povm(p: int) -> Povm:
    d = p * p
    return Povm(p, np.zeros((p, d, d), dtype=complex), np.eye(d, dtype=complex))


def _wishart(d: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return a @ a.conj().T


def random_povm(p: int, rng: np.random.Generator, *, with_abort: bool = False) -> Povm:
    """p (or p+1) Wishart draws rescaled by S^{-1/2} to sum to the identity."""
    d = p * p
    n = p + 1 if with_abort else p
    gs = [_wishart(d, rng) for _ in range(n)]
    s_inv, _ = psd_sqrt_inv(sum(gs))
    ms = [hermitian_part(s_inv @ g @ s_inv) for g in gs]
    abort = ms[p] if with_abort else np.zeros((d, d), dtype=complex)
    return Povm(p, np.array(ms[:p]), abort)


def witness_measurement_povm(w: Witness) -> Povm:
    """The honest prover's procedure for witness ``w`` written as a POVM."""
    p = w.p
    d = p * p
    el = np.zeros((p, d, d), dtype=complex)
    abort = np.zeros((d, d), dtype=complex)
    b1, b3 = eigenbasis(p, w.w1), eigenbasis(p, w.w3)
    for k1, k2 in itertools.product(range(p), repeat=2):
        v = np.kron(b1[k1], b3[k2])
        proj = np.outer(v, v.conj())
        r = response_for(w, k1, k2)
        if r == ABORT:
            abort += proj
        else:
            el[r] += proj
    return Povm(p, el, abort)


def averaged_witness_povm(p: int) -> Povm:
    """Honest procedure run with a uniformly random witness unrelated to the key."""
    d = p * p
    el = np.zeros((p, d, d), dtype=complex)
    abort = np.zeros((d, d), dtype=complex)
    ws = list(all_witnesses(p))
    for w in ws:
        m = witness_measurement_povm(w)
        el += m.elements
        abort += m.abort
    el /= len(ws)
    abort /= len(ws)
    return Povm(p, el, abort)


def type2_acceptance(povm: Povm) -> float:
    """Average acceptance over a uniform witness and challenge, closed form."""
    p = povm.p
    return float(1.0 / p - np.trace(povm.abort).real / p ** 3)


def type2_acceptance_enumerated(povm: Povm) -> float:
    """Same average, by enumerating every witness and challenge."""
    p = povm.p
    total = 0.0
    for w in all_witnesses(p):
        psi = public_state(w).state
        for j in range(p):
            v = challenge_operator(p, j) @ psi
            total += np.vdot(v, povm.elements[j] @ v).real
    return float(total / p ** 5)


def acceptance_for_witness(povm: Povm, w: Witness) -> float:
    """Acceptance against one fixed key, averaged over the challenge only."""
    p = povm.p
    psi = public_state(w).state
    total = 0.0
    for j in range(p):
        v = challenge_operator(p, j) @ psi
        total += np.vdot(v, povm.elements[j] @ v).real
    return float(total / p)


# --------------------------------------------------------------------------- #
# verifier instruments                                                        #
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class Instrument:
    """A verifier's first move on the two public qudits: one CP map per outcome."""

    p: int
    outcomes: tuple[Hashable, ...]
    choi: dict = field(repr=False)  # label -> (p^4, p^4) Choi matrix
    name: str = ""

    def __post_init__(self):
        require_prime(self.p)
        d = self.p ** 4
        if set(self.choi) != set(self.outcomes):
            raise ValueError("Choi map keys must match the outcome labels")
        for lab in self.outcomes:
            c = self.choi[lab]
            if c.shape != (d, d):
                raise ValueError(f"Choi matrix for {lab!r} has shape {c.shape}")
            if not is_psd(c):
                raise ValueError(f"Choi matrix for {lab!r} is not PSD")

    @property
    def din(self) -> int:
        return self.p ** 2

    def total_choi(self) -> np.ndarray:
        return sum(self.choi[j] for j in self.outcomes)

    def trace_preservation_residual(self) -> float:
        t = partial_trace(self.total_choi(), (self.din, self.din), keep=[0])
        return float(np.max(np.abs(t - np.eye(self.din))))

    def is_trace_preserving(self, atol: float = PSD_ATOL) -> bool:
        return self.trace_preservation_residual() < atol

    def apply(self, label: Hashable, rho: np.ndarray) -> np.ndarray:
        return apply_choi(self.choi[label], rho, self.din)

    def to_dict(self) -> dict:
        return {"kind": "instrument", "p": self.p, "name": self.name,
                "ordering": CHOI_ORDERING, "outcomes": list(self.outcomes),
                "choi": [encode_matrix(self.choi[j]) for j in self.outcomes]}

    @classmethod
    def from_dict(cls, d: dict) -> "Instrument":
        if d.get("ordering") != CHOI_ORDERING:
            raise ValueError(f"unsupported Choi ordering {d.get('ordering')!r}")
        outcomes = tuple(d["outcomes"])
        choi = {lab: decode_matrix(m) for lab, m in zip(outcomes, d["choi"])}
        return cls(d["p"], outcomes, choi, d.get("name", ""))


def instrument_from_kraus(p: int, kraus: dict, name: str = "") -> Instrument:
    """Build an instrument from ``{label: [K, ...]}``; the sum must be trace preserving."""
    choi = {lab: choi_of_channel(ks, trace_preserving=False) for lab, ks in kraus.items()}
    inst = Instrument(p, tuple(kraus), choi, name)
    if not inst.is_trace_preserving():
        raise ValueError("instrument is not trace preserving")
    return inst


def honest_verifier_instrument(p: int) -> Instrument:
    """Uniform J, then Z(J) (x) Z(J); J is kept as the outcome."""
    p = require_prime(p)
    return instrument_from_kraus(
        p, {j: [challenge_operator(p, j) / np.sqrt(p)] for j in range(p)}, "honest")


def identity_instrument(p: int) -> Instrument:
    """Forward the state untouched and report outcome 0."""
    return instrument_from_kraus(p, {0: [np.eye(p * p, dtype=complex)]}, "identity")


def computational_measure_instrument(p: int) -> Instrument:
    """Measure both qudits in the computational basis and forward the collapsed state."""
    d = p * p
    kraus = {}
    for k in range(d):
        proj = np.zeros((d, d), dtype=complex)
        proj[k, k] = 1.0
        kraus[k] = [proj]
    return instrument_from_kraus(p, kraus, "computational-measure")


def eigenbasis_measure_instrument(p: int, t: int = 0) -> Instrument:
    """Measure both qudits in the basis |phi(t, .)> and forward the collapsed state.

    Against keys with w1 = w3 = t this reads off (w2, w4) exactly, so the
    outcome statistics depend on the key.
    """
    b = eigenbasis(p, t)
    kraus = {}
    for k1, k2 in itertools.product(range(p), repeat=2):
        v = np.kron(b[k1], b[k2])
        kraus[k1 * p + k2] = [np.outer(v, v.conj())]
    return instrument_from_kraus(p, kraus, f"eigenbasis-measure-t{t}")


def random_specious_instrument(p: int, rng: np.random.Generator, n_outcomes: int = 3,
                               kraus_per_outcome: int = 2) -> Instrument:
    """Random instrument whose Kraus operators are diagonal functions of k1 + k2.

    Each such operator is a combination of the challenges Z(a) (x) Z(a), so the
    family keeps its total Choi matrix inside the span the speciousness test
    projects onto. Trace preservation is imposed per value of k1 + k2.
    """
    p = require_prime(p)
    m = n_outcomes * kraus_per_outcome
    g = rng.normal(size=(m, p)) + 1j * rng.normal(size=(m, p))
    g /= np.linalg.norm(g, axis=0, keepdims=True)
    ssum = np.add.outer(np.arange(p), np.arange(p)).reshape(-1) % p
    kraus = {}
    for j in range(n_outcomes):
        kraus[j] = [np.diag(g[j * kraus_per_outcome + i][ssum])
                    for i in range(kraus_per_outcome)]
    return instrument_from_kraus(p, kraus, "random-specious")


def random_instrument(p: int, rng: np.random.Generator, n_outcomes: int = 3,
                      kraus_per_outcome: int = 2) -> Instrument:
    """Random instrument from a Haar-like isometry, split into outcomes."""
    d = p * p
    m = n_outcomes * kraus_per_outcome
    a = rng.normal(size=(m * d, d)) + 1j * rng.normal(size=(m * d, d))
    q, _ = np.linalg.qr(a)
    ks = q.reshape(m, d, d)
    kraus = {j: [ks[j * kraus_per_outcome + i] for i in range(kraus_per_outcome)]
             for j in range(n_outcomes)}
    return instrument_from_kraus(p, kraus, "random")


# --------------------------------------------------------------------------- #
# classical speciousness and transcripts                                      #
# --------------------------------------------------------------------------- #

def speciousness_projector(p: int, jprime: int) -> np.ndarray:
    """p^{-2} |Z(j')>><<Z(j')| (x) |Z(j')>><<Z(j')| in the global Choi ordering.

    Each vectorized factor pairs one input with its output; the pairs
    (in1, out1, in2, out2) are then reordered to (in1, in2, out1, out2).
    """
    p = require_prime(p)
    z = vectorize(phase_op(p, jprime))
    u = np.kron(z, z) / p
    u = permute_factors(u, (p, p, p, p), [0, 2, 1, 3])
    return np.outer(u, u.conj())


@dataclass(frozen=True)
class SpeciousReport:
    residual: float
    is_specious: bool
    tolerance: float = 1e-9


def is_classical_specious(inst: Instrument, tol: float = 1e-9) -> SpeciousReport:
    p = inst.p
    proj = sum(speciousness_projector(p, j) for j in range(p))
    residual = float(np.trace(inst.total_choi() @ proj).real / p ** 2)
    return SpeciousReport(residual, abs(residual - 1.0) < tol, tol)


def response_labels(p: int) -> list:
    return list(range(p)) + [ABORT]


def transcript_distribution(inst: Instrument, w: Witness) -> np.ndarray:
    """Joint law of (verifier outcome, prover response) against key ``w``.

    Rows follow ``inst.outcomes``; columns are responses 0..p-1 then abort.
    Computed by applying each branch of the instrument to the public state and
    running the honest prover's measurement.
    """
    p = inst.p
    if w.p != p:
        raise ValueError("witness and instrument fields differ")
    psi = public_state(w).state
    rho = np.outer(psi, psi.conj())
    b1 = eigenbasis(p, w.w1).vectors
    b3 = eigenbasis(p, w.w3).vectors
    basis = np.einsum("ax,by->abxy", b1, b3).reshape(p * p, p * p)  # row = (k1, k2)
    table = np.zeros((len(inst.outcomes), p + 1))
    for r, lab in enumerate(inst.outcomes):
        sigma = inst.apply(lab, rho)
        probs = np.einsum("kx,xy,ky->k", basis.conj(), sigma, basis).real
        for idx, pr in enumerate(probs):
            k1, k2 = divmod(idx, p)
            resp = response_for(w, k1, k2)
            table[r, p if resp == ABORT else resp] += pr
    if table.sum() > 1.0 + 1e-9:
        raise ValueError(f"transcript probabilities sum to {table.sum():.12f}")
    return table


def closed_form_transcript(inst: Instrument) -> np.ndarray:
    """Tr p^{-2} D_j Pi_{j'} for every (j, j'); abort column is zero."""
    p = inst.p
    projs = [speciousness_projector(p, jp) for jp in range(p)]
    table = np.zeros((len(inst.outcomes), p + 1))
    for r, lab in enumerate(inst.outcomes):
        d = inst.choi[lab]
        for jp in range(p):
            table[r, jp] = np.trace(d @ projs[jp]).real / p ** 2
    return table


def total_variation(a: np.ndarray, b: np.ndarray) -> float:
    return float(0.5 * np.abs(np.asarray(a) - np.asarray(b)).sum())


@dataclass(frozen=True)
class ZeroKnowledgeReport:
    name: str
    residual: float
    is_specious: bool
    max_tv: float  # max pairwise TV of transcripts across witnesses
    closed_form_error: float | None  # only meaningful when specious


def zero_knowledge_report(inst: Instrument, witnesses: Iterable[Witness] | None = None) -> ZeroKnowledgeReport:
    ws = list(witnesses) if witnesses is not None else list(all_witnesses(inst.p))
    tables = np.array([transcript_distribution(inst, w) for w in ws])
    flat = tables.reshape(len(ws), -1)
    # pairwise max TV = max over pairs; compute against every other table
    max_tv = 0.0
    for i in range(len(ws)):
        max_tv = max(max_tv, float(0.5 * np.abs(flat[i + 1:] - flat[i]).sum(axis=1).max(initial=0.0)))
    spec = is_classical_specious(inst)
    cf_err = None
    if spec.is_specious:
        cf = closed_form_transcript(inst)
        cf_err = float(np.abs(tables - cf).max())
    return ZeroKnowledgeReport(inst.name, spec.residual, spec.is_specious, max_tv, cf_err)
