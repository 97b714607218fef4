"""Parallel composition of protocol instances with AND acceptance."""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

from .adversaries import Instrument, choi_of_channel, total_variation
from .field_linalg import permute_factors, require_prime
from .heisenberg import eigenbasis
from .soundness_opt import (GameSpec, SolveReport, build_game_from_vis,
                            solve_game, tensor_game)
from .vis_core import (ABORT, ProtocolParams, Transcript, Witness,
                       exact_acceptance, public_state, response_for,
                       run_protocol, run_seeds)

MAX_TENSOR_DIM_A = 81  # combined challenged-state dimension the SDP path accepts


@dataclass(frozen=True)
class ConcatProtocol:
    components: tuple[ProtocolParams, ...]

    def __post_init__(self):
        if len(self.components) < 1:
            raise ValueError("a concatenation needs at least one component")

    @classmethod
    def homogeneous(cls, p: int, l: int) -> "ConcatProtocol":
        return cls(tuple(ProtocolParams(p) for _ in range(l)))

    @property
    def l(self) -> int:
        return len(self.components)

    @property
    def dimension(self) -> int:
        return int(np.prod([c.p for c in self.components]))


@dataclass(frozen=True)
class ConcatTranscript:
    components: tuple[Transcript, ...]
    accept_all: int

    def to_dict(self) -> dict:
        return {"components": [t.to_dict() for t in self.components], "accept_all": self.accept_all}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _check_lengths(l: int, *lists: Sequence) -> None:
    for lst in lists:
        if len(lst) != l:
            raise ValueError(f"expected {l} components, got {len(lst)}")


def concat_run(l: int, w_true: Sequence[Witness], w_prover: Sequence[Witness], seed: int) -> ConcatTranscript:
    """Run each component on its own seed stream; accept only if all accept."""
    _check_lengths(l, w_true, w_prover)
    seeds = run_seeds(seed, l)
    ts = tuple(run_protocol(a, b, s) for a, b, s in zip(w_true, w_prover, seeds))
    return ConcatTranscript(ts, int(all(t.accept for t in ts)))


def concat_exact(l: int, w_true: Sequence[Witness], w_prover: Sequence[Witness]) -> float:
    _check_lengths(l, w_true, w_prover)
    return float(np.prod([exact_acceptance(a, b) for a, b in zip(w_true, w_prover)]))


def concat_type2_game(l: int, p: int) -> GameSpec:
    base = build_game_from_vis(p).compressed()
    return reduce(tensor_game, [base] * l)


def concat_type2_bound(l: int, p: int) -> SolveReport:
    """Optimal witness-independent acceptance of the l-fold composition."""
    p = require_prime(p)
    if (p * p) ** l > MAX_TENSOR_DIM_A:
        raise ValueError(f"l={l}, p={p} exceeds the dimension cap of the tensored game")
    return solve_game(concat_type2_game(l, p))


def mixed_type2_bound(ps: Sequence[int]) -> SolveReport:
    """Same as :func:`concat_type2_bound` for components over different fields."""
    if int(np.prod([q * q for q in ps])) > MAX_TENSOR_DIM_A:
        raise ValueError("tensored game exceeds the dimension cap")
    games = [build_game_from_vis(require_prime(q)).compressed() for q in ps]
    return solve_game(reduce(tensor_game, games))


# --------------------------------------------------------------------------- #
# zero knowledge under composition                                            #
# --------------------------------------------------------------------------- #

def tensor_instruments(i1: Instrument, i2: Instrument) -> "JointInstrument":
    """Two component instruments applied side by side."""
    if i1.p != i2.p:
        raise ValueError("components must share p")
    p = i1.p
    d = p * p
    choi = {}
    for a in i1.outcomes:
        for b in i2.outcomes:
            # (in_1, out_1, in_2, out_2) -> (in_1, in_2, out_1, out_2)
            choi[(a, b)] = permute_factors(np.kron(i1.choi[a], i2.choi[b]), (d, d, d, d), [0, 2, 1, 3])
    return JointInstrument(p, 2, tuple(choi), choi, f"{i1.name}*{i2.name}")


@dataclass(frozen=True)
class JointInstrument:
    """Verifier instrument acting jointly on all 2l public qudits."""

    p: int
    l: int
    outcomes: tuple
    choi: dict
    name: str = ""

    @property
    def din(self) -> int:
        return self.p ** (2 * self.l)

    def apply(self, label, rho: np.ndarray) -> np.ndarray:
        d = self.din
        t = self.choi[label].reshape(d, d, d, d)
        return np.einsum("aibj,ab->ij", t, rho)


def random_joint_specious_instrument(p: int, l: int, rng: np.random.Generator,
                                     n_outcomes: int = 3, kraus_per_outcome: int = 2) -> JointInstrument:
    """Kraus operators diagonal in the computational basis, depending on the
    per-component sums (k1 + k2) jointly, so outcomes can correlate components."""
    p = require_prime(p)
    m = n_outcomes * kraus_per_outcome
    g = rng.normal(size=(m, p ** l)) + 1j * rng.normal(size=(m, p ** l))
    g /= np.linalg.norm(g, axis=0, keepdims=True)
    digits = np.array(list(itertools.product(range(p), repeat=2 * l)))  # qudit values
    sums = (digits[:, 0::2] + digits[:, 1::2]) % p
    key = sums @ (p ** np.arange(l - 1, -1, -1))
    choi = {}
    for j in range(n_outcomes):
        ks = [np.diag(g[j * kraus_per_outcome + i][key]) for i in range(kraus_per_outcome)]
        choi[j] = choi_of_channel(ks, trace_preserving=False)
    return JointInstrument(p, l, tuple(range(n_outcomes)), choi, "random-joint-specious")


def joint_transcript_distribution(inst: JointInstrument, ws: Sequence[Witness]) -> np.ndarray:
    """Law of (verifier outcome, tuple of component responses) for the key list ``ws``.

    Columns enumerate response tuples over (F_p plus abort)^l in product order.
    """
    p, l = inst.p, inst.l
    _check_lengths(l, ws)
    psi = reduce(np.kron, [public_state(w).state for w in ws])
    rho = np.outer(psi, psi.conj())
    # measurement basis: per component |phi(w1, k1)> |phi(w3, k2)>
    comp_bases = []
    for w in ws:
        b1, b3 = eigenbasis(p, w.w1).vectors, eigenbasis(p, w.w3).vectors
        comp_bases.append(np.einsum("ax,by->abxy", b1, b3).reshape(p * p, p * p))
    basis = reduce(np.kron, comp_bases)
    resp_index = []
    for idx in itertools.product(range(p * p), repeat=l):
        col = 0
        for w, kk in zip(ws, idx):
            r = response_for(w, *divmod(kk, p))
            col = col * (p + 1) + (p if r == ABORT else r)
        resp_index.append(col)
    resp_index = np.array(resp_index)
    table = np.zeros((len(inst.outcomes), (p + 1) ** l))
    for row, lab in enumerate(inst.outcomes):
        sigma = inst.apply(lab, rho)
        probs = np.einsum("kx,xy,ky->k", basis.conj(), sigma, basis).real
        np.add.at(table[row], resp_index, probs)
    return table


def joint_max_tv(inst: JointInstrument, witness_lists: Sequence[Sequence[Witness]]) -> float:
    tables = [joint_transcript_distribution(inst, ws) for ws in witness_lists]
    worst = 0.0
    for i in range(len(tables)):
        for j in range(i + 1, len(tables)):
            worst = max(worst, total_variation(tables[i], tables[j]))
    return worst
