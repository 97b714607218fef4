"""Stateless prover games: the operator G, the optimal acceptance p_max and its
dual certificate.

A verifier strategy is a pair (rho_RA, Pi_acc). A stateless prover applies a
channel A -> B whose Choi matrix C (input factor first, on A (x) B) satisfies
C >= 0 and Tr_B C = I_A; its acceptance is Tr[G C]. The maximum over C is a
small SDP. It is solved here by a multiplicative fixed-point iteration and
certified by a dual-feasible W with W (x) I_B >= G, so the reported interval
[primal, Tr W] brackets p_max without trusting the solver.

Games whose reference register R is classical are stored block-diagonally:
``rho`` has shape (R, A, A) and ``pi_acc`` shape (R, B, B), meaning
rho_RA = sum_r |r><r| (x) rho[r] and Pi_acc = sum_r |r><r| (x) pi_acc[r].
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .field_linalg import (hermitian_part, partial_trace, partial_transpose,
                           permute_factors, psd_sqrt_inv, require_prime)
from .serialization import decode_matrix, encode_matrix
from .vis_core import all_witnesses, challenge_operator, public_state

log = logging.getLogger(__name__)

GAME_ATOL = 1e-10
VALUE_TOL = 1e-10
MAX_ITER = 10_000
SLACK_TOL = 1e-8
CERT_WIDTH_ERROR = 1e-4
CLASSICAL_B_ATOL = 1e-12


class CertificateGapError(RuntimeError):
    def __init__(self, primal: float, certificate: "DualCertificate"):
        self.primal = primal
        self.certificate = certificate
        super().__init__(
            f"dual value {certificate.value:.3e} exceeds primal {primal:.3e} by more than {CERT_WIDTH_ERROR}")


@dataclass(frozen=True)
class GameSpec:
    rho: np.ndarray
    pi_acc: np.ndarray
    dims: tuple[int, int, int]  # (dim_R, dim_A, dim_B)

    def __post_init__(self):
        r, a, b = (int(x) for x in self.dims)
        object.__setattr__(self, "dims", (r, a, b))
        if self.classical_reference:
            if self.rho.shape != (r, a, a) or self.pi_acc.shape != (r, b, b):
                raise ValueError("block shapes do not match dims")
        elif self.rho.shape != (r * a, r * a) or self.pi_acc.shape != (r * b, r * b):
            raise ValueError("matrix shapes do not match dims")

    @property
    def classical_reference(self) -> bool:
        return self.rho.ndim == 3

    def validate(self, atol: float = GAME_ATOL) -> None:
        rho_blocks = self.rho if self.classical_reference else self.rho[None]
        pi_blocks = self.pi_acc if self.classical_reference else self.pi_acc[None]
        trace = np.einsum("rii->", rho_blocks).real
        if abs(trace - 1.0) > atol:
            raise ValueError(f"rho_RA has trace {trace}")
        if np.linalg.eigvalsh(hermitian_part_batch(rho_blocks)).min() < -atol:
            raise ValueError("rho_RA is not PSD")
        ev = np.linalg.eigvalsh(hermitian_part_batch(pi_blocks))
        if ev.min() < -atol or ev.max() > 1 + atol:
            raise ValueError("Pi_acc is not between 0 and I")

    def dense(self) -> "GameSpec":
        if not self.classical_reference:
            return self
        r, a, b = self.dims
        rho = np.einsum("rs,rij->risj", np.eye(r), self.rho).reshape(r * a, r * a)
        pi = np.einsum("rs,rij->risj", np.eye(r), self.pi_acc).reshape(r * b, r * b)
        return GameSpec(rho, pi, self.dims)

    def compressed(self) -> "GameSpec":
        """Merge reference records with identical acceptance blocks and drop
        records of zero weight; every channel keeps its acceptance."""
        if not self.classical_reference:
            return self
        groups: dict[bytes, int] = {}
        rhos, pis = [], []
        for rho_r, pi_r in zip(self.rho, self.pi_acc):
            if abs(np.trace(rho_r)) == 0.0:
                continue
            key = np.round(pi_r, 12).tobytes()
            if key in groups:
                rhos[groups[key]] = rhos[groups[key]] + rho_r
            else:
                groups[key] = len(rhos)
                rhos.append(rho_r.copy())
                pis.append(pi_r)
        _, a, b = self.dims
        return GameSpec(np.array(rhos), np.array(pis), (len(rhos), a, b))

    def to_dict(self) -> dict:
        return {"dims": list(self.dims), "classical_reference": self.classical_reference,
                "rho": _encode(self.rho), "pi_acc": _encode(self.pi_acc)}

    @classmethod
    def from_dict(cls, d: dict) -> "GameSpec":
        return cls(_decode(d["rho"]), _decode(d["pi_acc"]), tuple(d["dims"]))


def hermitian_part_batch(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + np.conj(np.swapaxes(m, -1, -2)))


def _encode(m: np.ndarray):
    return [encode_matrix(x) for x in m] if m.ndim == 3 else encode_matrix(m)


def _decode(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 4:
        return np.array([decode_matrix(x) for x in data])
    return decode_matrix(data)


@dataclass(frozen=True)
class GameOperator:
    g: np.ndarray  # on A (x) B
    dims: tuple[int, int]  # (dim_A, dim_B)

    def blocks(self) -> np.ndarray:
        """Diagonal B blocks G_b = <b|G|b>, shape (B, A, A)."""
        a, b = self.dims
        return np.einsum("xbyb->bxy", self.g.reshape(a, b, a, b))

    def is_classical_b(self, atol: float = CLASSICAL_B_ATOL) -> bool:
        a, b = self.dims
        t = self.g.reshape(a, b, a, b)
        off = t * (1 - np.eye(b))[None, :, None, :]
        return float(np.max(np.abs(off), initial=0.0)) < atol


@dataclass(frozen=True)
class DualCertificate:
    w: np.ndarray
    slack: float  # min eigenvalue of W (x) I_B - G
    value: float  # Tr W
    raw_slack: float = 0.0  # slack before any inflation

    @property
    def certified(self) -> bool:
        return self.slack >= -SLACK_TOL


@dataclass(frozen=True)
class PrimalResult:
    value: float
    choi: np.ndarray  # optimal Choi matrix on A (x) B
    iterations: int
    converged: bool
    povm_blocks: np.ndarray | None = field(default=None, repr=False)  # (B, A, A) if classical B


# --------------------------------------------------------------------------- #
# constructing games                                                          #
# --------------------------------------------------------------------------- #

def build_game_from_vis(p: int) -> GameSpec:
    """The V[p] round seen by a prover that ignores the witness.

    R records (w1, w2, w3, w4, J) uniformly; A carries the challenged public
    state; B is the classical reply in F_p plus an abort symbol (index p),
    accepted exactly when it equals the recorded J.
    """
    p = require_prime(p)
    a, b = p * p, p + 1
    rhos, pis = [], []
    weight = 1.0 / p ** 5
    for w in all_witnesses(p):
        psi = public_state(w).state
        for j in range(p):
            v = challenge_operator(p, j) @ psi
            rhos.append(weight * np.outer(v, v.conj()))
            pi = np.zeros((b, b), dtype=complex)
            pi[j, j] = 1.0
            pis.append(pi)
    return GameSpec(np.array(rhos), np.array(pis), (len(rhos), a, b))


def trivial_game(dim_a: int, dim_b: int, accept: bool) -> GameSpec:
    """Single-record game that accepts everything (or nothing)."""
    rho = (np.eye(dim_a, dtype=complex) / dim_a)[None]
    pi = (np.eye(dim_b, dtype=complex) * (1.0 if accept else 0.0))[None]
    return GameSpec(rho, pi, (1, dim_a, dim_b))


def _random_density(d: int, rng: np.random.Generator) -> np.ndarray:
    x = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    m = x @ x.conj().T
    return m / np.trace(m)


def _random_effect(d: int, rng: np.random.Generator) -> np.ndarray:
    x = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, _ = np.linalg.qr(x)
    return (q * rng.uniform(0, 1, size=d)) @ q.conj().T


def random_game(dims: tuple[int, int, int], rng: np.random.Generator, *, classical_b: bool = True) -> GameSpec:
    """Random dense game; with ``classical_b`` the acceptance test is diagonal in B."""
    r, a, b = dims
    rho = _random_density(r * a, rng)
    if classical_b:
        pi = np.zeros((r * b, r * b), dtype=complex)
        idx = np.arange(r) * b
        for bb in range(b):
            pi[np.ix_(idx + bb, idx + bb)] = _random_effect(r, rng)
    else:
        pi = _random_effect(r * b, rng)
    return GameSpec(rho, pi, (r, a, b))


def tensor_game(g1: GameSpec, g2: GameSpec) -> GameSpec:
    """Run two games side by side; factors come out as (R1 R2, A1 A2, B1 B2)."""
    r1, a1, b1 = g1.dims
    r2, a2, b2 = g2.dims
    dims = (r1 * r2, a1 * a2, b1 * b2)
    if g1.classical_reference and g2.classical_reference:
        rho = np.einsum("rij,skl->rsikjl", g1.rho, g2.rho).reshape(r1 * r2, a1 * a2, a1 * a2)
        pi = np.einsum("rij,skl->rsikjl", g1.pi_acc, g2.pi_acc).reshape(r1 * r2, b1 * b2, b1 * b2)
        return GameSpec(rho, pi, dims)
    d1, d2 = g1.dense(), g2.dense()
    rho = permute_factors(np.kron(d1.rho, d2.rho), (r1, a1, r2, a2), [0, 2, 1, 3])
    pi = permute_factors(np.kron(d1.pi_acc, d2.pi_acc), (r1, b1, r2, b2), [0, 2, 1, 3])
    return GameSpec(rho, pi, dims)


# --------------------------------------------------------------------------- #
# the operator G                                                              #
# --------------------------------------------------------------------------- #

def game_operator(game: GameSpec, atol: float = GAME_ATOL) -> GameOperator:
    """G with Tr[G C] equal to the acceptance of the channel with Choi matrix C."""
    r, a, b = game.dims
    if game.classical_reference:
        # G = sum_r rho_r^T (x) pi_r
        g = np.einsum("rqa,rbc->abqc", game.rho, game.pi_acc).reshape(a * b, a * b)
    else:
        t_rho = game.rho.reshape(r, a, r, a)
        t_pi = game.pi_acc.reshape(r, b, r, b)
        g = np.einsum("rasx,syrb->xyab", t_rho, t_pi).reshape(a * b, a * b)
    g = hermitian_part(g)
    lo = float(np.linalg.eigvalsh(g).min())
    if lo < -atol:
        raise ValueError(f"game operator has eigenvalue {lo:.3e}; factor convention is broken")
    return GameOperator(g, (a, b))


def game_operator_by_partial_trace(game: GameSpec) -> np.ndarray:
    """Tr_R[(rho^{T_A} (x) I_B)(Pi_acc (x) I_A)], assembled literally on R (x) A (x) B."""
    d = game.dense()
    r, a, b = d.dims
    left = np.kron(partial_transpose(d.rho, (r, a), 1), np.eye(b))
    right = permute_factors(np.kron(d.pi_acc, np.eye(a)), (r, b, a), [0, 2, 1])
    return partial_trace(left @ right, (r, a, b), keep=[1, 2])


def acceptance_of_channel(game: GameSpec, kraus: list[np.ndarray]) -> float:
    """Tr[Pi_acc (I_R (x) E)(rho_RA)] evaluated directly from Kraus operators."""
    r, a, b = game.dims
    if game.classical_reference:
        total = 0.0
        for k in kraus:
            out = np.einsum("ba,rac,dc->rbd", k, game.rho, k.conj())
            total += np.einsum("rbd,rdb->", out, game.pi_acc).real
        return float(total)
    out = sum(np.kron(np.eye(r), k) @ game.rho @ np.kron(np.eye(r), k).conj().T for k in kraus)
    return float(np.trace(game.pi_acc @ out).real)


# --------------------------------------------------------------------------- #
# primal and dual                                                             #
# --------------------------------------------------------------------------- #

def _classical_fixed_point(blocks: np.ndarray, tol: float, max_iter: int):
    nb, a, _ = blocks.shape
    m = np.repeat(np.eye(a, dtype=complex)[None] / nb, nb, axis=0)
    value = np.einsum("bij,bji->", blocks, m).real
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        gmg = blocks @ m @ blocks
        lam = gmg.sum(axis=0)
        inv_sqrt, ker = psd_sqrt_inv(lam)
        m = hermitian_part_batch(inv_sqrt @ gmg @ inv_sqrt)
        if np.abs(ker).max(initial=0.0) > 0:
            best = int(np.argmax(np.einsum("bij,ji->b", blocks, ker).real))
            m[best] += ker
        new = np.einsum("bij,bji->", blocks, m).real
        if abs(new - value) < tol and it > 1:
            value = new
            converged = True
            break
        value = new
    return float(value), m, it, converged


def _choi_fixed_point(g: np.ndarray, a: int, b: int, tol: float, max_iter: int):
    c = np.kron(np.eye(a), np.eye(b) / b).astype(complex)
    value = np.trace(g @ c).real
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        x = g @ c @ g
        lam = partial_trace(x, (a, b), keep=[0])
        inv_sqrt, ker = psd_sqrt_inv(lam)
        s = np.kron(inv_sqrt, np.eye(b))
        c = hermitian_part(s @ x @ s) + np.kron(ker, np.eye(b) / b)
        new = np.trace(g @ c).real
        if abs(new - value) < tol and it > 1:
            value = new
            converged = True
            break
        value = new
    return float(value), c, it, converged


def p_max_primal(op: GameOperator, *, tol: float = VALUE_TOL, max_iter: int = MAX_ITER,
                 strict: bool = False) -> PrimalResult:
    """Maximise Tr[G C] over Choi matrices with Tr_B C = I_A.

    With a classical reply register the problem is an optimal-measurement
    problem over the blocks G_b, iterated as
    M_b <- L^{-1/2} G_b M_b G_b L^{-1/2} with L = sum_k G_k M_k G_k.
    Otherwise the same update runs on the full Choi matrix.
    """
    a, b = op.dims
    if op.is_classical_b():
        value, m, it, ok = _classical_fixed_point(op.blocks(), tol, max_iter)
        choi = np.einsum("bxy,bc->xbyc", m, np.eye(b)).reshape(a * b, a * b)
        result = PrimalResult(value, choi, it, ok, m)
    else:
        value, c, it, ok = _choi_fixed_point(op.g, a, b, tol, max_iter)
        result = PrimalResult(value, c, it, ok)
    if not ok:
        cert = p_max_dual(op, result, check_width=False)
        msg = (f"fixed point did not converge in {max_iter} iterations; "
               f"best value {value:.10f}, certificate gap {cert.value - value:.3e}")
        if strict:
            raise RuntimeError(msg)
        log.warning(msg)
    return result


def p_max_dual(op: GameOperator, hint: PrimalResult, *, check_width: bool = True) -> DualCertificate:
    """Dual-feasible W from the primal optimiser: W = Herm(Tr_B[G C]), inflated
    by |slack| + 1e-9 when W (x) I_B - G is not PSD."""
    a, b = op.dims
    w = hermitian_part(partial_trace(op.g @ hint.choi, (a, b), keep=[0]))
    raw = float(np.linalg.eigvalsh(np.kron(w, np.eye(b)) - op.g).min())
    slack = raw
    if raw < 0:
        w = w + (abs(raw) + 1e-9) * np.eye(a)
        slack = float(np.linalg.eigvalsh(np.kron(w, np.eye(b)) - op.g).min())
    cert = DualCertificate(w, slack, float(np.trace(w).real), raw)
    if check_width and cert.value - hint.value > CERT_WIDTH_ERROR:
        raise CertificateGapError(hint.value, cert)
    return cert


@dataclass(frozen=True)
class SolveReport:
    primal: float
    dual: float
    slack: float
    iterations: int
    converged: bool

    @property
    def gap(self) -> float:
        return self.dual - self.primal

    def to_dict(self) -> dict:
        return {"primal": self.primal, "dual": self.dual, "slack": self.slack,
                "iterations": self.iterations, "gap": self.gap}


def solve_game(game: GameSpec, **kwargs) -> SolveReport:
    op = game_operator(game)
    res = p_max_primal(op, **kwargs)
    cert = p_max_dual(op, res)
    return SolveReport(res.value, cert.value, cert.slack, res.iterations, res.converged)
