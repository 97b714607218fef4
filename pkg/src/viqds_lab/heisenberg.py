"""Weyl operators over F_p and the eigenbases that hold the witnesses."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .field_linalg import (EIG_CLUSTER_TOL, FieldElement, eig_unitary,
                           require_prime)


def omega(p: int) -> complex:
    return np.exp(2j * np.pi / p)


@dataclass(frozen=True)
class WeylLabel:
    s: int
    t: int

    @classmethod
    def of(cls, s: FieldElement, t: FieldElement) -> "WeylLabel":
        if s.modulus != t.modulus:
            raise ValueError("Weyl label components must share a modulus")
        return cls(s.value, t.value)


@lru_cache(maxsize=None)
def _shift(p: int, s: int) -> np.ndarray:
    # X(s)|x> = |x+s>
    m = np.zeros((p, p), dtype=complex)
    for x in range(p):
        m[(x + s) % p, x] = 1.0
    m.setflags(write=False)
    return m


@lru_cache(maxsize=None)
def _phase(p: int, t: int) -> np.ndarray:
    # Z(t)|x> = w^{xt}|x>
    m = np.diag(omega(p) ** ((np.arange(p) * t) % p)).astype(complex)
    m.setflags(write=False)
    return m


def shift_op(p: int, s: int) -> np.ndarray:
    require_prime(p)
    return _shift(p, int(s) % p)


def phase_op(p: int, t: int) -> np.ndarray:
    require_prime(p)
    return _phase(p, int(t) % p)


def weyl(p: int, s: int | WeylLabel, t: int | None = None) -> np.ndarray:
    """The p x p unitary W(s, t) = X(s) Z(t)."""
    if isinstance(s, WeylLabel):
        s, t = s.s, s.t
    require_prime(p)
    return _shift(p, int(s) % p) @ _phase(p, int(t) % p)


def commutation_exponent(p: int, a: WeylLabel, b: WeylLabel) -> int:
    """Exponent e with W(a) W(b) = w^e W(b) W(a)."""
    return (b.s * a.t - b.t * a.s) % p


def check_commutation(p: int, a: WeylLabel, b: WeylLabel) -> float:
    """Residual of the Weyl commutation relation for the pair (a, b)."""
    wa, wb = weyl(p, a), weyl(p, b)
    phase = omega(p) ** commutation_exponent(p, a, b)
    return float(np.max(np.abs(wa @ wb - phase * wb @ wa)))


@dataclass(frozen=True)
class EigenBasis:
    """Ordered eigenbasis {|phi(t, t')>}_{t'} of the commuting family W(s, s t).

    ``vectors[t']`` is the unit vector labelled t'; ``calibration`` is the
    unit-modulus factor c with W(1, t)|phi(t, t')> = c w^{t'} |phi(t, t')>.
    """

    p: int
    t: int
    vectors: np.ndarray  # shape (p, p); row t' is |phi(t, t')>
    calibration: complex

    def __getitem__(self, tprime: int) -> np.ndarray:
        return self.vectors[int(tprime) % self.p]

    def matrix(self) -> np.ndarray:
        """Columns are the basis vectors, i.e. the change of basis to computational."""
        return self.vectors.T


def _label_spectrum(p: int, vals: np.ndarray) -> tuple[complex, list[int]]:
    # all eigenvalues of W(1, t) are c * w^{t'} for one c; c^p is common
    cp = np.mean(vals ** p)
    theta = np.mod(np.angle(cp), 2 * np.pi)
    if theta > 2 * np.pi - EIG_CLUSTER_TOL:
        theta = 0.0
    c = np.exp(1j * theta / p)  # smallest-angle p-th root
    labels = []
    for lam in vals:
        x = np.angle(lam / c) / (2 * np.pi / p)
        k = int(np.rint(x))
        if abs(x - k) > 1e-6:
            raise ValueError("spectrum is not a rotated set of p-th roots of unity")
        labels.append(k % p)
    if sorted(labels) != list(range(p)):
        raise ValueError("eigenvalue labelling is not a bijection onto F_p")
    return complex(c), labels


@lru_cache(maxsize=None)
def _eigenbasis(p: int, t: int) -> EigenBasis:
    pairs = eig_unitary(weyl(p, 1, t))
    c, labels = _label_spectrum(p, np.array([lam for lam, _ in pairs]))
    vectors = np.zeros((p, p), dtype=complex)
    for (_, v), k in zip(pairs, labels):
        vectors[k] = v
    vectors.setflags(write=False)
    return EigenBasis(p, t, vectors, c)


def eigenbasis(p: int, t: int | FieldElement) -> EigenBasis:
    require_prime(p)
    return _eigenbasis(p, int(t) % p)


def phi(p: int, t: int, tprime: int) -> np.ndarray:
    """The witness vector |phi(t, t')>."""
    return eigenbasis(p, t)[tprime]


@dataclass(frozen=True)
class ShiftReport:
    """How W(s, s t - j) acts on the basis labelled by t.

    ``targets[t']`` is the label the vector t' is sent to and ``phases[t']``
    is the unit-modulus constant in front of it.
    """

    p: int
    t: int
    targets: tuple[int, ...]
    phases: tuple[complex, ...]
    max_deviation: float


def weyl_shift_action(p: int, t: int, s: int, jprime: int) -> ShiftReport:
    """Check that W(s, s t - j') maps |phi(t, t')> to c |phi(t, t' + j')> for every t'."""
    p = require_prime(p)
    basis = eigenbasis(p, t)
    op = weyl(p, s, s * t - jprime)
    targets, phases = [], []
    worst = 0.0
    for tp in range(p):
        dest = (tp + jprime) % p
        out = op @ basis[tp]
        c = np.vdot(basis[dest], out)
        worst = max(worst, abs(abs(c) - 1.0), float(np.linalg.norm(out - c * basis[dest])))
        targets.append(dest)
        phases.append(complex(c))
    if worst > EIG_CLUSTER_TOL:
        raise ValueError(
            f"shift action deviates by {worst:.3g}; eigenbasis labelling is inconsistent")
    return ShiftReport(p, t % p, tuple(targets), tuple(phases), worst)


def shift_action(p: int, t: int, j: int) -> ShiftReport:
    """Action of the challenge Z(j) on the basis t: label t' goes to t' - j."""
    return weyl_shift_action(p, t, 0, -j % p)
