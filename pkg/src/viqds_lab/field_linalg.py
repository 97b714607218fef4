"""Prime-field arithmetic and the dense linear algebra shared by every module.

Tensor ordering is fixed once: in ``kron(A, B)`` the left factor is the major
index, so basis state ``|i, j>`` sits at position ``i * dim(B) + j``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

HERMITIAN_ATOL = 1e-12
UNITARY_ATOL = 1e-12
EIG_CLUSTER_TOL = 1e-9


@lru_cache(maxsize=None)
def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def require_prime(p: int) -> int:
    if not isinstance(p, (int, np.integer)) or not is_prime(int(p)):
        raise ValueError(f"p must be prime, got {p!r}")
    return int(p)


@dataclass(frozen=True)
class FieldElement:
    """An element of F_p."""

    value: int
    modulus: int

    def __post_init__(self):
        require_prime(self.modulus)
        object.__setattr__(self, "value", int(self.value) % self.modulus)

    def _coerce(self, other) -> "FieldElement":
        if isinstance(other, FieldElement):
            if other.modulus != self.modulus:
                raise ValueError(
                    f"modulus mismatch: {self.modulus} vs {other.modulus}")
            return other
        if isinstance(other, (int, np.integer)):
            return FieldElement(int(other), self.modulus)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        return FieldElement(self.value + other.value, self.modulus)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        return FieldElement(self.value - other.value, self.modulus)

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        return FieldElement(self.value * other.value, self.modulus)

    __rmul__ = __mul__

    def __neg__(self):
        return FieldElement(-self.value, self.modulus)

    def inverse(self) -> "FieldElement":
        if self.value == 0:
            raise ZeroDivisionError("inverse of zero in F_p")
        return FieldElement(pow(self.value, -1, self.modulus), self.modulus)

    def __truediv__(self, other):
        return self * self._coerce(other).inverse()

    def __int__(self):
        return self.value

    def __index__(self):
        return self.value

    def __repr__(self):
        return f"{self.value} (mod {self.modulus})"


def field_arith(a: FieldElement, b: FieldElement | None, op: str) -> FieldElement:
    """Apply one of ``add, sub, mul, inv, neg``; unary ops ignore ``b``."""
    if op == "inv":
        return a.inverse()
    if op == "neg":
        return -a
    if b is None:
        raise ValueError(f"operation {op!r} needs two operands")
    if a.modulus != b.modulus:
        raise ValueError(f"modulus mismatch: {a.modulus} vs {b.modulus}")
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    raise ValueError(f"unknown field operation {op!r}")


# --------------------------------------------------------------------------- #
# dense linear algebra                                                        #
# --------------------------------------------------------------------------- #

def tensor(*mats: np.ndarray) -> np.ndarray:
    """Kronecker product, left factor major."""
    out = np.asarray(mats[0])
    for m in mats[1:]:
        out = np.kron(out, np.asarray(m))
    return out


def _check_dims(m: np.ndarray, dims: Sequence[int]) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if any(d < 1 for d in dims):
        raise ValueError(f"dims must be positive, got {dims}")
    total = int(np.prod(dims))
    if m.ndim != 2 or m.shape != (total, total):
        raise ValueError(
            f"matrix of shape {m.shape} inconsistent with dims {dims}")
    return dims


def partial_trace(m: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Trace out every factor not listed in ``keep``.

    The kept factors stay in their original relative order. Keeping nothing
    returns the full trace as a 1x1 matrix.
    """
    m = np.asarray(m)
    dims = _check_dims(m, dims)
    n = len(dims)
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= n for k in keep):
        raise ValueError(f"keep {keep} out of range for {n} factors")
    t = m.reshape(dims + dims)
    row = list(range(n))
    col = [n + i if i in keep else i for i in range(n)]
    out_idx = keep + [n + k for k in keep]
    res = np.einsum(t, row + col, out_idx)
    d = int(np.prod([dims[k] for k in keep])) if keep else 1
    return res.reshape(d, d)


def partial_transpose(m: np.ndarray, dims: Sequence[int], factor: int | Sequence[int]) -> np.ndarray:
    m = np.asarray(m)
    dims = _check_dims(m, dims)
    n = len(dims)
    factors = [factor] if isinstance(factor, (int, np.integer)) else list(factor)
    if any(f < 0 or f >= n for f in factors):
        raise ValueError(f"factor {factor} out of range for {n} factors")
    t = m.reshape(dims + dims)
    axes = list(range(2 * n))
    for f in factors:
        axes[f], axes[n + f] = axes[n + f], axes[f]
    return t.transpose(axes).reshape(m.shape)


def permute_factors(m: np.ndarray, dims: Sequence[int], order: Sequence[int]) -> np.ndarray:
    """Reorder the tensor factors of an operator (or of a vector).

    ``order[i]`` names the old factor that becomes new factor ``i``.
    """
    m = np.asarray(m)
    dims = tuple(int(d) for d in dims)
    n = len(dims)
    order = list(order)
    if sorted(order) != list(range(n)):
        raise ValueError(f"{order} is not a permutation of {n} factors")
    if m.ndim == 1:
        return m.reshape(dims).transpose(order).reshape(-1)
    dims = _check_dims(m, dims)
    t = m.reshape(dims + dims)
    return t.transpose(order + [n + o for o in order]).reshape(m.shape)


def vectorize(m: np.ndarray) -> np.ndarray:
    """``|X>> = sum_{k,l} x_{kl} |k>|l>``, i.e. row-major flattening."""
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"vectorize needs a square matrix, got shape {m.shape}")
    return m.reshape(-1).astype(complex)


def is_hermitian(m: np.ndarray, atol: float = HERMITIAN_ATOL) -> bool:
    m = np.asarray(m)
    return m.ndim == 2 and m.shape[0] == m.shape[1] and np.max(np.abs(m - m.conj().T), initial=0.0) < atol


def is_unitary(m: np.ndarray, atol: float = UNITARY_ATOL) -> bool:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    return np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))) < atol


def hermitian_part(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


def psd_sqrt_inv(m: np.ndarray, cutoff: float = 1e-14) -> tuple[np.ndarray, np.ndarray]:
    """Return (M^{-1/2} on the support, projector onto the kernel)."""
    vals, vecs = np.linalg.eigh(hermitian_part(m))
    scale = max(float(np.max(np.abs(vals), initial=0.0)), 1.0)
    support = vals > cutoff * scale
    inv_sqrt = (vecs[:, support] / np.sqrt(vals[support])) @ vecs[:, support].conj().T
    ker = vecs[:, ~support] @ vecs[:, ~support].conj().T
    return inv_sqrt, ker


def fix_phase(v: np.ndarray, tol: float = EIG_CLUSTER_TOL) -> np.ndarray:
    """Rotate ``v`` so that its first component of largest modulus is real positive."""
    mags = np.abs(v)
    idx = int(np.argmax(mags >= mags.max() - tol))
    return v * (np.abs(v[idx]) / v[idx])


def eig_unitary(u: np.ndarray, *, allow_degenerate: bool = False) -> list[tuple[complex, np.ndarray]]:
    """Eigendecomposition of a unitary matrix.

    Eigenpairs are sorted by eigenvalue phase in [0, 2*pi) and every
    eigenvector carries the phase convention of :func:`fix_phase`. A spectrum
    with two eigenvalues closer than ``EIG_CLUSTER_TOL`` is rejected unless
    ``allow_degenerate`` is set, since its eigenvectors are then not unique.
    """
    import scipy.linalg

    u = np.asarray(u, dtype=complex)
    if not is_unitary(u):
        raise ValueError("eig_unitary expects a unitary matrix")
    # Schur form of a normal matrix is diagonal with an orthonormal basis.
    t, z = scipy.linalg.schur(u, output="complex")
    vals = np.diag(t)
    angles = np.mod(np.angle(vals), 2 * np.pi)
    # angles within the tolerance of 2*pi belong at 0
    angles[angles > 2 * np.pi - EIG_CLUSTER_TOL] = 0.0
    order = np.argsort(angles, kind="stable")
    vals = vals[order]
    z = z[:, order]
    if not allow_degenerate and len(vals) > 1:
        gaps = np.abs(vals[:, None] - vals[None, :]) + np.eye(len(vals))
        if np.min(gaps) < EIG_CLUSTER_TOL:
            raise ValueError("eigenvalue cluster unresolvable at tolerance 1e-9")
    out = []
    for k in range(len(vals)):
        v = fix_phase(z[:, k])
        v = v / np.linalg.norm(v)
        lam = complex(vals[k] / abs(vals[k]))
        if np.linalg.norm(u @ v - lam * v) > EIG_CLUSTER_TOL:
            raise ValueError("eigenpair residual above tolerance")
        out.append((lam, v))
    return out
