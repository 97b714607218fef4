"""JSON encoding of complex matrices: row-major lists of [re, im] pairs."""
from __future__ import annotations

import json
from typing import Any

import numpy as np


def encode_matrix(m: np.ndarray) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.atleast_2d(m)]


def decode_matrix(data: Any) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 3 or arr.shape[-1] != 2:
        raise ValueError("matrix must be encoded as rows of [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def dumps(obj: Any) -> str:
    """Canonical JSON: sorted keys, fixed separators, so equal inputs give equal bytes."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))
