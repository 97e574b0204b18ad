"""Input validation helpers in the spirit of ``sklearn.utils.validation``."""
from __future__ import annotations

import zlib

import numpy as np


def check_square(A, name: str = "operator") -> np.ndarray:
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {A.shape}")
    return A


def check_operator_stack(ops, name: str = "operators") -> np.ndarray:
    """Return ``ops`` as a complex array of shape (K, d, d)."""
    arr = np.asarray(ops, dtype=complex)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise ValueError(f"{name} must have shape (K, d, d), got {arr.shape}")
    if arr.shape[0] == 0:
        raise ValueError(f"{name} must be nonempty")
    return arr


def check_hypercube_table(values, name: str = "table") -> tuple[np.ndarray, int]:
    """Validate a table indexed by hypercube masks; return it with its ``m``."""
    arr = np.asarray(values)
    n = arr.shape[0] if arr.ndim else 0
    if n < 1 or n & (n - 1):
        raise ValueError(f"{name} needs 2**m rows, got {n}")
    return arr, n.bit_length() - 1


def check_permutation(perm, m: int | None = None) -> np.ndarray:
    perm = np.asarray(perm, dtype=np.int64)
    if perm.ndim != 1:
        raise ValueError("permutation must be one-dimensional")
    if m is not None and perm.shape[0] != m:
        raise ValueError(f"permutation must have length {m}, got {perm.shape[0]}")
    if sorted(perm.tolist()) != list(range(perm.shape[0])):
        raise ValueError(f"not a bijection on [0, {perm.shape[0]}): {perm.tolist()}")
    return perm


def check_random_state(seed) -> np.random.Generator:
    """Turn ``None``, an int or a Generator into a ``numpy.random.Generator``."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def substream(seed: int, name: str) -> np.random.Generator:
    """Named, reproducible child stream of a 64-bit master seed."""
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), zlib.crc32(name.encode())]))
