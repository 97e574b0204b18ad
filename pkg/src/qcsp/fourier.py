"""Fourier analysis on the hypercube {+1,-1}^m for scalar and operator values.

Points and subsets share one encoding: an ``m``-bit mask. For a point, bit
``a`` set means ``x_a = -1``; for a subset, bit ``a`` set means ``a in S``.
Products of points are XORs, ``|S|`` is a popcount and
``chi_S(x) = (-1)^popcount(S & x)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._validation import check_hypercube_table
from .config import TOL


@lru_cache(maxsize=None)
def popcounts(m: int) -> np.ndarray:
    counts = np.zeros(1 << m, dtype=np.int64)
    for a in range(m):
        counts += (np.arange(1 << m) >> a) & 1
    counts.setflags(write=False)
    return counts


def chi(S: int, x: int) -> int:
    return -1 if bin(S & x).count("1") & 1 else 1


def character_matrix(m: int) -> np.ndarray:
    """``H[S, x] = chi_S(x)``."""
    idx = np.arange(1 << m)
    return np.where(popcounts(m)[idx[:, None] & idx[None, :]] & 1, -1, 1)


def signs_to_mask(x) -> int:
    return sum(1 << a for a, s in enumerate(x) if s < 0)


def mask_to_signs(x: int, m: int) -> np.ndarray:
    return np.where((x >> np.arange(m)) & 1, -1, 1)


def permute_points(perm) -> np.ndarray:
    """Table ``y[x]`` of the point ``x o perm``, i.e. ``y_i = x_{perm(i)}``."""
    perm = np.asarray(perm, dtype=np.int64)
    m = perm.shape[0]
    x = np.arange(1 << m)
    bits = (x[:, None] >> perm[None, :]) & 1
    return (bits << np.arange(m)[None, :]).sum(axis=1)


def image_subsets(sigma) -> np.ndarray:
    """Table ``T[S]`` of the image set ``sigma(S) = {sigma(a) : a in S}``."""
    sigma = np.asarray(sigma, dtype=np.int64)
    m = sigma.shape[0]
    S = np.arange(1 << m)
    bits = (S[:, None] >> np.arange(m)[None, :]) & 1
    return (bits << sigma[None, :]).sum(axis=1)


def noise_weights(m: int, flip_probability: float) -> np.ndarray:
    """``Pr[mu] = p^{|mu|} (1-p)^{m-|mu|}`` for every noise mask ``mu``."""
    k = popcounts(m)
    p = float(flip_probability)
    return p**k * (1.0 - p) ** (m - k)


def fwht(values: np.ndarray) -> np.ndarray:
    """Unnormalized Walsh-Hadamard transform along axis 0."""
    out = np.array(values, copy=True)
    n = out.shape[0]
    h = 1
    while h < n:
        view = out.reshape((n // (2 * h), 2, h) + out.shape[1:])
        a = view[:, 0].copy()
        view[:, 0] += view[:, 1]
        view[:, 1] = a - view[:, 1]
        h *= 2
    return out


@dataclass(frozen=True)
class OperatorFunction:
    """Function on {+1,-1}^m with values in d x d matrices (``d = 1``: scalars).

    ``values`` has shape ``(2**m, d, d)``.
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim == 1:
            v = v[:, None, None]
        check_hypercube_table(v, "values")
        if v.ndim != 3 or v.shape[1] != v.shape[2]:
            raise ValueError(f"values must have shape (2**m, d, d), got {v.shape}")
        object.__setattr__(self, "values", v)

    @property
    def m(self) -> int:
        return self.values.shape[0].bit_length() - 1

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def scalar(self) -> np.ndarray:
        if self.d != 1:
            raise ValueError("not a scalar function")
        return self.values[:, 0, 0]

    def odd_defect(self) -> float:
        full = (1 << self.m) - 1
        idx = np.arange(1 << self.m)
        return float(np.max(np.linalg.norm(self.values[idx ^ full] + self.values, axis=(1, 2))))

    def is_odd(self, tol: float | None = None) -> bool:
        return self.odd_defect() <= (TOL.odd if tol is None else tol)

    def observable_defect(self) -> float:
        v = self.values
        eye = np.eye(self.d)
        herm = np.linalg.norm(v - v.conj().transpose(0, 2, 1), axis=(1, 2))
        unit = np.linalg.norm(np.einsum("xji,xjk->xik", v.conj(), v) - eye, axis=(1, 2))
        return float(max(herm.max(), unit.max()))


@dataclass(frozen=True)
class FourierTable:
    """Coefficients ``coeffs[S]`` of shape ``(2**m, d, d)``."""

    coeffs: np.ndarray

    @property
    def m(self) -> int:
        return self.coeffs.shape[0].bit_length() - 1

    @property
    def d(self) -> int:
        return self.coeffs.shape[1]

    def squared(self) -> np.ndarray:
        """``coeff(S)^2`` for every S (PSD when the coefficients are Hermitian)."""
        return self.coeffs @ self.coeffs

    def parseval_defect(self) -> float:
        return float(np.linalg.norm(self.squared().sum(axis=0) - np.eye(self.d)))


def _as_function(f) -> OperatorFunction:
    return f if isinstance(f, OperatorFunction) else OperatorFunction(np.asarray(f))


def fourier_transform(f) -> FourierTable:
    """``coeff(S) = E_x[chi_S(x) f(x)]`` via a fast Walsh-Hadamard transform."""
    f = _as_function(f)
    return FourierTable(fwht(f.values) / f.values.shape[0])


def inverse_fourier(table: FourierTable) -> OperatorFunction:
    return OperatorFunction(fwht(table.coeffs))


def _as_table(g) -> FourierTable:
    if isinstance(g, FourierTable):
        return g
    return fourier_transform(g)


def influence(g, a: int, degree_cap: int | None = None) -> float:
    """(Degree-capped) influence of coordinate ``a``.

    Scalar case: ``sum_{S ∋ a, |S| <= cap} g(S)^2``. For operator tables the
    normalized trace of the same PSD sum is returned.
    """
    t = _as_table(g)
    if not 0 <= a < t.m:
        raise ValueError(f"coordinate {a} outside [0, {t.m})")
    sizes = popcounts(t.m)
    mask = ((np.arange(1 << t.m) >> a) & 1).astype(bool)
    if degree_cap is not None:
        mask &= sizes <= degree_cap
    if t.d == 1:
        return float(np.sum(np.abs(t.coeffs[mask, 0, 0]) ** 2))
    return float(np.einsum("sii->", t.squared()[mask]).real / t.d)


def noise_stability(g, rho: float) -> float:
    """``S_rho(g) = E_{x, mu}[g(x) g(x mu)]`` computed by exact enumeration.

    Each ``mu_a`` is ``-1`` with probability ``(1 - rho)/2``.
    """
    if not -1.0 < rho <= 0.0:
        raise ValueError(f"rho must lie in (-1, 0], got {rho}")
    f = _as_function(g)
    vals = f.scalar().real
    m = f.m
    idx = np.arange(1 << m)
    w = noise_weights(m, (1.0 - rho) / 2.0)
    corr = vals[:, None] * vals[idx[:, None] ^ idx[None, :]]
    return float(np.mean(corr @ w))


def fourier_weight_elements(table: FourierTable) -> np.ndarray:
    """``P^a = sum_{S ∋ a} coeff(S)^2 / |S|`` for ``a`` in ``[0, m)``."""
    m = table.m
    sizes = popcounts(m)
    sq = table.squared()
    P = np.zeros((m, table.d, table.d), dtype=sq.dtype)
    nonempty = np.arange(1, 1 << m)
    scaled = sq[nonempty] / sizes[nonempty][:, None, None]
    for a in range(m):
        P[a] = scaled[((nonempty >> a) & 1).astype(bool)].sum(axis=0)
    return P


@dataclass(frozen=True)
class FourierWeightPovm:
    elements: np.ndarray
    remainder: np.ndarray

    def stacked(self) -> np.ndarray:
        """All ``m + 1`` outcomes with the remainder last."""
        return np.concatenate([self.elements, self.remainder[None]])


def povm_from_observable_function(alpha) -> FourierWeightPovm:
    """Squared-Fourier-weight POVM of an observable-valued function.

    Outcome ``a`` gets ``sum_{S ∋ a} alpha(S)^2 / |S|`` and the remainder is
    ``I - sum_a P^a``; it vanishes for odd ``alpha``.
    """
    f = _as_function(alpha)
    defect = f.observable_defect()
    if defect > TOL.unitary:
        raise ValueError(f"function values are not observables (defect {defect:.3e})")
    P = fourier_weight_elements(fourier_transform(f))
    Q = np.eye(f.d) - P.sum(axis=0)
    return FourierWeightPovm(P, Q)
