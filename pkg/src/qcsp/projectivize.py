"""Rounding self-commuting POVM assignments to PVM assignments of no smaller value.

A self-commuting POVM generates a commutative algebra spanned by minimal
projections ``D_1..D_N``; each element is ``P^a = sum_i w[a, i] D_i``. PVMs
in the same algebra commute with everything ``P`` commutes with, and the
value of a CSP is linear in each vertex's measurement, so choosing the best
outcome per block never lowers the value.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .assignments import PvmAssignment, csp_value_raw
from .config import TOL
from .operators import check_measurement, simultaneous_diagonalize


@dataclass(frozen=True)
class MinimalProjectionBasis:
    """Joint eigenbasis, the blocks of basis columns, and per-block outcome weights.

    ``weights[a, i]`` is the eigenvalue of ``P^a`` on block ``i``.
    """

    basis: np.ndarray
    blocks: tuple[np.ndarray, ...]
    weights: np.ndarray

    @property
    def block_count(self) -> int:
        return len(self.blocks)

    @property
    def outcomes(self) -> int:
        return self.weights.shape[0]

    def projection(self, i: int) -> np.ndarray:
        V = self.basis[:, self.blocks[i]]
        return V @ V.conj().T

    def projections(self) -> np.ndarray:
        return np.array([self.projection(i) for i in range(self.block_count)])

    def reconstruct(self) -> np.ndarray:
        return np.einsum("ai,ijk->ajk", self.weights, self.projections())


def _cluster_columns(diag: np.ndarray, tol: float) -> list[list[int]]:
    """Greedy grouping of columns whose eigenvalue tuples agree entrywise within ``tol``."""
    groups: list[list[int]] = []
    reps: list[np.ndarray] = []
    for j in range(diag.shape[1]):
        col = diag[:, j]
        for g, r in zip(groups, reps):
            if np.max(np.abs(col - r)) <= tol:
                g.append(j)
                break
        else:
            groups.append([j])
            reps.append(col)
    return groups


def minimal_projections(P) -> MinimalProjectionBasis:
    """Minimal projections of the algebra generated by a self-commuting POVM.

    Raises
    ------
    NonCommutingError
        If two elements of ``P`` fail to commute.
    """
    P = np.asarray(P, dtype=complex)
    jd = simultaneous_diagonalize(P)
    groups = _cluster_columns(jd.diagonals, TOL.cluster)
    weights = np.array([[jd.diagonals[a, g].mean() for g in groups] for a in range(P.shape[0])])
    weights = np.clip(weights, 0.0, None)
    weights /= weights.sum(axis=0, keepdims=True)
    return MinimalProjectionBasis(jd.basis, tuple(np.array(g) for g in groups), weights)


def decompose_to_pvms(basis: MinimalProjectionBasis, tol: float = 1e-12) -> list[tuple[np.ndarray, float]]:
    """Write the POVM as a convex combination of PVMs from its own algebra.

    Each step assigns every block its currently heaviest outcome (smallest
    index on ties), takes the smallest of those weights as the coefficient,
    and subtracts. At least one entry reaches zero per step, so at most
    ``outcomes * blocks`` terms are produced.
    """
    R = basis.weights.copy()
    D = basis.projections()
    m, N = R.shape
    terms = []
    remaining = 1.0
    while remaining > tol:
        choice = np.argmax(R, axis=0)
        lam = float(R[choice, np.arange(N)].min())
        if lam <= 0:
            break
        pvm = np.zeros((m,) + D.shape[1:], dtype=complex)
        for i, a in enumerate(choice):
            pvm[a] += D[i]
        terms.append((pvm, lam))
        R[choice, np.arange(N)] -= lam
        remaining -= lam
    return terms


@dataclass
class ProjectivizationResult:
    assignment: PvmAssignment
    initial_value: float
    history: list[float] = field(default_factory=list)

    @property
    def final_value(self) -> float:
        return self.history[-1] if self.history else self.initial_value

    def monotone(self, slack: float = 1e-10) -> bool:
        values = [self.initial_value] + self.history
        return all(b >= a - slack for a, b in zip(values, values[1:]))


def projectivize_assignment(inst, asg: PvmAssignment, evaluator: Callable[[np.ndarray], complex] | None = None) -> ProjectivizationResult:
    """Round each vertex's POVM to a PVM, one vertex at a time.

    With all other vertices fixed the value is an affine function
    ``C + sum_{a, i} w[a, i] c[a, i]`` of the vertex's block weights, where
    ``c[a, i]`` is the gain of placing block ``i`` on outcome ``a``. Picking
    ``argmax_a c[a, i]`` per block (smallest ``a`` on ties) gives a PVM whose
    value is at least the current one. Vertices that already hold a PVM are
    left untouched.

    ``evaluator`` maps a measurement stack ``(n, m, d, d)`` to the value and
    must be linear in each vertex's operators; it defaults to the CSP value of
    ``inst``.
    """
    if evaluator is None:
        evaluator = lambda M: csp_value_raw(inst, M)
    M = asg.measurements.copy()
    n, m = M.shape[:2]
    start = float(np.real(evaluator(M)))
    result = ProjectivizationResult(asg, start)
    for i in range(n):
        if check_measurement(M[i], "pvm").passed:
            continue
        mp = minimal_projections(M[i])
        D = mp.projections()
        M[i] = 0
        base = float(np.real(evaluator(M)))
        gain = np.empty((m, mp.block_count))
        for a in range(m):
            for b in range(mp.block_count):
                M[i, a] = D[b]
                gain[a, b] = float(np.real(evaluator(M))) - base
                M[i, a] = 0
        best = gain.max(axis=0, keepdims=True)
        choice = np.argmax(gain >= best - TOL.tie, axis=0)
        for b, a in enumerate(choice):
            M[i, a] += D[b]
        result.history.append(float(np.real(evaluator(M))))
    result.assignment = PvmAssignment(M, asg.cls, "pvm")
    return result
