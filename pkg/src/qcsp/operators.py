"""Finite-dimensional operator primitives.

Traces are dimension-normalized throughout: ``normalized_trace(I) == 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from ._validation import check_operator_stack, check_square
from .config import BUDGET, TOL, BudgetExceededError

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


class NonCommutingError(ValueError):
    """Two operators that were required to commute do not."""

    def __init__(self, pair, defect: float):
        super().__init__(f"operators {pair[0]} and {pair[1]} do not commute (defect {defect:.3e})")
        self.pair = pair
        self.defect = defect


def normalized_trace(A) -> complex:
    A = check_square(A)
    return complex(np.trace(A)) / A.shape[0]


def commutator_defect(A, B) -> float:
    A, B = check_square(A, "A"), check_square(B, "B")
    if A.shape != B.shape:
        raise ValueError(f"dimension mismatch {A.shape} vs {B.shape}")
    return float(np.linalg.norm(A @ B - B @ A))


def commute(A, B, tol: float | None = None) -> tuple[bool, float]:
    """Whether ``A`` and ``B`` commute, with the Frobenius defect ``||AB - BA||``.

    The threshold scales as ``tol * max(1, ||A|| ||B||)``.
    """
    tol = TOL.commute if tol is None else tol
    defect = commutator_defect(A, B)
    scale = max(1.0, float(np.linalg.norm(A) * np.linalg.norm(B)))
    return defect <= tol * scale, defect


def pairwise_commutator_defects(ops, others=None) -> np.ndarray:
    """Matrix of ``||[A_i, B_j]||_F`` for two stacks (or one stack with itself)."""
    A = check_operator_stack(ops)
    B = A if others is None else check_operator_stack(others)
    AB = np.einsum("aij,bjk->abik", A, B)
    BA = np.einsum("bij,ajk->abik", B, A)
    return np.linalg.norm(AB - BA, axis=(2, 3))


def is_hermitian(A, tol: float | None = None) -> bool:
    tol = TOL.hermitian if tol is None else tol
    A = check_square(A)
    return float(np.linalg.norm(A - A.conj().T)) <= tol


def is_observable(X, tol: float | None = None) -> bool:
    tol = TOL.unitary if tol is None else tol
    X = check_square(X)
    eye = np.eye(X.shape[0])
    return is_hermitian(X) and float(np.linalg.norm(X.conj().T @ X - eye)) <= tol


def observable_to_pvm(X) -> np.ndarray:
    """Binary PVM ``[(I + X)/2, (I - X)/2]`` (outcome 0 <-> +1)."""
    X = check_square(X)
    eye = np.eye(X.shape[0])
    return np.stack([(eye + X) / 2, (eye - X) / 2])


def pvm_to_observable(P) -> np.ndarray:
    P = check_operator_stack(P)
    if P.shape[0] != 2:
        raise ValueError("only binary PVMs correspond to observables")
    return P[0] - P[1]


@dataclass
class MeasurementVerdict:
    kind: str
    defects: dict[str, float]
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    @property
    def worst_defect(self) -> float:
        return max(self.defects.values(), default=0.0)

    def __bool__(self) -> bool:
        return self.passed


def check_measurement(ops, kind: str = "povm") -> MeasurementVerdict:
    """Check POVM / self-commuting POVM / PVM invariants and report defects.

    ``defects["psd"]`` is the most negative eigenvalue clipped at zero, so every
    entry reads "0 is perfect".
    """
    if kind not in ("pvm", "povm", "self_commuting_povm"):
        raise ValueError(f"unknown measurement kind {kind!r}")
    P = check_operator_stack(ops)
    d = P.shape[1]
    defects = {
        "hermitian": float(np.max(np.linalg.norm(P - P.conj().transpose(0, 2, 1), axis=(1, 2)))),
        "completeness": float(np.linalg.norm(P.sum(axis=0) - np.eye(d))),
    }
    herm = (P + P.conj().transpose(0, 2, 1)) / 2
    defects["psd"] = float(max(0.0, -np.linalg.eigvalsh(herm).min()))
    failures = []
    if defects["hermitian"] > TOL.hermitian:
        failures.append(f"not Hermitian (defect {defects['hermitian']:.3e})")
    if defects["psd"] > TOL.psd:
        failures.append(f"not PSD (min eigenvalue {-defects['psd']:.3e})")
    if defects["completeness"] > TOL.completeness:
        failures.append(f"does not sum to identity (defect {defects['completeness']:.3e})")
    if kind in ("self_commuting_povm", "pvm"):
        comm = pairwise_commutator_defects(P)
        defects["self_commuting"] = float(comm.max())
        if kind == "self_commuting_povm" and defects["self_commuting"] > TOL.commute:
            failures.append(f"elements do not commute (defect {defects['self_commuting']:.3e})")
    if kind == "pvm":
        defects["idempotent"] = float(np.max(np.linalg.norm(P @ P - P, axis=(1, 2))))
        if defects["idempotent"] > TOL.idempotent:
            failures.append(f"elements not idempotent (defect {defects['idempotent']:.3e})")
    return MeasurementVerdict(kind, defects, failures)


def _cluster_sorted(values: np.ndarray, tol: float) -> list[np.ndarray]:
    """Group indices of ascending ``values`` whose consecutive gaps are <= tol."""
    groups, start = [], 0
    for i in range(1, len(values) + 1):
        if i == len(values) or values[i] - values[i - 1] > tol:
            groups.append(np.arange(start, i))
            start = i
    return groups


def _joint_basis(ops: np.ndarray, rng: np.random.Generator, tol: float, depth: int = 0) -> np.ndarray:
    d = ops.shape[1]
    if d == 1:
        return np.eye(1, dtype=complex)
    coeffs = rng.standard_normal(ops.shape[0])
    H = np.tensordot(coeffs, ops, axes=1)
    H = (H + H.conj().T) / 2
    scale = max(1.0, float(np.linalg.norm(H, 2)))
    w, V = np.linalg.eigh(H)
    for block in _cluster_sorted(w, tol * scale):
        if block.size < 2:
            continue
        Vb = V[:, block]
        sub = np.einsum("ji,ajk,kl->ail", Vb.conj(), ops, Vb)
        mean = np.einsum("aii->a", sub) / block.size
        spread = np.linalg.norm(sub - mean[:, None, None] * np.eye(block.size), axis=(1, 2))
        if spread.max() <= tol * scale or depth > 32:
            continue
        V[:, block] = Vb @ _joint_basis(sub, rng, tol, depth + 1)
    return V


@dataclass
class JointDiagonalization:
    basis: np.ndarray
    diagonals: np.ndarray
    off_diagonal_residue: float

    def reconstruct(self) -> np.ndarray:
        U = self.basis
        return np.einsum("ij,aj,kj->aik", U, self.diagonals, U.conj())


def simultaneous_diagonalize(ops, tol: float | None = None, seed: int = 0, check: bool = True) -> JointDiagonalization:
    """Common eigenbasis of a family of pairwise-commuting Hermitian operators.

    A random real combination of the family is diagonalized; eigenvalue
    clusters (width ``TOL.cluster``) are re-diagonalized recursively with the
    family restricted to the cluster.

    Returns
    -------
    JointDiagonalization
        ``basis`` is unitary with ``basis^* A_k basis`` diagonal, and
        ``diagonals[k]`` holds the (real) diagonal of operator ``k``.

    Raises
    ------
    NonCommutingError
        If some pair's defect exceeds ``tol * max(1, ||A|| ||B||)``.
    """
    tol = TOL.commute if tol is None else tol
    A = check_operator_stack(ops)
    if check and A.shape[0] > 1:
        defects = pairwise_commutator_defects(A)
        norms = np.linalg.norm(A, axis=(1, 2))
        scale = np.maximum(1.0, np.outer(norms, norms))
        bad = np.argwhere(defects > tol * scale)
        if bad.size:
            i, j = bad[0]
            raise NonCommutingError((int(i), int(j)), float(defects[i, j]))
    d = A.shape[1]
    if float(np.abs(A - np.einsum("aii,ij->aij", A, np.eye(d))).max(initial=0.0)) <= TOL.hermitian:
        U = np.eye(d, dtype=complex)  # already diagonal
    else:
        U = _joint_basis(A, np.random.default_rng(seed), TOL.cluster)
    conj = np.einsum("ji,ajk,kl->ail", U.conj(), A, U)
    diagonals = np.einsum("aii->ai", conj)
    off = conj - np.einsum("ai,ij->aij", diagonals, np.eye(A.shape[1]))
    residue = float(np.linalg.norm(off, axis=(1, 2)).max())
    return JointDiagonalization(U, diagonals.real.copy(), residue)


@dataclass(frozen=True)
class CliffordFamily:
    generators: np.ndarray

    @property
    def rank(self) -> int:
        return int(self.generators.shape[0])

    @property
    def dimension(self) -> int:
        return int(self.generators.shape[1])


def clifford_generators(r: int) -> CliffordFamily:
    """``r`` pairwise anticommuting observables of dimension ``2**ceil(r/2)``.

    Jordan-Wigner words: generator ``2k`` is ``Z^(k) X I...`` and ``2k+1`` is
    ``Z^(k) Y I...``.
    """
    if r < 1:
        raise ValueError("need at least one generator")
    qubits = math.ceil(r / 2)
    if 2**qubits > BUDGET.clifford_dimension:
        raise BudgetExceededError(f"{r} generators need dimension {2**qubits} > {BUDGET.clifford_dimension}", 2**qubits)
    eye = np.eye(2, dtype=complex)
    gens = []
    for i in range(r):
        k, tail = divmod(i, 2)
        word = [PAULI_Z] * k + [PAULI_Y if tail else PAULI_X] + [eye] * (qubits - k - 1)
        gens.append(reduce(np.kron, word))
    return CliffordFamily(np.array(gens))


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Ginibre matrix."""
    Z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def random_pvm(m: int, d: int, rng: np.random.Generator, basis=None) -> np.ndarray:
    """PVM with ``m`` outcomes obtained by sorting basis vectors into outcomes."""
    U = random_unitary(d, rng) if basis is None else basis
    outcome = rng.integers(0, m, size=d)
    P = np.zeros((m, d, d), dtype=complex)
    for j in range(d):
        P[outcome[j]] += np.outer(U[:, j], U[:, j].conj())
    return P


def random_observable(d: int, rng: np.random.Generator) -> np.ndarray:
    U = random_unitary(d, rng)
    signs = rng.choice((-1.0, 1.0), size=d)
    return (U * signs) @ U.conj().T
