"""Numerical tolerances and budgets shared across the package.

Exact algebraic identities only hold up to floating point, so every check
reads its budget from :data:`TOL` or :data:`BUDGET`. Tests and the CLI can
swap them with :func:`dataclasses.replace`.
"""
from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    weight_sum: float = 1e-12
    hermitian: float = 1e-10
    unitary: float = 1e-8
    psd: float = 1e-10
    completeness: float = 1e-8
    idempotent: float = 1e-8
    commute: float = 1e-8
    imag_residue: float = 1e-10
    odd: float = 1e-10
    cluster: float = 1e-7
    sdp_movement: float = 1e-9
    tie: float = 1e-12


@dataclass(frozen=True)
class Budgets:
    brute_force_labelings: int = 10**7
    reduction_alphabet: int = 6
    clifford_dimension: int = 4096
    sdp_max_sweeps: int = 200_000


TOL = Tolerances()
BUDGET = Budgets()


class BudgetExceededError(RuntimeError):
    """Raised when an exact computation would exceed its configured budget."""

    def __init__(self, message: str, required: int | None = None):
        super().__init__(message)
        self.required = required
