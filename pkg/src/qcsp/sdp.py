"""MaxCut value interval: vector relaxation, hyperplane rounding, and operator witnesses.

The relaxation replaces each sign ``s_i`` by a unit vector ``w_i`` and is
solved by cyclic coordinate ascent on the sphere. Constraints carry a parity
``r``; MaxCut is the all ``r = -1`` case, where the objective reads
``sum_e p_e (1 - w_i . w_j) / 2``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from ._validation import check_random_state
from .assignments import ObservableAssignment, PvmAssignment, eval_csp_value, eval_lin_observable_value
from .config import BUDGET, TOL, BudgetExceededError
from .instances import LinInstance, brute_force_classical_value
from .operators import clifford_generators


@dataclass(frozen=True)
class GramFactor:
    """Rows of ``vectors`` are the unit vectors ``w_i``."""

    vectors: np.ndarray

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def rank(self) -> int:
        return self.vectors.shape[1]

    def gram(self) -> np.ndarray:
        return self.vectors @ self.vectors.T

    def norm_defect(self) -> float:
        return float(np.max(np.abs(np.linalg.norm(self.vectors, axis=1) - 1.0)))


class SdpNotConvergedError(RuntimeError):
    """Coordinate ascent hit its sweep cap; ``incumbent`` holds the best factor found."""

    def __init__(self, message: str, incumbent: GramFactor, value: float):
        super().__init__(message)
        self.incumbent = incumbent
        self.value = value


@dataclass
class SdpResult:
    factor: GramFactor
    value: float
    restart_values: list[float] = field(default_factory=list)
    sweeps: list[int] = field(default_factory=list)


def _check_pairwise(inst: LinInstance) -> None:
    if not isinstance(inst, LinInstance) or inst.arity != 2:
        raise ValueError("the vector relaxation needs a 2-Lin (or MaxCut) instance")
    if inst.variable_count < 2:
        raise ValueError("need at least two variables")


def coupling_matrix(inst: LinInstance) -> np.ndarray:
    """Symmetric ``C[i, j] = sum p_e r_e / 2`` over constraints on ``{i, j}``, zero diagonal."""
    _check_pairwise(inst)
    n = inst.variable_count
    C = np.zeros((n, n))
    i, j = inst.scopes[:, 0], inst.scopes[:, 1]
    off = i != j
    np.add.at(C, (i[off], j[off]), inst.weights[off] * inst.parities[off] / 2.0)
    np.add.at(C, (j[off], i[off]), inst.weights[off] * inst.parities[off] / 2.0)
    return C


def relaxation_value(inst: LinInstance, factor: GramFactor) -> float:
    """``sum_e p_e (1 + r_e w_i . w_j) / 2``."""
    W = factor.vectors
    dots = np.einsum("ek,ek->e", W[inst.scopes[:, 0]], W[inst.scopes[:, 1]])
    return float(np.dot(inst.weights, (1.0 + inst.parities * dots) / 2.0))


def stationarity_defect(inst: LinInstance, factor: GramFactor) -> float:
    """Largest distance between ``w_i`` and ``normalize(sum_j C_ij w_j)``."""
    C = coupling_matrix(inst)
    G = C @ factor.vectors
    norms = np.linalg.norm(G, axis=1)
    live = norms > 1e-14
    target = G[live] / norms[live, None]
    return float(np.max(np.linalg.norm(factor.vectors[live] - target, axis=1), initial=0.0))


def _ascend(C: np.ndarray, W: np.ndarray, tol: float, max_sweeps: int) -> tuple[np.ndarray, int, bool]:
    n = W.shape[0]
    for sweep in range(1, max_sweeps + 1):
        moved = 0.0
        for i in range(n):
            g = C[i] @ W
            norm = np.linalg.norm(g)
            if norm <= 1e-14:
                continue
            new = g / norm
            moved = max(moved, float(np.linalg.norm(new - W[i])))
            W[i] = new
        if moved <= tol:
            return W, sweep, True
    return W, max_sweeps, False


def solve_maxcut_sdp(inst: LinInstance, tol: float | None = None, restarts: int = 5, seed=0, max_sweeps: int | None = None, rank: int | None = None) -> SdpResult:
    """Maximize the vector relaxation by coordinate ascent from seeded random starts.

    Each row update ``w_i <- normalize(sum_j C_ij w_j)`` is the exact
    maximizer over ``w_i`` with the others fixed. Rank defaults to ``n``.

    Raises
    ------
    SdpNotConvergedError
        If the best restart did not reach the movement tolerance.
    """
    tol = TOL.sdp_movement if tol is None else tol
    max_sweeps = BUDGET.sdp_max_sweeps if max_sweeps is None else max_sweeps
    C = coupling_matrix(inst)
    n = inst.variable_count
    r = n if rank is None else rank
    streams = np.random.SeedSequence(seed if isinstance(seed, int) else 0).spawn(restarts)
    best, best_val, best_ok = None, -np.inf, True
    result = SdpResult(None, -np.inf)
    for ss in streams:
        rng = np.random.default_rng(ss)
        W = rng.standard_normal((n, r))
        W /= np.linalg.norm(W, axis=1, keepdims=True)
        W, sweeps, ok = _ascend(C, W, tol, max_sweeps)
        val = relaxation_value(inst, GramFactor(W))
        result.restart_values.append(val)
        result.sweeps.append(sweeps)
        if val > best_val + TOL.tie:
            best, best_val, best_ok = W, val, ok
    factor = GramFactor(best)
    if not best_ok:
        raise SdpNotConvergedError(f"coordinate ascent did not converge within {max_sweeps} sweeps", factor, best_val)
    result.factor, result.value = factor, best_val
    return result


def _gw_derivative(theta: float) -> float:
    # numerator of d/dtheta [theta / (1 - cos theta)]
    return 1.0 - math.cos(theta) - theta * math.sin(theta)


def gw_angle() -> float:
    """Minimizer of ``theta / (1 - cos theta)`` on ``(0, pi]``."""
    return brentq(_gw_derivative, 2.0, 3.0, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def alpha_gw() -> float:
    """``(2/pi) min_theta theta / (1 - cos theta)``, about 0.87856."""
    theta = gw_angle()
    return 2.0 / math.pi * theta / (1.0 - math.cos(theta))


@dataclass
class RoundingResult:
    labeling: np.ndarray
    best_value: float
    mean_value: float
    samples: int


def _cut_values(inst: LinInstance, signs: np.ndarray) -> np.ndarray:
    """Values of the sign columns of ``signs`` (shape ``(n, samples)``)."""
    prod = signs[inst.scopes[:, 0]] * signs[inst.scopes[:, 1]]
    return inst.weights @ ((1.0 + inst.parities[:, None] * prod) / 2.0)


def gw_round(inst: LinInstance, factor: GramFactor, samples: int = 10_000, seed=None) -> RoundingResult:
    """Random-hyperplane rounding; label 0 is the sign ``+1``."""
    rng = check_random_state(seed)
    g = rng.standard_normal((factor.rank, samples))
    signs = np.where(factor.vectors @ g >= 0, 1, -1)
    vals = _cut_values(inst, signs)
    k = int(np.argmax(vals))
    labeling = (signs[:, k] < 0).astype(np.int64)
    best = float(_cut_values(inst, signs[:, k:k + 1])[0])
    return RoundingResult(labeling, best, float(vals.mean()), samples)


def trim_rank(factor: GramFactor, cutoff: float = 1e-8) -> GramFactor:
    """Rotate onto the numerical row space, dropping singular values ``<= cutoff``."""
    U, s, _ = np.linalg.svd(factor.vectors, full_matrices=False)
    keep = s > cutoff
    return GramFactor(U[:, keep] * s[keep])


def tsirelson_assignment(factor: GramFactor) -> ObservableAssignment:
    """Observables ``X_i = sum_k w_ik g_k`` over anticommuting generators ``g_k``.

    Then ``X_i^2 = |w_i|^2 I`` and ``tr(X_i X_j) = w_i . w_j``.

    Raises
    ------
    BudgetExceededError
        If the trimmed rank needs more than the Clifford dimension budget.
    """
    trimmed = trim_rank(factor)
    gens = clifford_generators(max(trimmed.rank, 1)).generators
    X = np.tensordot(trimmed.vectors, gens[: trimmed.rank], axes=1)
    return ObservableAssignment(X, "noncommutative")


@dataclass
class IntervalReport:
    omega_c: float
    omega_c_exact: bool
    gw_floor: float
    quantum_lb: float | None
    omega_sdp: float
    flags: dict = field(default_factory=dict)

    @property
    def ordered(self) -> bool:
        return all(self.flags.values())

    def to_dict(self) -> dict:
        return {
            "omega_c": self.omega_c,
            "omega_c_exact": self.omega_c_exact,
            "gw_floor": self.gw_floor,
            "quantum_lb": self.quantum_lb,
            "omega_sdp": self.omega_sdp,
            "flags": dict(self.flags),
        }


def interval_report(inst: LinInstance, assignment=None, seed=0, brute_force: bool = True, samples: int = 2000, slack: float = 1e-6, budget: int | None = None) -> IntervalReport:
    """Classical value, GW floor, optional quantum witness and relaxation value with ordering flags.

    When brute force is disabled or over budget, ``omega_c`` is the best
    rounded cut (a lower bound) and ``omega_c_exact`` is ``False``.
    """
    sdp = solve_maxcut_sdp(inst, seed=seed)
    a = alpha_gw()
    exact = False
    if brute_force:
        try:
            omega_c, _ = brute_force_classical_value(inst, budget=budget)
            exact = True
        except BudgetExceededError:
            pass
    if not exact:
        omega_c = gw_round(inst, sdp.factor, samples, np.random.default_rng(seed)).best_value
    quantum = None
    if isinstance(assignment, ObservableAssignment):
        quantum = eval_lin_observable_value(inst, assignment)
    elif isinstance(assignment, PvmAssignment):
        quantum = eval_csp_value(inst, assignment)
    floor = a * sdp.value
    flags = {"classical_below_sdp": omega_c <= sdp.value + slack}
    if exact:
        flags["gw_floor_below_classical"] = floor <= omega_c + slack
    if quantum is not None:
        flags["quantum_below_sdp"] = quantum <= sdp.value + slack
        if exact:
            flags["classical_below_quantum"] = omega_c <= quantum + slack
    return IntervalReport(omega_c, exact, floor, quantum, sdp.value, flags)


INTERVAL_COLUMNS = ("instance_id", "omega_c", "gw_floor", "quantum_lb", "omega_sdp")


def interval_csv(rows) -> str:
    """CSV text from ``(instance_id, IntervalReport)`` pairs."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(INTERVAL_COLUMNS)
    for ident, rep in rows:
        q = "" if rep.quantum_lb is None else repr(rep.quantum_lb)
        writer.writerow([ident, repr(rep.omega_c), repr(rep.gw_floor), q, repr(rep.omega_sdp)])
    return buf.getvalue()
