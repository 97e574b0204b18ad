"""Operator-valued assignments, their commutation validators and value evaluators.

Vertices are integer indices; Label-Cover assignments use the combined
numbering (left vertices first, then right vertices offset by ``|U|``).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import TOL
from .fourier import OperatorFunction, mask_to_signs
from .instances import GeneralCspInstance, LabelCoverInstance, LinInstance, to_general
from .operators import check_measurement, random_unitary

CLASSES = ("classical", "weak-quantum", "quantum", "noncommutative")


@dataclass(frozen=True)
class PvmAssignment:
    """One m-outcome measurement per vertex on a shared ``C^d``.

    ``measurements`` has shape ``(n, m, d, d)``. ``kind`` is ``"pvm"`` or
    ``"povm"`` (self-commuting POVMs, used by the extraction pipelines).
    """

    measurements: np.ndarray
    cls: str = "quantum"
    kind: str = "pvm"

    def __post_init__(self):
        M = np.asarray(self.measurements, dtype=complex)
        if M.ndim != 4 or M.shape[2] != M.shape[3]:
            raise ValueError(f"measurements must have shape (n, m, d, d), got {M.shape}")
        if self.cls not in CLASSES:
            raise ValueError(f"unknown class {self.cls!r}")
        if self.kind not in ("pvm", "povm"):
            raise ValueError(f"unknown kind {self.kind!r}")
        object.__setattr__(self, "measurements", M)

    @property
    def vertex_count(self) -> int:
        return self.measurements.shape[0]

    @property
    def outcomes(self) -> int:
        return self.measurements.shape[1]

    @property
    def dimension(self) -> int:
        return self.measurements.shape[2]


@dataclass(frozen=True)
class ObservableAssignment:
    """One observable per vertex; ``observables`` has shape ``(n, d, d)``."""

    observables: np.ndarray
    cls: str = "quantum"
    folded: bool = False

    def __post_init__(self):
        A = np.asarray(self.observables, dtype=complex)
        if A.ndim != 3 or A.shape[1] != A.shape[2]:
            raise ValueError(f"observables must have shape (n, d, d), got {A.shape}")
        if self.cls not in CLASSES:
            raise ValueError(f"unknown class {self.cls!r}")
        object.__setattr__(self, "observables", A)

    @property
    def vertex_count(self) -> int:
        return self.observables.shape[0]

    @property
    def dimension(self) -> int:
        return self.observables.shape[1]


@dataclass
class AssignmentVerdict:
    cls: str
    worst_commutation_defect: float = 0.0
    failures: list[str] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.failures

    def __bool__(self) -> bool:
        return self.valid


def _unique_pairs(pairs: np.ndarray) -> np.ndarray:
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    return np.unique(np.sort(pairs, axis=1), axis=0)


def _observable_pair_defects(A: np.ndarray, pairs: np.ndarray) -> np.ndarray:
    if pairs.size == 0:
        return np.zeros(0)
    X, Y = A[pairs[:, 0]], A[pairs[:, 1]]
    defect = np.linalg.norm(X @ Y - Y @ X, axis=(1, 2))
    scale = np.maximum(1.0, np.linalg.norm(X, axis=(1, 2)) * np.linalg.norm(Y, axis=(1, 2)))
    return defect / scale


def _measurement_pair_defects(M: np.ndarray, pairs: np.ndarray) -> np.ndarray:
    if pairs.size == 0:
        return np.zeros(0)
    out = np.empty(len(pairs))
    for k, (i, j) in enumerate(pairs):
        P, Q = M[i], M[j]
        PQ = np.einsum("aij,bjk->abik", P, Q)
        QP = np.einsum("bij,ajk->abik", Q, P)
        out[k] = np.linalg.norm(PQ - QP, axis=(2, 3)).max() / max(1.0, float(np.linalg.norm(P, axis=(1, 2)).max() * np.linalg.norm(Q, axis=(1, 2)).max()))
    return out


def constraint_pairs(inst) -> np.ndarray:
    """Vertex pairs that share a constraint (deduplicated, no self-pairs)."""
    if isinstance(inst, LabelCoverInstance):
        return _unique_pairs(np.stack([inst.edge_u, inst.edge_v + inst.left_count], axis=1))
    if isinstance(inst, LinInstance):
        k = inst.arity
        pairs = [inst.scopes[:, [i, j]] for i in range(k) for j in range(i + 1, k)]
        return _unique_pairs(np.concatenate(pairs) if pairs else np.zeros((0, 2)))
    g = to_general(inst)
    pairs = [(c.scope[i], c.scope[j]) for c in g.constraints for i in range(g.arity) for j in range(i + 1, g.arity)]
    return _unique_pairs(np.array(pairs) if pairs else np.zeros((0, 2)))


def weak_quantum_pairs(lc: LabelCoverInstance) -> np.ndarray:
    """Right-vertex pairs (combined numbering) that share a left neighbour."""
    pairs = []
    for u in range(lc.left_count):
        nbrs = np.unique(lc.edge_v[lc.edge_u == u]) + lc.left_count
        pairs.extend((a, b) for i, a in enumerate(nbrs) for b in nbrs[i + 1:])
    return _unique_pairs(np.array(pairs) if pairs else np.zeros((0, 2)))


def _vertex_count(inst) -> int:
    if isinstance(inst, LabelCoverInstance):
        return inst.vertex_count
    return inst.variable_count


def validate_assignment(inst, asg) -> AssignmentVerdict:
    """Check measurement validity and the commutation pattern of ``asg.cls``.

    Raises
    ------
    ValueError
        If the vertex counts differ (a shape error, not a verdict).
    """
    n = _vertex_count(inst)
    if asg.vertex_count != n:
        raise ValueError(f"assignment has {asg.vertex_count} vertices, instance has {n}")
    verdict = AssignmentVerdict(asg.cls)
    if isinstance(asg, ObservableAssignment):
        A = asg.observables
        eye = np.eye(asg.dimension)
        herm = np.linalg.norm(A - A.conj().transpose(0, 2, 1), axis=(1, 2))
        unit = np.linalg.norm(np.einsum("nji,njk->nik", A.conj(), A) - eye, axis=(1, 2))
        for i in np.flatnonzero((herm > TOL.hermitian) | (unit > TOL.unitary)):
            verdict.failures.append(f"vertex {i}: not an observable")
        pair_defects = lambda pairs: _observable_pair_defects(A, pairs)
    else:
        M = asg.measurements
        kind = "pvm" if asg.kind == "pvm" else "self_commuting_povm"
        for i in range(n):
            mv = check_measurement(M[i], kind)
            if not mv.passed:
                verdict.failures.append(f"vertex {i}: " + "; ".join(mv.failures))
        pair_defects = lambda pairs: _measurement_pair_defects(M, pairs)

    if asg.cls == "classical" and asg.dimension != 1:
        verdict.failures.append(f"classical assignments need dimension 1, got {asg.dimension}")
    if asg.cls in ("quantum", "weak-quantum", "classical"):
        pairs = constraint_pairs(inst)
        if asg.cls == "weak-quantum":
            if not isinstance(inst, LabelCoverInstance):
                verdict.failures.append("weak-quantum class is only defined for Label-Cover instances")
            else:
                pairs = _unique_pairs(np.concatenate([pairs, weak_quantum_pairs(inst)]))
        defects = pair_defects(pairs)
        if defects.size:
            verdict.worst_commutation_defect = float(defects.max())
            for k in np.flatnonzero(defects > TOL.commute)[:10]:
                i, j = pairs[k]
                verdict.failures.append(f"vertices {i} and {j} must commute (defect {defects[k]:.3e})")
    if isinstance(asg, ObservableAssignment) and asg.folded:
        verdict.failures.extend(_folded_failures(asg, inst))
    return verdict


def _folded_failures(asg: ObservableAssignment, inst) -> list[str]:
    meta = getattr(inst, "meta", {}) or {}
    m = meta.get("hypercube_dim")
    if m is None:
        return ["folded flag set but the instance carries no hypercube layout"]
    A = asg.observables.reshape(-1, 1 << m, asg.dimension, asg.dimension)
    full = (1 << m) - 1
    idx = np.arange(1 << m)
    defect = float(np.linalg.norm(A[:, idx ^ full] + A, axis=(2, 3)).max())
    return [] if defect <= TOL.odd else [f"assignment is not folded (defect {defect:.3e})"]


def _real_trace(values: np.ndarray, check: bool, what: str) -> np.ndarray:
    if check:
        worst = float(np.max(np.abs(values.imag), initial=0.0))
        if worst > TOL.imag_residue:
            raise ValueError(f"{what}: trace has imaginary part {worst:.3e} for a commuting class")
    return values.real


def csp_value_raw(inst, measurements: np.ndarray) -> complex:
    """Unchecked value ``sum_e p_e sum_{a in f_e} tr(P_i1^a1 ... P_ik^ak)``.

    Linear in each vertex's operators; accepts arbitrary operator stacks.
    """
    if isinstance(inst, LabelCoverInstance):
        return labelcover_value_raw(inst, measurements)
    g = to_general(inst)
    M = np.asarray(measurements)
    d = M.shape[-1]
    total = 0j
    for c, table in zip(g.constraints, g.predicate_tables()):
        if g.arity == 2:
            i, j = c.scope
            G = np.einsum("aij,bji->ab", M[i], M[j]) / d
            total += c.weight * np.sum(G[table])
        else:
            acc = 0j
            for labels in c.predicate:
                prod = M[c.scope[0], labels[0]]
                for v, a in zip(c.scope[1:], labels[1:]):
                    prod = prod @ M[v, a]
                acc += np.trace(prod) / d
            total += c.weight * acc
    return complex(total)


def eval_csp_value(inst, asg: PvmAssignment) -> float:
    """Value of a measurement assignment on a general CSP."""
    g = to_general(inst)
    if asg.cls == "noncommutative" and g.arity >= 3:
        raise ValueError("the noncommutative value is defined only for 2-CSPs")
    M = asg.measurements
    d = asg.dimension
    check = asg.cls != "noncommutative"
    total = 0.0
    for e, (c, table) in enumerate(zip(g.constraints, g.predicate_tables())):
        if g.arity == 2:
            i, j = c.scope
            G = np.einsum("aij,bji->ab", M[i], M[j]) / d
            total += c.weight * float(np.sum(_real_trace(G[table], check, f"constraint {e}")))
        else:
            traces = []
            for labels in c.predicate:
                prod = M[c.scope[0], labels[0]]
                for v, a in zip(c.scope[1:], labels[1:]):
                    prod = prod @ M[v, a]
                traces.append(np.trace(prod) / d)
            total += c.weight * float(np.sum(_real_trace(np.array(traces, dtype=complex), check, f"constraint {e}")))
    return total


def labelcover_value_raw(lc: LabelCoverInstance, measurements: np.ndarray) -> complex:
    M = np.asarray(measurements)
    d = M.shape[-1]
    Pu = M[lc.edge_u]
    Pv = M[lc.edge_v + lc.left_count]
    Pv = Pv[np.arange(lc.edge_count)[:, None], lc.projections]
    per_edge = np.einsum("eaij,eaji->e", Pu, Pv) / d
    return complex(np.dot(lc.weights, per_edge))


def eval_labelcover_value(lc: LabelCoverInstance, asg: PvmAssignment) -> float:
    """``sum_{(u,v)} p_uv sum_a tr(P_u^a P_v^{pi_uv(a)})``."""
    M = asg.measurements
    d = asg.dimension
    Pu = M[lc.edge_u]
    Pv = M[lc.edge_v + lc.left_count][np.arange(lc.edge_count)[:, None], lc.projections]
    per_edge = np.einsum("eaij,eaji->e", Pu, Pv) / d
    per_edge = _real_trace(per_edge, asg.cls != "noncommutative", "label-cover edge")
    return float(np.dot(lc.weights, per_edge))


def lin_correlations(lin: LinInstance, observables: np.ndarray) -> np.ndarray:
    """``tr(alpha_i1 ... alpha_ik)`` for every constraint (complex)."""
    A = np.asarray(observables)
    d = A.shape[-1]
    if lin.arity == 2:
        return np.einsum("eij,eji->e", A[lin.scopes[:, 0]], A[lin.scopes[:, 1]]) / d
    prod = A[lin.scopes[:, 0]]
    for col in range(1, lin.arity):
        prod = prod @ A[lin.scopes[:, col]]
    return np.einsum("eii->e", prod) / d


def lin_value_raw(lin: LinInstance, observables: np.ndarray) -> complex:
    return complex(0.5 + 0.5 * np.dot(lin.weights * lin.parities, lin_correlations(lin, observables)))


def eval_lin_observable_value(lin: LinInstance, asg: ObservableAssignment) -> float:
    """``1/2 + 1/2 sum_e p_e r_e tr(alpha_i1 ... alpha_ik)``."""
    if asg.cls == "noncommutative" and lin.arity >= 3:
        raise ValueError("the noncommutative value is defined only for 2-CSPs")
    corr = _real_trace(lin_correlations(lin, asg.observables), asg.cls != "noncommutative", "k-Lin constraint")
    return float(0.5 + 0.5 * np.dot(lin.weights * lin.parities, corr))


def long_code_encode(pvm, m: int | None = None) -> OperatorFunction:
    """Operator long code ``x -> sum_a x_a P^a`` of an m-outcome PVM."""
    P = np.asarray(pvm, dtype=complex)
    if m is not None and P.shape[0] != m:
        raise ValueError(f"PVM has {P.shape[0]} outcomes, expected {m}")
    verdict = check_measurement(P, "pvm")
    if not verdict.passed:
        raise ValueError("long code needs a PVM: " + "; ".join(verdict.failures))
    m = P.shape[0]
    signs = mask_to_signs(np.arange(1 << m)[:, None], m).astype(float)
    return OperatorFunction(np.einsum("xa,aij->xij", signs, P))


def labeling_to_assignment(labels, m: int) -> PvmAssignment:
    """A classical labeling as a dimension-1 deterministic PVM assignment."""
    labels = np.asarray(labels, dtype=np.int64)
    M = np.zeros((len(labels), m, 1, 1), dtype=complex)
    M[np.arange(len(labels)), labels, 0, 0] = 1.0
    return PvmAssignment(M, "classical")


def observables_to_pvm_assignment(asg: ObservableAssignment) -> PvmAssignment:
    """Binary PVMs ``[(I+X)/2, (I-X)/2]`` (label 0 <-> +1)."""
    A = asg.observables
    eye = np.eye(asg.dimension)
    return PvmAssignment(np.stack([(eye + A) / 2, (eye - A) / 2], axis=1), asg.cls)


def _projector_from_columns(U: np.ndarray, outcome: np.ndarray, m: int) -> np.ndarray:
    d = U.shape[0]
    P = np.zeros((m, d, d), dtype=complex)
    for j in range(d):
        P[outcome[j]] += np.outer(U[:, j], U[:, j].conj())
    return P


def random_labelcover_assignment(lc: LabelCoverInstance, rng: np.random.Generator, left_dim: int = 2, right_dim: int = 2, weak: bool = False) -> PvmAssignment:
    """Random quantum (or weak-quantum) assignment on ``C^left_dim (x) C^right_dim``.

    Left PVMs act on the first factor and right PVMs on the second, each in
    its own random basis, so every left/right pair commutes. With
    ``weak=True`` all right PVMs share one basis of the second factor.
    """
    m = lc.alphabet
    shared = random_unitary(right_dim, rng)
    eye_l, eye_r = np.eye(left_dim), np.eye(right_dim)
    M = []
    for _ in range(lc.left_count):
        P = _projector_from_columns(random_unitary(left_dim, rng), rng.integers(0, m, left_dim), m)
        M.append(np.stack([np.kron(p, eye_r) for p in P]))
    for _ in range(lc.right_count):
        basis = shared if weak else random_unitary(right_dim, rng)
        P = _projector_from_columns(basis, rng.integers(0, m, right_dim), m)
        M.append(np.stack([np.kron(eye_l, p) for p in P]))
    return PvmAssignment(np.array(M), "weak-quantum" if weak else "quantum")


def random_commuting_assignment(n: int, m: int, d: int, rng: np.random.Generator, cls: str = "quantum") -> PvmAssignment:
    """PVMs that are all diagonal in one shared random basis."""
    U = random_unitary(d, rng)
    return PvmAssignment(np.array([_projector_from_columns(U, rng.integers(0, m, d), m) for _ in range(n)]), cls)


def planted_assignment(relabelings, d: int, rng: np.random.Generator) -> PvmAssignment:
    """Perfect assignment for a planted ULC: eigenvector ``j`` carries hidden label ``c_j``.

    Vertex ``w`` measures outcome ``s_w(c_j)`` on eigenvector ``j`` of one
    shared random basis, so all PVMs commute and every edge is satisfied.
    """
    sigma = np.asarray(relabelings, dtype=np.int64)
    m = sigma.shape[1]
    U = random_unitary(d, rng)
    hidden = rng.integers(0, m, d)
    return PvmAssignment(np.array([_projector_from_columns(U, s[hidden], m) for s in sigma]), "weak-quantum")
