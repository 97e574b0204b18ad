"""CSP instance types, embeddings, random generation and exact classical values.

Labels are 0-based integers. For k-Lin instances label ``0`` encodes the sign
``+1`` and label ``1`` encodes ``-1``, so a predicate is the set of label
tuples whose sign product equals the parity.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_random_state
from .config import BUDGET, TOL, BudgetExceededError


def _frozen(arr, dtype) -> np.ndarray:
    out = np.array(arr, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Constraint:
    scope: tuple[int, ...]
    predicate: frozenset[tuple[int, ...]]
    weight: float


@dataclass(frozen=True)
class GeneralCspInstance:
    """A k-ary CSP over the alphabet ``[0, m)``.

    ``constraints`` is an ordered multiset: repeated scopes are kept as
    separate constraints.
    """

    arity: int
    alphabet: int
    variable_count: int
    constraints: tuple[Constraint, ...]

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.constraints], dtype=float)

    def predicate_tables(self) -> list[np.ndarray]:
        """One boolean array of shape ``(m,)*k`` per constraint."""
        tables = []
        for c in self.constraints:
            t = np.zeros((self.alphabet,) * self.arity, dtype=bool)
            for labels in c.predicate:
                t[labels] = True
            tables.append(t)
        return tables


@dataclass(frozen=True)
class LabelCoverInstance:
    """Bipartite Label-Cover instance.

    Left vertices are ``0..left_count-1``, right vertices ``0..right_count-1``.
    Edge ``e`` joins ``edge_u[e]`` to ``edge_v[e]`` and demands
    ``label(v) == projections[e][label(u)]``.
    """

    left_count: int
    right_count: int
    alphabet: int
    edge_u: np.ndarray
    edge_v: np.ndarray
    projections: np.ndarray
    weights: np.ndarray
    unique: bool = True

    def __post_init__(self):
        object.__setattr__(self, "edge_u", _frozen(self.edge_u, np.int64).reshape(-1))
        object.__setattr__(self, "edge_v", _frozen(self.edge_v, np.int64).reshape(-1))
        proj = np.array(self.projections, dtype=np.int64).reshape(-1, self.alphabet)
        proj.setflags(write=False)
        object.__setattr__(self, "projections", proj)
        object.__setattr__(self, "weights", _frozen(self.weights, float).reshape(-1))

    @property
    def edge_count(self) -> int:
        return int(self.edge_u.shape[0])

    @property
    def vertex_count(self) -> int:
        return self.left_count + self.right_count

    def right_index(self, v: int) -> int:
        """Position of right vertex ``v`` in the combined U-then-V numbering."""
        return self.left_count + int(v)

    def inverse_projections(self) -> np.ndarray:
        """``pi_{v,u}`` for every edge (only meaningful for unique instances)."""
        inv = np.empty_like(self.projections)
        rows = np.arange(self.edge_count)[:, None]
        inv[rows, self.projections] = np.arange(self.alphabet)[None, :]
        return inv

    def left_marginals(self) -> np.ndarray:
        return np.bincount(self.edge_u, weights=self.weights, minlength=self.left_count)

    def right_marginals(self) -> np.ndarray:
        return np.bincount(self.edge_v, weights=self.weights, minlength=self.right_count)

    def incident_edges(self, u: int) -> np.ndarray:
        return np.flatnonzero(self.edge_u == u)


@dataclass(frozen=True)
class LinInstance:
    """k-Lin instance in multiplicative form: constraint ``x_i1 ... x_ik = parity``."""

    arity: int
    variable_count: int
    scopes: np.ndarray
    parities: np.ndarray
    weights: np.ndarray
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "scopes", _frozen(self.scopes, np.int64).reshape(-1, self.arity))
        object.__setattr__(self, "parities", _frozen(self.parities, np.int64).reshape(-1))
        object.__setattr__(self, "weights", _frozen(self.weights, float).reshape(-1))

    @property
    def constraint_count(self) -> int:
        return int(self.scopes.shape[0])

    @property
    def is_maxcut(self) -> bool:
        return self.arity == 2 and bool(np.all(self.parities == -1))


def maxcut_instance(n: int, edges, weights=None) -> LinInstance:
    """MaxCut on ``n`` vertices; uniform weights unless given."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if weights is None:
        weights = np.full(len(edges), 1.0 / len(edges))
    return LinInstance(2, n, edges, -np.ones(len(edges), dtype=np.int64), weights)


def cycle_maxcut(n: int) -> LinInstance:
    return maxcut_instance(n, [(i, (i + 1) % n) for i in range(n)])


@dataclass
class ValidationResult:
    violations: list[str] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.valid


def _check_weights(weights: np.ndarray, out: list[str]) -> None:
    if weights.size == 0:
        out.append("instance has no constraints")
        return
    if np.any(weights < 0) or not np.all(np.isfinite(weights)):
        out.append("weights must be finite and nonnegative")
    total = float(weights.sum())
    if abs(total - 1.0) > TOL.weight_sum:
        out.append(f"weights sum to {total!r}, deviation {abs(total - 1.0):.3e} > {TOL.weight_sum:g}")


def validate_instance(inst) -> ValidationResult:
    """Check every structural invariant of ``inst`` and list all violations."""
    out: list[str] = []
    if isinstance(inst, LabelCoverInstance):
        if inst.left_count < 1 or inst.right_count < 1 or inst.alphabet < 1:
            out.append("left_count, right_count and alphabet must be positive")
        _check_weights(inst.weights, out)
        if inst.projections.shape != (inst.edge_count, inst.alphabet):
            out.append("projection table has the wrong shape")
        for e in range(inst.edge_count):
            u, v = int(inst.edge_u[e]), int(inst.edge_v[e])
            if not 0 <= u < inst.left_count:
                out.append(f"edge {e}: left index {u} out of range [0, {inst.left_count})")
            if not 0 <= v < inst.right_count:
                out.append(f"edge {e}: right index {v} out of range [0, {inst.right_count})")
            pi = inst.projections[e]
            if np.any(pi < 0) or np.any(pi >= inst.alphabet):
                out.append(f"edge {e} ({u},{v}): projection values outside [0, {inst.alphabet})")
            elif inst.unique and len(set(pi.tolist())) != inst.alphabet:
                out.append(f"edge {e} ({u},{v}): projection {pi.tolist()} is not a bijection")
    elif isinstance(inst, LinInstance):
        if inst.arity < 1 or inst.variable_count < 1:
            out.append("arity and variable_count must be positive")
        _check_weights(inst.weights, out)
        bad = np.flatnonzero(np.any((inst.scopes < 0) | (inst.scopes >= inst.variable_count), axis=1))
        for e in bad:
            out.append(f"constraint {e}: variable index out of range [0, {inst.variable_count})")
        for e in np.flatnonzero(~np.isin(inst.parities, (-1, 1))):
            out.append(f"constraint {e}: parity {inst.parities[e]} not in {{+1, -1}}")
    elif isinstance(inst, GeneralCspInstance):
        if inst.arity < 1 or inst.alphabet < 1 or inst.variable_count < 1:
            out.append("arity, alphabet and variable_count must be positive")
        _check_weights(inst.weights, out)
        for e, c in enumerate(inst.constraints):
            if len(c.scope) != inst.arity:
                out.append(f"constraint {e}: scope has length {len(c.scope)}, expected {inst.arity}")
            if any(not 0 <= i < inst.variable_count for i in c.scope):
                out.append(f"constraint {e}: variable index out of range [0, {inst.variable_count})")
            for labels in c.predicate:
                if len(labels) != inst.arity or any(not 0 <= a < inst.alphabet for a in labels):
                    out.append(f"constraint {e}: predicate tuple {labels} invalid")
                    break
    else:
        out.append(f"unsupported instance type {type(inst).__name__}")
    return ValidationResult(out)


def labelcover_to_general(lc: LabelCoverInstance) -> GeneralCspInstance:
    """Embed Label-Cover as a 2-CSP on ``|U| + |V|`` variables (V offset by |U|)."""
    cons = []
    for e in range(lc.edge_count):
        pred = frozenset((a, int(lc.projections[e, a])) for a in range(lc.alphabet))
        cons.append(Constraint((int(lc.edge_u[e]), lc.right_index(lc.edge_v[e])), pred, float(lc.weights[e])))
    return GeneralCspInstance(2, lc.alphabet, lc.vertex_count, cons)


def lin_predicate(arity: int, parity: int) -> frozenset[tuple[int, ...]]:
    # label 1 <-> sign -1
    return frozenset(t for t in itertools.product((0, 1), repeat=arity) if (-1) ** sum(t) == parity)


def lin_to_general(lin: LinInstance) -> GeneralCspInstance:
    cache: dict[int, frozenset] = {}
    cons = []
    for e in range(lin.constraint_count):
        r = int(lin.parities[e])
        if r not in cache:
            cache[r] = lin_predicate(lin.arity, r)
        cons.append(Constraint(tuple(int(i) for i in lin.scopes[e]), cache[r], float(lin.weights[e])))
    return GeneralCspInstance(lin.arity, 2, lin.variable_count, cons)


def to_general(inst) -> GeneralCspInstance:
    if isinstance(inst, GeneralCspInstance):
        return inst
    if isinstance(inst, LabelCoverInstance):
        return labelcover_to_general(inst)
    if isinstance(inst, LinInstance):
        return lin_to_general(inst)
    raise TypeError(f"cannot embed {type(inst).__name__}")


def classical_value(inst, labeling) -> float:
    """Weighted satisfied fraction of a single labeling."""
    g = to_general(inst)
    labeling = tuple(int(a) for a in labeling)
    return float(sum(c.weight for c in g.constraints if tuple(labeling[i] for i in c.scope) in c.predicate))


def brute_force_classical_value(inst, budget: int | None = None, chunk: int = 1 << 16):
    """Exact classical value by exhaustive enumeration.

    Labelings are enumerated in lexicographic order (variable 0 most
    significant); the first labeling within ``TOL.tie`` of the optimum is
    returned, i.e. the lexicographically smallest optimal labeling.

    Returns
    -------
    value : float
    labeling : tuple of int
    """
    g = to_general(inst)
    budget = BUDGET.brute_force_labelings if budget is None else budget
    total = g.alphabet ** g.variable_count
    if total > budget:
        raise BudgetExceededError(
            f"brute force needs {g.alphabet}^{g.variable_count} = {total} labelings, budget is {budget}",
            required=total,
        )
    tables = g.predicate_tables()
    scopes = [np.array(c.scope) for c in g.constraints]
    weights = g.weights
    radix = g.alphabet ** np.arange(g.variable_count - 1, -1, -1, dtype=np.int64)

    best_val, best_idx = -np.inf, 0
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        labels = (idx[:, None] // radix[None, :]) % g.alphabet
        vals = np.zeros(idx.shape[0])
        for t, s, w in zip(tables, scopes, weights):
            vals += w * t[tuple(labels[:, s].T)]
        top = vals.max()
        if top > best_val + TOL.tie:
            best_val = top
            best_idx = int(idx[np.flatnonzero(vals >= top - TOL.tie)[0]])
    labeling = tuple(int(a) for a in (best_idx // radix) % g.alphabet)
    return float(best_val), labeling


def generate_random_ulc(left_count: int, right_count: int, alphabet: int, edge_density: float = 1.0, seed=None) -> LabelCoverInstance:
    """Random Unique-Label-Cover with uniform weights and uniform bijections.

    Each pair (u, v) is kept independently with probability ``edge_density``.
    """
    if min(left_count, right_count, alphabet) < 1:
        raise ValueError("left_count, right_count and alphabet must be positive")
    if not 0 < edge_density <= 1:
        raise ValueError("edge_density must lie in (0, 1]")
    rng = check_random_state(seed)
    pairs = [(u, v) for u in range(left_count) for v in range(right_count)]
    keep = rng.random(len(pairs)) < edge_density
    pairs = [p for p, k in zip(pairs, keep) if k]
    if not pairs:
        raise ValueError("sampled edge set is empty; raise edge_density or change the seed")
    perms = np.array([rng.permutation(alphabet) for _ in pairs], dtype=np.int64)
    eu, ev = zip(*pairs)
    return LabelCoverInstance(left_count, right_count, alphabet, eu, ev, perms, np.full(len(pairs), 1.0 / len(pairs)))


def generate_planted_ulc(left_count: int, right_count: int, alphabet: int, edge_density: float = 1.0, seed=None):
    """Satisfiable ULC with projections ``pi_uv = s_v o s_u^-1`` for hidden relabelings ``s``.

    Every labeling ``w -> s_w(c)`` for a common ``c`` is perfect.

    Returns
    -------
    instance : LabelCoverInstance
    relabelings : ndarray of shape (left_count + right_count, alphabet)
    """
    rng = check_random_state(seed)
    base = generate_random_ulc(left_count, right_count, alphabet, edge_density, rng)
    sigma = np.array([rng.permutation(alphabet) for _ in range(left_count + right_count)])
    su = sigma[base.edge_u]
    sv = sigma[left_count + base.edge_v]
    proj = np.empty_like(su)
    rows = np.arange(base.edge_count)[:, None]
    proj[rows, su] = sv
    inst = LabelCoverInstance(left_count, right_count, alphabet, base.edge_u, base.edge_v, proj, base.weights)
    return inst, sigma
