"""Gap reductions from Unique-Label-Cover to 2-Lin and MaxCut, plus folding.

Reduced instances live on hypercube-indexed vertices: vertex ``w`` of the
source (combined U-then-V numbering for 2-Lin, V only for MaxCut) and point
mask ``x`` become the target vertex ``w * 2**m + x``. Noise expectations are
enumerated exactly over all masks ``mu``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assignments import (
    ObservableAssignment,
    PvmAssignment,
    eval_labelcover_value,
    long_code_encode,
    validate_assignment,
)
from .config import BUDGET, BudgetExceededError
from .fourier import noise_weights, permute_points
from .instances import LabelCoverInstance, LinInstance, validate_instance


def _check_source(phi: LabelCoverInstance) -> None:
    if not isinstance(phi, LabelCoverInstance) or not phi.unique:
        raise ValueError("reductions need a unique Label-Cover instance")
    verdict = validate_instance(phi)
    if not verdict:
        raise ValueError("invalid source instance: " + "; ".join(verdict.violations))
    if phi.alphabet > BUDGET.reduction_alphabet:
        raise BudgetExceededError(
            f"alphabet {phi.alphabet} exceeds the reduction budget {BUDGET.reduction_alphabet}",
            required=phi.alphabet,
        )


def _point_tables(phi: LabelCoverInstance) -> np.ndarray:
    """``tables[e, x]`` is the mask of ``x o pi_{v,u}`` for edge ``e``."""
    inv = phi.inverse_projections()
    return np.array([permute_points(p) for p in inv]).reshape(phi.edge_count, 1 << phi.alphabet)


def _blocks(asg: ObservableAssignment, blocks: int, m: int) -> np.ndarray:
    M = 1 << m
    if asg.vertex_count != blocks * M:
        raise ValueError(f"assignment has {asg.vertex_count} vertices, expected {blocks * M}")
    d = asg.dimension
    return asg.observables.reshape(blocks, M, d, d)


def _noise_correlation(A: np.ndarray, B: np.ndarray, rows: np.ndarray, cols: np.ndarray, noise: np.ndarray) -> float:
    """``E_{x, mu} tr(A(rows[x]) B(cols[x] ^ mu))`` with ``mu`` drawn from ``noise``."""
    M = len(noise)
    d = A.shape[-1]
    gram = np.einsum("xij,yji->xy", A, B).real / d
    idx = np.arange(M)
    vals = gram[rows[:, None], cols[:, None] ^ idx[None, :]]
    return float(np.sum(vals @ noise) / M)


@dataclass(frozen=True)
class TwoLinReduction:
    """ULC to 2-Lin with noise ``eps``.

    ``edge_type[k]`` is 1, 2 or 3 for the left-test, right-test and
    cross-test constraints; ``source_edge[k]`` is the ULC edge of a type-3
    constraint and ``-1`` otherwise.
    """

    source: LabelCoverInstance
    eps: float
    psi: LinInstance
    edge_type: np.ndarray
    source_edge: np.ndarray

    @property
    def m(self) -> int:
        return self.source.alphabet

    @property
    def block_count(self) -> int:
        return self.source.vertex_count

    def vertex_index(self, side: str, w: int, x: int) -> int:
        offset = 0 if side == "u" else self.source.left_count
        return (offset + int(w)) * (1 << self.m) + int(x)


def reduce_ulc_to_2lin(phi: LabelCoverInstance, eps: float) -> TwoLinReduction:
    """Build the 2-Lin instance whose constraints test long codes with noise ``eps``.

    Three families, in this order: ``((u,x),(u,x mu))`` with weight
    ``p_u Pr[mu] / 2**m / 4``, the same for right vertices, and
    ``((u,x),(v,(x o pi_{v,u}) mu))`` with weight ``p_uv Pr[mu] / 2**m / 2``.
    Every parity is ``+1``.
    """
    if not 0 < eps < 0.5:
        raise ValueError(f"eps must lie in (0, 1/2), got {eps}")
    _check_source(phi)
    m = phi.alphabet
    M = 1 << m
    L = phi.left_count
    noise = noise_weights(m, eps)
    x = np.arange(M)[:, None]
    mu = np.arange(M)[None, :]

    scopes, weights, types, src = [], [], [], []
    for offset, marg, t in ((0, phi.left_marginals(), 1), (L, phi.right_marginals(), 2)):
        w = np.arange(len(marg))[:, None, None]
        a = np.broadcast_to((offset + w) * M + x[None], (len(marg), M, M))
        b = (offset + w) * M + (x ^ mu)[None]
        scopes.append(np.stack([a.ravel(), b.ravel()], axis=1))
        weights.append((marg[:, None, None] * noise[None, None, :] / M / 4 * np.ones((1, M, 1))).ravel())
        types.append(np.full(a.size, t))
        src.append(np.full(a.size, -1))

    tables = _point_tables(phi)
    e = np.arange(phi.edge_count)[:, None, None]
    a = np.broadcast_to(phi.edge_u[:, None, None] * M + x[None], (phi.edge_count, M, M))
    b = (L + phi.edge_v[:, None, None]) * M + (tables[:, :, None] ^ mu[None])
    scopes.append(np.stack([a.ravel(), b.ravel()], axis=1))
    weights.append((phi.weights[:, None, None] * noise[None, None, :] / M / 2 * np.ones((1, M, 1))).ravel())
    types.append(np.full(a.size, 3))
    src.append(np.broadcast_to(e, a.shape).ravel())

    scopes = np.concatenate(scopes)
    psi = LinInstance(
        2,
        phi.vertex_count * M,
        scopes,
        np.ones(len(scopes), dtype=np.int64),
        np.concatenate(weights),
        meta={"hypercube_dim": m, "reduction": "2lin", "eps": float(eps)},
    )
    return TwoLinReduction(phi, float(eps), psi, np.concatenate(types), np.concatenate(src))


@dataclass(frozen=True)
class FoldedReduction:
    """Folded 2-Lin instance on the representatives ``xi_m`` (mask bit 0 clear).

    ``kappa[x]`` is ``+1`` on representatives and ``-1`` otherwise;
    ``theta[x]`` is the representative of ``{x, -x}``.
    """

    reduction: TwoLinReduction
    psi: LinInstance
    kappa: np.ndarray
    theta: np.ndarray

    @property
    def m(self) -> int:
        return self.reduction.m

    def folded_vertex(self, block: int, x: int) -> int:
        return int(block) * (1 << (self.m - 1)) + int(self.theta[x] >> 1)


def fold_tables(m: int) -> tuple[np.ndarray, np.ndarray]:
    """``(kappa, theta)`` for the representative set of masks with bit 0 clear."""
    x = np.arange(1 << m)
    odd = (x & 1).astype(bool)
    kappa = np.where(odd, -1, 1)
    theta = np.where(odd, x ^ ((1 << m) - 1), x)
    return kappa, theta


def fold_2lin(red: TwoLinReduction) -> FoldedReduction:
    """Map each constraint onto representatives, multiplying in the sign flips."""
    m = red.m
    M, H = 1 << m, 1 << (m - 1)
    kappa, theta = fold_tables(m)
    block, x = np.divmod(red.psi.scopes, M)
    scopes = block * H + (theta[x] >> 1)
    parities = red.psi.parities * kappa[x[:, 0]] * kappa[x[:, 1]]
    meta = {"folded_from": m, "reduction": "2lin-folded", "eps": red.eps}
    psi = LinInstance(2, red.block_count * H, scopes, parities, red.psi.weights, meta=meta)
    return FoldedReduction(red, psi, kappa, theta)


def fold_assignment(folded: FoldedReduction, alpha_rep: ObservableAssignment) -> ObservableAssignment:
    """Extend an assignment on representatives to the odd assignment ``kappa(x) alpha'(theta(x))``."""
    m = folded.m
    H = 1 << (m - 1)
    blocks = folded.reduction.block_count
    if alpha_rep.vertex_count != blocks * H:
        raise ValueError(f"assignment has {alpha_rep.vertex_count} vertices, expected {blocks * H}")
    d = alpha_rep.dimension
    A = alpha_rep.observables.reshape(blocks, H, d, d)
    full = A[:, folded.theta >> 1] * folded.kappa[None, :, None, None]
    return ObservableAssignment(full.reshape(-1, d, d), alpha_rep.cls, folded=True)


def unfold_assignment(folded: FoldedReduction, alpha: ObservableAssignment) -> ObservableAssignment:
    """Restrict an odd assignment on ``psi`` to the representatives."""
    m = folded.m
    A = _blocks(alpha, folded.reduction.block_count, m)
    full = (1 << m) - 1
    idx = np.arange(1 << m)
    defect = float(np.max(np.abs(A[:, idx ^ full] + A)))
    if defect > 1e-10:
        raise ValueError(f"assignment is not folded (defect {defect:.3e})")
    d = alpha.dimension
    return ObservableAssignment(A[:, 0::2].reshape(-1, d, d).copy(), alpha.cls)


def _require_class(phi, pi: PvmAssignment, cls: str) -> None:
    if pi.kind != "pvm":
        raise ValueError("completeness lifts need PVM assignments")
    check = PvmAssignment(pi.measurements, cls, "pvm")
    verdict = validate_assignment(phi, check)
    if not verdict:
        raise ValueError(f"assignment does not validate as {cls}: " + "; ".join(verdict.failures[:3]))


def _long_code_stack(measurements: np.ndarray, m: int) -> np.ndarray:
    return np.concatenate([long_code_encode(P, m).values for P in measurements])


def lift_completeness_2lin(red: TwoLinReduction, pi: PvmAssignment) -> ObservableAssignment:
    """Long-code lift ``alpha_w(x) = sum_a x_a Pi_w^a`` of a quantum ULC assignment."""
    _require_class(red.source, pi, "quantum")
    return ObservableAssignment(_long_code_stack(pi.measurements, red.m), "quantum", folded=True)


def completeness_value_2lin(eps: float, omega_phi: float) -> float:
    """Exact value of the long-code lift: ``1/2 + (1/4)(1 - 2 eps)(1 + omega)``."""
    return 0.5 + 0.25 * (1.0 - 2.0 * eps) * (1.0 + omega_phi)


def two_lin_edge_statistics(red: TwoLinReduction, alpha: ObservableAssignment) -> tuple[np.ndarray, np.ndarray]:
    """Per-vertex and per-edge noisy correlations of an assignment on ``psi``.

    Returns ``(T_w, T_e)`` with ``T_w = E_{x,mu} tr(alpha_w(x) alpha_w(x mu))``
    for every source vertex and
    ``T_e = E_{x,mu} tr(alpha_u(x) alpha_v((x o pi_{v,u}) mu))`` for every edge.
    """
    phi = red.source
    A = _blocks(alpha, red.block_count, red.m)
    M = 1 << red.m
    noise = noise_weights(red.m, red.eps)
    ident = np.arange(M)
    T_w = np.array([_noise_correlation(A[w], A[w], ident, ident, noise) for w in range(red.block_count)])
    tables = _point_tables(phi)
    T_e = np.array([
        _noise_correlation(A[phi.edge_u[e]], A[phi.left_count + phi.edge_v[e]], ident, tables[e], noise)
        for e in range(phi.edge_count)
    ])
    return T_w, T_e


def closed_form_2lin_value(red: TwoLinReduction, alpha: ObservableAssignment) -> float:
    """``1/2 + 1/8 E[tr(a_u a_u') + tr(a_v a_v') + 2 tr(a_u a_v')]`` over the noisy tests."""
    phi = red.source
    T_w, T_e = two_lin_edge_statistics(red, alpha)
    L = phi.left_count
    left = np.dot(phi.left_marginals(), T_w[:L])
    right = np.dot(phi.right_marginals(), T_w[L:])
    cross = np.dot(phi.weights, T_e)
    return float(0.5 + 0.125 * (left + right + 2.0 * cross))


@dataclass(frozen=True)
class MaxCutReduction:
    """ULC to MaxCut with correlation ``rho``; ``origin[k]`` is the left vertex behind constraint ``k``."""

    source: LabelCoverInstance
    rho: float
    psi: LinInstance
    origin: np.ndarray

    @property
    def m(self) -> int:
        return self.source.alphabet

    @property
    def block_count(self) -> int:
        return self.source.right_count

    def vertex_index(self, v: int, x: int) -> int:
        return int(v) * (1 << self.m) + int(x)


def reduce_ulc_to_maxcut(phi: LabelCoverInstance, rho: float) -> MaxCutReduction:
    """Build the MaxCut instance testing pairs of right long codes through a shared left vertex.

    For each left ``u`` and ordered pair of incident edges ``(u,v), (u,v')``
    (``v = v'`` included), the constraint
    ``((v, x o pi_{v,u}), (v', (x o pi_{v',u}) mu))`` gets weight
    ``p_uv p_uv' / (2**m p_u) * ((1-rho)/2)^|mu| ((1+rho)/2)^(m-|mu|)``.
    """
    if not -1.0 < rho < 0.0:
        raise ValueError(f"rho must lie in (-1, 0), got {rho}")
    _check_source(phi)
    m = phi.alphabet
    M = 1 << m
    p_u = phi.left_marginals()
    isolated = np.flatnonzero(p_u <= 0)
    if isolated.size:
        raise ValueError(f"left vertex {int(isolated[0])} has zero marginal weight")
    noise = noise_weights(m, (1.0 - rho) / 2.0)
    tables = _point_tables(phi)
    mu = np.arange(M)[None, None, None, :]

    scopes, weights, origin = [], [], []
    for u in range(phi.left_count):
        inc = phi.incident_edges(u)
        k = len(inc)
        T = tables[inc]
        a = phi.edge_v[inc][:, None, None, None] * M + T[:, None, :, None]
        b = phi.edge_v[inc][None, :, None, None] * M + (T[None, :, :, None] ^ mu)
        a = np.broadcast_to(a, (k, k, M, M))
        b = np.broadcast_to(b, (k, k, M, M))
        pw = phi.weights[inc]
        w = (pw[:, None] * pw[None, :] / (M * p_u[u]))[:, :, None, None] * noise[None, None, None, :]
        w = np.broadcast_to(w, (k, k, M, M))
        scopes.append(np.stack([a.ravel(), b.ravel()], axis=1))
        weights.append(w.ravel())
        origin.append(np.full(a.size, u))
    scopes = np.concatenate(scopes)
    psi = LinInstance(
        2,
        phi.right_count * M,
        scopes,
        -np.ones(len(scopes), dtype=np.int64),
        np.concatenate(weights),
        meta={"hypercube_dim": m, "reduction": "maxcut", "rho": float(rho)},
    )
    return MaxCutReduction(phi, float(rho), psi, np.concatenate(origin))


def lift_completeness_maxcut(red: MaxCutReduction, pi: PvmAssignment) -> ObservableAssignment:
    """Long-code lift of the right-vertex PVMs of a weak-quantum ULC assignment."""
    _require_class(red.source, pi, "weak-quantum")
    right = pi.measurements[red.source.left_count:]
    return ObservableAssignment(_long_code_stack(right, red.m), "quantum", folded=True)


def compute_beta(red: MaxCutReduction, alpha: ObservableAssignment, u: int):
    """``beta_u(x) = sum_{v ~ u} (p_uv / p_u) alpha_v(x o pi_{v,u})`` as an operator table."""
    from .fourier import OperatorFunction

    phi = red.source
    A = _blocks(alpha, red.block_count, red.m)
    inc = phi.incident_edges(u)
    if inc.size == 0:
        raise ValueError(f"left vertex {u} has no incident edges")
    tables = _point_tables(phi)
    cond = phi.weights[inc] / phi.weights[inc].sum()
    beta = sum(c * A[phi.edge_v[e]][tables[e]] for c, e in zip(cond, inc))
    return OperatorFunction(beta)


def closed_form_maxcut_value(red: MaxCutReduction, alpha: ObservableAssignment) -> float:
    """``1/2 - 1/2 E_u E_{x,mu} tr(beta_u(x) beta_u(x mu))``.

    Conditioned on ``u`` the two right endpoints are independent, so the
    pair expectation factors through the averaged operator ``beta_u``.
    """
    phi = red.source
    noise = noise_weights(red.m, (1.0 - red.rho) / 2.0)
    ident = np.arange(1 << red.m)
    total = 0.0
    for u, pu in enumerate(phi.left_marginals()):
        B = compute_beta(red, alpha, u).values
        total += pu * _noise_correlation(B, B, ident, ident, noise)
    return float(0.5 - 0.5 * total)


def closed_form_psi_value(red, alpha: ObservableAssignment) -> float:
    if isinstance(red, TwoLinReduction):
        return closed_form_2lin_value(red, alpha)
    if isinstance(red, MaxCutReduction):
        return closed_form_maxcut_value(red, alpha)
    raise TypeError(f"unknown reduction {type(red).__name__}")


def completeness_value_maxcut(red: MaxCutReduction, pi: PvmAssignment) -> float:
    """``1/2 - (rho/2) E_{u,v,v'} sum_c tr(Pi_v^{pi_uv(c)} Pi_v'^{pi_uv'(c)})``."""
    phi = red.source
    R = pi.measurements[phi.left_count:]
    d = pi.dimension
    p_u = phi.left_marginals()
    total = 0.0
    for u in range(phi.left_count):
        inc = phi.incident_edges(u)
        for e in inc:
            Pv = R[phi.edge_v[e]][phi.projections[e]]
            for f in inc:
                Pw = R[phi.edge_v[f]][phi.projections[f]]
                corr = np.einsum("cij,cji->", Pv, Pw).real / d
                total += phi.weights[e] * phi.weights[f] / p_u[u] * corr
    return float(0.5 - 0.5 * red.rho * total)


def maxcut_completeness_bound(rho: float, zeta: float) -> float:
    """Lower bound ``(1 - rho)/2 (1 - 4 zeta)`` for lifts of ``(1 - zeta)``-good assignments."""
    return (1.0 - rho) / 2.0 * (1.0 - 4.0 * zeta)


def pvm_triangle_slack(P1, P2, P3) -> float:
    """``sum_a tr(P1^a P2^a) - (2 sum_a tr(P1^a P3^a + P2^a P3^a) - 3)``; nonnegative for PVMs."""
    P1, P2, P3 = (np.asarray(P, dtype=complex) for P in (P1, P2, P3))
    d = P1.shape[-1]

    def agree(A, B):
        return np.einsum("aij,aji->", A, B).real / d

    return float(agree(P1, P2) - (2.0 * (agree(P1, P3) + agree(P2, P3)) - 3.0))


def source_value(red, pi: PvmAssignment) -> float:
    return eval_labelcover_value(red.source, pi)
