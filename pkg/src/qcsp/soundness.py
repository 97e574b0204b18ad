"""Soundness extraction: from a good assignment of a reduced instance back to the ULC source.

Both pipelines filter good objects by averaging thresholds, read off scalar
functions in a joint eigenbasis, report the Fourier inequalities those
functions satisfy, build squared-Fourier-weight POVMs and round them to PVMs.
Every failed inequality becomes a report entry rather than an exception.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_permutation
from .assignments import ObservableAssignment, PvmAssignment, eval_labelcover_value, labelcover_value_raw
from .config import TOL
from .fourier import fwht, fourier_transform, fourier_weight_elements, image_subsets, influence, noise_stability, noise_weights, popcounts
from .operators import NonCommutingError, simultaneous_diagonalize
from .projectivize import projectivize_assignment
from .reductions import MaxCutReduction, TwoLinReduction, _blocks, _noise_correlation, _point_tables, compute_beta, two_lin_edge_statistics


@dataclass(frozen=True)
class TwoLinParams:
    """``b_t = bt_const * (1 - e^-2)``; ``bt_const`` stands in for a non-explicit constant."""

    eps: float
    t: float = 0.75
    bt_const: float = 1.0

    @property
    def b_t(self) -> float:
        return self.bt_const * (1.0 - math.exp(-2.0))

    @property
    def value_threshold(self) -> float:
        return 1.0 - self.b_t * self.eps**self.t / 32.0

    @property
    def edge_threshold(self) -> float:
        return 3.0 - self.b_t * self.eps**self.t / 2.0

    @property
    def index_threshold(self) -> float:
        return 3.0 - self.b_t * self.eps**self.t

    @property
    def bound(self) -> float:
        return self.eps / 1600.0 * 4.0 ** (-2.0 / self.eps**2)


@dataclass(frozen=True)
class MaxCutParams:
    """``delta2`` and ``k`` play the role of the influence constants of the invariance principle."""

    eps: float
    rho: float
    delta2: float = 0.01
    k: int = 10

    @property
    def value_threshold(self) -> float:
        return math.acos(self.rho) / math.pi + self.eps

    @property
    def vertex_threshold(self) -> float:
        return 1.0 - 2.0 / math.pi * math.acos(self.rho) - self.eps

    @property
    def index_threshold(self) -> float:
        return 1.0 - 2.0 / math.pi * math.acos(self.rho) - self.eps / 2.0

    @property
    def bound(self) -> float:
        return self.eps**2 * self.delta2**3 / (32.0 * self.k**2)


@dataclass
class DiagonalFunctions:
    """``values[k, x, j]`` is the ``j``-th diagonal entry of operator table ``k`` at point ``x``."""

    basis: np.ndarray
    values: np.ndarray
    residue: float

    def range_defect(self) -> float:
        """Distance of the entries from ``{+1, -1}``."""
        return float(np.max(np.abs(np.abs(self.values) - 1.0), initial=0.0))


def diagonal_scalar_functions(tables) -> DiagonalFunctions:
    """Joint diagonalization of every value of several operator tables.

    Raises
    ------
    NonCommutingError
        If the values do not pairwise commute.
    """
    T = np.array([np.asarray(t) for t in tables])
    K, M, d = T.shape[:3]
    jd = simultaneous_diagonalize(T.reshape(K * M, d, d))
    return DiagonalFunctions(jd.basis, jd.diagonals.reshape(K, M, d), jd.off_diagonal_residue)


def _scalar_noise_correlation(F: np.ndarray, G: np.ndarray, cols: np.ndarray, noise: np.ndarray) -> np.ndarray:
    """``E_{x,mu} F(x) G(cols[x] ^ mu)`` for each column of ``F, G`` of shape ``(M, d)``."""
    M = len(noise)
    idx = np.arange(M)
    shifted = G[cols[:, None] ^ idx[None, :]]
    return np.einsum("xj,xmj,m->j", F, shifted, noise) / M


def filter_good_indices(scores, threshold: float, upper: bool = False) -> np.ndarray:
    """Indices with ``score >= threshold`` (or ``<=`` when ``upper``)."""
    scores = np.asarray(scores, dtype=float)
    return np.flatnonzero(scores <= threshold if upper else scores >= threshold)


@dataclass
class GoodEdges:
    lhs: np.ndarray
    threshold: float
    weights: np.ndarray

    @property
    def good(self) -> np.ndarray:
        return self.lhs >= self.threshold

    @property
    def slack(self) -> np.ndarray:
        return self.lhs - self.threshold

    @property
    def good_mass(self) -> float:
        return float(self.weights[self.good].sum())

    @property
    def mean_lhs(self) -> float:
        return float(np.dot(self.weights, self.lhs))


def filter_good_edges_2lin(red: TwoLinReduction, alpha: ObservableAssignment, params: TwoLinParams | None = None) -> GoodEdges:
    """``E_{x,mu}[tr(a_u(x) a_u(x mu) + 2 a_u(x) a_v((x o pi_{v,u}) mu))]`` per ULC edge."""
    params = params or TwoLinParams(red.eps)
    T_w, T_e = two_lin_edge_statistics(red, alpha)
    lhs = T_w[red.source.edge_u] + 2.0 * T_e
    return GoodEdges(lhs, params.edge_threshold, red.source.weights)


@dataclass
class FourierDiagnostics:
    """Fourier-side quantities of a matched pair of scalar functions."""

    first_sum: float
    second_sum: float
    mass_outside_low_degree: float
    mass_outside_heavy: float
    core_sum: float
    weighted_gamma_sum: float
    final_sum: float
    thresholds: dict
    holds: dict

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in (
            "first_sum", "second_sum", "mass_outside_low_degree", "mass_outside_heavy",
            "core_sum", "weighted_gamma_sum", "final_sum")}
        out["thresholds"] = dict(self.thresholds)
        out["holds"] = dict(self.holds)
        return out


def fourier_inequality_report(beta, gamma, sigma, eps: float, t: float = 0.75, b_t: float | None = None) -> FourierDiagnostics:
    """Fourier consequences of a good index for scalar functions ``beta``, ``gamma``.

    ``low`` is the family ``|S| < 1/eps``; ``heavy`` is
    ``|beta(S)| > 4^(-eps^-2) / 10``. The core sum is
    ``|sum_{S in low & heavy} beta(S) gamma(sigma S) (1-2 eps)^|S||`` and the
    final sum is ``sum_{S != {} in low & heavy} beta(S)^2 gamma(sigma S)^2 / |S|``.
    """
    b_t = (1.0 - math.exp(-2.0)) if b_t is None else b_t
    beta = np.asarray(beta, dtype=float).reshape(-1)
    gamma = np.asarray(gamma, dtype=float).reshape(-1)
    m = beta.shape[0].bit_length() - 1
    sigma = check_permutation(sigma, m)
    bh = fourier_transform(beta).coeffs[:, 0, 0].real
    gs = fourier_transform(gamma).coeffs[:, 0, 0].real[image_subsets(sigma)]
    sizes = popcounts(m)
    damp = (1.0 - 2.0 * eps) ** sizes
    low = sizes < 1.0 / eps
    heavy = np.abs(bh) > 0.1 * 4.0 ** (-(eps**-2))
    core = low & heavy
    inner = core & (sizes > 0)
    safe = np.maximum(sizes, 1)
    et = eps**t
    diag = FourierDiagnostics(
        first_sum=float(np.sum(bh**2 * damp)),
        second_sum=float(np.sum(bh * gs * damp)),
        mass_outside_low_degree=float(np.sum(bh[~low] ** 2)),
        mass_outside_heavy=float(np.sum(bh[~heavy] ** 2)),
        core_sum=float(abs(np.sum((bh * gs * damp)[core]))),
        weighted_gamma_sum=float(np.sum((gs**2 / safe)[inner])),
        final_sum=float(np.sum((bh**2 * gs**2 / safe)[inner])),
        thresholds={
            "first_sum": 1.0 - b_t * et,
            "second_sum": 1.0 - b_t * et / 2.0,
            "mass_outside_low_degree": b_t / (1.0 - math.exp(-2.0)) * et,
            "mass_outside_heavy": 0.01,
            "core_sum": 0.25,
            "weighted_gamma_sum": eps / 4.0,
            "final_sum": eps / 400.0 * 4.0 ** (-2.0 / eps**2),
        },
        holds={},
    )
    th = diag.thresholds
    diag.holds = {
        "first_sum": diag.first_sum >= th["first_sum"],
        "second_sum": diag.second_sum >= th["second_sum"],
        "mass_outside_low_degree": diag.mass_outside_low_degree < th["mass_outside_low_degree"],
        "mass_outside_heavy": diag.mass_outside_heavy < th["mass_outside_heavy"],
        "core_sum": diag.core_sum > th["core_sum"],
        "weighted_gamma_sum": diag.weighted_gamma_sum > th["weighted_gamma_sum"],
        "final_sum": diag.final_sum > th["final_sum"],
    }
    return diag


def _folded_defect(A: np.ndarray) -> float:
    M = A.shape[1]
    idx = np.arange(M)
    return float(np.max(np.abs(A[:, idx ^ (M - 1)] + A)))


def _weight_povm(table: np.ndarray) -> np.ndarray:
    """Squared-Fourier-weight elements with the remainder merged into the last outcome."""
    P = fourier_weight_elements(fourier_transform(table))
    P[-1] += np.eye(table.shape[-1]) - P.sum(axis=0)
    return P


def extract_povm_assignment(red, alpha: ObservableAssignment) -> PvmAssignment:
    """Self-commuting POVM assignment on the ULC source built from Fourier weights.

    2-Lin: ``P_w^a = sum_{S ∋ a} alpha_w(S)^2 / |S|`` for every source vertex;
    ``alpha`` must be folded. MaxCut: left vertices use the averaged operator
    ``beta_u`` and right vertices ``alpha_v``; the remainder ``I - sum_a P^a``
    is added to the last outcome.
    """
    if isinstance(red, TwoLinReduction):
        A = _blocks(alpha, red.block_count, red.m)
        defect = _folded_defect(A)
        if defect > TOL.odd:
            raise ValueError(f"extraction needs a folded assignment (defect {defect:.3e})")
        return PvmAssignment(np.array([_weight_povm(A[w]) for w in range(red.block_count)]), "quantum", "povm")
    if isinstance(red, MaxCutReduction):
        A = _blocks(alpha, red.block_count, red.m)
        left = [_weight_povm(compute_beta(red, alpha, u).values) for u in range(red.source.left_count)]
        right = [_weight_povm(A[v]) for v in range(red.block_count)]
        return PvmAssignment(np.array(left + right), "weak-quantum", "povm")
    raise TypeError(f"unknown reduction {type(red).__name__}")


def _scalar_weights(values: np.ndarray) -> np.ndarray:
    """``p_j^a = sum_{S ∋ a} f_j(S)^2 / |S|`` for scalar functions in the columns of ``values``."""
    M, d = values.shape
    m = M.bit_length() - 1
    coeffs = fwht(values) / M
    sizes = popcounts(m)
    out = np.zeros((m, d))
    for a in range(m):
        mask = ((np.arange(M) >> a) & 1).astype(bool)
        out[a] = (coeffs[mask] ** 2 / sizes[mask][:, None]).sum(axis=0)
    return out


def _first_minimizer(values: np.ndarray, candidates: np.ndarray) -> int:
    vals = values[candidates]
    return int(candidates[np.flatnonzero(vals <= vals.min() + TOL.tie)[0]])


@dataclass
class SoundnessReport:
    kind: str
    params: dict
    omega_psi: float
    precondition_threshold: float
    precondition_met: bool
    good_objects: list = field(default_factory=list)
    good_mass: float = 0.0
    index_reports: list = field(default_factory=list)
    chosen: dict = field(default_factory=dict)
    extracted: PvmAssignment | None = None
    projectivized: PvmAssignment | None = None
    omega_extracted: float | None = None
    omega_projectivized: float | None = None
    value_history: list = field(default_factory=list)
    bound: float = 0.0
    failures: list = field(default_factory=list)

    @property
    def bound_met(self) -> bool:
        return self.omega_projectivized is not None and self.omega_projectivized >= self.bound

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "params": dict(self.params),
            "omega_psi": self.omega_psi,
            "precondition_threshold": self.precondition_threshold,
            "precondition_met": self.precondition_met,
            "good_mass": self.good_mass,
            "good_objects": self.good_objects,
            "index_reports": self.index_reports,
            "chosen": self.chosen,
            "omega_extracted": self.omega_extracted,
            "omega_projectivized": self.omega_projectivized,
            "value_history": list(self.value_history),
            "bound": self.bound,
            "bound_met": self.bound_met,
            "failures": list(self.failures),
        }

    def edge_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        keys = ["index", "u", "v", "weight", "lhs", "threshold", "slack", "good"]
        writer.writerow(keys)
        for row in self.good_objects:
            writer.writerow([repr(row[k]) if isinstance(row[k], float) else row[k] for k in keys])
        return buf.getvalue()


def _finish(report: SoundnessReport, red, alpha: ObservableAssignment) -> SoundnessReport:
    phi = red.source
    try:
        P = extract_povm_assignment(red, alpha)
    except (ValueError, NonCommutingError) as exc:
        report.failures.append(f"extraction: {exc}")
        return report
    report.extracted = P
    report.omega_extracted = float(labelcover_value_raw(phi, P.measurements).real)
    try:
        res = projectivize_assignment(phi, P, lambda M: labelcover_value_raw(phi, M))
    except NonCommutingError as exc:
        report.failures.append(f"projectivization: {exc}")
        return report
    report.projectivized = res.assignment
    report.value_history = res.history
    report.omega_projectivized = eval_labelcover_value(phi, res.assignment)
    if not report.bound_met:
        report.failures.append(f"extracted value {report.omega_projectivized!r} below bound {report.bound!r}")
    return report


def run_soundness_2lin(red: TwoLinReduction, alpha: ObservableAssignment, params: TwoLinParams | None = None) -> SoundnessReport:
    params = params or TwoLinParams(red.eps)
    if not math.isclose(params.eps, red.eps):
        raise ValueError(f"params.eps {params.eps} differs from the reduction noise {red.eps}")
    phi = red.source
    omega = float(np.real(0.5 + 0.5 * np.dot(red.psi.weights, _pair_traces(red.psi, alpha))))
    report = SoundnessReport(
        "2lin",
        {"eps": params.eps, "t": params.t, "bt_const": params.bt_const, "b_t": params.b_t},
        omega,
        params.value_threshold,
        omega >= params.value_threshold,
        bound=params.bound,
    )
    if not report.precondition_met:
        report.failures.append("precondition_failed")
    edges = filter_good_edges_2lin(red, alpha, params)
    report.good_mass = edges.good_mass
    for e in range(phi.edge_count):
        report.good_objects.append({
            "index": e, "u": int(phi.edge_u[e]), "v": int(phi.edge_v[e]), "weight": float(phi.weights[e]),
            "lhs": float(edges.lhs[e]), "threshold": edges.threshold, "slack": float(edges.slack[e]), "good": bool(edges.good[e]),
        })

    A = _blocks(alpha, red.block_count, red.m)
    noise = noise_weights(red.m, red.eps)
    tables = _point_tables(phi)
    ident = np.arange(1 << red.m)
    L = phi.left_count
    edge_scores = {}
    for e in np.flatnonzero(edges.good):
        u, v = int(phi.edge_u[e]), L + int(phi.edge_v[e])
        try:
            diag = diagonal_scalar_functions([A[u], A[v]])
        except NonCommutingError as exc:
            report.failures.append(f"edge {e}: {exc}")
            continue
        beta, gamma = diag.values[0], diag.values[1]
        scores = _scalar_noise_correlation(beta, beta, ident, noise) + 2.0 * _scalar_noise_correlation(beta, gamma, tables[e], noise)
        good_j = filter_good_indices(scores, params.index_threshold)
        pb, pg = _scalar_weights(beta), _scalar_weights(gamma)
        agreement = np.einsum("aj,aj->j", pb, pg[phi.projections[e]])
        entry = {"edge": int(e), "scores": scores.tolist(), "good_indices": good_j.tolist(), "range_defect": diag.range_defect(), "diagnostics": {}}
        for j in good_j:
            entry["diagnostics"][int(j)] = fourier_inequality_report(beta[:, j], gamma[:, j], phi.projections[e], params.eps, params.t, params.b_t).to_dict()
        report.index_reports.append(entry)
        if good_j.size:
            jstar = _first_minimizer(agreement, good_j)
            edge_scores[int(e)] = (jstar, float(agreement[jstar]))

    if edge_scores:
        P_tmp = extract_or_none(red, alpha)
        if P_tmp is not None:
            per_edge = _edge_agreements(phi, P_tmp)
            cand = np.array(sorted(edge_scores))
            estar = _first_minimizer(per_edge, cand)
            jstar, idx_val = edge_scores[estar]
            entry = next(r for r in report.index_reports if r["edge"] == estar)
            report.chosen = {
                "edge": estar, "index": jstar, "edge_agreement": float(per_edge[estar]),
                "index_agreement": idx_val, "final_sum": entry["diagnostics"][jstar]["final_sum"],
                "core_sum_exceeds_quarter": entry["diagnostics"][jstar]["holds"]["core_sum"],
            }
    return _finish(report, red, alpha)


def extract_or_none(red, alpha):
    try:
        return extract_povm_assignment(red, alpha)
    except (ValueError, NonCommutingError):
        return None


def _edge_agreements(phi, P: PvmAssignment) -> np.ndarray:
    d = P.dimension
    M = P.measurements
    Pu = M[phi.edge_u]
    Pv = M[phi.left_count + phi.edge_v][np.arange(phi.edge_count)[:, None], phi.projections]
    return np.einsum("eaij,eaji->e", Pu, Pv).real / d


def _pair_traces(lin, alpha: ObservableAssignment) -> np.ndarray:
    A = alpha.observables
    d = alpha.dimension
    return np.einsum("eij,eji->e", A[lin.scopes[:, 0]], A[lin.scopes[:, 1]]).real * lin.parities / d


def run_soundness_maxcut(red: MaxCutReduction, alpha: ObservableAssignment, params: MaxCutParams) -> SoundnessReport:
    if not math.isclose(params.rho, red.rho):
        raise ValueError(f"params.rho {params.rho} differs from the reduction correlation {red.rho}")
    phi = red.source
    omega = float(0.5 + 0.5 * np.dot(red.psi.weights, _pair_traces(red.psi, alpha)))
    report = SoundnessReport(
        "maxcut",
        {"eps": params.eps, "rho": params.rho, "delta2": params.delta2, "k": params.k},
        omega,
        params.value_threshold,
        omega >= params.value_threshold,
        bound=params.bound,
    )
    if not report.precondition_met:
        report.failures.append("precondition_failed")
    A = _blocks(alpha, red.block_count, red.m)
    noise = noise_weights(red.m, (1.0 - red.rho) / 2.0)
    ident = np.arange(1 << red.m)
    tables = _point_tables(phi)
    p_u = phi.left_marginals()
    for u in range(phi.left_count):
        B = compute_beta(red, alpha, u).values
        d = B.shape[-1]
        score = _noise_correlation(B, B, ident, ident, noise)
        good = score <= params.vertex_threshold
        report.good_objects.append({
            "index": u, "u": u, "v": -1, "weight": float(p_u[u]), "lhs": score,
            "threshold": params.vertex_threshold, "slack": params.vertex_threshold - score, "good": bool(good),
        })
        if not good:
            continue
        report.good_mass += float(p_u[u])
        inc = phi.incident_edges(u)
        nbrs = np.unique(phi.edge_v[inc])
        try:
            diag = diagonal_scalar_functions([A[v] for v in nbrs])
        except NonCommutingError as exc:
            report.failures.append(f"left vertex {u}: {exc}")
            continue
        pos = {int(v): i for i, v in enumerate(nbrs)}
        cond = phi.weights[inc] / p_u[u]
        beta = sum(c * diag.values[pos[int(phi.edge_v[e])]][tables[e]] for c, e in zip(cond, inc))
        stab = np.array([noise_stability(beta[:, j], red.rho) for j in range(d)])
        good_j = filter_good_indices(stab, params.index_threshold, upper=True)
        entry = {"u": u, "stability": stab.tolist(), "good_indices": good_j.tolist(), "influential": {}}
        for j in good_j:
            infl = [influence(beta[:, j], c, params.k) for c in range(red.m)]
            labels = []
            for c in np.flatnonzero(np.array(infl) > params.delta2):
                good_v = []
                for e in inc:
                    v = int(phi.edge_v[e])
                    val = influence(diag.values[pos[v]][:, j], int(phi.projections[e, c]), params.k)
                    if val > params.delta2 / 2.0:
                        good_v.append({"v": v, "influence": val})
                labels.append({"label": int(c), "influence": infl[c], "good_neighbors": good_v})
            entry["influential"][int(j)] = {"influences": infl, "labels": labels}
        report.index_reports.append(entry)
    return _finish(report, red, alpha)


def run_soundness_pipeline(red, alpha: ObservableAssignment, params) -> SoundnessReport:
    if isinstance(red, TwoLinReduction):
        return run_soundness_2lin(red, alpha, params)
    if isinstance(red, MaxCutReduction):
        return run_soundness_maxcut(red, alpha, params)
    raise TypeError(f"unknown reduction {type(red).__name__}")
