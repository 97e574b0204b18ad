"""JSON encoding of instances, assignments and reduction certificates.

Operators are flattened row-major with real and imaginary parts
interleaved: ``[re00, im00, re01, im01, ...]``. Floats are written with
Python's shortest round-trip repr, so a load/dump cycle is bit-stable.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .assignments import ObservableAssignment, PvmAssignment
from .instances import Constraint, GeneralCspInstance, LabelCoverInstance, LinInstance
from .reductions import FoldedReduction, MaxCutReduction, TwoLinReduction


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def write_json(path, obj) -> str:
    """Write ``obj`` and return the SHA-256 of the bytes written."""
    data = dumps(obj).encode()
    Path(path).write_bytes(data)
    return sha256_bytes(data)


def read_json(path):
    return json.loads(Path(path).read_text())


def encode_operator(A) -> list[float]:
    A = np.asarray(A, dtype=complex)
    return np.stack([A.real, A.imag], axis=-1).ravel().tolist()


def decode_operator(values, d: int) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.size != 2 * d * d:
        raise ValueError(f"operator needs {2 * d * d} numbers, got {arr.size}")
    arr = arr.reshape(d, d, 2)
    return arr[..., 0] + 1j * arr[..., 1]


def _clean_meta(meta: dict) -> dict:
    return {k: (v.item() if isinstance(v, np.generic) else v) for k, v in meta.items()}


def instance_to_dict(inst) -> dict:
    if isinstance(inst, LabelCoverInstance):
        return {
            "kind": "ulc" if inst.unique else "label_cover",
            "m": inst.alphabet,
            "left_count": inst.left_count,
            "right_count": inst.right_count,
            "edges": [
                {"u": int(u), "v": int(v), "pi": p.tolist(), "weight": float(w)}
                for u, v, p, w in zip(inst.edge_u, inst.edge_v, inst.projections, inst.weights)
            ],
        }
    if isinstance(inst, LinInstance):
        if inst.is_maxcut:
            out = {
                "kind": "maxcut",
                "variable_count": inst.variable_count,
                "edges": [{"vars": s.tolist(), "weight": float(w)} for s, w in zip(inst.scopes, inst.weights)],
            }
        else:
            out = {
                "kind": "lin",
                "k": inst.arity,
                "variable_count": inst.variable_count,
                "constraints": [
                    {"vars": s.tolist(), "parity": int(r), "weight": float(w)}
                    for s, r, w in zip(inst.scopes, inst.parities, inst.weights)
                ],
            }
        if inst.meta:
            out["meta"] = _clean_meta(inst.meta)
        return out
    if isinstance(inst, GeneralCspInstance):
        return {
            "kind": "general",
            "k": inst.arity,
            "m": inst.alphabet,
            "variable_count": inst.variable_count,
            "constraints": [
                {"vars": list(c.scope), "predicate": sorted(list(t) for t in c.predicate), "weight": c.weight}
                for c in inst.constraints
            ],
        }
    raise TypeError(f"cannot serialize {type(inst).__name__}")


def instance_from_dict(data: dict):
    """Inverse of :func:`instance_to_dict`; raises ``ValueError`` on malformed input."""
    try:
        kind = data["kind"]
        if kind in ("ulc", "label_cover"):
            m = int(data["m"])
            edges = data["edges"]
            return LabelCoverInstance(
                int(data["left_count"]),
                int(data["right_count"]),
                m,
                [e["u"] for e in edges],
                [e["v"] for e in edges],
                np.array([e["pi"] for e in edges], dtype=np.int64).reshape(len(edges), m),
                [e["weight"] for e in edges],
                unique=(kind == "ulc"),
            )
        if kind == "maxcut":
            edges = data["edges"]
            n = len(edges)
            return LinInstance(2, int(data["variable_count"]), [e["vars"] for e in edges],
                               -np.ones(n, dtype=np.int64), [e["weight"] for e in edges], meta=data.get("meta", {}))
        if kind == "lin":
            cons = data["constraints"]
            return LinInstance(int(data["k"]), int(data["variable_count"]), [c["vars"] for c in cons],
                               [c["parity"] for c in cons], [c["weight"] for c in cons], meta=data.get("meta", {}))
        if kind == "general":
            cons = [Constraint(tuple(c["vars"]), frozenset(tuple(t) for t in c["predicate"]), float(c["weight"]))
                    for c in data["constraints"]]
            return GeneralCspInstance(int(data["k"]), int(data["m"]), int(data["variable_count"]), cons)
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed instance JSON: {exc!r}") from exc
    raise ValueError(f"unknown instance kind {data.get('kind')!r}")


def assignment_to_dict(asg) -> dict:
    if isinstance(asg, ObservableAssignment):
        return {
            "dimension": asg.dimension,
            "class": asg.cls,
            "kind": "observable",
            "folded": asg.folded,
            "vertices": {str(i): encode_operator(A) for i, A in enumerate(asg.observables)},
        }
    if isinstance(asg, PvmAssignment):
        return {
            "dimension": asg.dimension,
            "class": asg.cls,
            "kind": asg.kind,
            "vertices": {str(i): [encode_operator(P) for P in Ps] for i, Ps in enumerate(asg.measurements)},
        }
    raise TypeError(f"cannot serialize {type(asg).__name__}")


def assignment_from_dict(data: dict):
    try:
        d = int(data["dimension"])
        verts = data["vertices"]
        order = sorted(verts, key=int)
        if [int(k) for k in order] != list(range(len(order))):
            raise ValueError("vertex ids must be 0..n-1")
        if data["kind"] == "observable":
            A = np.array([decode_operator(verts[k], d) for k in order])
            return ObservableAssignment(A, data["class"], bool(data.get("folded", False)))
        M = np.array([[decode_operator(P, d) for P in verts[k]] for k in order])
        return PvmAssignment(M, data["class"], data["kind"])
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed assignment JSON: {exc!r}") from exc


def certificate_to_dict(red) -> dict:
    """Parameters and the vertex map ``target = block * 2**m + x`` of a reduction."""
    if isinstance(red, FoldedReduction):
        base = certificate_to_dict(red.reduction)
        base.update({
            "kind": "2lin-folded",
            "representatives": "masks with bit 0 clear",
            "folded_vertex": "block * 2**(m-1) + (theta(x) >> 1)",
            "kappa": red.kappa.tolist(),
            "theta": red.theta.tolist(),
        })
        return base
    if not isinstance(red, (TwoLinReduction, MaxCutReduction)):
        raise TypeError(f"unknown reduction {type(red).__name__}")
    phi = red.source
    M = 1 << red.m
    if isinstance(red, TwoLinReduction):
        blocks = [["u", u, u * M] for u in range(phi.left_count)]
        blocks += [["v", v, (phi.left_count + v) * M] for v in range(phi.right_count)]
        params = {"eps": red.eps}
        kind = "2lin"
        counts = {str(t): int(np.sum(red.edge_type == t)) for t in (1, 2, 3)}
    else:
        blocks = [["v", v, v * M] for v in range(phi.right_count)]
        params = {"rho": red.rho}
        kind = "maxcut"
        counts = {"total": red.psi.constraint_count}
    return {
        "kind": kind,
        "m": red.m,
        "params": params,
        "point_encoding": "bit a set means x_a = -1",
        "vertex_map": blocks,
        "constraint_counts": counts,
        "target_vertex_count": red.psi.variable_count,
    }
