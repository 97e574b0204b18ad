import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcsp.assignments import ObservableAssignment, random_labelcover_assignment
from qcsp.instances import GeneralCspInstance, Constraint, LinInstance, cycle_maxcut, generate_random_ulc
from qcsp.operators import random_observable
from qcsp.reductions import fold_2lin, reduce_ulc_to_2lin, reduce_ulc_to_maxcut
from qcsp.serialization import (
    assignment_from_dict,
    assignment_to_dict,
    certificate_to_dict,
    decode_operator,
    dumps,
    encode_operator,
    instance_from_dict,
    instance_to_dict,
    read_json,
    sha256_bytes,
    write_json,
)


def _reload(obj):
    return json.loads(dumps(obj))


@settings(max_examples=20)
@given(st.integers(1, 4), st.integers(0, 10**6))
def test_operator_encoding_round_trip(d, seed):
    A = random_observable(d, np.random.default_rng(seed))
    flat = encode_operator(A)
    assert len(flat) == 2 * d * d
    assert np.array_equal(decode_operator(_reload(flat), d), A)


def test_operator_encoding_is_interleaved():
    assert encode_operator(np.array([[1 + 2j]])) == [1.0, 2.0]
    with pytest.raises(ValueError):
        decode_operator([1.0, 2.0, 3.0], 1)


def test_instances_round_trip():
    lc = generate_random_ulc(2, 3, 3, seed=0)
    back = instance_from_dict(_reload(instance_to_dict(lc)))
    assert np.array_equal(back.projections, lc.projections)
    assert np.array_equal(back.weights, lc.weights)
    assert instance_to_dict(lc)["kind"] == "ulc"

    cut = cycle_maxcut(5)
    back = instance_from_dict(_reload(instance_to_dict(cut)))
    assert back.is_maxcut and np.array_equal(back.scopes, cut.scopes)

    lin = LinInstance(3, 4, [[0, 1, 2], [1, 2, 3]], [1, -1], [0.5, 0.5], meta={"tag": 1})
    back = instance_from_dict(_reload(instance_to_dict(lin)))
    assert np.array_equal(back.parities, lin.parities) and back.meta == {"tag": 1}

    g = GeneralCspInstance(2, 3, 2, [Constraint((0, 1), frozenset({(0, 2), (1, 1)}), 1.0)])
    back = instance_from_dict(_reload(instance_to_dict(g)))
    assert back.constraints == g.constraints


def test_malformed_instances_raise_value_error():
    with pytest.raises(ValueError):
        instance_from_dict({"kind": "ulc"})
    with pytest.raises(ValueError):
        instance_from_dict({"kind": "mystery"})


def test_assignments_round_trip_bit_exact():
    rng = np.random.default_rng(1)
    lc = generate_random_ulc(2, 2, 2, seed=1)
    pvm = random_labelcover_assignment(lc, rng)
    back = assignment_from_dict(_reload(assignment_to_dict(pvm)))
    assert np.array_equal(back.measurements, pvm.measurements)
    assert back.cls == pvm.cls and back.kind == "pvm"

    obs = ObservableAssignment(np.array([random_observable(2, rng) for _ in range(3)]), "noncommutative", True)
    back = assignment_from_dict(_reload(assignment_to_dict(obs)))
    assert np.array_equal(back.observables, obs.observables)
    assert back.folded


def test_assignment_vertex_ids_must_be_contiguous():
    data = assignment_to_dict(ObservableAssignment(np.array([np.eye(1)] * 2)))
    data["vertices"] = {"0": data["vertices"]["0"], "5": data["vertices"]["1"]}
    with pytest.raises(ValueError):
        assignment_from_dict(data)


def test_certificates():
    phi = generate_random_ulc(2, 1, 2, seed=2)
    red = reduce_ulc_to_2lin(phi, 0.1)
    cert = certificate_to_dict(red)
    assert cert["vertex_map"] == [["u", 0, 0], ["u", 1, 4], ["v", 0, 8]]
    assert sum(cert["constraint_counts"].values()) == red.psi.constraint_count
    folded = certificate_to_dict(fold_2lin(red))
    assert folded["kind"] == "2lin-folded" and len(folded["kappa"]) == 4
    cut = certificate_to_dict(reduce_ulc_to_maxcut(phi, -0.5))
    assert cut["params"] == {"rho": -0.5}
    with pytest.raises(TypeError):
        certificate_to_dict(object())


def test_write_json_digest(tmp_path):
    path = tmp_path / "x.json"
    digest = write_json(path, {"b": 1, "a": 0.1})
    assert digest == sha256_bytes(path.read_bytes())
    assert path.read_text() == '{"a":0.1,"b":1}\n'
    assert read_json(path) == {"a": 0.1, "b": 1}
