import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_array_equal

from povmkit import io
from povmkit.dilation import minimal_naimark
from povmkit.errors import InvalidPovm, ParseError
from povmkit.generate import (
    gen_intro_examples,
    gen_random_povm,
    gen_trine,
    random_channel_kraus,
    random_kernel,
    random_state,
)
from povmkit.instrument import luders_instrument
from povmkit.observable import DiscretePovm
from povmkit.process import KrausChannel, MarkovMatrix

from conftest import feasible_ranks, seeds


def _json_round_trip(obj):
    return io.decode(json.loads(io.dumps(io.encode(obj))))


@given(seeds, st.integers(1, 6), st.integers(1, 8))
def test_povm_round_trip_is_bit_exact(seed, d, n):
    rng = np.random.default_rng(seed)
    povm = gen_random_povm(d, n, feasible_ranks(rng, d, n), rng)
    back = _json_round_trip(povm)
    assert back.labels == povm.labels
    assert_array_equal(back.effects, povm.effects)


def test_other_objects_round_trip():
    rho = random_state(3, seed=1)
    assert_array_equal(_json_round_trip(rho).matrix, rho.matrix)

    k = MarkovMatrix.from_array(random_kernel(3, 2, seed=1), ["x", "y"])
    back = _json_round_trip(k)
    assert_array_equal(back.entries, k.entries)
    assert back.output_labels == ("x", "y")

    ch = KrausChannel.from_kraus(random_channel_kraus(2, 3, 2, seed=1))
    assert_array_equal(_json_round_trip(ch).kraus, ch.kraus)

    inst = luders_instrument(gen_trine())
    back = _json_round_trip(inst)
    assert back.labels == inst.labels
    for a, b in zip(back.kraus, inst.kraus):
        assert_array_equal(a, b)

    joint = gen_intro_examples()["c2_joint_blocks"]
    back = _json_round_trip(joint)
    assert_array_equal(back.grid, joint.grid)


def test_dilation_is_export_only():
    doc = io.encode(minimal_naimark(gen_trine()))
    assert doc["total_dim"] == 3
    with pytest.raises(ParseError):
        io.decode(doc)


def test_schema_version_checked():
    doc = io.encode(gen_trine())
    doc["schema_version"] = 2
    with pytest.raises(ParseError):
        io.decode(doc)
    del doc["schema_version"]
    assert io.decode(doc).n_outcomes == 3


def test_untyped_document_with_effects_is_a_povm():
    doc = {"effects": [io.encode_matrix(np.eye(2))]}
    povm = io.decode(doc)
    assert isinstance(povm, DiscretePovm) and povm.labels == ("1",)


@pytest.mark.parametrize(
    "doc",
    [
        [],
        {"type": "povm"},
        {"type": "povm", "effects": []},
        {"type": "povm", "effects": [[[1, 0]]]},
        {"type": "povm", "effects": [[[[1, 0], ["a", 0]]]]},
        {"type": "povm", "dim": 3, "effects": [io.encode_matrix(np.eye(2))]},
        {"type": "povm", "effects": [io.encode_matrix(np.eye(2))], "outcomes": ["a", "b"]},
        {"type": "povm", "effects": [io.encode_matrix(np.eye(2))], "outcomes": [1]},
        {"type": "kernel", "entries": [1.0, 0.0]},
        {"type": "channel", "kraus": []},
        {"type": "instrument", "outcomes": ["a"], "operations": {}},
        {"type": "joint", "effects": [[io.encode_matrix(np.eye(2))], []]},
        {"type": "mystery"},
    ],
)
def test_malformed_documents(doc):
    with pytest.raises(ParseError):
        io.decode(doc)


def test_non_finite_entries_rejected():
    with pytest.raises(ParseError):
        io.decode_matrix([[[float("nan"), 0.0]]])


def test_invalid_content_raises_domain_error():
    doc = {"effects": [io.encode_matrix(np.eye(2)), io.encode_matrix(np.eye(2))]}
    with pytest.raises(InvalidPovm):
        io.decode(doc)


def test_file_helpers(tmp_path):
    path = tmp_path / "trine.json"
    io.write(gen_trine(), path)
    text = path.read_text()
    assert json.loads(text)["schema_version"] == 1
    assert_array_equal(io.read(path).effects, gen_trine().effects)
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ParseError):
        io.read(bad)
    with pytest.raises(ParseError):
        io.read(tmp_path / "missing.json")


def test_dumps_is_deterministic_and_nan_free():
    doc = {"b": 1.0, "a": float("inf"), "c": np.float64(2.5)}
    text = io.dumps(doc)
    assert text == io.dumps(dict(reversed(list(doc.items()))))
    assert json.loads(text) == {"a": None, "b": 1.0, "c": 2.5}
