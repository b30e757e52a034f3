import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eclkc import (FieldSample, FieldValidationError, GridField, domain_ec, export_csv,
                   field_from_bytes, field_to_bytes, flatten_index, load_field, save_field,
                   unflatten_index)


def _raw(shape, values, mask=None):
    header = {"dim": len(shape), "shape": list(shape), "mask": mask is not None, "dtype": "f64le"}
    out = (json.dumps(header, separators=(",", ":")) + "\n").encode()
    if mask is not None:
        out += np.asarray(mask, np.uint8).tobytes()
    return out + np.asarray(values, "<f8").tobytes()


def test_load_valid_2x2(tmp_path):
    p = tmp_path / "a.fldb"
    p.write_bytes(_raw([2, 2], [0, 1, 2, 3]))
    f = load_field(p)
    assert f.dim == 2 and f.shape == (2, 2)
    np.testing.assert_array_equal(f.values, [[0, 1], [2, 3]])


def test_length_mismatch(tmp_path):
    p = tmp_path / "a.fldb"
    p.write_bytes(_raw([2, 2], [0, 1, 2]))
    with pytest.raises(FieldValidationError, match="length mismatch"):
        load_field(p)


def test_nan_inside_mask_names_index(tmp_path):
    p = tmp_path / "a.fldb"
    p.write_bytes(_raw([2, 2], [0, 1, np.nan, 3], mask=[1, 1, 1, 1]))
    with pytest.raises(FieldValidationError, match=r"\(1, 0\)"):
        load_field(p)


def test_nan_outside_mask_is_fine():
    f = field_from_bytes(_raw([2, 2], [0, 1, np.nan, 3], mask=[1, 1, 0, 1]))
    assert not f.mask[1, 0]
    assert f.masked_values()[1, 0] == -np.inf


@pytest.mark.parametrize("bad", [b"no newline", b"{not json}\n", b'{"dim":1}\n',
                                 b'{"dim":1,"shape":[2],"mask":false,"dtype":"f32"}\n'])
def test_malformed_headers(bad):
    with pytest.raises(FieldValidationError, match="malformed"):
        field_from_bytes(bad)


@settings(max_examples=40, deadline=None)
@given(shape=st.lists(st.integers(1, 5), min_size=1, max_size=3), seed=st.integers(0, 2**32 - 1),
       masked=st.booleans())
def test_round_trip_is_byte_exact(tmp_path_factory, shape, seed, masked):
    rng = np.random.default_rng(seed)
    vals = rng.standard_normal(shape)
    mask = rng.random(shape) < 0.7 if masked else None
    f = GridField(vals, mask)
    p = tmp_path_factory.mktemp("rt") / "f.fldb"
    save_field(f, p)
    g = load_field(p)
    assert g == f
    assert p.read_bytes() == field_to_bytes(g)
    if masked:
        np.testing.assert_array_equal(g.mask, mask)


def test_unwritable_path(tmp_path):
    f = GridField(np.zeros((2, 2)))
    with pytest.raises(OSError):
        save_field(f, tmp_path / "missing_dir" / "f.fldb")


def test_export_csv(tmp_path):
    f = GridField(np.arange(6.0).reshape(2, 3))
    export_csv(f, tmp_path / "f.csv")
    np.testing.assert_array_equal(np.loadtxt(tmp_path / "f.csv", delimiter=","), f.values)
    with pytest.raises(FieldValidationError):
        export_csv(GridField(np.zeros(3)), tmp_path / "g.csv")


@settings(max_examples=50, deadline=None)
@given(shape=st.lists(st.integers(1, 6), min_size=1, max_size=3), data=st.data())
def test_flatten_unflatten(shape, data):
    idx = tuple(data.draw(st.integers(0, n - 1)) for n in shape)
    flat = flatten_index(idx, shape)
    assert unflatten_index(flat, shape) == idx
    assert flat == np.ravel_multi_index(idx, shape)


def test_fields_are_immutable():
    f = GridField(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        f.values[0, 0] = 1.0


def test_sample_consistency():
    a, b = GridField(np.zeros((2, 2))), GridField(np.zeros((2, 3)))
    with pytest.raises(FieldValidationError, match="shape"):
        FieldSample.from_fields([a, b])
    c = GridField(np.zeros((2, 2)), np.array([[1, 0], [1, 1]], bool))
    with pytest.raises(FieldValidationError, match="mask"):
        FieldSample.from_fields([a, c])
    with pytest.raises(FieldValidationError):
        FieldSample(np.zeros((2, 2)), provenance="cooked")
    s = FieldSample.from_fields([a, a])
    assert len(s) == 2 and s.shape == (2, 2) and s[1] == a


def test_domain_ec_examples():
    assert domain_ec(np.ones((50, 50), bool)).l0 == 1
    two = np.zeros((10, 10), bool)
    two[1:4, 1:4] = two[6:9, 5:9] = True
    assert domain_ec(two).l0 == 2
    ring = np.ones((8, 8), bool)
    ring[1:7, 1:7] = False
    assert domain_ec(ring).l0 == 0
    hole = np.ones((8, 8), bool)
    hole[3:5, 3:5] = False
    assert domain_ec(hole).l0 == 0
    with pytest.raises(FieldValidationError, match="empty"):
        domain_ec(np.zeros((4, 4), bool))


def test_diagonal_touch_depends_on_rule():
    m = np.eye(3, dtype=bool)
    assert domain_ec(m, 4).l0 == 3
    assert domain_ec(m, 8).l0 == 1
