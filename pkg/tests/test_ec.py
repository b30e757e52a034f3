import numpy as np
import pytest
from scipy import ndimage
from hypothesis import given, settings, strategies as st

from _oracles import cell_count_ec, superlevel_curve
from eclkc import (ECCurve, FieldSample, FieldValidationError, GridField, average_curves, binary_ec,
                   ec_curve, ec_curve_average, ec_delta_at, ec_oracle, ec_values, local_ec,
                   resolve_connectivity)
from eclkc.sim import IsotropicSpec, simulate_isotropic

RULES = [((16,), None), ((6, 7), 4), ((6, 7), 8), ((3, 4, 3), 6), ((3, 3, 4), 26)]


@pytest.mark.parametrize("shape,conn", RULES)
def test_binary_ec_matches_cell_enumeration(shape, conn):
    rng = np.random.default_rng(len(shape) * 100 + (conn or 0))
    closed = resolve_connectivity(conn, len(shape)).closed
    for p in (0.3, 0.5, 0.8):
        for _ in range(4):
            b = rng.random(shape) < p
            assert binary_ec(b, conn) == cell_count_ec(b, closed)


def test_local_ec_examples():
    assert local_ec(np.zeros((3, 3))) == 0
    centre = np.zeros((3, 3), bool)
    centre[1, 1] = True
    assert local_ec(centre) == 1
    assert local_ec(np.ones((3, 3)), 4) == 1  # V=9, E=12, F=4
    assert local_ec(np.ones((3, 3, 3)), 6) == 1
    with pytest.raises(ValueError):
        local_ec(np.ones((3, 4)))


def test_connectivity_admissibility():
    assert resolve_connectivity(None, 2).name == "vertex4"
    assert resolve_connectivity(8, 2).name == "vertex8"
    assert resolve_connectivity(26, 3).name == "full26"
    with pytest.raises(ValueError):
        resolve_connectivity(6, 2)
    with pytest.raises(ValueError):
        resolve_connectivity(4, 3)


def test_delta_at_examples():
    peak = GridField(np.array([[0, 1, 0], [2, 5, 3], [0, 4, 0]], float))
    assert ec_delta_at(peak, (1, 1)) == 1
    saddle = GridField(np.array([[0, 9, 0], [1, 5, 2], [0, 8, 0]], float))
    assert ec_delta_at(saddle, (1, 1)) == -1
    slope = GridField(np.array([[0, 9, 0], [1, 5, 2], [0, 3, 0]], float))
    assert ec_delta_at(slope, (1, 1)) == 0
    masked = GridField(peak.values, np.array([[1, 1, 1], [1, 0, 1], [1, 1, 1]], bool))
    with pytest.raises(FieldValidationError):
        ec_delta_at(masked, (1, 1))


def test_delta_at_sums_to_domain_ec():
    rng = np.random.default_rng(3)
    f = GridField(rng.standard_normal((7, 9)))
    total = sum(ec_delta_at(f, idx) for idx in np.ndindex(f.shape))
    assert total == 1


def test_1d_example():
    c = ec_curve(GridField(np.array([1.0, 3.0, 2.0, 4.0])))
    assert [c.evaluate(u) for u in (0.5, 1.5, 2.5, 3.5, 4.5)] == [1, 1, 2, 1, 0]


def test_constant_field():
    c = ec_curve(GridField(np.full((5, 5), 2.5)))
    np.testing.assert_array_equal(c.crit_values, [2.5])
    np.testing.assert_array_equal(c.deltas, [-1])
    assert c.evaluate(2.5) == 1 and c.evaluate(2.5000001) == 0


@pytest.mark.parametrize("method", ["cells", "local"])
@pytest.mark.parametrize("shape,conn", [((16,), None), ((8, 8), 4), ((8, 8), 8), ((4, 4, 4), 6),
                                         ((4, 4, 4), 26)])
def test_curve_matches_oracle(shape, conn, method):
    rng = np.random.default_rng(11)
    for _ in range(5):
        f = GridField(rng.standard_normal(shape))
        c = ec_curve(f, conn, method=method)
        us = np.concatenate([rng.uniform(-3.5, 3.5, 60), c.crit_values])
        assert all(c.evaluate(u) == ec_oracle(f, u, conn) for u in us)


@pytest.mark.parametrize("closed,conn", [(False, 4), (True, 8)])
def test_curve_matches_enumeration_with_mask(closed, conn):
    rng = np.random.default_rng(5)
    for _ in range(3):
        mask = rng.random((6, 6)) < 0.8
        f = GridField(rng.standard_normal((6, 6)), mask)
        c = ec_curve(f, conn)
        levels, chis = superlevel_curve(f.values, mask, closed)
        assert [c.evaluate(u) for u in levels] == chis
        assert c.evaluate(levels[-1] + 1) == 0


def test_curve_invariants():
    rng = np.random.default_rng(2)
    f = GridField(rng.standard_normal((12, 12)))
    c = ec_curve(f)
    assert c.deltas.sum() == -c.l0
    assert c.evaluate(f.values.min() - 1) == c.l0 == 1
    assert c.evaluate(f.values.max() + 1e-9) == 0
    assert np.all(np.diff(c.crit_values) > 0) and np.all(c.deltas != 0)
    with pytest.raises(ValueError):
        ECCurve(1, np.array([1.0, 0.5]), np.array([1, -2]))
    with pytest.raises(ValueError):
        ECCurve(1, np.array([0.0, 1.0]), np.array([1, 1]))


def test_monotone_relabelling():
    rng = np.random.default_rng(8)
    f = GridField(rng.standard_normal((10, 10)))
    g = GridField(np.exp(f.values) + 3.0 * f.values)
    cf, cg = ec_curve(f), ec_curve(g)
    np.testing.assert_array_equal(cf.deltas, cg.deltas)
    np.testing.assert_allclose(np.exp(cf.crit_values) + 3 * cf.crit_values, cg.crit_values)


def _components_minus_holes(b, conn):
    """2D EC by topology: foreground components minus bounded background components."""
    cross, full = ndimage.generate_binary_structure(2, 1), np.ones((3, 3), bool)
    fg, bg = (cross, full) if conn == 4 else (full, cross)
    n_fg = ndimage.label(b, fg)[1]
    n_bg = ndimage.label(~np.pad(b, 1), bg)[1]
    return n_fg - (n_bg - 1)


@pytest.mark.parametrize("conn", [4, 8])
def test_curve_matches_component_count(conn):
    rng = np.random.default_rng(21)
    for _ in range(20):
        f = GridField(rng.standard_normal((12, 15)))
        c = ec_curve(f, conn)
        for u in rng.uniform(-2.5, 2.5, 15):
            assert c.evaluate(u) == _components_minus_holes(f.values >= u, conn)


@pytest.mark.parametrize("conn", [4, 8])
def test_ties_follow_oracle(conn):
    rng = np.random.default_rng(9)
    for _ in range(10):
        v = rng.integers(0, 4, size=(8, 8)).astype(float)
        f = GridField(v)
        c = ec_curve(f, conn)
        for u in np.arange(-0.5, 4.5, 0.5):
            assert c.evaluate(u) == ec_oracle(f, u, conn)
    v = rng.standard_normal((8, 8))
    v[1, 1] = v[6, 6] = 0.3
    f = GridField(v)
    c = ec_curve(f, conn)
    for u in np.append(c.crit_values, [0.3, 0.3 + 1e-12]):
        assert c.evaluate(u) == ec_oracle(f, u, conn)


def test_checkerboard():
    board = (np.indices((8, 8)).sum(axis=0) % 2).astype(float)
    f = GridField(board)
    assert ec_oracle(f, 0.5, 4) == 32
    assert ec_curve(f, 4).evaluate(0.5) == 32
    assert ec_curve(f, 8).evaluate(0.5) == ec_oracle(f, 0.5, 8)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 7), m=st.integers(2, 7),
       conn=st.sampled_from([4, 8]))
def test_oracle_property(seed, n, m, conn):
    rng = np.random.default_rng(seed)
    f = GridField(np.round(rng.standard_normal((n, m)), 1), rng.random((n, m)) < 0.85)
    if not f.domain.any():
        return
    c = ec_curve(f, conn)
    for u in np.arange(-3, 3, 0.05):
        assert c.evaluate(u) == ec_oracle(f, u, conn)


def test_masking_commutes_with_embedding():
    rng = np.random.default_rng(4)
    inner = rng.standard_normal((6, 6))
    big = np.full((10, 10), 0.0)
    big[2:8, 3:9] = inner
    mask = np.zeros((10, 10), bool)
    mask[2:8, 3:9] = True
    a, b = ec_curve(GridField(inner)), ec_curve(GridField(big, mask))
    np.testing.assert_array_equal(a.crit_values, b.crit_values)
    np.testing.assert_array_equal(a.deltas, b.deltas)


def test_curve_csv(tmp_path):
    c = ec_curve(GridField(np.array([1.0, 3.0, 2.0, 4.0])))
    c.to_csv(tmp_path / "c.csv")
    rows = np.loadtxt(tmp_path / "c.csv", delimiter=",", skiprows=1)
    np.testing.assert_array_equal(rows[:, 0], c.crit_values)
    np.testing.assert_array_equal(rows[:, 2], c.levels[1:])
    assert (tmp_path / "c.csv.json").read_text() == '{"l0": 1, "m": 3}'


def test_average_curves():
    rng = np.random.default_rng(1)
    f = GridField(rng.standard_normal((6, 6)))
    c = ec_curve(f)
    avg1 = ec_curve_average([c])
    u = rng.uniform(-3, 3, 50)
    np.testing.assert_array_equal(avg1.evaluate(u), c.evaluate(u))
    a = ECCurve(1, np.array([0.0, 1.0]), np.array([1, -2]))
    b = ECCurve(1, np.array([0.5, 1.0]), np.array([1, -2]))
    avg = average_curves([a, b])
    np.testing.assert_array_equal(avg.crit_values, [0.0, 0.5, 1.0])
    np.testing.assert_array_equal(avg.deltas, [0.5, 0.5, -2.0])
    sample = simulate_isotropic(IsotropicSpec(20, 2.0), 10, 0)
    avg = ec_curve_average(sample)
    assert avg.evaluate(-10) == 1 and avg.evaluate(10) == 0


@pytest.mark.parametrize("shape,conn", [((20,), None), ((9, 8), 4), ((9, 8), 8), ((4, 5, 3), 26)])
def test_ec_values_match_oracle(shape, conn):
    rng = np.random.default_rng(21)
    data = rng.standard_normal((4,) + shape)
    mask = rng.random(shape) < 0.9
    u = np.linspace(-2.5, 2.5, 11)
    got = ec_values(data, u, mask, conn)
    ref = [[ec_oracle(GridField(d, mask), x, conn) for x in u] for d in data]
    np.testing.assert_array_equal(got, ref)
