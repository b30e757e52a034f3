import math

import numpy as np
import pytest

from eclkc import (IsotropicSpec, ScaleSpaceSpec, ec_curve, hpe_fields, simulate_isotropic,
                   simulate_scale_space, substream, true_lkc_isotropic, true_lkc_scale_space)


@pytest.mark.parametrize("noise", ["gaussian", "chisq3"])
def test_isotropic_moments(noise):
    spec = IsotropicSpec(30, 5.0, noise)
    s = simulate_isotropic(spec, 5000, substream(0, "test", "moments", noise)).data
    rng = np.random.default_rng(0)
    pts = rng.integers(0, 30, size=(5, 2))
    vals = s[:, pts[:, 0], pts[:, 1]]
    np.testing.assert_allclose(vals.var(axis=0), 1.0, atol=0.05)
    np.testing.assert_allclose(vals.mean(axis=0), 0.0, atol=0.03)


def test_isotropic_lag_correlation():
    s = simulate_isotropic(IsotropicSpec(40, 5.0), 4000, substream(0, "test", "lag")).data
    a, b = s[:, 15, 10], s[:, 15, 20]
    assert np.corrcoef(a, b)[0, 1] == pytest.approx(math.exp(-1), abs=0.03)


def test_unit_variance_is_exact_per_location():
    """Each location's kernel weights have unit l2 norm, so the variance is exactly 1."""
    spec = IsotropicSpec(12, 2.0)
    from eclkc.sim import _kernel_matrix
    r = int(6 * spec.nu)
    K = _kernel_matrix(spec.L, spec.nu, r)
    w = np.einsum("i,j->ij", K[3], K[7])
    norm = np.sqrt(np.outer((K * K).sum(1), (K * K).sum(1)))[3, 7]
    assert np.sum((w / norm) ** 2) == pytest.approx(1.0, rel=1e-14)


@pytest.mark.parametrize("extend", [True, False])
def test_fft_matches_direct(extend):
    spec = IsotropicSpec(25, 3.0)
    a = simulate_isotropic(spec, 3, 4, "direct", extend)
    b = simulate_isotropic(spec, 3, 4, "fft", extend)
    np.testing.assert_allclose(a.data, b.data, atol=1e-10)


def test_seed_determinism():
    spec = IsotropicSpec(20, 2.0)
    a = simulate_isotropic(spec, 3, substream(1, "x"))
    b = simulate_isotropic(spec, 3, substream(1, "x"))
    assert a.data.tobytes() == b.data.tobytes()
    ss = ScaleSpaceSpec(n_t=40, n_gamma=8)
    assert simulate_scale_space(ss, 2, 9).data.tobytes() == simulate_scale_space(ss, 2, 9).data.tobytes()


def test_true_lkc_isotropic():
    v = true_lkc_isotropic(IsotropicSpec(50, 5.0))
    np.testing.assert_allclose(v.lkc, [13.86, 48.02], atol=5e-3)
    assert v.l0 == 1
    far = true_lkc_isotropic(IsotropicSpec(50, 1e8)).lkc
    assert np.all(far < 1e-6)
    np.testing.assert_array_equal(true_lkc_isotropic(IsotropicSpec(1, 5.0)).lkc, [0, 0])


def test_true_lkc_scale_space():
    np.testing.assert_allclose(true_lkc_scale_space(ScaleSpaceSpec()).lkc, [6.42, 4.49], atol=5e-3)
    v = true_lkc_scale_space(ScaleSpaceSpec(50, 6.0, 6.0)).lkc
    np.testing.assert_allclose(v, [49 / (math.sqrt(2) * 6), 0.0], rtol=1e-14, atol=1e-15)
    v = true_lkc_scale_space(ScaleSpaceSpec(1, 4.0, 15.0)).lkc
    np.testing.assert_allclose(v, [math.log(15 / 4) / math.sqrt(2), 0.0], atol=1e-15)


def test_specs_validate():
    with pytest.raises(ValueError):
        IsotropicSpec(10, 0.0)
    with pytest.raises(ValueError):
        IsotropicSpec(10, 1.0, "poisson")
    with pytest.raises(ValueError):
        ScaleSpaceSpec(gamma1=5.0, gamma2=4.0)


def test_scale_space_variance_and_smoothness():
    spec = ScaleSpaceSpec(n_t=64, n_gamma=8)
    s = simulate_scale_space(spec, 3000, substream(0, "test", "ss")).data
    assert s.shape == (3000, 64, 8)
    np.testing.assert_allclose(s[:, [5, 30, 60]][:, :, [0, 7]].var(axis=0), 1.0, atol=0.07)
    crossings = np.abs(np.diff(np.sign(s), axis=1)).sum(axis=1) / 2
    assert crossings[:, 7].mean() < crossings[:, 0].mean()


def test_noise_families_share_targets():
    a = true_lkc_isotropic(IsotropicSpec(50, 5.0, "gaussian")).lkc
    b = true_lkc_isotropic(IsotropicSpec(50, 5.0, "chisq3")).lkc
    np.testing.assert_array_equal(a, b)


def test_discretisation_gap_shrinks_with_nu():
    bias = []
    for nu in (2.0, 5.0):
        spec = IsotropicSpec(50, nu)
        s = simulate_isotropic(spec, 400, substream(0, "test", "gap", int(nu)))
        est = hpe_fields(s.data, None, 4, 2).mean(axis=0)
        bias.append(est[0] / true_lkc_isotropic(spec).lkc[0] - 1)
    assert abs(bias[1]) < abs(bias[0])
