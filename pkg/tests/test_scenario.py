import numpy as np
import numpy.testing as npt
import pytest

from robustdet import linalg, scenario
from robustdet.errors import NumericalInconsistency
from robustdet.scenario import (
    H0,
    H1,
    Dataset,
    Scenario,
    amplitude_from_snr,
    clutter_covariance,
    cos_squared_theta,
    sample_dataset,
    signal_mean,
    time_steering_vector,
)

# reference values from an independent explicit-inverse computation
ONE_LAG = 0.9001532578032967
COS2_AT_QUARTER_BIN = 0.831947750685114   # delta_f = 0.2/16, moderate mismatch
COS2_AT_HALF_BIN = 0.462505538601369      # delta_f = 0.4/16, strong mismatch


def test_steering_quarter_cycle_exact():
    v = time_steering_vector(4, 0.25)
    npt.assert_allclose(v, [1, 1j, -1, -1j], atol=1e-14)


def test_steering_first_entry_and_modulus():
    v = time_steering_vector(9, 0.123)
    assert v[0] == 1.0 + 0.0j
    npt.assert_allclose(np.abs(v), 1.0, rtol=1e-14)


def test_covariance_structure():
    cov = clutter_covariance(16, 0.073, 0.1)
    m = cov.matrix
    npt.assert_allclose(np.diagonal(m).real, 1.1, rtol=1e-14)
    npt.assert_allclose(m[0, 1].real, ONE_LAG, rtol=1e-14)
    # Toeplitz in the lag and Hermitian
    for lag in range(1, 5):
        col = np.diagonal(m, offset=lag)
        npt.assert_allclose(col, col[0], rtol=1e-14)
    npt.assert_allclose(m, m.conj().T, rtol=1e-14)


def test_covariance_noise_floor_dominates_far_lags():
    cov = clutter_covariance(16, 0.073, 0.1)
    # gaussian correlation at lag 15 is ~5e-11, far below the 0.1 noise floor
    assert abs(cov.matrix[0, 15]) < 1e-9


def test_cos2_is_one_when_matched():
    scn = Scenario()
    cov = scn.covariance()
    v = scn.nominal_steering()
    npt.assert_allclose(cos_squared_theta(v, v, cov), 1.0, rtol=1e-12)


def test_cos2_frozen_mismatch_values():
    scn = Scenario(n=16, fd=0.08)
    cov = scn.covariance()
    v = scn.nominal_steering()
    got_quarter = cos_squared_theta(time_steering_vector(16, 0.08 + 0.2 / 16), v, cov)
    got_half = cos_squared_theta(time_steering_vector(16, 0.08 + 0.4 / 16), v, cov)
    npt.assert_allclose(got_quarter, COS2_AT_QUARTER_BIN, rtol=1e-12)
    npt.assert_allclose(got_half, COS2_AT_HALF_BIN, rtol=1e-12)


def test_cos2_matches_explicit_inverse(rng):
    for _ in range(10):
        n = int(rng.integers(3, 10))
        a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        m = a @ a.conj().T + n * np.eye(n)
        cov = linalg.factorize(m)
        p = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        mi = np.linalg.inv(m)
        want = abs(np.conj(p) @ mi @ v) ** 2 / (
            (np.conj(p) @ mi @ p).real * (np.conj(v) @ mi @ v).real
        )
        npt.assert_allclose(cos_squared_theta(p, v, cov), want, rtol=1e-10)


def test_amplitude_from_snr_energy():
    scn = Scenario(n=8)
    cov = scn.covariance()
    p = scn.nominal_steering()
    for snr_db in (0.0, 10.0, 17.5):
        alpha = amplitude_from_snr(snr_db, p, cov)
        energy = abs(alpha) ** 2 * cov.quad_form(p, p)
        npt.assert_allclose(energy, 10 ** (snr_db / 10), rtol=1e-12)
    assert amplitude_from_snr(None, p, cov) == 0j


def test_amplitude_phase():
    scn = Scenario(n=8)
    cov = scn.covariance()
    p = scn.nominal_steering()
    alpha = amplitude_from_snr(6.0, p, cov, phase=np.pi / 3)
    npt.assert_allclose(np.angle(alpha), np.pi / 3, rtol=1e-12)


def test_signal_mean_cases():
    h0 = Scenario(n=8, hypothesis=H0, snr_db=None)
    npt.assert_array_equal(signal_mean(h0), np.zeros(8, dtype=complex))
    no_snr = Scenario(n=8, hypothesis=H1, snr_db=None)
    npt.assert_array_equal(signal_mean(no_snr), np.zeros(8, dtype=complex))
    h1 = Scenario(n=8, hypothesis=H1, snr_db=12.0, delta_f=0.01)
    cov = h1.covariance()
    mean = signal_mean(h1, cov)
    p = h1.actual_steering()
    alpha = amplitude_from_snr(12.0, p, cov)
    npt.assert_allclose(mean, alpha * p, rtol=1e-12)


def test_sample_dataset_shapes_and_reproducibility():
    scn = Scenario(n=8, k=16)
    d1 = sample_dataset(scn, seed=314)
    d2 = sample_dataset(scn, seed=314)
    d3 = sample_dataset(scn, seed=315)
    assert d1.z.shape == (8,)
    assert d1.secondaries.shape == (8, 16)
    assert d1.truth == scn
    npt.assert_array_equal(d1.z, d2.z)
    npt.assert_array_equal(d1.secondaries, d2.secondaries)
    assert not np.array_equal(d1.z, d3.z)


def test_sample_dataset_scatter_is_outer_product_sum():
    d = sample_dataset(Scenario(n=6, k=12), seed=99)
    npt.assert_allclose(
        d.scatter.matrix, d.secondaries @ d.secondaries.conj().T, rtol=1e-12
    )


def test_sample_covariance_converges_to_model():
    scn = Scenario(n=4, k=4)
    cov = scn.covariance()
    trials = 3000
    acc = np.zeros((4, 4), dtype=complex)
    for i in range(trials):
        d = sample_dataset(scn, seed=i, cov=cov)
        acc += d.secondaries @ d.secondaries.conj().T
    sample = acc / (trials * scn.k)
    err = np.abs(sample - cov.matrix).max() / np.abs(cov.matrix).max()
    assert err < 0.05


def test_sample_mean_under_h1():
    scn = Scenario(n=4, k=4, hypothesis=H1, snr_db=15.0)
    cov = scn.covariance()
    mean = signal_mean(scn, cov)
    trials = 3000
    acc = np.zeros(4, dtype=complex)
    for i in range(trials):
        acc += sample_dataset(scn, seed=i, cov=cov).z
    est = acc / trials
    # per-component std is about sqrt(1.1/trials) ~ 0.02
    assert np.abs(est - mean).max() < 0.08


def test_dataset_rejects_tampered_scatter():
    d = sample_dataset(Scenario(n=4, k=8), seed=5)
    wrong = linalg.factorize(np.eye(4))
    with pytest.raises(NumericalInconsistency):
        Dataset(z=d.z, secondaries=d.secondaries, scatter=wrong, truth=d.truth)


def test_scenario_validation():
    with pytest.raises(ValueError):
        Scenario(n=1, k=4)
    with pytest.raises(ValueError):
        Scenario(n=8, k=7)
    with pytest.raises(ValueError):
        Scenario(sigma_f=0.0)
    with pytest.raises(ValueError):
        Scenario(noise_power=-0.1)
    with pytest.raises(ValueError):
        Scenario(hypothesis="h2")
    with pytest.raises(ValueError):
        Scenario(snr_db=float("inf"))


def test_under_h0_strips_signal():
    scn = Scenario(hypothesis=H1, snr_db=10.0)
    h0 = scn.under_h0()
    assert h0.hypothesis == H0
    assert h0.snr_db is None
    assert h0.n == scn.n and h0.k == scn.k
