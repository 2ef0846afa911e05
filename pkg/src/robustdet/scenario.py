"""Experimental world: steering vectors, clutter-plus-noise covariance,
mismatch geometry, SNR-to-amplitude mapping, and complex Gaussian sampling.

Conventions fixed here and relied on everywhere else:
- CN(0, C) is circular: real and imaginary parts independent, variance C/2
  each, so E[x x^H] = C.
- The clutter covariance has unit diagonal and the white noise power is a
  ratio against that; absolute scale drops out of every statistic in scope.
- "No signal" is an explicit flag (snr_db=None), never a float sentinel.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import linalg
from .errors import NumericalInconsistency, ZeroVector
from .linalg import HermitianPD

H0 = "h0"
H1 = "h1"

SCATTER_RTOL = 1e-10  # reconstruction tolerance for the Dataset invariant


@dataclass(frozen=True)
class Scenario:
    """Simulation world parameters.

    n: samples per vector; k: secondary vectors; fd: nominal normalized
    Doppler (cycles/sample); delta_f: Doppler mismatch of the actual signal
    (0 = matched); sigma_f: clutter spectral spread; noise_power: white noise
    power relative to the unit clutter diagonal; snr_db: signal-to-noise
    ratio in dB or None for no signal; hypothesis: "h0" or "h1".
    """

    n: int = 16
    k: int = 32
    fd: float = 0.08
    delta_f: float = 0.0
    sigma_f: float = 0.073
    noise_power: float = 0.1
    snr_db: float | None = None
    hypothesis: str = H0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"n must be at least 2, got {self.n}")
        if self.k < self.n:
            raise ValueError(f"k must be at least n={self.n}, got {self.k}")
        if self.sigma_f <= 0:
            raise ValueError("sigma_f must be positive")
        if self.noise_power <= 0:
            raise ValueError("noise_power must be positive")
        if self.hypothesis not in (H0, H1):
            raise ValueError(f"hypothesis must be '{H0}' or '{H1}', got {self.hypothesis!r}")
        if self.snr_db is not None and not np.isfinite(self.snr_db):
            raise ValueError("snr_db must be finite or None (no-signal flag)")

    def under_h0(self) -> "Scenario":
        """Copy of this scenario with the signal switched off."""
        return replace(self, hypothesis=H0, snr_db=None)

    def nominal_steering(self) -> np.ndarray:
        return time_steering_vector(self.n, self.fd)

    def actual_steering(self) -> np.ndarray:
        return time_steering_vector(self.n, self.fd + self.delta_f)

    def covariance(self) -> HermitianPD:
        return clutter_covariance(self.n, self.sigma_f, self.noise_power)


@dataclass(frozen=True)
class Dataset:
    """One trial's data: cell under test, secondaries, and their scatter.

    scatter is the factorized sum of outer products of the secondary columns;
    the reconstruction is verified at construction.
    """

    z: np.ndarray
    secondaries: np.ndarray  # (n, k) columns
    scatter: HermitianPD
    truth: Scenario

    def __post_init__(self):
        rebuilt = self.secondaries @ self.secondaries.conj().T
        scale = max(float(np.abs(rebuilt).max()), 1.0)
        err = float(np.abs(self.scatter.matrix - rebuilt).max())
        if err > SCATTER_RTOL * scale:
            raise NumericalInconsistency(
                f"scatter does not match secondaries: max deviation {err:.3e}"
            )


def time_steering_vector(n: int, fd: float) -> np.ndarray:
    """Temporal steering vector [1, e^{i2pi fd}, ..., e^{i2pi(n-1) fd}]."""
    if n < 2:
        raise ValueError(f"n must be at least 2, got {n}")
    return np.exp(2j * np.pi * fd * np.arange(n))


def clutter_covariance(n: int, sigma_f: float, noise_power: float) -> HermitianPD:
    """Gaussian-shaped clutter covariance plus white noise.

    Entry (m1, m2) of the clutter part is exp(-2 pi^2 sigma_f^2 (m1-m2)^2)
    (unit diagonal); noise adds noise_power on the diagonal.
    """
    if n < 2:
        raise ValueError(f"n must be at least 2, got {n}")
    if sigma_f <= 0 or noise_power <= 0:
        raise ValueError("sigma_f and noise_power must be positive")
    lags = np.arange(n)
    diff = lags[:, None] - lags[None, :]
    clutter = np.exp(-2.0 * np.pi**2 * sigma_f**2 * diff.astype(float) ** 2)
    return linalg.factorize(clutter + noise_power * np.eye(n))


def cos_squared_theta(p, v, cov: HermitianPD) -> float:
    """Squared whitened-space cosine between actual and nominal steering.

    1 means perfectly matched, 0 means the signal is invisible to the
    nominal steering after whitening.
    """
    pp = cov.quad_form(p, p)
    vv = cov.quad_form(v, v)
    if pp <= 0 or vv <= 0:
        raise ZeroVector("steering vectors must be nonzero")
    pv = cov.quad_form(p, v)
    val = abs(pv) ** 2 / (pp * vv)
    if val > 1.0 + 1e-10:
        raise NumericalInconsistency(f"cos^2 above 1: {val}")
    return float(min(max(val, 0.0), 1.0))


def amplitude_from_snr(snr_db: float | None, p, cov: HermitianPD, phase: float = 0.0) -> complex:
    """Deterministic amplitude alpha with |alpha|^2 p^H C^-1 p = 10^(snr_db/10).

    None (the no-signal flag) maps to 0. Phase defaults to 0; performance
    depends on alpha only through its modulus.
    """
    if snr_db is None:
        return 0j
    pp = cov.quad_form(p, p)
    if pp <= 0:
        raise ZeroVector("steering vector must be nonzero")
    mag = np.sqrt(10.0 ** (snr_db / 10.0) / pp)
    return complex(mag * np.exp(1j * phase))


def signal_mean(scenario: Scenario, cov: HermitianPD | None = None) -> np.ndarray:
    """Deterministic CUT mean alpha * p; the zero vector under h0 or no signal."""
    if scenario.hypothesis != H1 or scenario.snr_db is None:
        return np.zeros(scenario.n, dtype=complex)
    if cov is None:
        cov = scenario.covariance()
    p = scenario.actual_steering()
    return amplitude_from_snr(scenario.snr_db, p, cov) * p


def sample_dataset(
    scenario: Scenario,
    seed: int,
    cov: HermitianPD | None = None,
    mean: np.ndarray | None = None,
) -> Dataset:
    """Draw one trial: CUT plus K secondaries, i.i.d. CN(0, C) noise.

    Under h1 the deterministic mean alpha*p (actual steering, mismatched when
    delta_f != 0) is added to the CUT only. The standard normal pairs behind
    each complex entry are drawn interleaved (real, imaginary), CUT column
    first, so results are bit-reproducible given the seed. A prefactorized
    covariance and a precomputed mean may be supplied to skip rebuilding them;
    they must match the scenario.
    """
    if cov is None:
        cov = scenario.covariance()
    if mean is None:
        mean = signal_mean(scenario, cov)
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((scenario.n, scenario.k + 1, 2))
    noise = cov.factor @ (g.view(np.complex128)[:, :, 0] * np.sqrt(0.5))
    z = noise[:, 0] + mean
    secondaries = noise[:, 1:]
    scatter = linalg.factorize(secondaries @ secondaries.conj().T)
    return Dataset(z=z, secondaries=secondaries, scatter=scatter, truth=scenario)
