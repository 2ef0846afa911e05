"""Reference laws of the sufficient pair under the null hypothesis, and the
noncentrality bookkeeping that characterizes the signal-present case.

These are verification aids: goodness-of-fit targets for (t_tilde, b) and
the (SNR, cos^2 theta) sufficiency record. Signal-present performance itself
is estimated by Monte Carlo elsewhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import betaln

from .errors import DomainError


@dataclass(frozen=True)
class NoncentralityParams:
    """delta_sq: noncentrality of the detection statistic conditional on b;
    delta_b_sq: noncentrality of b itself. Both nonnegative."""

    delta_sq: float
    delta_b_sq: float


def central_f_tail(y, k: int, n: int):
    """Null tail probability of t_tilde: (1+y)^-(K-N+1) for y >= 0, else 1."""
    if k < n:
        raise DomainError("k must be at least n")
    arr = np.asarray(y, dtype=float)
    out = np.where(arr < 0.0, 1.0, (1.0 + np.maximum(arr, 0.0)) ** (-(k - n + 1)))
    if np.isscalar(y) or arr.ndim == 0:
        return float(out)
    return out


def central_beta_pdf(x, k: int, n: int):
    """Null density of b: x^(K-N+1) (1-x)^(N-2) / B(K+2-N, N-1) on [0, 1]."""
    if n < 2 or k < n:
        raise DomainError("need k >= n >= 2")
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError("density argument outside [0, 1]")
    log_norm = betaln(k + 2 - n, n - 1)
    log_pdf = (k - n + 1) * np.log(arr, where=arr > 0, out=np.full_like(arr, -np.inf))
    # the (1-x) factor has exponent n-2; skip it entirely when that is zero so
    # x = 1 yields the finite endpoint density instead of a 0 * -inf artifact
    if n > 2:
        log_pdf = log_pdf + (n - 2) * np.log1p(
            -arr, where=arr < 1, out=np.full_like(arr, -np.inf)
        )
    out = np.exp(log_pdf - log_norm)
    if np.isscalar(x) or arr.ndim == 0:
        return float(out)
    return out


def noncentrality(snr_linear: float, cos2: float, b: float) -> NoncentralityParams:
    """Noncentrality pair (SNR * b * cos^2, SNR * (1 - cos^2))."""
    if snr_linear < 0:
        raise DomainError("snr_linear must be nonnegative")
    if not 0.0 <= cos2 <= 1.0:
        raise DomainError("cos2 must lie in [0, 1]")
    if not 0.0 <= b <= 1.0:
        raise DomainError("b must lie in [0, 1]")
    return NoncentralityParams(
        delta_sq=snr_linear * b * cos2,
        delta_b_sq=snr_linear * (1.0 - cos2),
    )
