"""Threshold calibration.

The false-alarm probability of the epsilon-family statistic has a closed
form: a three-piece incomplete-beta expression obtained by conditioning on
the beta-distributed companion scalar b. This module implements that law,
its inversion to a threshold, and order-statistic Monte Carlo calibration
for detectors without a closed form. All factorial-scale constants are kept
in log-gamma form.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.integrate import quad
from scipy.special import betainc, betaln, gammaln

from .detectors import DetectorKind, DetectorSpec, zeta_shape
from .errors import (
    DomainError,
    InsufficientTrials,
    NonMonotoneDetected,
    RootBracketFailure,
)
from .formatting import csv_float
from .scenario import Scenario

X_BAR_TOL = 1e-12      # absolute bisection tolerance on the inner root
THRESHOLD_RTOL = 1e-3  # relative tolerance on pfa when inverting to a threshold
BRACKET_CAP = 1e15     # threshold bracket expansion limit

PFA_CURVE_HEADER = "eta,pfa,epsilon,k,n"


class CalibrationMethod(str, Enum):
    CLOSED_FORM = "closed_form"
    MONTE_CARLO = "monte_carlo"


@dataclass(frozen=True)
class CalibrationResult:
    """Threshold for one detector at one target false-alarm rate."""

    detector: DetectorSpec
    target_pfa: float
    threshold: float
    method: CalibrationMethod
    trials: int  # 0 for the closed form
    achieved_pfa_estimate: float


def incomplete_beta(u: float, nu: float, mu: float) -> float:
    """Non-regularized incomplete beta integral of t^(nu-1)(1-t)^(mu-1) over [0, u]."""
    if not 0.0 <= u <= 1.0:
        raise DomainError(f"u must lie in [0, 1], got {u}")
    if nu <= 0.0 or mu <= 0.0:
        raise DomainError(f"shape parameters must be positive, got nu={nu}, mu={mu}")
    return float(betainc(nu, mu, u) * math.exp(betaln(nu, mu)))


def y_epsilon(x: float, eta: float, k: int, n: int, epsilon: float) -> float:
    """Threshold curve in the b domain.

    Increasing on (0, 1 - 1/zeta) with limit -1 at 0+ and value eta - 1 at
    the right end; its zero crossing x_bar splits the integration regions of
    the closed-form false-alarm law.
    """
    if not 0.0 < x < 1.0:
        raise DomainError(f"x must lie in (0, 1), got {x}")
    zeta = zeta_shape(k, n, epsilon)
    return (
        eta
        * x
        * ((zeta - 1.0) * (1.0 - x) / x) ** (1.0 / zeta)
        * zeta
        / (zeta - 1.0)
        - 1.0
    )


def x_bar(eta: float, k: int, n: int, epsilon: float) -> float:
    """Unique root of y_epsilon in (0, 1 - 1/zeta); requires eta > 1."""
    zeta = zeta_shape(k, n, epsilon)
    lo = 1e-300
    hi = 1.0 - 1.0 / zeta
    if not y_epsilon(lo, eta, k, n, epsilon) < 0.0:
        raise RootBracketFailure("y_epsilon not negative near 0")
    if not y_epsilon(hi, eta, k, n, epsilon) > 0.0:
        raise RootBracketFailure(
            f"y_epsilon({hi}) = {y_epsilon(hi, eta, k, n, epsilon)} not positive; eta must exceed 1"
        )
    while hi - lo > X_BAR_TOL:
        mid = 0.5 * (lo + hi)
        if y_epsilon(mid, eta, k, n, epsilon) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def pfa_closed_form(eta: float, k: int, n: int, epsilon: float) -> float:
    """False-alarm probability of the epsilon-family statistic at threshold eta.

    1 for eta <= 1. For eta > 1 the law splits at x_bar and at 1 - 1/zeta:
    certain exceedance below x_bar, a power-law tail segment in the middle,
    and a constant tail above. The middle segment is an incomplete-beta
    difference when its second shape parameter is positive and a direct
    quadrature otherwise (possible only when N^2 <= K+1).
    """
    if n < 2 or k < n:
        raise DomainError(f"need k >= n >= 2, got k={k}, n={n}")
    zeta = zeta_shape(k, n, epsilon)
    if eta <= 1.0:
        return 1.0
    knp = k + 1 - n
    xb = x_bar(eta, k, n, epsilon)
    x_hi = 1.0 - 1.0 / zeta
    term1 = float(betainc(k - n + 2, n - 1, xb))
    term3 = math.exp(-knp * math.log(eta)) * float(1.0 - betainc(k - n + 2, n - 1, x_hi))
    log_a = knp * math.log((zeta - 1.0) / zeta) - (knp / zeta) * math.log(zeta - 1.0)
    log_c = gammaln(k + 1) - gammaln(k + 2 - n) - gammaln(n - 1)
    nu2 = knp / zeta + 1.0
    mu2 = (n - 1.0) - knp / zeta
    if mu2 > 0.0:
        diff = float(betainc(nu2, mu2, x_hi) - betainc(nu2, mu2, xb))
        term2 = math.exp(log_a + log_c + betaln(nu2, mu2) - knp * math.log(eta)) * max(diff, 0.0)
    else:
        integral, _ = quad(
            lambda s: s ** (nu2 - 1.0) * (1.0 - s) ** (mu2 - 1.0), xb, x_hi, limit=200
        )
        term2 = math.exp(log_a + log_c - knp * math.log(eta)) * max(integral, 0.0)
    return float(min(max(term1 + term2 + term3, 0.0), 1.0))


def threshold_from_pfa(pfa: float, k: int, n: int, epsilon: float) -> float:
    """Invert pfa_closed_form: eta with relative pfa error at most 1e-3.

    Bisection on an adaptively expanded bracket above 1; monotonicity is
    checked as the bracket grows.
    """
    if pfa <= 0.0:
        raise DomainError(f"pfa must be positive, got {pfa}")
    if pfa >= 1.0:
        return 1.0
    lo, p_lo = 1.0, 1.0
    hi = 2.0
    p_hi = pfa_closed_form(hi, k, n, epsilon)
    while p_hi > pfa:
        if p_hi > p_lo + 1e-12:
            raise NonMonotoneDetected(
                f"pfa rose from {p_lo} at eta={lo} to {p_hi} at eta={hi}"
            )
        lo, p_lo = hi, p_hi
        hi *= 2.0
        if hi > BRACKET_CAP:
            raise NonMonotoneDetected(f"no bracket below eta={BRACKET_CAP:g}")
        p_hi = pfa_closed_form(hi, k, n, epsilon)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        p_mid = pfa_closed_form(mid, k, n, epsilon)
        if abs(p_mid - pfa) <= THRESHOLD_RTOL * pfa:
            return mid
        if p_mid > pfa:
            lo = mid
        else:
            hi = mid
    raise NonMonotoneDetected("threshold bisection failed to converge")


def threshold_monte_carlo(
    spec: DetectorSpec,
    scenario: Scenario,
    pfa: float,
    seed: int,
    trials: int | None = None,
    workers: int = 1,
) -> CalibrationResult:
    """Order-statistic threshold from seeded null-hypothesis trials.

    The threshold is the ceil(trials * pfa)-th largest statistic over
    trials = round(100 / pfa) draws by default (the 100-expected-exceedances
    protocol); fewer trials trigger an InsufficientTrials warning.
    Deterministic given the seed, independent of worker partitioning.
    """
    from . import montecarlo

    if pfa >= 1.0:
        return CalibrationResult(
            detector=spec,
            target_pfa=pfa,
            threshold=float("-inf"),
            method=CalibrationMethod.MONTE_CARLO,
            trials=0,
            achieved_pfa_estimate=1.0,
        )
    if pfa <= 0.0:
        raise DomainError(f"pfa must be positive, got {pfa}")
    if trials is None:
        trials = round(100.0 / pfa)
    if trials * pfa < 100.0 - 1e-9:
        warnings.warn(
            InsufficientTrials(
                f"{trials} trials give only {trials * pfa:.1f} expected exceedances; "
                "the calibration protocol wants at least 100"
            )
        )
    plan = montecarlo.TrialPlan(master_seed=seed, trials=trials, workers=workers)
    stats = montecarlo.simulate_statistics(
        [spec], scenario.under_h0(), plan, stream=montecarlo.STREAM_CALIBRATION
    )[0]
    k_ord = max(math.ceil(trials * pfa - 1e-9), 1)
    threshold = float(np.partition(stats, trials - k_ord)[trials - k_ord])
    achieved = float(np.count_nonzero(stats > threshold)) / trials
    return CalibrationResult(
        detector=spec,
        target_pfa=pfa,
        threshold=threshold,
        method=CalibrationMethod.MONTE_CARLO,
        trials=trials,
        achieved_pfa_estimate=achieved,
    )


def calibrate_specs(
    specs,
    scenario: Scenario,
    pfa: float,
    seed: int,
    workers: int = 1,
    mc_trials: int | None = None,
) -> list[CalibrationResult]:
    """One CalibrationResult per spec: closed form for the epsilon family,
    Monte Carlo for everything else."""
    results = []
    for spec in specs:
        if spec.kind in (DetectorKind.SIGMA_C, DetectorKind.PARAMETRIC_EPSILON):
            eps = spec.epsilon if spec.kind is DetectorKind.PARAMETRIC_EPSILON else 0.0
            eta = threshold_from_pfa(pfa, scenario.k, scenario.n, eps)
            results.append(
                CalibrationResult(
                    detector=spec,
                    target_pfa=pfa,
                    threshold=eta,
                    method=CalibrationMethod.CLOSED_FORM,
                    trials=0,
                    achieved_pfa_estimate=pfa_closed_form(eta, scenario.k, scenario.n, eps),
                )
            )
        else:
            results.append(
                threshold_monte_carlo(
                    spec, scenario, pfa, seed, trials=mc_trials, workers=workers
                )
            )
    return results


def pfa_curve_rows(eta_grid, k: int, n: int, epsilons) -> list[tuple[float, float, float]]:
    """(eta, pfa, epsilon) rows, epsilon-major; each epsilon block is verified
    non-increasing in eta before being returned."""
    etas = [float(e) for e in eta_grid]
    rows = []
    for eps in epsilons:
        pfas = [pfa_closed_form(eta, k, n, eps) for eta in etas]
        order = np.argsort(etas)
        sorted_pfas = np.asarray(pfas)[order]
        if np.any(np.diff(sorted_pfas) > 1e-12):
            raise NonMonotoneDetected(f"pfa curve for epsilon={eps} is not non-increasing")
        rows.extend((eta, p, float(eps)) for eta, p in zip(etas, pfas))
    return rows


def pfa_curve_csv(eta_grid, k: int, n: int, epsilons) -> str:
    """CSV text of the threshold-to-pfa curves."""
    lines = [PFA_CURVE_HEADER]
    for eta, p, eps in pfa_curve_rows(eta_grid, k, n, epsilons):
        lines.append(f"{csv_float(eta)},{csv_float(p)},{csv_float(eps)},{k},{n}")
    return "\n".join(lines) + "\n"
