"""Seeded, partition-independent Monte Carlo trial engine.

Trial i of stream s draws its data from a generator seeded by a stable hash
of (master_seed, s, i), so the same trial produces the same numbers no
matter which worker runs it or how trials are chunked. Within a trial every
detector sees the same dataset (common random numbers), which is what makes
paired detector comparisons sharp.
"""

from __future__ import annotations

import hashlib
import math
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .detectors import DetectorSpec, evaluate_all
from .formatting import csv_float
from .scenario import H1, Scenario, sample_dataset, signal_mean

MASK64 = (1 << 64) - 1

# Stream identifiers keep independent uses of one master seed uncorrelated.
STREAM_CALIBRATION = 0
STREAM_ESTIMATE = 1
STREAM_PD_BASE = 16  # pd grid point i uses STREAM_PD_BASE + i

PD_CURVE_HEADER = "snr_db,detector,pd,stderr,trials,cos2theta,pfa"


def trial_seed(master_seed: int, stream: int, index: int) -> int:
    """Stable 64-bit per-trial seed; a pure function of its identifiers."""
    payload = struct.pack(
        "<QQQ", master_seed & MASK64, stream & MASK64, index & MASK64
    )
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little")


@dataclass(frozen=True)
class TrialPlan:
    """How many trials to run, under which master seed, across how many workers."""

    master_seed: int
    trials: int
    workers: int = 1

    def __post_init__(self):
        if not 0 <= self.master_seed <= MASK64:
            raise ValueError("master_seed must fit in 64 bits")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")


@dataclass(frozen=True)
class CurvePoint:
    """One detector's detection-rate estimate at one grid point."""

    snr_db: float | None
    detector: str
    pd_estimate: float
    stderr: float
    trials: int


def _simulate_range(specs, scn: Scenario, master_seed: int, stream: int, start: int, count: int) -> np.ndarray:
    cov = scn.covariance()
    v = scn.nominal_steering()
    mean = signal_mean(scn, cov)
    out = np.empty((len(specs), count))
    for j in range(count):
        ds = sample_dataset(scn, trial_seed(master_seed, stream, start + j), cov=cov, mean=mean)
        out[:, j] = evaluate_all(specs, ds.z, ds.scatter, v, scn.k)
    return out


def simulate_statistics(specs, scn: Scenario, plan: TrialPlan, stream: int) -> np.ndarray:
    """Statistics array of shape (len(specs), plan.trials).

    Column i belongs to trial i regardless of worker count: chunks are
    contiguous index ranges merged back in order.
    """
    specs = list(specs)
    if plan.workers <= 1 or plan.trials < 2:
        return _simulate_range(specs, scn, plan.master_seed, stream, 0, plan.trials)
    bounds = np.linspace(0, plan.trials, plan.workers + 1).astype(int)
    with ProcessPoolExecutor(max_workers=plan.workers) as pool:
        futures = [
            pool.submit(
                _simulate_range, specs, scn, plan.master_seed, stream, int(s), int(e - s)
            )
            for s, e in zip(bounds[:-1], bounds[1:])
            if e > s
        ]
        parts = [f.result() for f in futures]
    return np.concatenate(parts, axis=1)


def _point_from_stats(stats: np.ndarray, spec: DetectorSpec, eta: float, snr_db) -> CurvePoint:
    trials = int(stats.shape[0])
    hits = int(np.count_nonzero(stats > eta))
    p = hits / trials
    return CurvePoint(
        snr_db=snr_db,
        detector=spec.label,
        pd_estimate=p,
        stderr=math.sqrt(p * (1.0 - p) / trials),
        trials=trials,
    )


def estimate_rate(
    spec: DetectorSpec,
    eta: float,
    scn: Scenario,
    plan: TrialPlan,
    stream: int = STREAM_ESTIMATE,
) -> CurvePoint:
    """Fraction of trials whose statistic strictly exceeds eta, with
    binomial standard error. Bit-reproducible given the plan."""
    stats = simulate_statistics([spec], scn, plan, stream)[0]
    return _point_from_stats(stats, spec, eta, scn.snr_db)


def pd_curve(
    specs,
    snr_grid_db,
    scn: Scenario,
    pfa: float,
    plan: TrialPlan,
    thresholds=None,
    threshold_trials: int | None = None,
    calibration_seed: int | None = None,
) -> list[CurvePoint]:
    """Detection-rate table over an SNR grid at a common target false-alarm rate.

    Thresholds may be supplied (one per spec, matching order); otherwise they
    are computed here: closed form for the epsilon family, Monte Carlo for the
    rest on a dedicated seed stream. Every detector is evaluated on the same
    per-trial dataset.
    """
    specs = list(specs)
    if thresholds is None:
        from . import calibration

        seed = plan.master_seed if calibration_seed is None else calibration_seed
        results = calibration.calibrate_specs(
            specs, scn, pfa, seed=seed, workers=plan.workers, mc_trials=threshold_trials
        )
        thresholds = [r.threshold for r in results]
    thresholds = [float(t) for t in thresholds]
    if len(thresholds) != len(specs):
        raise ValueError("need exactly one threshold per detector spec")
    points = []
    for si, snr in enumerate(snr_grid_db):
        point_scn = replace(scn, hypothesis=H1, snr_db=float(snr))
        stats = simulate_statistics(specs, point_scn, plan, STREAM_PD_BASE + si)
        for idx, spec in enumerate(specs):
            points.append(_point_from_stats(stats[idx], spec, thresholds[idx], float(snr)))
    return points


def pd_curve_csv(points, cos2theta: float, pfa: float) -> str:
    """CSV text for a pd_curve result, stamped with the run's mismatch and pfa."""
    lines = [PD_CURVE_HEADER]
    for pt in points:
        lines.append(
            ",".join(
                [
                    csv_float(pt.snr_db if pt.snr_db is not None else float("nan")),
                    pt.detector,
                    csv_float(pt.pd_estimate),
                    csv_float(pt.stderr),
                    str(pt.trials),
                    csv_float(cos2theta),
                    csv_float(pfa),
                ]
            )
        )
    return "\n".join(lines) + "\n"
