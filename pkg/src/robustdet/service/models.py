"""Request/response schemas for the HTTP service.

Complex data crosses the wire as parallel re/im float arrays. Detector
declarations mirror the INI config sections so the CLI can forward a parsed
config without translation.
"""

from __future__ import annotations

from typing import Literal

import numpy as np
from pydantic import BaseModel, Field, model_validator

from ..config import DetectorConfig
from ..scenario import Scenario


class ComplexVector(BaseModel):
    re: list[float] = Field(min_length=1)
    im: list[float] = Field(min_length=1)

    @model_validator(mode="after")
    def _matched_lengths(self):
        if len(self.re) != len(self.im):
            raise ValueError("re and im must have the same length")
        return self

    def to_array(self) -> np.ndarray:
        return np.asarray(self.re, dtype=float) + 1j * np.asarray(self.im, dtype=float)

    @classmethod
    def from_array(cls, arr) -> "ComplexVector":
        arr = np.asarray(arr, dtype=complex)
        return cls(re=arr.real.tolist(), im=arr.imag.tolist())


class ComplexMatrix(BaseModel):
    re: list[list[float]] = Field(min_length=1)
    im: list[list[float]] = Field(min_length=1)

    @model_validator(mode="after")
    def _rectangular(self):
        width = len(self.re[0])
        for part in (self.re, self.im):
            if any(len(row) != width for row in part):
                raise ValueError("rows must all have the same length")
        if len(self.re) != len(self.im) or width != len(self.im[0]):
            raise ValueError("re and im must have the same shape")
        if width == 0:
            raise ValueError("matrix must have at least one column")
        return self

    def to_array(self) -> np.ndarray:
        return np.asarray(self.re, dtype=float) + 1j * np.asarray(self.im, dtype=float)


class ScenarioModel(BaseModel):
    n: int = Field(16, ge=2)
    k: int = Field(32, ge=2)
    fd: float = 0.08
    delta_f: float = 0.0
    sigma_f: float = Field(0.073, gt=0)
    noise_power: float = Field(0.1, gt=0)
    snr_db: float | None = None
    hypothesis: Literal["h0", "h1"] = "h0"

    @model_validator(mode="after")
    def _k_covers_n(self):
        if self.k < self.n:
            raise ValueError(f"k must be at least n={self.n}, got {self.k}")
        return self

    def to_scenario(self) -> Scenario:
        return Scenario(
            n=self.n,
            k=self.k,
            fd=self.fd,
            delta_f=self.delta_f,
            sigma_f=self.sigma_f,
            noise_power=self.noise_power,
            snr_db=self.snr_db,
            hypothesis=self.hypothesis,
        )


class DetectorModel(BaseModel):
    kind: Literal["kelly", "amf", "sigma_c", "parametric_epsilon", "rank_one_glrt"]
    name: str | None = None
    epsilon: float = Field(0.0, ge=0)
    u_delta_f: float | None = None
    b_max: float = Field(1e3, gt=0)
    n_b: int = Field(60, ge=2)
    n_t: int = Field(41, ge=2)
    refine: bool = True

    def to_config(self) -> DetectorConfig:
        return DetectorConfig(
            kind=self.kind,
            name=self.name,
            epsilon=self.epsilon,
            u_delta_f=self.u_delta_f,
            b_max=self.b_max,
            n_b=self.n_b,
            n_t=self.n_t,
            refine=self.refine,
        )

    @classmethod
    def from_config(cls, cfg: DetectorConfig) -> "DetectorModel":
        return cls(
            kind=cfg.kind,
            name=cfg.name,
            epsilon=cfg.epsilon,
            u_delta_f=cfg.u_delta_f,
            b_max=cfg.b_max,
            n_b=cfg.n_b,
            n_t=cfg.n_t,
            refine=cfg.refine,
        )


# ---- requests -------------------------------------------------------------


class ScenarioInfoRequest(BaseModel):
    scenario: ScenarioModel = ScenarioModel()
    epsilons: list[float] = Field(default=[0.0, 0.1, 0.2])


class CalibrateRequest(BaseModel):
    scenario: ScenarioModel = ScenarioModel()
    detectors: list[DetectorModel] = Field(min_length=1)
    pfa: float = Field(gt=0, lt=1)
    seed: int = Field(0, ge=0)
    workers: int = Field(1, ge=1)
    threshold_trials: int | None = Field(None, ge=1)


class PfaCurveRequest(BaseModel):
    scenario: ScenarioModel = ScenarioModel()
    eta_min: float = Field(1.0, gt=0)
    eta_max: float = 3.0
    eta_count: int = Field(200, ge=2)
    epsilons: list[float] = Field(default=[0.0, 0.1, 0.2], min_length=1)

    @model_validator(mode="after")
    def _ordered(self):
        if self.eta_max <= self.eta_min:
            raise ValueError("eta_max must exceed eta_min")
        if any(e < 0 for e in self.epsilons):
            raise ValueError("epsilons must be >= 0")
        return self


class PdCurveRequest(BaseModel):
    scenario: ScenarioModel = ScenarioModel()
    detectors: list[DetectorModel] = Field(min_length=1)
    pfa: float = Field(gt=0, lt=1)
    snr_grid_db: list[float] = Field(min_length=1)
    seed: int = Field(0, ge=0)
    workers: int = Field(1, ge=1)
    pd_trials: int = Field(4000, ge=1)
    threshold_trials: int | None = Field(None, ge=1)


class VerifyRequest(BaseModel):
    scenario: ScenarioModel = ScenarioModel()
    seed: int = Field(0, ge=0)
    covariance: ComplexMatrix | None = None


class StatisticRequest(BaseModel):
    scenario: ScenarioModel = ScenarioModel()
    detectors: list[DetectorModel] = Field(min_length=1)
    z: ComplexVector
    secondaries: ComplexMatrix
    steering: ComplexVector | None = None


# ---- responses --------------------------------------------------------------


class HealthResponse(BaseModel):
    status: str
    version: str


class ScenarioInfoResponse(BaseModel):
    n: int
    k: int
    fd: float
    delta_f: float
    sigma_f: float
    noise_power: float
    snr_db: float | None
    hypothesis: str
    cos2_theta: float
    one_lag_clutter_correlation: float
    diagonal_power: float
    zeta_by_epsilon: dict[str, float]


class CalibrationRecordModel(BaseModel):
    detector: str
    kind: str
    epsilon: float
    target_pfa: float
    threshold: float
    method: str
    trials: int
    achieved_pfa_estimate: float


class CalibrateResponse(BaseModel):
    records: list[CalibrationRecordModel]


class PfaRowModel(BaseModel):
    eta: float
    pfa: float
    epsilon: float


class PfaCurveResponse(BaseModel):
    rows: list[PfaRowModel]
    csv: str


class PdPointModel(BaseModel):
    snr_db: float
    detector: str
    pd: float
    stderr: float
    trials: int


class PdCurveResponse(BaseModel):
    points: list[PdPointModel]
    thresholds: list[CalibrationRecordModel]
    cos2_theta: float
    pfa: float
    csv: str


class CheckModel(BaseModel):
    name: str
    passed: bool
    detail: str


class VerifyResponse(BaseModel):
    passed: bool
    checks: list[CheckModel]


class StatisticValueModel(BaseModel):
    detector: str
    statistic: float


class StatisticResponse(BaseModel):
    values: list[StatisticValueModel]
