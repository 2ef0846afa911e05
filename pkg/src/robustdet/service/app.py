"""FastAPI application exposing the detection toolkit.

Error taxonomy on the wire: pydantic schema violations return 422;
semantic parameter problems (ValueError) return 400 with kind "usage";
numerical failures from the core return 400 with kind "numerical".
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .. import __version__, calibration, detectors, linalg, montecarlo, scenario, verification
from ..config import build_spec
from ..errors import RobustDetError
from . import models


def _numerical_handler(request, exc: RobustDetError) -> JSONResponse:
    return JSONResponse(
        status_code=400,
        content={
            "detail": {
                "kind": "numerical",
                "error": type(exc).__name__,
                "message": str(exc),
            }
        },
    )


def _usage_handler(request, exc: ValueError) -> JSONResponse:
    return JSONResponse(
        status_code=400,
        content={
            "detail": {
                "kind": "usage",
                "error": type(exc).__name__,
                "message": str(exc),
            }
        },
    )


def _record_model(result: calibration.CalibrationResult) -> models.CalibrationRecordModel:
    spec = result.detector
    return models.CalibrationRecordModel(
        detector=spec.label,
        kind=spec.kind.value,
        epsilon=spec.epsilon,
        target_pfa=result.target_pfa,
        threshold=result.threshold,
        method=result.method.value,
        trials=result.trials,
        achieved_pfa_estimate=result.achieved_pfa_estimate,
    )


def create_app() -> FastAPI:
    app = FastAPI(title="robustdet service", version=__version__)
    app.add_exception_handler(RobustDetError, _numerical_handler)
    app.add_exception_handler(ValueError, _usage_handler)

    @app.get("/health", response_model=models.HealthResponse)
    def health() -> models.HealthResponse:
        return models.HealthResponse(status="ok", version=__version__)

    @app.post("/api/scenario-info", response_model=models.ScenarioInfoResponse)
    def scenario_info(req: models.ScenarioInfoRequest) -> models.ScenarioInfoResponse:
        scn = req.scenario.to_scenario()
        cov = scn.covariance()
        cos2 = scenario.cos_squared_theta(scn.actual_steering(), scn.nominal_steering(), cov)
        zetas: dict[str, float] = {}
        for eps in req.epsilons:
            try:
                zetas[f"{eps:g}"] = detectors.zeta_shape(scn.k, scn.n, eps)
            except RobustDetError:
                continue  # shape undefined for this epsilon; not an error here
        return models.ScenarioInfoResponse(
            n=scn.n,
            k=scn.k,
            fd=scn.fd,
            delta_f=scn.delta_f,
            sigma_f=scn.sigma_f,
            noise_power=scn.noise_power,
            snr_db=scn.snr_db,
            hypothesis=scn.hypothesis,
            cos2_theta=cos2,
            one_lag_clutter_correlation=float(cov.matrix[0, 1].real),
            diagonal_power=1.0 + scn.noise_power,
            zeta_by_epsilon=zetas,
        )

    @app.post("/api/calibrate", response_model=models.CalibrateResponse)
    def calibrate(req: models.CalibrateRequest) -> models.CalibrateResponse:
        scn = req.scenario.to_scenario()
        specs = [build_spec(d.to_config(), scn) for d in req.detectors]
        results = calibration.calibrate_specs(
            specs, scn, req.pfa, seed=req.seed,
            workers=req.workers, mc_trials=req.threshold_trials,
        )
        return models.CalibrateResponse(records=[_record_model(r) for r in results])

    @app.post("/api/pfa-curve", response_model=models.PfaCurveResponse)
    def pfa_curve(req: models.PfaCurveRequest) -> models.PfaCurveResponse:
        scn = req.scenario.to_scenario()
        grid = np.linspace(req.eta_min, req.eta_max, req.eta_count)
        rows = calibration.pfa_curve_rows(grid, scn.k, scn.n, req.epsilons)
        csv = calibration.pfa_curve_csv(grid, scn.k, scn.n, req.epsilons)
        return models.PfaCurveResponse(
            rows=[
                models.PfaRowModel(eta=eta, pfa=pfa, epsilon=eps)
                for eta, pfa, eps in rows
            ],
            csv=csv,
        )

    @app.post("/api/pd-curve", response_model=models.PdCurveResponse)
    def pd_curve(req: models.PdCurveRequest) -> models.PdCurveResponse:
        scn = req.scenario.to_scenario()
        specs = [build_spec(d.to_config(), scn) for d in req.detectors]
        results = calibration.calibrate_specs(
            specs, scn, req.pfa, seed=req.seed,
            workers=req.workers, mc_trials=req.threshold_trials,
        )
        plan = montecarlo.TrialPlan(
            master_seed=req.seed, trials=req.pd_trials, workers=req.workers
        )
        points = montecarlo.pd_curve(
            specs, req.snr_grid_db, scn, req.pfa, plan,
            thresholds=[r.threshold for r in results],
        )
        cov = scn.covariance()
        cos2 = scenario.cos_squared_theta(scn.actual_steering(), scn.nominal_steering(), cov)
        return models.PdCurveResponse(
            points=[
                models.PdPointModel(
                    snr_db=pt.snr_db,
                    detector=pt.detector,
                    pd=pt.pd_estimate,
                    stderr=pt.stderr,
                    trials=pt.trials,
                )
                for pt in points
            ],
            thresholds=[_record_model(r) for r in results],
            cos2_theta=cos2,
            pfa=req.pfa,
            csv=montecarlo.pd_curve_csv(points, cos2, req.pfa),
        )

    @app.post("/api/verify", response_model=models.VerifyResponse)
    def verify(req: models.VerifyRequest) -> models.VerifyResponse:
        scn = req.scenario.to_scenario()
        cov = req.covariance.to_array() if req.covariance is not None else None
        checks = verification.run_checks(scn, seed=req.seed, covariance=cov)
        return models.VerifyResponse(
            passed=all(c.passed for c in checks),
            checks=[
                models.CheckModel(name=c.name, passed=c.passed, detail=c.detail)
                for c in checks
            ],
        )

    @app.post("/api/statistic", response_model=models.StatisticResponse)
    def statistic(req: models.StatisticRequest) -> models.StatisticResponse:
        scn = req.scenario.to_scenario()
        z = req.z.to_array()
        secondaries = req.secondaries.to_array()
        if secondaries.shape[0] != z.shape[0]:
            raise ValueError(
                f"secondaries have {secondaries.shape[0]} rows but z has {z.shape[0]}"
            )
        if req.steering is not None:
            v = req.steering.to_array()
        else:
            if z.shape[0] != scn.n:
                raise ValueError(
                    f"z has length {z.shape[0]} but the scenario steering needs n={scn.n}"
                )
            v = scn.nominal_steering()
        k = secondaries.shape[1]
        scatter = linalg.factorize(secondaries @ secondaries.conj().T)
        specs = [build_spec(d.to_config(), scn) for d in req.detectors]
        values = detectors.evaluate_all(specs, z, scatter, v, k)
        return models.StatisticResponse(
            values=[
                models.StatisticValueModel(detector=spec.label, statistic=val)
                for spec, val in zip(specs, values)
            ]
        )

    return app


app = create_app()
