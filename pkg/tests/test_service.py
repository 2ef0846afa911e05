import numpy as np
import numpy.testing as npt
import pytest
from fastapi.testclient import TestClient

from robustdet import calibration, detectors, linalg
from robustdet.scenario import Scenario, sample_dataset
from robustdet.service import create_app


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app(), raise_server_exceptions=False)


def vec_payload(arr):
    arr = np.asarray(arr, dtype=complex)
    return {"re": arr.real.tolist(), "im": arr.imag.tolist()}


def mat_payload(arr):
    arr = np.asarray(arr, dtype=complex)
    return {"re": arr.real.tolist(), "im": arr.imag.tolist()}


def test_health(client):
    resp = client.get("/health")
    assert resp.status_code == 200
    body = resp.json()
    assert body["status"] == "ok"
    assert body["version"]


def test_scenario_info_defaults(client):
    resp = client.post("/api/scenario-info", json={})
    assert resp.status_code == 200
    body = resp.json()
    assert (body["n"], body["k"]) == (16, 32)
    assert body["hypothesis"] == "h0"
    npt.assert_allclose(body["cos2_theta"], 1.0, rtol=0)
    npt.assert_allclose(body["one_lag_clutter_correlation"], 0.9001532578032967, rtol=1e-12)
    npt.assert_allclose(body["diagonal_power"], 1.1, rtol=1e-15)
    npt.assert_allclose(body["zeta_by_epsilon"]["0"], 33 / 16, rtol=1e-15)
    npt.assert_allclose(body["zeta_by_epsilon"]["0.1"], 33 * 1.1 / 16, rtol=1e-15)


def test_scenario_info_mismatch(client):
    resp = client.post(
        "/api/scenario-info",
        json={"scenario": {"n": 16, "k": 32, "delta_f": 0.025}},
    )
    assert resp.status_code == 200
    npt.assert_allclose(resp.json()["cos2_theta"], 0.462505538601369, rtol=1e-10)


def test_scenario_info_zeta_per_epsilon(client):
    resp = client.post(
        "/api/scenario-info",
        json={"scenario": {"n": 8, "k": 8}, "epsilons": [0.0, 1.0]},
    )
    assert resp.status_code == 200
    zetas = resp.json()["zeta_by_epsilon"]
    npt.assert_allclose(zetas["0"], 9 / 8, rtol=0)
    npt.assert_allclose(zetas["1"], 9 * 2 / 8, rtol=0)


def test_calibrate_closed_form(client):
    resp = client.post(
        "/api/calibrate",
        json={
            "scenario": {"n": 8, "k": 16},
            "detectors": [
                {"kind": "parametric_epsilon", "epsilon": 0.1, "name": "rob"},
                {"kind": "sigma_c"},
            ],
            "pfa": 1e-3,
        },
    )
    assert resp.status_code == 200
    records = resp.json()["records"]
    assert [r["detector"] for r in records] == ["rob", "sigma_c"]
    assert all(r["method"] == "closed_form" for r in records)
    npt.assert_allclose(
        records[0]["threshold"], calibration.threshold_from_pfa(1e-3, 16, 8, 0.1), rtol=1e-12
    )
    npt.assert_allclose(
        records[1]["threshold"], calibration.threshold_from_pfa(1e-3, 16, 8, 0.0), rtol=1e-12
    )
    assert records[0]["target_pfa"] == 1e-3


def test_calibrate_monte_carlo_seeded(client):
    req = {
        "scenario": {"n": 4, "k": 8},
        "detectors": [{"kind": "kelly"}],
        "pfa": 0.1,
        "seed": 5,
        "threshold_trials": 1000,
    }
    first = client.post("/api/calibrate", json=req).json()["records"][0]
    again = client.post("/api/calibrate", json=req).json()["records"][0]
    assert first == again
    assert first["method"] == "monte_carlo"
    assert first["trials"] == 1000
    req["seed"] = 6
    other = client.post("/api/calibrate", json=req).json()["records"][0]
    assert other["threshold"] != first["threshold"]


def test_pfa_curve_endpoint(client):
    resp = client.post(
        "/api/pfa-curve",
        json={
            "scenario": {"n": 16, "k": 32},
            "eta_min": 1.1,
            "eta_max": 2.0,
            "eta_count": 4,
            "epsilons": [0.0, 0.1],
        },
    )
    assert resp.status_code == 200
    body = resp.json()
    rows = body["rows"]
    assert len(rows) == 8
    grid = np.linspace(1.1, 2.0, 4)
    for i, row in enumerate(rows):
        eps = 0.0 if i < 4 else 0.1
        eta = grid[i % 4]
        assert (row["eta"], row["epsilon"]) == (eta, eps)
        npt.assert_allclose(
            row["pfa"], calibration.pfa_closed_form(eta, 32, 16, eps), rtol=0
        )
    assert body["csv"].startswith("eta,pfa,epsilon,k,n\n")
    assert len(body["csv"].strip().split("\n")) == 9


def test_pd_curve_endpoint(client):
    resp = client.post(
        "/api/pd-curve",
        json={
            "scenario": {"n": 4, "k": 8},
            "detectors": [{"kind": "kelly"}, {"kind": "parametric_epsilon", "epsilon": 0.1}],
            "pfa": 0.1,
            "snr_grid_db": [5.0, 15.0],
            "seed": 3,
            "pd_trials": 200,
            "threshold_trials": 1000,
        },
    )
    assert resp.status_code == 200
    body = resp.json()
    assert len(body["points"]) == 4
    assert [p["snr_db"] for p in body["points"]] == [5.0, 5.0, 15.0, 15.0]
    assert [t["detector"] for t in body["thresholds"]] == ["kelly", "epsilon_0.1"]
    assert body["pfa"] == 0.1
    npt.assert_allclose(body["cos2_theta"], 1.0, rtol=0)
    assert body["csv"].startswith("snr_db,detector,pd,stderr,trials,cos2theta,pfa\n")
    for point in body["points"]:
        assert point["trials"] == 200
        assert 0.0 <= point["pd"] <= 1.0


def test_verify_endpoint_passes(client):
    resp = client.post("/api/verify", json={"scenario": {"n": 4, "k": 8}, "seed": 1})
    assert resp.status_code == 200
    body = resp.json()
    assert body["passed"] is True
    names = [c["name"] for c in body["checks"]]
    assert len(names) == len(set(names)) >= 20
    assert all(c["passed"] for c in body["checks"])


def test_verify_endpoint_flags_injected_covariance(client):
    bad = np.diag([1.0, 1.0, 1.0, -1.0]).astype(complex)
    resp = client.post(
        "/api/verify",
        json={"scenario": {"n": 4, "k": 8}, "covariance": mat_payload(bad)},
    )
    assert resp.status_code == 200
    body = resp.json()
    assert body["passed"] is False
    failing = {c["name"]: c for c in body["checks"] if not c["passed"]}
    assert "scenario.covariance_factorizable" in failing
    assert "NotPositiveDefinite" in failing["scenario.covariance_factorizable"]["detail"]


def test_statistic_endpoint_matches_library(client):
    rng = np.random.default_rng(77)
    scn = Scenario(n=4, k=8)
    data = sample_dataset(scn, rng)
    specs = [
        detectors.kelly(),
        detectors.amf(),
        detectors.parametric_epsilon(0.1),
    ]
    resp = client.post(
        "/api/statistic",
        json={
            "scenario": {"n": 4, "k": 8},
            "detectors": [
                {"kind": "kelly"},
                {"kind": "amf"},
                {"kind": "parametric_epsilon", "epsilon": 0.1},
            ],
            "z": vec_payload(data.z),
            "secondaries": mat_payload(data.secondaries),
        },
    )
    assert resp.status_code == 200
    values = resp.json()["values"]
    scatter = linalg.factorize(data.secondaries @ data.secondaries.conj().T)
    want = detectors.evaluate_all(specs, data.z, scatter, scn.nominal_steering(), scn.k)
    assert [v["detector"] for v in values] == ["kelly", "amf", "epsilon_0.1"]
    npt.assert_allclose([v["statistic"] for v in values], want, rtol=1e-12)


def test_statistic_endpoint_rank_one_and_custom_steering(client):
    rng = np.random.default_rng(78)
    scn = Scenario(n=4, k=8)
    data = sample_dataset(scn, rng)
    v = scn.nominal_steering()
    u = np.exp(2j * np.pi * 0.3 * np.arange(4))
    params = detectors.RankOneGlrtParams(u=u)
    resp = client.post(
        "/api/statistic",
        json={
            "scenario": {"n": 4, "k": 8},
            "detectors": [{"kind": "rank_one_glrt", "u_delta_f": 0.3 - scn.fd}],
            "z": vec_payload(data.z),
            "secondaries": mat_payload(data.secondaries),
            "steering": vec_payload(v),
        },
    )
    assert resp.status_code == 200
    scatter = linalg.factorize(data.secondaries @ data.secondaries.conj().T)
    want = detectors.evaluate(detectors.rank_one_glrt(params), data.z, scatter, v, scn.k)
    npt.assert_allclose(resp.json()["values"][0]["statistic"], want, rtol=1e-12)


def test_statistic_endpoint_shape_mismatch_is_usage(client):
    resp = client.post(
        "/api/statistic",
        json={
            "scenario": {"n": 4, "k": 8},
            "detectors": [{"kind": "kelly"}],
            "z": {"re": [1, 0, 0], "im": [0, 0, 0]},
            "secondaries": mat_payload(np.eye(4, 8)),
        },
    )
    assert resp.status_code == 400
    detail = resp.json()["detail"]
    assert detail["kind"] == "usage"


def test_statistic_endpoint_singular_scatter_is_numerical(client):
    # two secondaries cannot span C^4, so the scatter fails to factorize
    resp = client.post(
        "/api/statistic",
        json={
            "scenario": {"n": 4, "k": 8},
            "detectors": [{"kind": "kelly"}],
            "z": vec_payload(np.ones(4)),
            "secondaries": mat_payload(np.eye(4)[:, :2]),
        },
    )
    assert resp.status_code == 400
    detail = resp.json()["detail"]
    assert detail["kind"] == "numerical"
    assert detail["error"] == "NotPositiveDefinite"


def test_validation_errors_are_422(client):
    resp = client.post(
        "/api/calibrate",
        json={"detectors": [{"kind": "kelly"}], "pfa": 1.5},
    )
    assert resp.status_code == 422

    resp = client.post("/api/calibrate", json={"detectors": [], "pfa": 0.1})
    assert resp.status_code == 422

    # k < n fails the model validator
    resp = client.post(
        "/api/scenario-info", json={"scenario": {"n": 16, "k": 8}}
    )
    assert resp.status_code == 422


def test_numerical_failure_is_400(client):
    # pfa far below the smallest representable rate drives the bracket
    # search past its cap
    resp = client.post(
        "/api/calibrate",
        json={
            "scenario": {"n": 16, "k": 32},
            "detectors": [{"kind": "sigma_c"}],
            "pfa": 1e-300,
        },
    )
    assert resp.status_code == 400
    detail = resp.json()["detail"]
    assert detail["kind"] == "numerical"
    assert detail["error"] == "NonMonotoneDetected"
    assert "bracket" in detail["message"]
