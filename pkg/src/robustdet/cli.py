"""Command-line client for the detection service.

Every subcommand builds a JSON payload from the INI config plus flag
overrides and posts it to the HTTP API; by default an in-process instance
of the service handles the request, --server targets a running one.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical
failure, 3 verification suite failure.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys
from dataclasses import replace
from pathlib import Path

import httpx

from .config import ConfigError, DetectorConfig, RunConfig, load_config
from .scenario import Scenario

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_VERIFY_FAILED = 3

COMMANDS = ("calibrate", "pfa-curve", "pd-curve", "verify", "scenario-info", "serve")


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as ConfigError instead of exiting."""

    def error(self, message):
        raise ConfigError(message)


class ServiceClient:
    """POSTs to a remote server when given a URL, otherwise runs the FastAPI
    app in process through an ASGI transport. No read timeout: curve runs
    are allowed to take minutes."""

    def __init__(self, server: str | None):
        self.server = server.rstrip("/") if server else None

    def post(self, path: str, payload: dict) -> httpx.Response:
        if self.server is not None:
            with httpx.Client(base_url=self.server, timeout=None) as client:
                return client.post(path, json=payload)
        from .service import app

        async def _go() -> httpx.Response:
            transport = httpx.ASGITransport(app=app)
            async with httpx.AsyncClient(
                transport=transport, base_url="http://robustdet.internal", timeout=None
            ) as client:
                return await client.post(path, json=payload)

        return asyncio.run(_go())


def scenario_payload(scn: Scenario) -> dict:
    return {
        "n": scn.n,
        "k": scn.k,
        "fd": scn.fd,
        "delta_f": scn.delta_f,
        "sigma_f": scn.sigma_f,
        "noise_power": scn.noise_power,
        "snr_db": scn.snr_db,
        "hypothesis": scn.hypothesis,
    }


def detector_payload(det: DetectorConfig) -> dict:
    out = {
        "kind": det.kind,
        "name": det.name,
        "epsilon": det.epsilon,
        "b_max": det.b_max,
        "n_b": det.n_b,
        "n_t": det.n_t,
        "refine": det.refine,
    }
    if det.u_delta_f is not None:
        out["u_delta_f"] = det.u_delta_f
    return out


def _error_exit_code(resp: httpx.Response) -> int:
    """Map an error response to an exit code, printing the reason."""
    try:
        detail = resp.json().get("detail")
    except ValueError:
        detail = None
    if resp.status_code == 422:
        print(f"error: invalid request: {detail}", file=sys.stderr)
        return EXIT_USAGE
    if isinstance(detail, dict) and "kind" in detail:
        msg = f"{detail.get('error', 'error')}: {detail.get('message', '')}"
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_NUMERICAL if detail["kind"] == "numerical" else EXIT_USAGE
    print(f"error: service returned {resp.status_code}: {resp.text[:500]}", file=sys.stderr)
    return EXIT_NUMERICAL


def _out_dir(args, cfg: RunConfig) -> Path:
    out = Path(args.out) if args.out else Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_text(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")
    print(f"wrote {path}")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {path}")


def _require_detectors(cfg: RunConfig) -> int | None:
    if not cfg.detectors:
        print(
            "error: this command needs at least one [detector.<label>] config section",
            file=sys.stderr,
        )
        return EXIT_USAGE
    return None


def cmd_calibrate(args, cfg: RunConfig, client: ServiceClient) -> int:
    missing = _require_detectors(cfg)
    if missing is not None:
        return missing
    payload = {
        "scenario": scenario_payload(cfg.scenario),
        "detectors": [detector_payload(d) for d in cfg.detectors],
        "pfa": cfg.pfa,
        "seed": cfg.seed,
        "workers": cfg.workers,
        "threshold_trials": cfg.threshold_trials,
    }
    resp = client.post("/api/calibrate", payload)
    if resp.status_code != 200:
        return _error_exit_code(resp)
    records = resp.json()["records"]
    for rec in records:
        print(
            f"{rec['detector']:<20} threshold={rec['threshold']:.10g} "
            f"method={rec['method']} trials={rec['trials']} "
            f"achieved_pfa={rec['achieved_pfa_estimate']:.3g}"
        )
    _write_json(_out_dir(args, cfg) / "calibration.json", records)
    return EXIT_OK


def cmd_pfa_curve(args, cfg: RunConfig, client: ServiceClient) -> int:
    lo, hi, count = cfg.eta_grid
    payload = {
        "scenario": scenario_payload(cfg.scenario),
        "eta_min": lo,
        "eta_max": hi,
        "eta_count": count,
        "epsilons": list(cfg.epsilons),
    }
    resp = client.post("/api/pfa-curve", payload)
    if resp.status_code != 200:
        return _error_exit_code(resp)
    body = resp.json()
    print(
        f"false-alarm curve: {count} thresholds in [{lo:g}, {hi:g}] "
        f"x epsilons {', '.join(f'{e:g}' for e in cfg.epsilons)}"
    )
    _write_text(_out_dir(args, cfg) / "pfa_curve.csv", body["csv"])
    return EXIT_OK


def cmd_pd_curve(args, cfg: RunConfig, client: ServiceClient) -> int:
    missing = _require_detectors(cfg)
    if missing is not None:
        return missing
    payload = {
        "scenario": scenario_payload(cfg.scenario),
        "detectors": [detector_payload(d) for d in cfg.detectors],
        "pfa": cfg.pfa,
        "snr_grid_db": list(cfg.snr_grid_db),
        "seed": cfg.seed,
        "workers": cfg.workers,
        "pd_trials": cfg.pd_trials,
        "threshold_trials": cfg.threshold_trials,
    }
    resp = client.post("/api/pd-curve", payload)
    if resp.status_code != 200:
        return _error_exit_code(resp)
    body = resp.json()
    print(
        f"detection curve: {len(cfg.snr_grid_db)} SNR points x {len(cfg.detectors)} "
        f"detectors, pfa={cfg.pfa:g}, cos^2(theta)={body['cos2_theta']:.4f}"
    )
    for rec in body["thresholds"]:
        print(f"  {rec['detector']:<20} threshold={rec['threshold']:.10g} ({rec['method']})")
    out = _out_dir(args, cfg)
    _write_text(out / "pd_curve.csv", body["csv"])
    _write_json(out / "pd_thresholds.json", body["thresholds"])
    return EXIT_OK


def cmd_verify(args, cfg: RunConfig, client: ServiceClient) -> int:
    payload = {"scenario": scenario_payload(cfg.scenario), "seed": cfg.seed}
    resp = client.post("/api/verify", payload)
    if resp.status_code != 200:
        return _error_exit_code(resp)
    body = resp.json()
    for check in body["checks"]:
        tag = "PASS" if check["passed"] else "FAIL"
        print(f"{tag} {check['name']}: {check['detail']}")
    _write_json(_out_dir(args, cfg) / "verify.json", body)
    if not body["passed"]:
        failed = sum(1 for c in body["checks"] if not c["passed"])
        print(f"error: {failed} verification check(s) failed", file=sys.stderr)
        return EXIT_VERIFY_FAILED
    print(f"all {len(body['checks'])} checks passed")
    return EXIT_OK


def cmd_scenario_info(args, cfg: RunConfig, client: ServiceClient) -> int:
    payload = {
        "scenario": scenario_payload(cfg.scenario),
        "epsilons": list(cfg.epsilons),
    }
    resp = client.post("/api/scenario-info", payload)
    if resp.status_code != 200:
        return _error_exit_code(resp)
    body = resp.json()
    print(json.dumps(body, indent=2))
    _write_json(_out_dir(args, cfg) / "scenario_info.json", body)
    return EXIT_OK


def cmd_serve(args, cfg: RunConfig) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    updates = {}
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError(f"--seed must be >= 0, got {args.seed}")
        updates["seed"] = args.seed
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigError(f"--workers must be >= 1, got {args.workers}")
        updates["workers"] = args.workers
    return replace(cfg, **updates) if updates else cfg


def build_parser() -> _Parser:
    parser = _Parser(prog="robustdet", description=__doc__)
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="INI run configuration")
    common.add_argument("--seed", type=int, metavar="N", help="override the run seed")
    common.add_argument("--workers", type=int, metavar="N", help="override worker count")
    common.add_argument("--out", metavar="DIR", help="override the output directory")
    common.add_argument(
        "--server", metavar="URL", help="use a running service instead of in-process"
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    sub.add_parser("calibrate", parents=[common], help="thresholds at the target pfa")
    sub.add_parser("pfa-curve", parents=[common], help="closed-form pfa vs threshold CSV")
    sub.add_parser("pd-curve", parents=[common], help="detection rate vs SNR CSV")
    sub.add_parser("verify", parents=[common], help="run the cross-module check suite")
    sub.add_parser("scenario-info", parents=[common], help="mismatch and covariance summary")
    serve = sub.add_parser("serve", parents=[common], help="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _apply_overrides(load_config(args.config), args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    client = ServiceClient(args.server)
    handlers = {
        "calibrate": cmd_calibrate,
        "pfa-curve": cmd_pfa_curve,
        "pd-curve": cmd_pd_curve,
        "verify": cmd_verify,
        "scenario-info": cmd_scenario_info,
    }
    try:
        if args.command == "serve":
            return cmd_serve(args, cfg)
        return handlers[args.command](args, cfg, client)
    except httpx.HTTPError as exc:
        print(f"error: cannot reach service: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main(argv=sys.argv[1:]))
