"""INI run configuration.

Three section families: [scenario] for the data model, [run] for Monte
Carlo and grid settings, and one [detector.<label>] section per detector.
Unknown sections or keys are rejected so typos fail loudly instead of
silently falling back to defaults.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace

from .detectors import (
    DetectorKind,
    DetectorSpec,
    RankOneGlrtParams,
    rank_one_glrt,
)
from .scenario import H0, H1, Scenario, time_steering_vector


class ConfigError(Exception):
    """Malformed or inconsistent run configuration."""


DEFAULT_SEED = 0
DEFAULT_PFA = 1e-3
DEFAULT_PD_TRIALS = 4000
DEFAULT_SNR_GRID = tuple(float(x) for x in range(0, 26, 2))
DEFAULT_ETA_GRID = (1.0, 3.0, 200)
DEFAULT_EPSILONS = (0.0, 0.1, 0.2)

# mismatch between the rank-one steering hypothesis and the nominal
# frequency when the config does not pin one, in cycles (scaled by 1/n)
DEFAULT_U_OFFSET = 0.03

_SCENARIO_KEYS = {
    "n", "k", "fd", "delta_f", "sigma_f", "noise_power", "snr_db", "hypothesis",
}
_RUN_KEYS = {
    "pfa", "seed", "workers", "pd_trials", "threshold_trials",
    "snr_grid_db", "eta_min", "eta_max", "eta_count", "epsilons", "output_dir",
}
_DETECTOR_COMMON_KEYS = {"kind"}
_DETECTOR_KIND_KEYS = {
    DetectorKind.KELLY: set(),
    DetectorKind.AMF: set(),
    DetectorKind.SIGMA_C: set(),
    DetectorKind.PARAMETRIC_EPSILON: {"epsilon"},
    DetectorKind.RANK_ONE_GLRT: {"u_delta_f", "b_max", "n_b", "n_t", "refine"},
}


@dataclass(frozen=True)
class DetectorConfig:
    """Declarative detector description; build_spec turns it into a spec.

    name None lets the spec pick its canonical label.
    """

    kind: str
    name: str | None = None
    epsilon: float = 0.0
    u_delta_f: float | None = None
    b_max: float = 1e3
    n_b: int = 60
    n_t: int = 41
    refine: bool = True


@dataclass(frozen=True)
class RunConfig:
    scenario: Scenario = field(default_factory=Scenario)
    detectors: tuple[DetectorConfig, ...] = ()
    pfa: float = DEFAULT_PFA
    seed: int = DEFAULT_SEED
    workers: int = 1
    pd_trials: int = DEFAULT_PD_TRIALS
    threshold_trials: int | None = None
    snr_grid_db: tuple[float, ...] = DEFAULT_SNR_GRID
    eta_grid: tuple[float, float, int] = DEFAULT_ETA_GRID
    epsilons: tuple[float, ...] = DEFAULT_EPSILONS
    output_dir: str = "out"


def build_spec(cfg: DetectorConfig, scn: Scenario) -> DetectorSpec:
    """Resolve a declarative detector against a scenario."""
    kind = DetectorKind(cfg.kind)
    if kind is DetectorKind.RANK_ONE_GLRT:
        offset = cfg.u_delta_f if cfg.u_delta_f is not None else DEFAULT_U_OFFSET / scn.n
        u = time_steering_vector(scn.n, scn.fd + offset)
        params = RankOneGlrtParams(
            u=u, b_max=cfg.b_max, n_b=cfg.n_b, n_t=cfg.n_t, refine=cfg.refine
        )
        return rank_one_glrt(params, name=cfg.name)
    return DetectorSpec(kind=kind, epsilon=cfg.epsilon, name=cfg.name)


def build_specs(cfg: RunConfig) -> list[DetectorSpec]:
    return [build_spec(d, cfg.scenario) for d in cfg.detectors]


def _reject_unknown(section: str, present, allowed) -> None:
    extra = sorted(set(present) - set(allowed))
    if extra:
        raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(extra)}")


def _parse(section, key, conv, what):
    raw = section[key]
    try:
        return conv(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section.name}] {key}: expected {what}, got {raw!r}") from exc


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(raw)


def _parse_float_list(raw: str) -> tuple[float, ...]:
    """Comma list ("0,2,4") or start:stop:count ("0:24:13", inclusive)."""
    raw = raw.strip()
    if ":" in raw:
        parts = raw.split(":")
        if len(parts) != 3:
            raise ValueError(raw)
        start, stop = float(parts[0]), float(parts[1])
        count = int(parts[2])
        if count < 2:
            raise ValueError(raw)
        step = (stop - start) / (count - 1)
        return tuple(start + step * i for i in range(count))
    return tuple(float(p) for p in raw.split(",") if p.strip())


def _scenario_from(section) -> Scenario:
    _reject_unknown("scenario", section.keys(), _SCENARIO_KEYS)
    scn = Scenario()
    kwargs = {}
    for key, conv in (
        ("n", int), ("k", int),
        ("fd", float), ("delta_f", float),
        ("sigma_f", float), ("noise_power", float),
    ):
        if key in section:
            kwargs[key] = _parse(section, key, conv, conv.__name__)
    if "snr_db" in section:
        raw = section["snr_db"].strip().lower()
        kwargs["snr_db"] = None if raw in ("", "none") else _parse(
            section, "snr_db", float, "float or 'none'"
        )
    if "hypothesis" in section:
        hyp = section["hypothesis"].strip().lower()
        if hyp not in (H0, H1):
            raise ConfigError(
                f"[scenario] hypothesis: expected {H0!r} or {H1!r}, got {hyp!r}"
            )
        kwargs["hypothesis"] = hyp
    try:
        return replace(scn, **kwargs)
    except Exception as exc:
        raise ConfigError(f"[scenario] invalid: {exc}") from exc


def _detector_from(label: str, section) -> DetectorConfig:
    if "kind" not in section:
        raise ConfigError(f"[detector.{label}] is missing the 'kind' key")
    raw_kind = section["kind"].strip().lower()
    try:
        kind = DetectorKind(raw_kind)
    except ValueError:
        valid = ", ".join(k.value for k in DetectorKind)
        raise ConfigError(
            f"[detector.{label}] kind: expected one of {valid}, got {raw_kind!r}"
        ) from None
    _reject_unknown(
        f"detector.{label}", section.keys(), _DETECTOR_COMMON_KEYS | _DETECTOR_KIND_KEYS[kind]
    )
    cfg = DetectorConfig(kind=kind.value, name=label)
    if kind is DetectorKind.PARAMETRIC_EPSILON:
        eps = _parse(section, "epsilon", float, "float") if "epsilon" in section else 0.0
        if eps < 0:
            raise ConfigError(f"[detector.{label}] epsilon must be >= 0, got {eps}")
        cfg = replace(cfg, epsilon=eps)
    elif kind is DetectorKind.RANK_ONE_GLRT:
        updates = {}
        if "u_delta_f" in section:
            updates["u_delta_f"] = _parse(section, "u_delta_f", float, "float")
        if "b_max" in section:
            updates["b_max"] = _parse(section, "b_max", float, "float")
        for key in ("n_b", "n_t"):
            if key in section:
                updates[key] = _parse(section, key, int, "int")
        if "refine" in section:
            updates["refine"] = _parse(section, "refine", _parse_bool, "bool")
        cfg = replace(cfg, **updates)
    return cfg


def parse_config(text: str) -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc

    known_flat = {"scenario", "run"}
    detectors: list[DetectorConfig] = []
    scn = Scenario()
    run_kwargs = {}

    for name in parser.sections():
        if name in known_flat:
            continue
        if name.startswith("detector."):
            label = name[len("detector."):]
            if not label:
                raise ConfigError("detector section needs a label: [detector.<label>]")
            detectors.append(_detector_from(label, parser[name]))
        else:
            raise ConfigError(f"unknown section [{name}]")

    labels = [d.name for d in detectors]
    if len(set(labels)) != len(labels):
        raise ConfigError("duplicate detector labels")

    if parser.has_section("scenario"):
        scn = _scenario_from(parser["scenario"])

    if parser.has_section("run"):
        section = parser["run"]
        _reject_unknown("run", section.keys(), _RUN_KEYS)
        if "pfa" in section:
            run_kwargs["pfa"] = _parse(section, "pfa", float, "float")
        if "seed" in section:
            run_kwargs["seed"] = _parse(section, "seed", int, "int")
        if "workers" in section:
            run_kwargs["workers"] = _parse(section, "workers", int, "int")
        if "pd_trials" in section:
            run_kwargs["pd_trials"] = _parse(section, "pd_trials", int, "int")
        if "threshold_trials" in section:
            raw = section["threshold_trials"].strip().lower()
            run_kwargs["threshold_trials"] = (
                None if raw in ("", "none") else _parse(section, "threshold_trials", int, "int")
            )
        if "snr_grid_db" in section:
            run_kwargs["snr_grid_db"] = _parse(
                section, "snr_grid_db", _parse_float_list, "comma list or start:stop:count"
            )
        eta = list(DEFAULT_ETA_GRID)
        if "eta_min" in section:
            eta[0] = _parse(section, "eta_min", float, "float")
        if "eta_max" in section:
            eta[1] = _parse(section, "eta_max", float, "float")
        if "eta_count" in section:
            eta[2] = _parse(section, "eta_count", int, "int")
        if tuple(eta) != DEFAULT_ETA_GRID:
            run_kwargs["eta_grid"] = (float(eta[0]), float(eta[1]), int(eta[2]))
        if "epsilons" in section:
            run_kwargs["epsilons"] = _parse(
                section, "epsilons", _parse_float_list, "comma list of floats"
            )
        if "output_dir" in section:
            run_kwargs["output_dir"] = section["output_dir"].strip()

    cfg = RunConfig(scenario=scn, detectors=tuple(detectors), **run_kwargs)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if not 0.0 < cfg.pfa < 1.0:
        raise ConfigError(f"pfa must lie in (0, 1), got {cfg.pfa}")
    if cfg.seed < 0:
        raise ConfigError(f"seed must be >= 0, got {cfg.seed}")
    if cfg.workers < 1:
        raise ConfigError(f"workers must be >= 1, got {cfg.workers}")
    if cfg.pd_trials < 1:
        raise ConfigError(f"pd_trials must be >= 1, got {cfg.pd_trials}")
    if cfg.threshold_trials is not None and cfg.threshold_trials < 1:
        raise ConfigError(f"threshold_trials must be >= 1, got {cfg.threshold_trials}")
    if not cfg.snr_grid_db:
        raise ConfigError("snr_grid_db must not be empty")
    lo, hi, count = cfg.eta_grid
    if not (lo > 0 and hi > lo and count >= 2):
        raise ConfigError(f"eta grid needs 0 < min < max and count >= 2, got {cfg.eta_grid}")
    if any(e < 0 for e in cfg.epsilons) or not cfg.epsilons:
        raise ConfigError(f"epsilons must be a non-empty list of values >= 0, got {cfg.epsilons}")


def load_config(path: str | None) -> RunConfig:
    """RunConfig from an INI file, or pure defaults when path is None."""
    if path is None:
        return RunConfig()
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return parse_config(text)
