"""JSON scenario files. Units are carried in key names (``_km``, ``_deg``, ``_m``)."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from isrfd.detectors import METHOD_ORDER, Method
from isrfd.errors import ConfigError
from isrfd.orbit import BodyModel, OrbitalElements, walker_constellation

REQUIRED_KEYS = (
    "body",
    "constellation",
    "sigma_m_m",
    "sigma_r_m",
    "fault_magnitudes_m",
    "fault_ratio",
    "n_faults",
    "alpha_grid",
    "eta_alpha",
    "trials",
    "seed",
)
BODY_KEYS = ("radius_km", "mask_altitude_km", "phi_max_deg", "mu_km3_s2")
SAT_KEYS = ("a_km", "e", "i_deg", "raan_deg", "argp_deg", "M0_deg")
EPOCH_SAMPLING = ("fixed", "uniform_over_period")


@dataclass
class ScenarioConfig:
    body: BodyModel
    constellation: list
    sigma_m: float
    sigma_r_grid: list
    fault_magnitudes: list
    fault_ratios: list
    n_faults: int
    alpha_grid: list
    eta_alpha: float
    trials: int
    seed: int
    detectors: list = field(default_factory=lambda: list(METHOD_ORDER))
    epoch_sampling: str = "uniform_over_period"
    fixed_epoch_s: float = 0.0
    use_augmentation: bool = False
    power_gamma: float = 0.8
    max_subgraphs: int | None = None
    name: str = "scenario"

    @property
    def n(self):
        return len(self.constellation)

    @property
    def max_period(self):
        return max(el.period for el in self.constellation)

    def to_dict(self):
        """Normalised JSON-ready form; every satellite is listed explicitly."""
        return {
            "name": self.name,
            "body": {
                "radius_km": self.body.radius,
                "mask_altitude_km": self.body.mask_altitude,
                "phi_max_deg": self.body.phi_max,
                "mu_km3_s2": self.body.mu,
            },
            "constellation": {
                "satellites": [
                    {
                        "a_km": el.a,
                        "e": el.e,
                        "i_deg": el.i,
                        "raan_deg": el.raan,
                        "argp_deg": el.argp,
                        "M0_deg": el.M0,
                    }
                    for el in self.constellation
                ]
            },
            "sigma_m_m": self.sigma_m,
            "sigma_r_m": list(self.sigma_r_grid),
            "fault_magnitudes_m": list(self.fault_magnitudes),
            "fault_ratio": list(self.fault_ratios),
            "n_faults": self.n_faults,
            "alpha_grid": list(self.alpha_grid),
            "eta_alpha": self.eta_alpha,
            "trials": self.trials,
            "seed": self.seed,
            "detectors": [m.value for m in self.detectors],
            "epoch_sampling": self.epoch_sampling,
            "fixed_epoch_s": self.fixed_epoch_s,
            "use_augmentation": self.use_augmentation,
            "power_gamma": self.power_gamma,
            "max_subgraphs": self.max_subgraphs,
        }

    def replace(self, **changes):
        data = dict(self.__dict__)
        data.update(changes)
        return ScenarioConfig(**data)


def _num(raw, key, lo=None, hi=None, integer=False):
    val = raw[key] if isinstance(raw, dict) else raw
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"'{key}' must be a number, got {val!r}", key)
    if integer and int(val) != val:
        raise ConfigError(f"'{key}' must be an integer, got {val!r}", key)
    if lo is not None and val < lo:
        raise ConfigError(f"'{key}' = {val} is below the minimum {lo}", key)
    if hi is not None and val > hi:
        raise ConfigError(f"'{key}' = {val} is above the maximum {hi}", key)
    return int(val) if integer else float(val)


def _num_list(raw, key, lo=None, hi=None):
    val = raw[key]
    vals = val if isinstance(val, list) else [val]
    if not vals:
        raise ConfigError(f"'{key}' must not be empty", key)
    return [_num(v, key, lo, hi) for v in vals]


def _require(raw, keys, where=""):
    for key in keys:
        if key not in raw:
            raise ConfigError(f"missing required key '{where}{key}'", key)


def _constellation(raw, mu):
    if not isinstance(raw, dict):
        raise ConfigError("'constellation' must be an object", "constellation")
    if "walker" in raw:
        w = raw["walker"]
        _require(w, ("a_km", "i_deg", "planes", "satellites_per_plane"), "constellation.walker.")
        return walker_constellation(
            _num(w, "a_km", lo=0),
            _num(w, "i_deg"),
            _num(w, "planes", lo=1, integer=True),
            w["satellites_per_plane"],
            phasing=_num(w.get("phasing", 1), "phasing"),
            e=_num(w.get("e", 0.0), "e", lo=0, hi=0.999999),
            mu=mu,
            raan0=_num(w.get("raan0_deg", 0.0), "raan0_deg"),
        )
    if "satellites" in raw:
        sats = []
        for k, s in enumerate(raw["satellites"]):
            _require(s, SAT_KEYS, f"constellation.satellites[{k}].")
            sats.append(OrbitalElements(*(_num(s, key) for key in SAT_KEYS), mu=mu))
        return sats
    raise ConfigError("'constellation' needs 'walker' or 'satellites'", "constellation")


def parse_config(raw) -> ScenarioConfig:
    if not isinstance(raw, dict):
        raise ConfigError("top level of a scenario must be a JSON object")
    _require(raw, REQUIRED_KEYS)
    body_raw = raw["body"]
    _require(body_raw, BODY_KEYS, "body.")
    try:
        body = BodyModel(*(_num(body_raw, k) for k in BODY_KEYS))
    except ConfigError as exc:
        raise ConfigError(str(exc), exc.key or "body") from None
    constellation = _constellation(raw["constellation"], body.mu)
    if len(constellation) < 2:
        raise ConfigError("constellation needs at least two satellites", "constellation")
    detectors = raw.get("detectors", [m.value for m in METHOD_ORDER])
    try:
        detectors = [Method(d) for d in detectors]
    except ValueError as exc:
        raise ConfigError(f"unknown detector: {exc}", "detectors") from None
    detectors = [m for m in METHOD_ORDER if m in detectors]
    sampling = raw.get("epoch_sampling", "uniform_over_period")
    if sampling not in EPOCH_SAMPLING:
        raise ConfigError(f"epoch_sampling must be one of {EPOCH_SAMPLING}", "epoch_sampling")
    n_faults = _num(raw, "n_faults", integer=True)
    if n_faults not in (0, 1):
        raise ConfigError("n_faults must be 0 or 1", "n_faults")
    alphas = _num_list(raw, "alpha_grid")
    if any(not 0 < a < 1 for a in alphas):
        raise ConfigError("alpha_grid values must lie in (0, 1)", "alpha_grid")
    max_sub = raw.get("max_subgraphs")
    if not _num(raw, "sigma_m_m") > 0:
        raise ConfigError("'sigma_m_m' must be positive", "sigma_m_m")
    return ScenarioConfig(
        body=body,
        constellation=constellation,
        sigma_m=_num(raw, "sigma_m_m"),
        sigma_r_grid=_num_list(raw, "sigma_r_m", lo=0),
        fault_magnitudes=_num_list(raw, "fault_magnitudes_m", lo=0),
        fault_ratios=_num_list(raw, "fault_ratio", lo=0, hi=1),
        n_faults=n_faults,
        alpha_grid=alphas,
        eta_alpha=_num(raw, "eta_alpha", lo=1),
        trials=_num(raw, "trials", lo=1, integer=True),
        seed=_num(raw, "seed", lo=0, integer=True),
        detectors=detectors,
        epoch_sampling=sampling,
        fixed_epoch_s=_num(raw.get("fixed_epoch_s", 0.0), "fixed_epoch_s"),
        use_augmentation=bool(raw.get("use_augmentation", False)),
        power_gamma=_num(raw.get("power_gamma", 0.8), "power_gamma", lo=0, hi=1),
        max_subgraphs=None if max_sub is None else _num(max_sub, "max_subgraphs", lo=1,
                                                         integer=True),
        name=str(raw.get("name", "scenario")),
    )


def _key_line(text, key):
    if key is None:
        return None
    needle = f'"{key}"'
    for lineno, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return lineno
    return None


def bundled_path(name):
    """Path of a bundled scenario (``gps`` or ``lunar``)."""
    ref = resources.files("isrfd") / "scenarios" / f"{name}.json"
    return Path(str(ref))


def load_config(path) -> ScenarioConfig:
    """Read and validate a scenario file.

    A bare name such as ``gps`` or ``lunar`` that is not an existing file
    resolves to the bundled scenario. Errors carry ``path:line:`` prefixes.
    """
    p = Path(path)
    if not p.exists() and p.suffix == "" and bundled_path(str(path)).exists():
        p = bundled_path(str(path))
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    try:
        return parse_config(raw)
    except ConfigError as exc:
        line = _key_line(text, exc.key)
        loc = f"{p}:{line}" if line else f"{p}"
        raise ConfigError(f"{loc}: {exc}", exc.key) from None
