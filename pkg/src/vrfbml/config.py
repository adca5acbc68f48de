"""Run configuration: plant parameters, scenarios, model hyperparameters.

A config file is JSON. Any top-level block may be omitted and falls back to
:data:`DEFAULT_CONFIG`; a given ``scenarios`` list replaces the default list.
"""

from __future__ import annotations

import copy
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

from .datasets import Mode, PreprocessConfig, SplitStrategy
from .errors import ConfigError, ParameterError
from .thermal import OperatingProfile, VrfbParams

SEED_ENV = "VRFBML_SEED"

# Start temperatures reproduce both the mean and the maximum of the measured
# profiles with the default plant; durations move 80 % of capacity.
_MEASURED = [
    # current, mode, duration, soc0, t_initial, mean, max
    (40, "charging", 16615, 0.1, 23.61, 27.743, 31.2529),
    (40, "discharging", 16615, 0.9, 16.74, 25.719, 33.3343),
    (45, "charging", 14769, 0.1, 26.21, 31.302, 35.5717),
    (45, "discharging", 14769, 0.9, 27.16, 33.222, 38.2843),
    (50, "charging", 13292, 0.1, 26.59, 33.926, 40.0213),
    (50, "discharging", 13292, 0.9, 28.98, 36.236, 42.2443),
    (60, "charging", 11077, 0.1, 28.07, 37.307, 44.8636),
    (60, "discharging", 11077, 0.9, 30.11, 39.422, 47.0195),
]

DEFAULT_CONFIG: dict = {
    "vrfb": VrfbParams().to_dict(),
    "simulation": {"dt": 1.0, "sample_interval_s": 15.0, "r_max": 10.0},
    "scenarios": [
        {"id": f"{i}A-{mode}", "current_a": float(i), "mode": mode, "flow_l_min": 10.0,
         "duration_s": float(dur), "soc_initial": soc, "t_initial_c": t0,
         "target_mean_c": mean, "reference_max_c": mx}
        for i, mode, dur, soc, t0, mean, mx in _MEASURED
    ],
    "models": {
        "lr": {},
        "svr": {"c": 10.0, "epsilon": 0.05, "gamma": "auto", "kernel": "rbf",
                "max_passes": 100_000, "tol": 1e-4},
        "gbt": {"rounds": 100, "learning_rate": 0.3, "lambda": 1.0, "max_depth": 6,
                "min_child_count": 1, "min_split_gain": 0.0},
    },
    "split": {"ratio": 0.75, "seed": 42, "strategy": "shuffled"},
    "preprocess": {"rebase_time": False},
    "noise": {"sigma": 0.15, "seed": 7},
    "output_dir": "out",
}


@dataclass(frozen=True)
class ScenarioConfig:
    id: str
    current_a: float
    mode: Mode
    flow_l_min: float
    duration_s: float
    soc_initial: float
    t_initial_c: float
    target_mean_c: float | None = None
    reference_max_c: float | None = None

    def profile(self) -> OperatingProfile:
        return OperatingProfile(mode=self.mode, current=self.current_a, flow_rate=self.flow_l_min,
                                duration=self.duration_s, soc_initial=self.soc_initial,
                                t_initial=self.t_initial_c)


@dataclass(frozen=True)
class SplitConfig:
    ratio: float = 0.75
    seed: int = 42
    strategy: SplitStrategy = SplitStrategy.SHUFFLED


@dataclass(frozen=True)
class RunConfig:
    params: VrfbParams
    scenarios: tuple[ScenarioConfig, ...]
    models: dict
    split: SplitConfig
    preprocess: PreprocessConfig
    noise_sigma: float
    noise_seed: int
    dt: float
    sample_interval_s: float
    r_max: float
    output_dir: Path
    raw: dict = field(repr=False, default_factory=dict)

    @property
    def sample_every(self) -> int:
        return max(1, round(self.sample_interval_s / self.dt))

    def scenario(self, scenario_id: str) -> ScenarioConfig:
        for sc in self.scenarios:
            if sc.id == scenario_id:
                return sc
        known = ", ".join(sc.id for sc in self.scenarios)
        raise ConfigError(f"unknown scenario {scenario_id!r} (known: {known})")

    def hyper(self, kind: str) -> dict:
        try:
            return dict(self.models[kind])
        except KeyError:
            raise ConfigError(f"no hyperparameter block for model {kind!r}") from None


def _merge(defaults: dict, override: dict) -> dict:
    out = copy.deepcopy(defaults)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _scenario(doc: dict) -> ScenarioConfig:
    try:
        sc = ScenarioConfig(
            id=str(doc["id"]), current_a=float(doc["current_a"]), mode=Mode(doc["mode"]),
            flow_l_min=float(doc["flow_l_min"]), duration_s=float(doc["duration_s"]),
            soc_initial=float(doc.get("soc_initial", 0.5)),
            t_initial_c=float(doc.get("t_initial_c", 30.0)),
            target_mean_c=None if doc.get("target_mean_c") is None else float(doc["target_mean_c"]),
            reference_max_c=None if doc.get("reference_max_c") is None else float(doc["reference_max_c"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad scenario entry {doc!r}: {exc}") from None
    sc.profile()  # validates ranges
    return sc


def build_config(doc: dict, seed_override: int | None = None) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(doc) - set(DEFAULT_CONFIG)
    if unknown:
        raise ConfigError(f"unknown config block(s): {sorted(unknown)}")
    merged = _merge(DEFAULT_CONFIG, doc)
    try:
        params = VrfbParams.from_dict(merged["vrfb"])
        scenarios = tuple(_scenario(s) for s in merged["scenarios"])
        ids = [s.id for s in scenarios]
        keys = [(s.current_a, s.mode) for s in scenarios]
        if len(set(ids)) != len(ids) or len(set(keys)) != len(keys):
            raise ConfigError("scenarios must be unique by id and by (current, mode)")

        split_doc = merged["split"]
        seed = int(split_doc["seed"])
        noise_seed = int(merged["noise"]["seed"])
        if seed_override is not None:
            seed = noise_seed = int(seed_override)
        split_cfg = SplitConfig(ratio=float(split_doc["ratio"]), seed=seed,
                                strategy=SplitStrategy(split_doc["strategy"]))
        if not 0 < split_cfg.ratio < 1:
            raise ConfigError(f"split ratio must lie in (0, 1), got {split_cfg.ratio}")

        sim = merged["simulation"]
        dt = float(sim["dt"])
        interval = float(sim["sample_interval_s"])
        if not (dt > 0 and math.isfinite(dt)) or interval < dt:
            raise ConfigError("simulation.dt must be > 0 and sample_interval_s >= dt")
        sigma = float(merged["noise"]["sigma"])
        if sigma < 0:
            raise ConfigError("noise.sigma must be >= 0")
        models = merged["models"]
        for kind in ("lr", "svr", "gbt"):
            if not isinstance(models.get(kind), dict):
                raise ConfigError(f"models.{kind} must be an object")
        return RunConfig(
            params=params, scenarios=scenarios, models=models, split=split_cfg,
            preprocess=PreprocessConfig(**merged["preprocess"]),
            noise_sigma=sigma, noise_seed=noise_seed, dt=dt, sample_interval_s=interval,
            r_max=float(sim["r_max"]), output_dir=Path(merged["output_dir"]), raw=merged,
        )
    except ParameterError as exc:
        raise ConfigError(str(exc)) from None
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc}") from None


def seed_from_env() -> int | None:
    value = os.environ.get(SEED_ENV)
    if value is None or value == "":
        return None
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {value!r}") from None


def load_config(path=None, seed_override: int | None = None) -> RunConfig:
    doc = {}
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if seed_override is None:
        seed_override = seed_from_env()
    return build_config(doc, seed_override)


def default_config_json() -> str:
    return json.dumps(DEFAULT_CONFIG, indent=2) + "\n"
