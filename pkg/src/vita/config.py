"""JSON run configuration shared by every command-line entry point.

A config file may omit any key; missing keys take the defaults below.
Unknown sections or keys are rejected so typos fail loudly.
"""
from __future__ import annotations

import copy
import json
from pathlib import Path

from .geo_losses import GeoLossWeights
from .pdt_losses import perspectives_from_config
from .scenes import PRESETS, SceneParams
from .training import TrainConfig

__all__ = ["DEFAULTS", "ConfigError", "resolve_config", "load_config", "dump_config", "train_config", "scene_params"]

DEFAULTS: dict[str, dict] = {
    "pdt": {
        "gamma": [0.2, 0.5, 0.8],
        "alpha_fp": [3.0, 1.0, 0.3],
        "alpha_fn": [0.3, 1.0, 3.0],
        "epsilon": 1e-6,
    },
    "uncertainty": {"alpha": 0.7, "epsilon": 1e-9},
    "geometry": {"beta": 3.0},
    "geo_loss": {"lambda_slope": 1.0, "lambda_elev": 1.0, "lambda_geo": 2.0, "teacher_noise_sigma": 0.0},
    "train": {
        "epochs": 10,
        "learning_rate": 5e-4,
        "depth_learning_rate": 5e-4,
        "batch_size": 4,
        "min_steps_per_epoch": 50,
        "weight_decay": 0.01,
        "beta1": 0.9,
        "beta2": 0.999,
        "adam_eps": 1e-8,
        "seed": 0,
        "num_prompt": 4,
        "token_dim": 32,
        "hidden_dim": 32,
    },
    "eval": {"tau": 0.5, "aggregation": "micro", "output": "T", "corruption_seed": 0},
    "data": {
        "preset": "easy",
        "seed": 0,
        "height": 64,
        "width": 64,
        "amplitude": None,
        "smoothness": None,
        "band_width": None,
        "obstacle_count": None,
        "obstacle_height": [1.5, 4.0],
        "texture_noise": 0.03,
        "margin": 2,
    },
}


class ConfigError(ValueError):
    """Invalid run configuration; ``key`` names the offending entry."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


def _check_value(key: str, default, value):
    is_number = isinstance(value, (int, float)) and not isinstance(value, bool)
    if default is None:
        # optional numeric override, null keeps the preset default
        if value is not None and not is_number:
            raise ConfigError(f"{key} must be a number or null, got {value!r}", key)
        return
    if isinstance(default, (int, float)):
        if not is_number:
            raise ConfigError(f"{key} must be a number, got {value!r}", key)
        if isinstance(default, int) and int(value) != value:
            raise ConfigError(f"{key} must be an integer, got {value!r}", key)
    elif isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{key} must be a string, got {value!r}", key)
    elif isinstance(default, list):
        if not isinstance(value, list) or len(value) != len(default):
            raise ConfigError(f"{key} must be a list of {len(default)} entries", key)


def resolve_config(raw: dict | None) -> dict:
    """Merge ``raw`` over the defaults, validating names and types."""
    raw = {} if raw is None else raw
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    out = copy.deepcopy(DEFAULTS)
    for section, values in raw.items():
        if section not in DEFAULTS:
            raise ConfigError(f"unknown config section {section!r}", section)
        if not isinstance(values, dict):
            raise ConfigError(f"section {section!r} must be an object", section)
        for key, value in values.items():
            name = f"{section}.{key}"
            if key not in DEFAULTS[section]:
                raise ConfigError(f"unknown config key {name!r}", name)
            _check_value(name, DEFAULTS[section][key], value)
            out[section][key] = copy.deepcopy(value)
    _validate(out)
    return out


def _validate(cfg: dict) -> None:
    if cfg["data"]["preset"] not in PRESETS:
        raise ConfigError(f"data.preset {cfg['data']['preset']!r} is not one of {list(PRESETS)}", "data.preset")
    if cfg["eval"]["aggregation"] not in ("micro", "macro"):
        raise ConfigError("eval.aggregation must be 'micro' or 'macro'", "eval.aggregation")
    if cfg["eval"]["output"] not in ("T", "P"):
        raise ConfigError("eval.output must be 'T' or 'P'", "eval.output")
    if not 0.0 < cfg["eval"]["tau"] < 1.0:
        raise ConfigError("eval.tau must lie in (0, 1)", "eval.tau")
    if not 0.0 <= cfg["uncertainty"]["alpha"] <= 1.0:
        raise ConfigError("uncertainty.alpha must lie in [0, 1]", "uncertainty.alpha")
    if cfg["uncertainty"]["epsilon"] <= 0:
        raise ConfigError("uncertainty.epsilon must be positive", "uncertainty.epsilon")
    if cfg["geometry"]["beta"] <= 0:
        raise ConfigError("geometry.beta must be positive", "geometry.beta")
    # the owning constructors carry the remaining range checks
    for section, build in (("pdt", perspectives_from_config), ("train", train_config), ("data", scene_params)):
        try:
            build(cfg) if section != "pdt" else build(cfg["pdt"])
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"invalid {section} section: {exc}", section) from None


def load_config(path: str | Path | None) -> dict:
    """Read and resolve a JSON config; ``None`` gives the defaults."""
    if path is None:
        return resolve_config({})
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    return resolve_config(raw)


def dump_config(cfg: dict) -> str:
    return json.dumps(cfg, indent=2, sort_keys=True) + "\n"


def train_config(cfg: dict) -> TrainConfig:
    t, g = cfg["train"], cfg["geo_loss"]
    return TrainConfig(
        epochs=int(t["epochs"]),
        learning_rate=float(t["learning_rate"]),
        depth_learning_rate=float(t["depth_learning_rate"]),
        batch_size=int(t["batch_size"]),
        min_steps_per_epoch=int(t["min_steps_per_epoch"]),
        weight_decay=float(t["weight_decay"]),
        beta1=float(t["beta1"]),
        beta2=float(t["beta2"]),
        adam_eps=float(t["adam_eps"]),
        seed=int(t["seed"]),
        num_prompt=int(t["num_prompt"]),
        token_dim=int(t["token_dim"]),
        hidden_dim=int(t["hidden_dim"]),
        perspectives=perspectives_from_config(cfg["pdt"]),
        geo_weights=GeoLossWeights(float(g["lambda_slope"]), float(g["lambda_elev"]), float(g["lambda_geo"])),
        beta=float(cfg["geometry"]["beta"]),
        teacher_noise_sigma=float(g["teacher_noise_sigma"]),
    )


def scene_params(cfg: dict) -> SceneParams:
    d = cfg["data"]
    opt = lambda v, cast: None if v is None else cast(v)  # noqa: E731
    return SceneParams(
        rng_seed=int(d["seed"]),
        height=int(d["height"]),
        width=int(d["width"]),
        preset=d["preset"],
        amplitude=opt(d["amplitude"], float),
        smoothness=opt(d["smoothness"], float),
        band_width=opt(d["band_width"], float),
        obstacle_count=opt(d["obstacle_count"], int),
        obstacle_height=tuple(float(x) for x in d["obstacle_height"]),
        texture_noise=float(d["texture_noise"]),
        margin=int(d["margin"]),
    ).resolved()
