"""Run configuration: built-in defaults, bundled presets, a TOML file, then CLI overrides.

Every key has a dotted name such as ``run.iterations``. On the command line
the full name or any unique suffix of it (``--iterations``) sets the key.
"""

import copy
import hashlib
import json
from importlib import resources

import tomli

from .errors import ConfigError

DEFAULTS = {
    "run": {"sampler": "rjmcmc", "seed": 1, "iterations": 2000, "burn_in": 500, "thinning": 1,
            "chains": 1, "scan": "fixed", "init": "self"},
    "data": {"source": "csv", "path": "", "distances": ""},
    "model": {"name": "poisson", "a": 1.0, "b": 0.1,
              "shape_a": 2.0, "shape_b": 0.5, "rate_a": 2.0, "rate_b": 0.5},
    "prior": {"decay": "exponential", "s": 0.5, "window": 1.0, "alpha": 1.0},
    "hyper": {"infer_alpha": True, "alpha_a": 1.0, "alpha_b": 0.01,
              "infer_s": False, "s_a": 1.0, "s_b": 1.0, "s_step": 0.5},
    "rj": {"link": "prior", "birth": "prior", "sigma_b": 0.5, "min_size": 2,
           "independence_family": "gamma", "independence_params": [1.0, 1.0],
           "resample": False, "resample_family": "nmm", "sigma_r": 0.5,
           "param_step": 0.3, "include_jacobian": True},
    "simulate": {"n": 150, "mu": [-3.0, 0.0, 3.0], "sigma": 1.5, "lam": [1.0, 4.0, 7.0]},
    "tune": {"grid": [0.05, 0.1, 0.25, 0.5, 1.0, 2.0], "chain_iterations": 50500, "chain_burn_in": 500},
    "predict": {"mode": "sequential", "new_x": [], "new_distances": "", "draws_per_sample": 1},
}

# Keys that do not change what a fitted chain is; left out of the digest.
DIGEST_EXCLUDE = {"tune", "predict"}

PRESETS = ("poisson-overlapping", "old-faithful")


def preset_text(name):
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return resources.files("ddcrp.harness").joinpath("presets", f"{name}.toml").read_text()


def flat_keys(cfg=DEFAULTS):
    return [f"{sec}.{key}" for sec, body in cfg.items() for key in body]


def _merge(base, update, origin):
    for sec, body in update.items():
        if sec not in base or not isinstance(body, dict):
            raise ConfigError(f"{origin}: unknown section [{sec}]")
        for key, value in body.items():
            if key not in base[sec]:
                raise ConfigError(f"{origin}: unknown key {sec}.{key}")
            base[sec][key] = _coerce(f"{sec}.{key}", value, DEFAULTS[sec][key])
    return base


def _coerce(name, value, default):
    if isinstance(default, bool):
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "1", "yes", "false", "0", "no"):
            return value.lower() in ("true", "1", "yes")
        raise ConfigError(f"{name} expects true/false, got {value!r}")
    if isinstance(default, int):
        try:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{name} expects an integer, got {value!r}") from None
    if isinstance(default, float):
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{name} expects a number, got {value!r}") from None
    if isinstance(default, list):
        if isinstance(value, str):
            value = [v for v in value.replace(",", " ").split() if v]
        try:
            return [float(v) for v in value]
        except (TypeError, ValueError):
            raise ConfigError(f"{name} expects a list of numbers, got {value!r}") from None
    return str(value)


def resolve_key(flag):
    """Map a CLI flag name (without dashes) to a dotted key, allowing unique suffixes."""
    name = flag.replace("-", "_")
    keys = flat_keys()
    if name in keys:
        return name
    hits = [k for k in keys if k.endswith("." + name)]
    if len(hits) == 1:
        return hits[0]
    if not hits:
        raise ConfigError(f"unknown option --{flag}")
    raise ConfigError(f"ambiguous option --{flag}: matches {', '.join(sorted(hits))}")


def load_config(preset=None, path=None, overrides=()):
    """Build a validated config dict. ``overrides`` is a sequence of ``(dotted_key, raw_value)``."""
    cfg = copy.deepcopy(DEFAULTS)
    if preset:
        try:
            _merge(cfg, tomli.loads(preset_text(preset)), f"preset {preset}")
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"preset {preset}: {exc}") from None
    if path:
        try:
            with open(path, "rb") as fh:
                _merge(cfg, tomli.load(fh), str(path))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    for key, raw in overrides:
        sec, name = key.split(".", 1)
        cfg[sec][name] = _coerce(key, raw, DEFAULTS[sec][name])
    validate(cfg)
    return cfg


_CHOICES = {
    "run.sampler": ("gibbs", "rjmcmc"),
    "run.scan": ("fixed", "random"),
    "run.init": ("self", "single", "prior"),
    "data.source": ("csv", "simulate", "old-faithful"),
    "model.name": ("poisson", "gamma-shape"),
    "prior.decay": ("exponential", "window", "identity"),
    "rj.link": ("uniform", "prior"),
    "rj.birth": ("prior", "independence", "nmm", "igmm", "lnmm"),
    "rj.independence_family": ("gamma", "lognormal", "normal"),
    "rj.resample_family": ("nmm", "igmm", "lnmm"),
    "predict.mode": ("sequential", "joint"),
}

_POSITIVE = ("prior.s", "prior.window", "prior.alpha", "hyper.alpha_a", "hyper.alpha_b", "hyper.s_a",
             "hyper.s_b", "hyper.s_step", "rj.sigma_b", "rj.sigma_r", "model.a", "model.b",
             "model.shape_a", "model.shape_b", "model.rate_a", "model.rate_b", "simulate.sigma")


def get(cfg, key):
    sec, name = key.split(".", 1)
    return cfg[sec][name]


def validate(cfg):
    for key, allowed in _CHOICES.items():
        if get(cfg, key) not in allowed:
            raise ConfigError(f"{key} must be one of {', '.join(allowed)}; got {get(cfg, key)!r}")
    for key in _POSITIVE:
        if not get(cfg, key) > 0:
            raise ConfigError(f"{key} must be positive")
    run = cfg["run"]
    if run["iterations"] < 1:
        raise ConfigError("run.iterations must be at least 1")
    if not 0 <= run["burn_in"] < run["iterations"]:
        raise ConfigError("run.burn_in must satisfy 0 <= burn_in < iterations")
    if run["thinning"] < 1:
        raise ConfigError("run.thinning must be at least 1")
    if run["chains"] < 1:
        raise ConfigError("run.chains must be at least 1")
    if run["seed"] < 0:
        raise ConfigError("run.seed must be non-negative")
    if cfg["rj"]["param_step"] < 0 or cfg["rj"]["min_size"] < 1:
        raise ConfigError("rj.param_step must be >= 0 and rj.min_size >= 1")
    if run["sampler"] == "gibbs" and cfg["model"]["name"] != "poisson":
        raise ConfigError("the collapsed Gibbs sampler needs a conjugate model (model.name = poisson)")
    if cfg["hyper"]["infer_s"] and cfg["prior"]["decay"] != "exponential":
        raise ConfigError("hyper.infer_s requires exponential decay")
    if cfg["simulate"]["n"] < 1 or len(cfg["simulate"]["mu"]) != len(cfg["simulate"]["lam"]):
        raise ConfigError("simulate.mu and simulate.lam must have equal length and n >= 1")
    if not cfg["tune"]["grid"] or min(cfg["tune"]["grid"]) <= 0:
        raise ConfigError("tune.grid must be a non-empty list of positive values")
    if not 0 <= cfg["tune"]["chain_burn_in"] < cfg["tune"]["chain_iterations"]:
        raise ConfigError("tune.chain_burn_in must satisfy 0 <= chain_burn_in < chain_iterations")
    if cfg["predict"]["draws_per_sample"] < 1:
        raise ConfigError("predict.draws_per_sample must be at least 1")
    return cfg


def config_digest(cfg):
    """Digest of everything that determines a fitted chain."""
    body = {k: v for k, v in cfg.items() if k not in DIGEST_EXCLUDE}
    return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()[:16]


def dumps_toml(cfg):
    """Minimal TOML writer for the flat two-level config."""
    lines = []
    for sec, body in cfg.items():
        lines.append(f"[{sec}]")
        for key, value in body.items():
            lines.append(f"{key} = {_toml_value(value)}")
        lines.append("")
    return "\n".join(lines)


def _toml_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, list):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    return json.dumps(v)
