"""TOML run configuration with flat dotted keys and ``--set`` overrides."""
from __future__ import annotations

import math
import re
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .experiments import ExperimentConfig


class ConfigError(ValueError):
    pass


def _floats(v):
    return tuple(float(x) for x in v)


# key -> (converter, default)
SCHEMA = {
    "geometry.L": (float, math.pi),
    "geometry.n_modes": (int, 32),
    "geometry.collocation_size": (int, None),
    "physics.mu": (float, 0.1),
    "physics.mu_list": (_floats, (1e-1, 3e-2, 1e-2, 3e-3)),
    "physics.eps": (float, 0.5),
    "physics.eps_list": (_floats, (0.5, 0.2, 0.1, 0.05)),
    "physics.drift": (str, "sine"),
    "physics.drift_a": (float, 1.0),
    "physics.diffusion": (str, "additive_identity"),
    "physics.diffusion_a": (float, 0.0),
    "physics.noise_law": (str, "power"),
    "physics.noise_r": (float, 1.0),
    "physics.noise_values": (_floats, ()),
    "physics.u0": (_floats, ()),
    "physics.v0": (_floats, ()),
    "simulation.T": (float, 0.5),
    "simulation.dt": (float, None),
    "simulation.p": (float, 2.0),
    "simulation.M": (int, 200),
    "simulation.master_seed": (int, 20240601),
    "simulation.refine_check": (bool, False),
    "counterexample.mu": (float, 1e-3),
    "counterexample.t": (float, 1.0),
    "counterexample.M": (int, 20000),
    "counterexample.floor_mu_list": (_floats, (1e-2, 1e-3, 1e-4)),
    "counterexample.floor_T": (float, 0.2),
    "counterexample.floor_M": (int, 1000),
    "counterexample.floor_lambda": (float, 1.0),
    "output.directory": (str, "out"),
    "output.formats": (tuple, ("csv", "json")),
}

ENUMS = {
    "physics.drift": {"zero", "linear", "sine"},
    "physics.diffusion": {"additive_identity", "diagonal_nemytskii"},
    "physics.noise_law": {"power", "explicit", "zero"},
}


def _flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _line_of(text, key):
    leaf = key.rsplit(".", 1)[-1]
    for i, line in enumerate(text.splitlines(), 1):
        if re.match(rf"\s*{re.escape(leaf)}\s*=", line) or re.match(rf"\s*{re.escape(key)}\s*=", line):
            return i
    return None


def _convert(key, value):
    conv, _ = SCHEMA[key]
    try:
        if conv is bool:
            if isinstance(value, str):
                if value.lower() not in ("true", "false"):
                    raise ValueError(value)
                return value.lower() == "true"
            return bool(value)
        if conv is tuple:
            return tuple(value) if isinstance(value, (list, tuple)) else tuple(str(value).split(","))
        if conv is _floats and isinstance(value, str):
            value = [x for x in value.strip("[] ").split(",") if x.strip()]
        if conv is int and isinstance(value, float) and value != int(value):
            raise ValueError(value)
        return conv(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key}: cannot interpret {value!r}") from exc


def load(path=None, overrides=()) -> dict:
    """Defaults, then the TOML file, then ``key=value`` overrides; validated."""
    cfg = {k: d for k, (_, d) in SCHEMA.items()}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"{path}: {exc.strerror}") from exc
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        for key, value in _flatten(data).items():
            if key not in SCHEMA:
                line = _line_of(text, key)
                where = f"{path}:{line}" if line else str(path)
                raise ConfigError(f"{where}: unknown key {key!r}")
            try:
                cfg[key] = _convert(key, value)
            except ConfigError as exc:
                line = _line_of(text, key)
                raise ConfigError(f"{path}:{line}: {exc}") from exc
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        key = key.strip()
        if key not in SCHEMA:
            raise ConfigError(f"--set: unknown key {key!r}")
        value = value.strip()
        conv = SCHEMA[key][0]
        if conv in (float, int) and value.lower() in ("none", ""):
            cfg[key] = None
        else:
            cfg[key] = _convert(key, value)
    validate(cfg)
    return cfg


def validate(cfg: dict):
    for key, allowed in ENUMS.items():
        if cfg[key] not in allowed:
            raise ConfigError(f"{key}: expected one of {sorted(allowed)}, got {cfg[key]!r}")
    if not cfg["geometry.L"] > 0:
        raise ConfigError("geometry.L must be positive")
    if cfg["geometry.n_modes"] < 1:
        raise ConfigError("geometry.n_modes must be positive")
    G = cfg["geometry.collocation_size"]
    if G is not None and G < cfg["geometry.n_modes"]:
        raise ConfigError("geometry.collocation_size must be at least geometry.n_modes")
    mus = [cfg["physics.mu"], *cfg["physics.mu_list"], cfg["counterexample.mu"], *cfg["counterexample.floor_mu_list"]]
    if any(m is None or not m > 0 for m in mus):
        raise ConfigError("every mass must be positive")
    epss = [cfg["physics.eps"], *cfg["physics.eps_list"]]
    if any(e is None or e < 0 for e in epss):
        raise ConfigError("friction eps must be nonnegative")
    if not cfg["simulation.T"] > 0:
        raise ConfigError("simulation.T must be positive")
    dt = cfg["simulation.dt"]
    if dt is not None:
        if not dt > 0:
            raise ConfigError("simulation.dt must be positive")
        if dt > cfg["physics.mu"] / 10:
            raise ConfigError(f"simulation.dt={dt:g} exceeds physics.mu/10={cfg['physics.mu'] / 10:g}")
    if cfg["simulation.p"] < 1:
        raise ConfigError("simulation.p must be at least 1")
    if cfg["simulation.M"] < 1 or cfg["counterexample.floor_M"] < 1:
        raise ConfigError("path counts must be positive")
    if cfg["counterexample.M"] < 2:
        raise ConfigError("counterexample.M must be at least 2")
    if not 0 <= cfg["simulation.master_seed"] < 2**64:
        raise ConfigError("simulation.master_seed must fit in 64 unsigned bits")
    if cfg["physics.diffusion"] == "diagonal_nemytskii" and not abs(cfg["physics.diffusion_a"]) < 1:
        raise ConfigError("physics.diffusion_a must satisfy |a| < 1")
    n = cfg["geometry.n_modes"]
    if cfg["physics.noise_law"] == "explicit" and len(cfg["physics.noise_values"]) < n:
        raise ConfigError("physics.noise_values needs one intensity per mode")
    for key in ("physics.u0", "physics.v0"):
        if cfg[key] and len(cfg[key]) != 2 * n:
            raise ConfigError(f"{key} needs 2 * n_modes numbers (u1, u2 per mode)")


def _pairs(values):
    v = list(values)
    return tuple(complex(v[2 * i], v[2 * i + 1]) for i in range(len(v) // 2))


def experiment_config(cfg: dict) -> ExperimentConfig:
    return ExperimentConfig(
        L=cfg["geometry.L"],
        n_modes=cfg["geometry.n_modes"],
        collocation_size=cfg["geometry.collocation_size"],
        T=cfg["simulation.T"],
        dt=cfg["simulation.dt"],
        p=cfg["simulation.p"],
        M=cfg["simulation.M"],
        master_seed=cfg["simulation.master_seed"],
        noise_law=cfg["physics.noise_law"],
        noise_r=cfg["physics.noise_r"],
        noise_values=cfg["physics.noise_values"][: cfg["geometry.n_modes"]],
        drift=cfg["physics.drift"],
        drift_a=cfg["physics.drift_a"],
        diffusion=cfg["physics.diffusion"],
        diffusion_a=cfg["physics.diffusion_a"],
        u0=_pairs(cfg["physics.u0"]),
        v0=_pairs(cfg["physics.v0"]),
        refine_check=cfg["simulation.refine_check"],
    )
