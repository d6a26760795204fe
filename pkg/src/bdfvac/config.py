"""Run configuration: TOML parsing, schema validation, resolution.

Unknown sections or keys are hard errors naming the offending key; the
fully-resolved configuration is embedded in every output the CLI writes,
so a result file always carries the parameters that produced it.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, asdict

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

__all__ = ["ConfigError", "RunConfig", "load_config"]


class ConfigError(ValueError):
    def __init__(self, message: str, key: str | None = None):
        self.key = key
        super().__init__(message if key is None else f"{message} (key: {key})")


_NUMBER = (int, float)

# section -> key -> (allowed types, default)
_SCHEMA = {
    "lattice": {
        "n_per_axis": (int, 8),
        "box_length": (_NUMBER, 10.0),
        "cutoff": (_NUMBER, 2.0),
    },
    "density": {
        "kind": (str, "gaussian"),
        "charge": (_NUMBER, 1.0),
        "width": (_NUMBER, 1.2),
        "path": (str, None),
        "normalize": (bool, True),
        "normalize_range": (list, [2.0, 9.0]),
    },
    "physics": {
        "alpha": (_NUMBER, 0.02),
        "alpha_ladder": (list, None),
        "kappa": (_NUMBER, 1.0),
        "kappa_grid": (dict, None),
        "mu": (_NUMBER, -0.25),
        "mu_minus": (_NUMBER, -0.25),
        "mu_plus": (_NUMBER, 0.25),
        "epsilon": (_NUMBER, 0.12),
        "bracket": (list, None),
        "bracket_tol": (_NUMBER, 1e-4),
        "cutoff_ladder": (list, None),
    },
    "solver": {
        "damping": (_NUMBER, 0.7),
        "x_tol": (_NUMBER, 1e-8),
        "max_iters": (int, 120),
        "preconditioner": (str, "dielectric"),
        "init": (str, "linear_renormalized"),
    },
    "output": {
        "directory": (str, "out"),
        "formats": (list, ["csv", "json"]),
        "save_state": (bool, False),
    },
    "run": {
        "seed": (int, 1234),
        "threads": (int, 0),
    },
}

_KAPPA_GRID_KEYS = {"start": _NUMBER, "stop": _NUMBER, "count": int}


@dataclass
class RunConfig:
    lattice: dict
    density: dict
    physics: dict
    solver: dict
    output: dict
    run: dict
    source_path: str = field(default="", compare=False)

    def resolved(self) -> dict:
        """Plain dict of every resolved value, for embedding in outputs."""
        d = asdict(self)
        d.pop("source_path")
        return d


def _validate_section(name: str, raw: dict) -> dict:
    schema = _SCHEMA[name]
    out = {}
    for key, value in raw.items():
        if key not in schema:
            raise ConfigError(f"unknown key in [{name}]", key=f"{name}.{key}")
        types, _default = schema[key]
        bad = value is not None and not isinstance(value, types)
        # bool is an int subclass in Python but a distinct type in TOML
        if not bad and types is not bool and isinstance(value, bool) and types in (int, _NUMBER):
            bad = True
        if bad:
            raise ConfigError(
                f"wrong type for [{name}] {key}: got {type(value).__name__}",
                key=f"{name}.{key}",
            )
        out[key] = value
    for key, (_types, default) in schema.items():
        if key not in out:
            out[key] = list(default) if isinstance(default, list) else default
    return out


def _validate_semantics(cfg: RunConfig):
    grid = cfg.physics.get("kappa_grid")
    if grid is not None:
        for k, v in grid.items():
            if k not in _KAPPA_GRID_KEYS:
                raise ConfigError("unknown key in kappa_grid", key=f"physics.kappa_grid.{k}")
            if not isinstance(v, _KAPPA_GRID_KEYS[k]):
                raise ConfigError(f"wrong type for kappa_grid {k}", key=f"physics.kappa_grid.{k}")
        for k in _KAPPA_GRID_KEYS:
            if k not in grid:
                raise ConfigError("kappa_grid needs start, stop, count", key=f"physics.kappa_grid.{k}")
    kind = cfg.density["kind"]
    if kind not in ("gaussian", "file"):
        raise ConfigError(f"unknown density kind {kind!r}", key="density.kind")
    if kind == "file" and not cfg.density.get("path"):
        raise ConfigError("density kind 'file' needs a path", key="density.path")
    for key in ("alpha_ladder", "bracket", "cutoff_ladder", "normalize_range"):
        val = cfg.physics.get(key) if key in _SCHEMA["physics"] else cfg.density.get(key)
        if val is not None and not all(isinstance(x, _NUMBER) for x in val):
            section = "physics" if key in _SCHEMA["physics"] else "density"
            raise ConfigError(f"{key} must be a list of numbers", key=f"{section}.{key}")
    fmts = cfg.output["formats"]
    for f in fmts:
        if f not in ("csv", "json"):
            raise ConfigError(f"unknown output format {f!r}", key="output.formats")


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            raw = _toml.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except _toml.TOMLDecodeError as err:
        raise ConfigError(f"config is not valid TOML: {err}")

    for section in raw:
        if section not in _SCHEMA:
            raise ConfigError("unknown section", key=section)
    sections = {name: _validate_section(name, raw.get(name, {})) for name in _SCHEMA}
    cfg = RunConfig(**sections, source_path=str(path))
    _validate_semantics(cfg)
    return cfg
