"""Run configuration: strict JSON schema, tolerance registry, digests.

Every tolerance any pipeline stage consumes is named here; a registry
test keeps the shipped configs and this list in lockstep so no stage can
grow a hidden constant.  Unknown keys anywhere in a config document are
errors (catches typos early).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import ConfigError
from .geometry import TorusParams
from .operators import PeriodicGrid
from .profiles import ProfileConfig

__all__ = ["RunConfig", "TOLERANCE_KEYS", "load_config", "builtin_config_text"]

# every named tolerance consumed by the pipeline, with shipped defaults
TOLERANCE_KEYS = {
    "newton_tol": 1e-11,
    "eigen_tol": 1e-10,
    "ode_residual_tol": 1e-8,
    "construction_residual_tol": 1e-9,
    "integral_tol": 1e-8,
    "eigen_residual_tol": 1e-8,
    "normalization_tol": 1e-10,
    "oned_twod_rel_tol": 1e-6,
    "symmetry_factor": 10.0,
    "census_grad_rel": 1e-6,
    "census_match_cells": 2.0,
    "c1_tol": 1e-8,
    "c2_deriv_tol": 1e-8,
    "c2_floor_rel": 1e-3,
    "probe_delta_rel": 1e-2,
    "imex_safety": 0.5,
    "energy_increase_tol": 1e-10,
    "order_fit_low": 0.8,
    "order_fit_high": 1.2,
    "e_ratio_low": 1.5,
    "e_ratio_high": 2.5,
    "gap_ratio_min": 1.5,
    "operator_order_low": 1.8,
    "operator_order_high": 2.2,
}


def _require_keys(doc: dict, allowed, where: str) -> None:
    unknown = set(doc) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


@dataclass
class RunConfig:
    params: TorusParams
    profile: ProfileConfig
    grid: PeriodicGrid
    probe_grid: PeriodicGrid
    epsilon_list: list
    census_epsilon: float
    headline_epsilon: float
    probe_epsilon: float
    probe_horizon: float
    probe_seeds: list
    tolerances: dict = field(default_factory=dict)
    seed: int = 0
    output_dir: str = "out"

    def tol(self, name: str) -> float:
        if name not in TOLERANCE_KEYS:
            raise ConfigError(f"tolerance {name!r} is not registered")
        if name not in self.tolerances:
            raise ConfigError(f"tolerance {name!r} missing from config")
        return self.tolerances[name]

    def validate(self) -> None:
        self.grid.check_waves(self.params.n_waves)
        self.probe_grid.check_waves(self.params.n_waves)
        missing = set(TOLERANCE_KEYS) - set(self.tolerances)
        if missing:
            raise ConfigError(f"config missing tolerances: {sorted(missing)}")
        _require_keys(self.tolerances, TOLERANCE_KEYS, "tolerances")
        for name, value in self.tolerances.items():
            if not value > 0.0:
                raise ConfigError(f"tolerance {name!r} must be positive, got {value}")
        for eps in list(self.epsilon_list) + [self.census_epsilon,
                                              self.headline_epsilon,
                                              self.probe_epsilon]:
            # raises if the embedding condition fails at this amplitude
            self.params.with_epsilon(eps)

    def to_dict(self) -> dict:
        return {
            "params": {"R": self.params.R, "r": self.params.r,
                       "n_waves": self.params.n_waves},
            "profile": {"phi0": self.profile.phi0,
                        "steepness": self.profile.steepness,
                        "height": self.profile.height,
                        "samples": self.profile.samples},
            "grid": {"n_phi": self.grid.n_phi, "n_theta": self.grid.n_theta},
            "epsilon_list": list(self.epsilon_list),
            "census": {"epsilon": self.census_epsilon,
                       "headline_epsilon": self.headline_epsilon},
            "probe": {"grid": {"n_phi": self.probe_grid.n_phi,
                               "n_theta": self.probe_grid.n_theta},
                      "epsilon": self.probe_epsilon,
                      "horizon": self.probe_horizon,
                      "seeds": list(self.probe_seeds)},
            "tolerances": dict(sorted(self.tolerances.items())),
            "seed": self.seed,
            "output_dir": self.output_dir,
        }

    def digest(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        _require_keys(doc, ["params", "profile", "grid", "epsilon_list",
                            "census", "probe", "tolerances", "seed",
                            "output_dir"], "config")
        try:
            p = doc["params"]
            _require_keys(p, ["R", "r", "n_waves"], "params")
            params = TorusParams(R=float(p["R"]), r=float(p["r"]),
                                 epsilon=0.0, n_waves=int(p["n_waves"]))
            pr = doc["profile"]
            _require_keys(pr, ["phi0", "steepness", "height", "samples"], "profile")
            profile = ProfileConfig(phi0=float(pr["phi0"]),
                                    steepness=float(pr["steepness"]),
                                    height=float(pr["height"]),
                                    samples=int(pr["samples"]))
            g = doc["grid"]
            _require_keys(g, ["n_phi", "n_theta"], "grid")
            grid = PeriodicGrid(int(g["n_phi"]), int(g["n_theta"]))
            c = doc["census"]
            _require_keys(c, ["epsilon", "headline_epsilon"], "census")
            pb = doc["probe"]
            _require_keys(pb, ["grid", "epsilon", "horizon", "seeds"], "probe")
            _require_keys(pb["grid"], ["n_phi", "n_theta"], "probe.grid")
            probe_grid = PeriodicGrid(int(pb["grid"]["n_phi"]),
                                      int(pb["grid"]["n_theta"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid config: {exc}") from exc
        cfg = cls(
            params=params,
            profile=profile,
            grid=grid,
            probe_grid=probe_grid,
            epsilon_list=[float(e) for e in doc["epsilon_list"]],
            census_epsilon=float(c["epsilon"]),
            headline_epsilon=float(c["headline_epsilon"]),
            probe_epsilon=float(pb["epsilon"]),
            probe_horizon=float(pb["horizon"]),
            probe_seeds=[int(s) for s in pb["seeds"]],
            tolerances={k: float(v) for k, v in doc.get("tolerances", {}).items()},
            seed=int(doc.get("seed", 0)),
            output_dir=str(doc.get("output_dir", "out")),
        )
        cfg.validate()
        return cfg


def builtin_config_text(name: str) -> str:
    """Text of a shipped config ('default' or 'figure2')."""
    ref = resources.files("toruspatterns").joinpath(f"configs/{name}.json")
    try:
        return ref.read_text()
    except FileNotFoundError as exc:
        raise ConfigError(f"no builtin config named {name!r}") from exc


def load_config(path_or_name: str) -> RunConfig:
    """Load a config from a file path, or a builtin by bare name."""
    path = Path(path_or_name)
    if path.suffix == ".json" and path.exists():
        text = path.read_text()
    elif path.exists() and path.is_file():
        text = path.read_text()
    else:
        text = builtin_config_text(str(path_or_name))
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return RunConfig.from_dict(doc)
