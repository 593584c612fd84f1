"""Declarative run configuration with full defaulting.

One JSON document drives every command; omitted sections fall back to the
defaults below, and each field is validated at load time against the
preconditions of the module that consumes it. A run manifest embeds the
resolved configuration, so a manifest file is itself an accepted config
source.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .admittance import ControllerParams
from .errors import InvalidInputError
from .gp import HeteroConfig, OptConfig
from .io import FORMAT_MANIFEST
from .policy import LearnConfig
from .se3 import DistanceWeights

_MEASURES = ("tci", "euclidean-pose")
_INTEGRATORS = ("semi_implicit", "rk4")


def _bounds_ok(bounds) -> bool:
    return (len(bounds) == 2 and 0.0 < bounds[0] <= bounds[1]
            and math.isfinite(bounds[1]))


@dataclass(frozen=True)
class AlignmentSection:
    rotation_weight: float = 0.5
    translation_weight: float = 0.5
    measure: str = "tci"

    def __post_init__(self):
        DistanceWeights(self.rotation_weight, self.translation_weight)
        if self.measure not in _MEASURES:
            raise InvalidInputError(f"measure must be one of {_MEASURES}")


@dataclass(frozen=True)
class PolicySection:
    grid_size: int = 100
    hetero_iterations: int = 3
    smoothing_window: int = 5
    opt_starts: int = 8
    opt_max_iter: int = 60
    length_scale_bounds: tuple | None = None
    signal_std_bounds: tuple | None = None
    noise_std_bounds: tuple | None = None
    position_strength: float = 1e-4
    rotation_strength: float = 1e-4

    def __post_init__(self):
        if self.grid_size < 2:
            raise InvalidInputError("grid_size must be at least 2")
        if self.hetero_iterations < 1 or self.smoothing_window < 1:
            raise InvalidInputError("iterations and smoothing window must be >= 1")
        if self.opt_starts < 1 or self.opt_max_iter < 1:
            raise InvalidInputError("optimizer starts and iterations must be >= 1")
        for name in ("length_scale_bounds", "signal_std_bounds",
                     "noise_std_bounds"):
            value = getattr(self, name)
            if value is None:
                continue
            value = tuple(float(v) for v in value)
            if not _bounds_ok(value):
                raise InvalidInputError(f"{name} must be (low, high) with "
                                        "0 < low <= high")
            object.__setattr__(self, name, value)
        if self.position_strength <= 0.0 or self.rotation_strength <= 0.0:
            raise InvalidInputError("via-point strengths must be positive")


@dataclass(frozen=True)
class SimulationSection:
    dt: float = 1e-3
    horizon: float = 2.0
    integrator: str = "semi_implicit"
    shared_sigma: bool = False

    def __post_init__(self):
        if self.dt <= 0.0 or self.horizon < self.dt:
            raise InvalidInputError("need dt > 0 and horizon >= dt")
        if self.integrator not in _INTEGRATORS:
            raise InvalidInputError(f"integrator must be one of {_INTEGRATORS}")


@dataclass(frozen=True)
class DataSection:
    radii: tuple = (0.7, 0.8, 0.9)
    repeats: int = 2
    noise: float = 0.005
    n_samples: int = 60
    max_angle: float = math.pi / 2

    def __post_init__(self):
        radii = tuple(float(r) for r in self.radii)
        if not radii or any(r <= 0.0 for r in radii):
            raise InvalidInputError("door radii must be positive")
        object.__setattr__(self, "radii", radii)
        if self.repeats < 1 or self.n_samples < 2:
            raise InvalidInputError("need repeats >= 1 and n_samples >= 2")
        if self.noise < 0.0:
            raise InvalidInputError("noise must be >= 0")
        if not 0.0 < self.max_angle <= math.pi:
            raise InvalidInputError("max_angle must lie in (0, pi]")


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    alignment: AlignmentSection = AlignmentSection()
    policy: PolicySection = PolicySection()
    controller: ControllerParams = ControllerParams()
    simulation: SimulationSection = SimulationSection()
    data: DataSection = DataSection()

    def to_dict(self) -> dict:
        return asdict(self)


_SECTIONS = {"alignment": AlignmentSection, "policy": PolicySection,
             "controller": ControllerParams, "simulation": SimulationSection,
             "data": DataSection}


def _build_section(cls, payload, name):
    if payload is None:
        return cls()
    if not isinstance(payload, dict):
        raise InvalidInputError(f"config section {name!r} must be an object")
    allowed = {f.name for f in fields(cls)}
    unknown = sorted(set(payload) - allowed)
    if unknown:
        raise InvalidInputError(f"unknown {name} config fields: {unknown}")
    return cls(**payload)


def config_from_dict(payload: dict) -> RunConfig:
    if not isinstance(payload, dict):
        raise InvalidInputError("config must be a JSON object")
    allowed = {"seed"} | set(_SECTIONS)
    unknown = sorted(set(payload) - allowed)
    if unknown:
        raise InvalidInputError(f"unknown config fields: {unknown}")
    seed = payload.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise InvalidInputError("seed must be a nonnegative integer")
    sections = {name: _build_section(cls, payload.get(name), name)
                for name, cls in _SECTIONS.items()}
    return RunConfig(seed=seed, **sections)


def read_config_payload(path) -> dict:
    """Raw config dict from a config file or from a run manifest."""
    payload = json.loads(Path(path).read_text())
    if isinstance(payload, dict) and payload.get("format") == FORMAT_MANIFEST:
        payload = payload.get("config", {})
    if not isinstance(payload, dict):
        raise InvalidInputError(f"{path}: config must be a JSON object")
    return payload


def load_config(path) -> RunConfig:
    """Load a config file; a run manifest is accepted in place of one."""
    return config_from_dict(read_config_payload(path))


def save_config(path, config: RunConfig) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=2,
                                     sort_keys=True) + "\n")


def config_sha256(config: RunConfig) -> str:
    canonical = json.dumps(config.to_dict(), sort_keys=True,
                           separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def apply_overrides(payload: dict, assignments) -> dict:
    """Apply 'section.field=value' command-line overrides onto a config dict.

    Values parse as JSON when possible, otherwise as literal strings.
    """
    out = json.loads(json.dumps(payload))
    for raw in assignments:
        if "=" not in raw:
            raise InvalidInputError(f"override {raw!r} is not KEY=VALUE")
        key, text = raw.split("=", 1)
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        node = out
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise InvalidInputError(f"override {raw!r} descends into a "
                                        "non-object field")
        node[parts[-1]] = value
    return out


# ---------------------------------------------------------------------------
# Bridges into the module-level option types
# ---------------------------------------------------------------------------

def distance_weights(config: RunConfig) -> DistanceWeights:
    return DistanceWeights(config.alignment.rotation_weight,
                           config.alignment.translation_weight)


def learn_config(config: RunConfig) -> LearnConfig:
    p = config.policy
    opt = OptConfig(n_starts=p.opt_starts, seed=config.seed,
                    max_iter=p.opt_max_iter,
                    length_scale_bounds=p.length_scale_bounds,
                    signal_std_bounds=p.signal_std_bounds,
                    noise_std_bounds=p.noise_std_bounds)
    noise_opt = OptConfig(n_starts=p.opt_starts, seed=config.seed + 1,
                          max_iter=p.opt_max_iter)
    hetero = HeteroConfig(iterations=p.hetero_iterations,
                          smoothing_window=p.smoothing_window,
                          opt=opt, noise_opt=noise_opt)
    return LearnConfig(weights=distance_weights(config),
                       measure=config.alignment.measure,
                       grid_size=p.grid_size, hetero=hetero)


def via_strength(config: RunConfig) -> np.ndarray:
    p = config.policy
    return np.array([p.position_strength] * 3 + [p.rotation_strength] * 3)
