"""Shipped experiment presets, named potentials/kernels, and seeded batteries.

All randomness is counter-based: a Philox stream keyed by the config seed
with a distinct counter block per battery name and item index, so every
randomized battery is reproducible from the single seed.
"""

from __future__ import annotations

import copy

import numpy as np

from .errors import ConfigError
from .functionals import (
    EnergyFunctional,
    LinearPotential,
    MeanFieldLearner,
    QuadraticInteraction,
    ZeroEnergy,
)
from .grid_measure import (
    Grid,
    GridMeasure,
    ReferenceMeasure,
    gaussian_measure,
    measure_from_log_density,
    reference_from_potential,
)

__all__ = [
    "PRESETS",
    "BATTERY_COUNTERS",
    "battery_rng",
    "random_warm_start",
    "build_reference",
    "build_functional",
    "build_m0",
    "resolve_preset",
]

BATTERY_COUNTERS = {
    "warmstart": 1,
    "growth": 2,
    "dragomir": 3,
    "defcheck": 4,
    "learner_dataset": 5,
    "perturb": 6,
}

_BASE_GRID = {"x_min": -8.0, "x_max": 8.0, "n": 1025}
_BASE_FLOW = {"integrator": "exponential", "dt": 1e-3, "t_end": 4.0,
              "record_every": 10}
_BASE_CHECKS = ["dissipation", "pli", "quadratic_growth", "kl_bound", "rate",
                "ratio_envelope", "dragomir", "flat_derivative"]
_BASE_PICARD = {"T": 1.0, "n_time": 64, "iters": 8}

PRESETS: dict[str, dict] = {
    "f0-gaussian": {
        "grid": dict(_BASE_GRID),
        "reference_potential": "harmonic",
        "functional": "zero",
        "sigma": 1.0,
        "m0_spec": {"kind": "gaussian", "mean": 1.0, "std": 1.0},
        "flow": dict(_BASE_FLOW),
        "picard": dict(_BASE_PICARD),
        "checks": list(_BASE_CHECKS),
        "seed": 2024,
    },
    "linear-tilt": {
        "grid": dict(_BASE_GRID),
        "reference_potential": "harmonic",
        "functional": "linear:tanh",
        "sigma": 1.0,
        "m0_spec": {"kind": "gaussian", "mean": 1.0, "std": 1.0},
        "flow": dict(_BASE_FLOW),
        "picard": dict(_BASE_PICARD),
        "checks": list(_BASE_CHECKS),
        "seed": 2024,
    },
    "interaction-psd": {
        "grid": dict(_BASE_GRID),
        "reference_potential": "harmonic",
        "functional": "interaction:tanh-psd",
        "sigma": 1.0,
        "m0_spec": {"kind": "gaussian", "mean": 1.0, "std": 1.0},
        "flow": dict(_BASE_FLOW),
        "picard": dict(_BASE_PICARD),
        "checks": list(_BASE_CHECKS),
        "seed": 2024,
    },
    "learner-toy": {
        "grid": dict(_BASE_GRID),
        "reference_potential": "harmonic",
        "functional": "learner:7",
        "sigma": 1.0,
        "m0_spec": {"kind": "gaussian", "mean": 1.0, "std": 1.0},
        "flow": dict(_BASE_FLOW),
        "picard": dict(_BASE_PICARD),
        "checks": list(_BASE_CHECKS),
        "seed": 2024,
    },
}


def battery_rng(seed: int, battery: str, index: int = 0) -> np.random.Generator:
    """Independent Philox stream for (seed, battery, index)."""
    counter = [index, BATTERY_COUNTERS[battery], 0, 0]
    return np.random.Generator(np.random.Philox(key=seed, counter=counter))


def random_warm_start(grid: Grid, pi: GridMeasure,
                      rng: np.random.Generator,
                      amplitude: float = 0.4) -> GridMeasure:
    """Strictly positive perturbation m propto pi e^{u} with bounded smooth u.

    |u| <= 2*amplitude, so the density ratio against pi stays within
    e^{+-(2 amplitude + normalization shift)}.
    """
    c1, c2 = rng.uniform(-amplitude, amplitude, size=2)
    omega = rng.uniform(0.5, 2.0)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    u = c1 * np.tanh(grid.x) + c2 * np.cos(omega * grid.x + phase)
    return measure_from_log_density(grid, pi.log_density + u)


_POTENTIALS = {
    "harmonic": lambda x: 0.5 * x * x,
}

_LINEAR_FUNCS = {
    "tanh": np.tanh,
    "identity": lambda x: x,
}

_KERNELS = {
    "tanh-psd": lambda x: 0.1 * np.outer(np.tanh(x), np.tanh(x)),
    "xy": lambda x: np.outer(x, x),
}


def build_reference(grid: Grid, name: str) -> ReferenceMeasure:
    if name not in _POTENTIALS:
        raise ConfigError(f"unknown reference potential {name!r}; "
                          f"known: {sorted(_POTENTIALS)}")
    return reference_from_potential(grid, _POTENTIALS[name](grid.x))


def _learner_dataset(grid: Grid, dataset_seed: int,
                     n_data: int = 16) -> tuple[np.ndarray, np.ndarray]:
    rng = battery_rng(dataset_seed, "learner_dataset")
    slopes = rng.uniform(0.5, 2.0, size=n_data) * rng.choice([-1.0, 1.0],
                                                             size=n_data)
    offsets = rng.uniform(-2.0, 2.0, size=n_data)
    features = np.tanh(slopes[:, None] * grid.x[None, :] + offsets[:, None])
    teacher = gaussian_measure(grid, 0.5, 1.0)
    clean = features @ (grid.weights * teacher.density)
    targets = clean + 0.05 * rng.standard_normal(n_data)
    return features, targets


def build_functional(grid: Grid, spec: str) -> EnergyFunctional:
    """Functional from a config name: zero | linear:<f> | interaction:<K> |
    learner:<dataset-seed>."""
    if spec == "zero":
        return ZeroEnergy(grid)
    kind, _, arg = spec.partition(":")
    if kind == "linear":
        if arg not in _LINEAR_FUNCS:
            raise ConfigError(f"unknown linear potential {arg!r}; "
                              f"known: {sorted(_LINEAR_FUNCS)}")
        return LinearPotential(grid, _LINEAR_FUNCS[arg](grid.x))
    if kind == "interaction":
        if arg not in _KERNELS:
            raise ConfigError(f"unknown interaction kernel {arg!r}; "
                              f"known: {sorted(_KERNELS)}")
        return QuadraticInteraction(grid, _KERNELS[arg](grid.x))
    if kind == "learner":
        try:
            dataset_seed = int(arg)
        except ValueError:
            raise ConfigError(f"learner dataset seed must be an integer, "
                              f"got {arg!r}") from None
        features, targets = _learner_dataset(grid, dataset_seed)
        return MeanFieldLearner(grid, features, targets)
    raise ConfigError(f"unknown functional spec {spec!r}")


def build_m0(grid: Grid, pi: GridMeasure, m0_spec: dict,
             seed: int) -> GridMeasure:
    kind = m0_spec.get("kind")
    if kind == "gaussian":
        return gaussian_measure(grid, float(m0_spec["mean"]),
                                float(m0_spec["std"]))
    if kind == "warmstart_random":
        rng = battery_rng(seed, "warmstart", int(m0_spec.get("index", 0)))
        return random_warm_start(grid, pi,
                                 rng, float(m0_spec.get("amplitude", 0.4)))
    raise ConfigError(f"unknown m0 kind {kind!r}")


def resolve_preset(raw: dict) -> dict:
    """Merge a raw config dict over its preset (deep for nested blocks)."""
    name = raw.get("preset")
    if name is None:
        base: dict = {}
    elif name in PRESETS:
        base = copy.deepcopy(PRESETS[name])
    else:
        raise ConfigError(f"unknown preset {name!r}; known: {sorted(PRESETS)}")
    merged = base
    for key, value in raw.items():
        if key == "preset":
            merged["preset"] = value
            continue
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = {**merged[key], **value}
        else:
            merged[key] = copy.deepcopy(value)
    return merged
