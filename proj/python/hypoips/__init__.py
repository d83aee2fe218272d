"""Simulation and contrast estimation for weakly interacting hypoelliptic particle systems.

Configs are plain dicts with the same keys as the command-line JSON configs.
"""

import json
from pathlib import Path

import numpy as np

from . import _core
from ._core import ConfigError, Error, ShapeError

__all__ = [
    "ConfigError",
    "Error",
    "ShapeError",
    "contrast",
    "estimate",
    "model_ids",
    "model_info",
    "precision",
    "resolve_config",
    "run",
    "simulate",
]


def _text(config):
    return json.dumps(config)


def model_ids():
    return list(_core.model_ids())


def model_info(model_id):
    return dict(_core.model_info(model_id))


def resolve_config(config):
    """The config with every default filled in."""
    return json.loads(_core.resolve_config(_text(config)))


def simulate(config, replicate=0):
    """Observed path array of shape (n_obs + 1, n_particles, observed coords)."""
    return _core.simulate(_text(config), replicate)


def contrast(config, data, theta, method="LG", mode="complete"):
    """Objective value at theta: the LG/Euler contrast, or the partial-data criterion."""
    return _core.contrast(_text(config), np.asarray(data, dtype=float), list(theta), method, mode)


def estimate(config, data, method="LG", mode="complete"):
    return dict(_core.estimate(_text(config), np.asarray(data, dtype=float), method, mode))


def precision(config):
    """Plug-in asymptotic precision matrices at the config's true parameter."""
    return dict(_core.precision(_text(config)))


def run(command, config, out):
    """Same as the command-line subcommand; returns attempted/failed counts."""
    Path(out).mkdir(parents=True, exist_ok=True)
    return dict(_core.run(command, _text(config), str(out)))
