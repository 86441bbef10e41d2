"""Bundled demonstration systems and data files."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np

from .network import AssembledNetwork, network_from_directions

__all__ = ["DEMO_A", "DEMO_DIRECTIONS", "demo_network", "data_path", "resolve_path"]

# Shared three-state nominal map.
DEMO_A = np.array([
    [-0.07, 1.00, -0.23],
    [0.10, 0.70, -0.10],
    [-0.17, 1.00, -0.13],
])

# (B, C) pairs of the two uncertain directions for each demo.
DEMO_DIRECTIONS = {
    1: (
        ([-1.0, -1.0, 0.0], [1.0, 1.0, 0.0]),
        ([-1.0, 1.0, 0.0], [-5.0, -0.1, 0.01]),
    ),
    2: (
        ([1.0, 0.0, -1.0], [-1.0, 1.0, 1.0]),
        ([-1.0, -1.0, 0.0], [-5.0, -1.0, 1.0]),
    ),
}


def demo_network(number: int, sigmas=(1.0, 1.0)) -> AssembledNetwork:
    """Three-state system with two uncertain rank-one links ``L1``, ``L2``."""
    if number not in DEMO_DIRECTIONS:
        raise ValueError(f"unknown example {number}; choose from {sorted(DEMO_DIRECTIONS)}")
    dirs = [(b, c, s) for (b, c), s in zip(DEMO_DIRECTIONS[number], sigmas)]
    return network_from_directions(DEMO_A, dirs, ["L1", "L2"])


_BUILTIN = {"case39": "case39.m", "green": "green.json", "red": "red.json"}


def data_path(name: str) -> Path:
    if name not in _BUILTIN:
        raise FileNotFoundError(f"no bundled data named {name!r}")
    return Path(str(resources.files("gridsens") / "data" / _BUILTIN[name]))


def resolve_path(location: str) -> Path:
    """``builtin:<name>`` maps to bundled data; anything else is a file path."""
    if location.startswith("builtin:"):
        return data_path(location.split(":", 1)[1])
    return Path(location)
