"""Poisson interferer fields on a finite disk around the typical receiver."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .params import ParameterError

DEFAULT_MEAN_NODES = 200


@dataclass(frozen=True)
class PointProcessSample:
    """One interferer realization, distances sorted ascending."""

    intensity: float
    disk_radius: float
    distances: np.ndarray

    @property
    def count(self) -> int:
        return int(self.distances.shape[0])


def disk_radius(intensity: float, mean_nodes: float = DEFAULT_MEAN_NODES) -> float:
    """Radius of the disk holding ``mean_nodes`` transmitters on average."""
    if not intensity > 0:
        raise ParameterError(f"intensity must be positive, got {intensity}")
    if not mean_nodes > 0:
        raise ParameterError(f"mean_nodes must be positive, got {mean_nodes}")
    return math.sqrt(mean_nodes / (math.pi * intensity))


def _unit_radii(rng: np.random.Generator, size) -> np.ndarray:
    # 1 - U lies in (0, 1], so no interferer sits on the receiver
    return np.sqrt(1.0 - rng.random(size))


def sample_interferers(intensity: float, mean_nodes: float = DEFAULT_MEAN_NODES,
                       rng: np.random.Generator | None = None) -> PointProcessSample:
    """Draw a Poisson count of transmitters uniformly on the disk.

    Only radial distances matter to the typical receiver at the center, so
    angles are not generated.
    """
    rng = np.random.default_rng() if rng is None else rng
    radius = disk_radius(intensity, mean_nodes)
    count = rng.poisson(mean_nodes)
    distances = np.sort(radius * _unit_radii(rng, count))
    return PointProcessSample(intensity, radius, distances)


def sample_interferer_batch(intensity: float, mean_nodes: float, trials: int,
                            rng: np.random.Generator):
    """Many realizations at once, padded with ``inf`` to a rectangle.

    Returns
    -------
    distances : ndarray, shape (trials, max_count)
        Row-wise sorted distances; padding entries are ``inf``.
    counts : ndarray of int, shape (trials,)
    """
    radius = disk_radius(intensity, mean_nodes)
    counts = rng.poisson(mean_nodes, size=trials)
    width = int(counts.max()) if trials else 0
    radii = radius * _unit_radii(rng, (trials, width))
    radii[np.arange(width)[None, :] >= counts[:, None]] = np.inf
    radii.sort(axis=1)
    return radii, counts
