"""Discrete mass distribution of a swarm over sample points.

The mass of sample point k is the Gaussian-kernel density of the robots
around it, averaged over the swarm:

    P_k = (1/n) * sum_i exp(-beta * ||q_k - p_i||^2)

Two scalar metrics score a configuration against the sample points: a
mass-maximization term and a mass-uniformity term. Their sum has the
closed form -(1/m) * sum_k ln P_k - (1/2) ln m, and its gradient with
respect to a single robot position is available analytically.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .shapes import WorldSampleSet

# Masses are plain float arrays of length m; all entries must be positive
# wherever a metric or gradient is evaluated.
MassVector = np.ndarray


@dataclass(frozen=True)
class Kernel:
    """Gaussian kernel with bandwidth beta > 0 (units 1/m^2)."""

    beta: float

    def __post_init__(self):
        if not (self.beta > 0.0 and np.isfinite(self.beta)):
            raise ValueError(f"kernel bandwidth must be positive and finite, got {self.beta}")


def kernel_matrix(positions: np.ndarray, points: np.ndarray, kernel: Kernel) -> np.ndarray:
    """exp(-beta ||p_i - q_k||^2) for every robot i and sample point k.

    `points` may be shared, shape (m, d), giving an (n, m) result, or
    per-robot, shape (n, m, d). The summation order is fixed (robot index
    ascending) so results are bit-reproducible.
    """
    pos = np.asarray(positions, dtype=float)
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 2:
        diff = pos[:, None, :] - pts[None, :, :]
    else:
        diff = pos[:, None, :] - pts
    d2 = (diff * diff).sum(axis=-1)
    return np.exp(-kernel.beta * d2)


def mass_at(positions: np.ndarray, q_k: np.ndarray, kernel: Kernel) -> float:
    """Mass of a single sample point at world position q_k."""
    pos = np.atleast_2d(np.asarray(positions, dtype=float))
    if pos.shape[0] == 0:
        raise ValueError("mass is undefined for an empty swarm (n = 0)")
    diff = pos - np.asarray(q_k, dtype=float)
    d2 = (diff * diff).sum(axis=-1)
    return float(np.exp(-kernel.beta * d2).mean())


def mass_vector(positions: np.ndarray, world_set: WorldSampleSet, kernel: Kernel) -> MassVector:
    """Masses of all sample points of a world-frame set."""
    pos = np.atleast_2d(np.asarray(positions, dtype=float))
    if pos.shape[0] == 0:
        raise ValueError("mass is undefined for an empty swarm (n = 0)")
    return kernel_matrix(pos, world_set.points, kernel).mean(axis=0)


def _require_positive(values: np.ndarray) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.shape[0] < 1:
        raise ValueError("mass vector must be a nonempty 1-D array")
    bad = np.flatnonzero(~(v > 0.0))
    if bad.size:
        raise ValueError(f"mass must be positive; offending sample point indices: {bad.tolist()}")
    return v


def f_max(masses: MassVector) -> float:
    """Mass-maximization metric: -ln of the Euclidean norm of the mass vector."""
    v = _require_positive(masses)
    return float(-0.5 * np.log((v * v).sum()))


def f_uni(masses: MassVector) -> float:
    """Mass-uniformity metric: zero iff all masses are equal, positive otherwise."""
    v = _require_positive(masses)
    m = v.shape[0]
    ratio = m * v * v / (v * v).sum()
    return float(-0.5 * np.log(ratio).mean())


def f_total(masses: MassVector) -> float:
    """Combined similarity error: f_max + f_uni."""
    return f_max(masses) + f_uni(masses)


def grad_f_robot(
    positions: np.ndarray,
    i: int,
    world_set: WorldSampleSet,
    masses: MassVector,
    kernel: Kernel,
) -> np.ndarray:
    """Gradient of f_total with respect to robot i's position.

    (2 beta / (m n)) * sum_k P_k^-1 exp(-beta ||p_i - q_k||^2) (p_i - q_k)
    """
    pos = np.atleast_2d(np.asarray(positions, dtype=float))
    v = _require_positive(masses)
    n = pos.shape[0]
    q = world_set.points
    m = q.shape[0]
    diff = pos[i] - q  # (m, d)
    w = np.exp(-kernel.beta * (diff * diff).sum(axis=-1)) / v
    return (2.0 * kernel.beta / (m * n)) * (w[:, None] * diff).sum(axis=0)
