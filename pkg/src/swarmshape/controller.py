"""Per-robot velocity controller: meanshift command plus conflict-free repulsion.

The meanshift command pulls a robot toward a weighted mean of the sample
points, weighting each point by closeness and by the inverse of its
estimated mass. The repulsion command pushes away from robots inside the
avoidance range; its self-tuning gain guarantees the combined command never
opposes the meanshift direction beyond the conflict-free margin

    (v_ms + v_cv)^T v_ms >= eps ||v_ms||^2.

The final command is the Euclidean projection of the sum onto the speed
ball of radius v_max.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mass import Kernel
from .shapes import WorldSampleSet

# Floor used for estimate inversion when defensive mode is enabled.
DEFENSIVE_MASS_FLOOR = 1e-300


@dataclass(frozen=True)
class ControlParams:
    """Controller gains and kinematic limits."""

    sigma1: float        # meanshift gain (m/s scale)
    sigma2: float        # repulsion gain
    eps: float           # shared regularizer / conflict-free margin, in (0, 1)
    r_avoid: float       # collision-avoidance range, meters
    v_max: float         # speed limit, m/s

    def __post_init__(self):
        if not (self.sigma1 > 0.0 and self.sigma2 > 0.0):
            raise ValueError("sigma1 and sigma2 must be positive")
        if not (0.0 < self.eps < 1.0):
            raise ValueError(f"eps must lie in (0, 1), got {self.eps}")
        if not (self.r_avoid > 0.0):
            raise ValueError(f"r_avoid must be positive, got {self.r_avoid}")
        if not (self.v_max > 0.0):
            raise ValueError(f"v_max must be positive, got {self.v_max}")


@dataclass(frozen=True)
class VelocityCommand:
    """The two command components and their saturated sum."""

    v_ms: np.ndarray
    v_cv: np.ndarray
    v: np.ndarray


def sat(v: np.ndarray, v_max: float) -> np.ndarray:
    """Euclidean projection onto the closed ball of radius v_max."""
    norm = float(np.linalg.norm(v))
    if norm > v_max:
        return v * (v_max / norm)
    return v


def meanshift_command(
    p_i: np.ndarray,
    world_set: WorldSampleSet,
    p_hat_i: np.ndarray,
    kernel: Kernel,
    params: ControlParams,
    defensive: bool = False,
    diagnostics: dict | None = None,
) -> np.ndarray:
    """Weighted-mean pull toward the sample points.

    psi_k = p_hat_k^-1 exp(-beta ||q_k - p_i||^2);
    v_ms = (sigma1 / m) * sum_k psi_k (q_k - p_i) / sum_k psi_k.

    Estimates must be positive; in defensive mode nonpositive entries are
    floored at a tiny constant instead of raising.
    """
    p = np.asarray(p_i, dtype=float)
    q = world_set.points
    est = np.asarray(p_hat_i, dtype=float)
    if defensive:
        est = np.maximum(est, DEFENSIVE_MASS_FLOOR)
    else:
        bad = np.flatnonzero(~(est > 0.0))
        if bad.size:
            raise ValueError(
                f"nonpositive mass estimate for sample point indices {bad.tolist()}"
            )
    diff = q - p  # (m, d)
    omega = np.exp(-kernel.beta * (diff * diff).sum(axis=-1))
    psi = omega / est
    total = psi.sum()
    if diagnostics is not None:
        diagnostics["kernel_evals"] = diagnostics.get("kernel_evals", 0) + q.shape[0]
    if total == 0.0:
        raise ValueError("kernel weights underflowed to zero for every sample point")
    return (params.sigma1 / q.shape[0]) * (psi[:, None] * diff).sum(axis=0) / total


def repulsion_raw(
    p_i: np.ndarray,
    neighbor_positions: np.ndarray,
    params: ControlParams,
    diagnostics: dict | None = None,
) -> np.ndarray:
    """Unscaled repulsion from neighbors within r_avoid.

    sigma2 * sum_j ((r_avoid - d_ij) / (d_ij + eps)) (p_i - p_j) over
    neighbors with d_ij <= r_avoid. A coincident neighbor contributes a zero
    vector (its direction is undefined) and is counted in the diagnostics.
    """
    p = np.asarray(p_i, dtype=float)
    nbrs = np.atleast_2d(np.asarray(neighbor_positions, dtype=float))
    if nbrs.size == 0:
        return np.zeros_like(p)
    diff = p - nbrs
    dist = np.sqrt((diff * diff).sum(axis=-1))
    within = dist <= params.r_avoid
    if diagnostics is not None:
        coincident = int(np.sum(within & (dist == 0.0)))
        if coincident:
            diagnostics["coincident_pairs"] = diagnostics.get("coincident_pairs", 0) + coincident
        diagnostics["repulsion_terms"] = diagnostics.get("repulsion_terms", 0) + int(within.sum())
    if not np.any(within):
        return np.zeros_like(p)
    coeff = np.where(within, (params.r_avoid - dist) / (dist + params.eps), 0.0)
    return params.sigma2 * (coeff[:, None] * diff).sum(axis=0)


def kappa2(v_ms: np.ndarray, v_cv_raw: np.ndarray, params: ControlParams) -> float:
    """Self-tuning repulsion gain in [0, 1] enforcing the conflict-free margin."""
    ms2 = float(v_ms @ v_ms)
    phi = min(ms2 / params.eps, 1.0)
    dot = float(v_ms @ v_cv_raw)
    if dot >= 0.0:
        return phi
    return phi * min(-(1.0 - params.eps) * ms2 / dot, 1.0)


def control_step(
    p_i: np.ndarray,
    world_set: WorldSampleSet,
    p_hat_i: np.ndarray,
    neighbor_positions: np.ndarray,
    kernel: Kernel,
    params: ControlParams,
    defensive: bool = False,
    diagnostics: dict | None = None,
) -> VelocityCommand:
    """Full per-robot command: meanshift + gated repulsion, saturated."""
    v_ms = meanshift_command(p_i, world_set, p_hat_i, kernel, params, defensive, diagnostics)
    v_cv_raw = repulsion_raw(p_i, neighbor_positions, params, diagnostics)
    v_cv = kappa2(v_ms, v_cv_raw, params) * v_cv_raw
    return VelocityCommand(v_ms=v_ms, v_cv=v_cv, v=sat(v_ms + v_cv, params.v_max))


def control_step_batch(
    positions: np.ndarray,
    world_points: np.ndarray,
    p_hat: np.ndarray,
    adjacency: np.ndarray,
    kernel: Kernel,
    params: ControlParams,
    defensive: bool = False,
    diagnostics: dict | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized commands for the whole swarm; used by the simulation engine.

    `world_points` is (m, d) for a shared sample set or (n, m, d) for
    per-robot interpretations. Agrees with per-robot control_step to within
    floating-point reduction order.
    """
    pos = np.asarray(positions, dtype=float)
    n = pos.shape[0]
    est = np.asarray(p_hat, dtype=float)
    if defensive:
        est = np.maximum(est, DEFENSIVE_MASS_FLOOR)
    else:
        bad = np.argwhere(~(est > 0.0))
        if bad.size:
            i, k = bad[0]
            raise ValueError(
                f"nonpositive mass estimate for robot {i}, sample point {k}"
            )
    if world_points.ndim == 2:
        diff = world_points[None, :, :] - pos[:, None, :]  # (n, m, d)
    else:
        diff = world_points - pos[:, None, :]
    m = diff.shape[1]
    omega = np.exp(-kernel.beta * (diff * diff).sum(axis=-1))  # (n, m)
    psi = omega / est
    totals = psi.sum(axis=1)
    if np.any(totals == 0.0):
        raise ValueError("kernel weights underflowed to zero for every sample point")
    if world_points.ndim == 2:
        # sum_k psi_k (q_k - p_i) = psi @ Q - (sum_k psi_k) p_i, one matmul
        weighted = psi @ world_points - totals[:, None] * pos
    else:
        weighted = (psi[:, :, None] * diff).sum(axis=1)
    v_ms = (params.sigma1 / m) * weighted / totals[:, None]

    pdiff = pos[:, None, :] - pos[None, :, :]
    pdist = np.sqrt((pdiff * pdiff).sum(axis=-1))
    within = adjacency & (pdist <= params.r_avoid)
    if diagnostics is not None:
        coincident = int(np.sum(within & (pdist == 0.0)) // 2)
        if coincident:
            diagnostics["coincident_pairs"] = diagnostics.get("coincident_pairs", 0) + coincident
    coeff = np.where(within, (params.r_avoid - pdist) / (pdist + params.eps), 0.0)
    v_cv_raw = params.sigma2 * (coeff[:, :, None] * pdiff).sum(axis=1)

    ms2 = (v_ms * v_ms).sum(axis=1)
    phi = np.minimum(ms2 / params.eps, 1.0)
    dots = (v_ms * v_cv_raw).sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        brake = np.where(dots < 0.0, -(1.0 - params.eps) * ms2 / np.where(dots < 0.0, dots, 1.0), 1.0)
    k2 = phi * np.minimum(brake, 1.0)
    v_cv = k2[:, None] * v_cv_raw

    total = v_ms + v_cv
    norms = np.sqrt((total * total).sum(axis=1))
    scale = np.where(norms > params.v_max, params.v_max / np.where(norms > 0, norms, 1.0), 1.0)
    v = total * scale[:, None]
    return v_ms, v_cv, v
