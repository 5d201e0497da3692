"""Kernel bandwidth selection by deterministic annealing.

Starting from a small bandwidth, robots are relaxed to an equilibrium
placement by alternating an association update (E-step) and a position
update (M-step); the bandwidth is grown by a fixed cooling factor until the
converged placement keeps every robot pair at least d_min apart.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AnnealConfig:
    beta_initial: float = 0.01
    beta_final: float = 150.0
    alpha_c: float = 1.025      # cooling factor, > 1
    epsilon_a: float = 1e-3     # inner-loop position-change tolerance
    d_min: float = 0.0          # required minimum inter-robot distance
    seed: int = 0               # seeds the symmetry-breaking perturbation
    inner_max_iter: int = 100_000

    def __post_init__(self):
        if not (0.0 < self.beta_initial < self.beta_final):
            raise ValueError("need 0 < beta_initial < beta_final")
        if not (self.alpha_c > 1.0):
            raise ValueError("cooling factor alpha_c must exceed 1")
        if not (self.epsilon_a > 0.0):
            raise ValueError("epsilon_a must be positive")
        if self.d_min < 0.0:
            raise ValueError("d_min must be nonnegative")


@dataclass(frozen=True)
class AnnealResult:
    beta: float
    positions: np.ndarray  # (n, d) converged placement at the returned beta
    accepted: bool         # False when the schedule was exhausted
    rounds: int            # bandwidth values tried


def e_step(robot_positions: np.ndarray, sample_points: np.ndarray, beta: float) -> np.ndarray:
    """Association probabilities A[k, i] of sample point k to robot i.

    Rows are normalized kernel weights; a row whose weights all underflow is
    renormalized to the uniform distribution (with a warning).
    """
    p = np.atleast_2d(np.asarray(robot_positions, dtype=float))
    q = np.atleast_2d(np.asarray(sample_points, dtype=float))
    n = p.shape[0]
    diff = q[:, None, :] - p[None, :, :]  # (m, n, d)
    w = np.exp(-beta * (diff * diff).sum(axis=-1))
    totals = w.sum(axis=1)
    dead = totals == 0.0
    if np.any(dead):
        logger.warning(
            "e_step: %d sample point rows underflowed; renormalizing uniformly", int(dead.sum())
        )
        w[dead] = 1.0
        totals = w.sum(axis=1)
    return w / totals[:, None]


def m_step(sample_points: np.ndarray, associations: np.ndarray) -> np.ndarray:
    """Robot positions as association-weighted means of the sample points."""
    q = np.atleast_2d(np.asarray(sample_points, dtype=float))
    a = np.asarray(associations, dtype=float)
    weights = a.sum(axis=0)  # (n,)
    return (a.T @ q) / weights[:, None]


def _min_pairwise(p: np.ndarray) -> float:
    if p.shape[0] < 2:
        return np.inf
    diff = p[:, None, :] - p[None, :, :]
    d2 = (diff * diff).sum(axis=-1)
    iu = np.triu_indices(p.shape[0], k=1)
    return float(np.sqrt(d2[iu].min()))


def _relax(
    positions: np.ndarray, sample_points: np.ndarray, beta: float, config: AnnealConfig
) -> np.ndarray:
    """Alternate E/M until the largest position change drops below epsilon_a."""
    p = positions
    for _ in range(config.inner_max_iter):
        a = e_step(p, sample_points, beta)
        p_new = m_step(sample_points, a)
        change = float(np.sqrt(((p_new - p) ** 2).sum(axis=1)).max())
        p = p_new
        if change < config.epsilon_a:
            return p
    logger.warning("annealing inner loop hit the iteration cap at beta=%g", beta)
    return p


def anneal_beta(sample_points, n: int, config: AnnealConfig | None = None) -> AnnealResult:
    """Grow the bandwidth until the relaxed placement respects d_min.

    All robots start at the sample centroid. Identical starting positions
    are an invariant of the E/M iteration, so a tiny seeded perturbation is
    applied at the start of every round; without it the contraction at small
    bandwidths drives the spread to exact zero and no split can ever occur.
    Returns the first accepted bandwidth, or beta_final (flagged) when the
    schedule is exhausted.
    """
    config = config or AnnealConfig()
    q = np.atleast_2d(np.asarray(sample_points, dtype=float))
    if n < 1:
        raise ValueError("n must be >= 1")
    if q.shape[0] < 1:
        raise ValueError("need at least one sample point")
    rng = np.random.default_rng(config.seed)
    scale = _min_pairwise(q)
    if not np.isfinite(scale):
        scale = 1.0
    jitter = 1e-6 * scale
    centroid = q.mean(axis=0)
    p = np.tile(centroid, (n, 1))

    beta = config.beta_initial
    rounds = 0
    while True:
        rounds += 1
        p = p + rng.uniform(-jitter, jitter, size=p.shape)
        p = _relax(p, q, beta, config)
        if _min_pairwise(p) >= config.d_min:
            return AnnealResult(beta=beta, positions=p, accepted=True, rounds=rounds)
        beta = config.alpha_c * beta
        if beta >= config.beta_final:
            logger.warning(
                "annealing schedule exhausted without reaching d_min=%g", config.d_min
            )
            p = p + rng.uniform(-jitter, jitter, size=p.shape)
            p = _relax(p, q, config.beta_final, config)
            return AnnealResult(
                beta=config.beta_final, positions=p, accepted=False, rounds=rounds + 1
            )
