"""Decentralized protocols: proximity graph, pose negotiation, mass estimation.

Both consensus layers use signed couplings over the time-varying proximity
graph and are advanced by explicit Euler on a synchronous snapshot: every
robot's update is computed from the previous state, then committed. With
sign(0) = 0 the couplings are exactly antisymmetric, so the per-component
mean of the negotiation variables and the zero sum of the estimator
internal states are preserved by every step.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mass import Kernel, kernel_matrix
from .shapes import WorldSampleSet


@dataclass
class CommGraph:
    """Undirected proximity graph over robot indices 0..n-1."""

    n: int
    adjacency: np.ndarray          # (n, n) bool, symmetric, zero diagonal
    edges: np.ndarray              # (E, 2) int with edges[:, 0] < edges[:, 1]
    _incidence: np.ndarray | None = field(default=None, repr=False, compare=False)

    def neighbors(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.adjacency[i])

    def signed_incidence(self) -> np.ndarray:
        """(n, E) matrix with +1 at the lower-index endpoint, -1 at the other."""
        if self._incidence is None:
            B = np.zeros((self.n, self.edges.shape[0]))
            if self.edges.shape[0]:
                cols = np.arange(self.edges.shape[0])
                B[self.edges[:, 0], cols] = 1.0
                B[self.edges[:, 1], cols] = -1.0
            self._incidence = B
        return self._incidence


def build_graph(positions: np.ndarray, r_sense: float) -> CommGraph:
    """Edges between every robot pair within r_sense (inclusive)."""
    if not (r_sense > 0.0):
        raise ValueError(f"r_sense must be positive, got {r_sense}")
    pos = np.atleast_2d(np.asarray(positions, dtype=float))
    n = pos.shape[0]
    diff = pos[:, None, :] - pos[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=-1))
    adj = dist <= r_sense
    np.fill_diagonal(adj, False)
    iu = np.triu_indices(n, k=1)
    mask = adj[iu]
    edges = np.column_stack([iu[0][mask], iu[1][mask]]).astype(int)
    return CommGraph(n=n, adjacency=adj, edges=edges)


def is_connected(g: CommGraph) -> bool:
    """Breadth-first reachability from robot 0 (vectorized frontier expansion)."""
    if g.n <= 1:
        return True
    reached = np.zeros(g.n, dtype=bool)
    reached[0] = True
    while True:
        fresh = g.adjacency[reached].any(axis=0) & ~reached
        if not fresh.any():
            return bool(reached.all())
        reached |= fresh


@dataclass
class NegotiationState:
    """Per-robot shape-pose interpretations and the protocol gains."""

    q_oi: np.ndarray      # (n, d) interpreted shape positions
    theta_oi: np.ndarray  # (n,) interpreted shape orientations (radians)
    c1: float
    c2: float
    alpha: float

    def __post_init__(self):
        if not (self.c1 > 0.0 and self.c2 > 0.0):
            raise ValueError("negotiation gains c1, c2 must be positive")
        if not (0.0 < self.alpha < 1.0):
            raise ValueError(f"negotiation exponent alpha must lie in (0, 1), got {self.alpha}")


def _signed_power_coupling(values: np.ndarray, adjacency: np.ndarray, alpha: float) -> np.ndarray:
    """sum_j in N_i sign(x_i - x_j) |x_i - x_j|^alpha, componentwise."""
    diff = values[:, None, ...] - values[None, :, ...]
    coupling = np.sign(diff) * np.abs(diff) ** alpha
    if coupling.ndim == 3:
        mask = adjacency[:, :, None]
    else:
        mask = adjacency
    return np.where(mask, coupling, 0.0).sum(axis=1)


def negotiation_step(state: NegotiationState, g: CommGraph, dt: float) -> NegotiationState:
    """One explicit-Euler round of the finite-time pose consensus protocol."""
    if not (dt > 0.0):
        raise ValueError(f"dt must be positive, got {dt}")
    q_new = state.q_oi - dt * state.c1 * _signed_power_coupling(state.q_oi, g.adjacency, state.alpha)
    th_new = state.theta_oi - dt * state.c2 * _signed_power_coupling(
        state.theta_oi, g.adjacency, state.alpha
    )
    return NegotiationState(q_oi=q_new, theta_oi=th_new, c1=state.c1, c2=state.c2, alpha=state.alpha)


def negotiation_spread(state: NegotiationState) -> tuple[float, float]:
    """Max per-component spread of the position and orientation interpretations."""
    q_spread = float((state.q_oi.max(axis=0) - state.q_oi.min(axis=0)).max())
    th_spread = float(state.theta_oi.max() - state.theta_oi.min())
    return q_spread, th_spread


def negotiation_converged(state: NegotiationState, tol: float) -> bool:
    q_spread, th_spread = negotiation_spread(state)
    return q_spread < tol and th_spread < tol


def min_gamma(n: int, kernel: Kernel, v_max: float) -> float:
    """Smallest estimator gain with guaranteed tracking for speeds up to v_max.

    (n - 1) * sqrt(2 beta / e) * v_max; the per-robot reference signal slew
    is bounded by sqrt(2 beta / e) * v_max because x e^(-beta x^2) peaks at
    1/sqrt(2 beta e).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if v_max < 0.0:
        raise ValueError("v_max must be nonnegative")
    return float((n - 1) * np.sqrt(2.0 * kernel.beta / np.e) * v_max)


@dataclass
class EstimatorState:
    """Consensus mass-estimator state for all robots and sample points.

    p_hat[i, k] = ref[i, k] + z[i, k] where ref is the robot's own kernel
    value for point k; sum_i z[i, k] = 0 is preserved by every synchronous
    step, so the swarm mean of the estimates always equals the true mass.
    """

    z: np.ndarray      # (n, m) internal states, start at zero
    p_hat: np.ndarray  # (n, m) current estimates
    gamma: float

    def __post_init__(self):
        if not (self.gamma > 0.0):
            raise ValueError(f"estimator gain gamma must be positive, got {self.gamma}")

    @classmethod
    def fresh(cls, refs: np.ndarray, gamma: float) -> "EstimatorState":
        refs = np.asarray(refs, dtype=float)
        return cls(z=np.zeros_like(refs), p_hat=refs.copy(), gamma=gamma)


def estimator_step_refs(
    est: EstimatorState, refs: np.ndarray, g: CommGraph, dt: float
) -> EstimatorState:
    """Synchronous estimator update against explicit reference values (n, m).

    The signed coupling is evaluated on the pre-step estimate snapshot; the
    per-edge +/-1 contributions are accumulated through a signed incidence
    product, which keeps the column sums of z exactly zero.
    """
    if not (dt > 0.0):
        raise ValueError(f"dt must be positive, got {dt}")
    p_pre = refs + est.z  # definitional estimates at the current references
    if g.edges.shape[0]:
        a, b = g.edges[:, 0], g.edges[:, 1]
        s = np.sign(p_pre[b] - p_pre[a])   # (E, m)
        counts = g.signed_incidence() @ s  # robot a gets +s, robot b gets -s
    else:
        counts = np.zeros_like(est.z)
    z_new = est.z + (est.gamma * dt) * counts
    return EstimatorState(z=z_new, p_hat=refs + z_new, gamma=est.gamma)


def estimator_refs(
    positions: np.ndarray, world_set: WorldSampleSet, kernel: Kernel
) -> np.ndarray:
    """Per-robot reference signals exp(-beta ||p_i - q_k||^2)."""
    return kernel_matrix(np.atleast_2d(np.asarray(positions, dtype=float)), world_set.points, kernel)


def estimator_step(
    est: EstimatorState,
    positions: np.ndarray,
    world_set: WorldSampleSet,
    kernel: Kernel,
    g: CommGraph,
    dt: float,
) -> EstimatorState:
    """One synchronous estimator round against a shared world sample set."""
    return estimator_step_refs(est, estimator_refs(positions, world_set, kernel), g, dt)


def reset_estimator(
    est: EstimatorState,
    positions: np.ndarray,
    world_set: WorldSampleSet,
    kernel: Kernel,
) -> EstimatorState:
    """Zero the internal states, restoring the error-free initial condition."""
    refs = estimator_refs(positions, world_set, kernel)
    return EstimatorState.fresh(refs, est.gamma)
