"""Closed-loop swarm simulation: graph, negotiation, estimation, control, metrics.

Each control period advances one synchronous round: rebuild the proximity
graph, advance the pose negotiation until it converges (the consensus pose
is then latched for the rest of the run), run the mass-estimator substeps,
compute every robot's velocity command from its own estimates, and
integrate positions by explicit Euler. Robot add/remove events are applied
at step boundaries and reset the estimator's internal state.

Everything is driven by a seeded generator with fixed iteration orders, so
identical inputs produce identical logs.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .controller import ControlParams, control_step_batch
from .errors import ConfigError
from .mass import Kernel, f_max, f_uni, kernel_matrix
from .protocols import (
    CommGraph,
    EstimatorState,
    NegotiationState,
    build_graph,
    estimator_step_refs,
    is_connected,
    min_gamma,
    negotiation_converged,
    negotiation_step,
)
from .shapes import (
    SamplePointSet,
    ShapePose,
    WorldSampleSet,
    points_in_polygon,
    rotation_matrix,
    to_world,
    validate_density,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimConfig:
    """Scenario description; defaults follow the desk-scale reference setup."""

    n0: int
    duration: float
    d: int = 2
    dt_ctrl: float = 0.01
    estimator_substeps: int = 10
    negotiation_substeps: int = 10
    r_sense: float = 5.0
    r_avoid: float = 1.0
    v_max: float = 1.0
    beta: float = 1.5
    c1: float = 1.6
    c2: float = 1.6
    alpha: float = 0.8
    gamma: float = 0.01
    sigma1: float = 30.0
    sigma2: float = 1000.0
    eps: float = 1e-8
    rng_seed: int = 0
    init_lo: tuple = (-5.0, -5.0)
    init_hi: tuple = (5.0, 5.0)
    metrics_every: int = 50
    traj_every: int = 1
    negotiation_tol: float = 1e-6
    theta_init: str | float = 0.0  # "random" for seeded uniform [0, 2 pi)
    strict_gamma: bool = False
    oracle_mass: bool = False
    defensive_estimates: bool = False

    def control_params(self) -> ControlParams:
        return ControlParams(
            sigma1=self.sigma1,
            sigma2=self.sigma2,
            eps=self.eps,
            r_avoid=self.r_avoid,
            v_max=self.v_max,
        )

    def kernel(self) -> Kernel:
        return Kernel(self.beta)

    def validate(self) -> None:
        if self.n0 < 1:
            raise ConfigError(f"n0 must be >= 1, got {self.n0}")
        if self.d < 1:
            raise ConfigError(f"d must be >= 1, got {self.d}")
        if not (self.dt_ctrl > 0.0):
            raise ConfigError(f"dt_ctrl must be positive, got {self.dt_ctrl}")
        if self.duration < 0.0:
            raise ConfigError(f"duration must be nonnegative, got {self.duration}")
        if self.estimator_substeps < 1 or self.negotiation_substeps < 1:
            raise ConfigError("estimator_substeps and negotiation_substeps must be >= 1")
        if not (0.0 < self.r_avoid < self.r_sense):
            raise ConfigError(
                f"need 0 < r_avoid < r_sense, got r_avoid={self.r_avoid}, r_sense={self.r_sense}"
            )
        if not (self.gamma > 0.0):
            raise ConfigError(f"gamma must be positive, got {self.gamma}")
        if not (self.c1 > 0.0 and self.c2 > 0.0):
            raise ConfigError("c1 and c2 must be positive")
        if not (0.0 < self.alpha < 1.0):
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.metrics_every < 1 or self.traj_every < 1:
            raise ConfigError("metrics_every and traj_every must be >= 1")
        if not (self.negotiation_tol > 0.0):
            raise ConfigError("negotiation_tol must be positive")
        lo = np.asarray(self.init_lo, dtype=float)
        hi = np.asarray(self.init_hi, dtype=float)
        if lo.shape != (self.d,) or hi.shape != (self.d,):
            raise ConfigError(f"init_lo and init_hi must each have {self.d} components")
        if np.any(hi < lo):
            raise ConfigError("init box is empty (init_hi < init_lo)")
        if isinstance(self.theta_init, str) and self.theta_init != "random":
            raise ConfigError(f"theta_init must be a number or 'random', got {self.theta_init!r}")
        # constructing the parameter objects runs their own validation
        self.control_params()
        self.kernel()


@dataclass(frozen=True)
class Event:
    """Swarm membership change at a given time.

    action "add": `positions` (k, d) places robots explicitly, otherwise
    `count` robots spawn uniformly in the init box. action "remove": `ids`
    lists active robot identifiers.
    """

    time: float
    action: str
    ids: tuple = ()
    positions: np.ndarray | None = None
    count: int = 0

    def __post_init__(self):
        if self.action not in ("add", "remove"):
            raise ConfigError(f"unknown event action {self.action!r}")
        if self.action == "remove" and not self.ids:
            raise ConfigError("remove event needs robot ids")
        if self.action == "add":
            if self.positions is None and self.count < 1:
                raise ConfigError("add event needs positions or a positive count")


@dataclass
class SwarmState:
    """Full simulation state at one step boundary."""

    t: float
    positions: np.ndarray        # (n, d)
    active_ids: np.ndarray       # (n,) stable identifiers
    negotiation: NegotiationState
    estimator: EstimatorState
    frozen_pose: ShapePose | None
    world: WorldSampleSet | None
    rng: np.random.Generator
    last_velocity: np.ndarray    # (n, d) command applied over the previous step
    next_id: int
    diagnostics: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True)
class MetricsRecord:
    t: float
    f_true: float
    f_max_true: float
    f_uni_true: float
    f_est: float
    f_max_est: float
    f_uni_est: float
    e_est: float
    m_uni: float
    m_cover: float
    connected: bool
    min_pairwise_distance: float


@dataclass
class TrajectoryLog:
    times: list = field(default_factory=list)
    ids: list = field(default_factory=list)
    positions: list = field(default_factory=list)
    velocities: list = field(default_factory=list)

    def append(self, state: SwarmState) -> None:
        self.times.append(state.t)
        self.ids.append(state.active_ids.copy())
        self.positions.append(state.positions.copy())
        self.velocities.append(state.last_velocity.copy())

    def __len__(self) -> int:
        return len(self.times)


def _mean_pose(neg: NegotiationState, d: int) -> ShapePose:
    theta = float(neg.theta_oi.mean()) if d == 2 else 0.0
    return ShapePose(position=neg.q_oi.mean(axis=0), orientation=theta)


def _per_robot_world_points(shape: SamplePointSet, neg: NegotiationState) -> np.ndarray:
    """World sample points under each robot's own pose interpretation, (n, m, d)."""
    rel = shape.points_local - shape.points_local[shape.anchor_index]
    if shape.dim == 2:
        rots = np.stack([rotation_matrix(t) for t in neg.theta_oi])  # (n, 2, 2)
        placed = np.einsum("mk,njk->nmj", rel, rots)
    else:
        placed = np.broadcast_to(rel, (neg.q_oi.shape[0],) + rel.shape).copy()
    return placed + neg.q_oi[:, None, :]


def _oracle_estimates(positions: np.ndarray, world_points: np.ndarray,
                      refs: np.ndarray, kernel: Kernel) -> np.ndarray:
    """True masses presented as each robot's estimate rows."""
    if world_points.ndim == 2:
        return np.broadcast_to(refs.mean(axis=0), refs.shape)
    diff = world_points[:, :, None, :] - positions[None, None, :, :]  # (n, m, n, d)
    w = np.exp(-kernel.beta * (diff * diff).sum(axis=-1))
    return w.mean(axis=2)


def init(config: SimConfig, shape: SamplePointSet) -> SwarmState:
    """Seeded initial state; logs the density report and checks the gain bound."""
    config.validate()
    if shape.dim != config.d:
        raise ConfigError(f"shape dimension {shape.dim} does not match config d={config.d}")
    kernel = config.kernel()

    report = validate_density(shape, config.n0, config.r_avoid)
    log = logger.warning if not report.ok else logger.info
    log(
        "density check: m=%d (need >= %d: %s), d_pts=%.6g (need >= %.6g: %s)",
        report.m, report.min_points, "ok" if report.points_ok else "FAIL",
        report.d_pts, report.spacing_bound, "ok" if report.spacing_ok else "FAIL",
    )
    bound = min_gamma(config.n0, kernel, config.v_max)
    if config.gamma < bound:
        msg = (
            f"gamma={config.gamma} is below the guaranteed-tracking bound "
            f"min_gamma={bound:.6g} for n={config.n0}, beta={config.beta}, v_max={config.v_max}"
        )
        if config.strict_gamma:
            raise ConfigError(msg)
        warnings.warn(msg)

    lo = np.asarray(config.init_lo, dtype=float)
    hi = np.asarray(config.init_hi, dtype=float)
    if np.all(hi == lo):
        warnings.warn("degenerate init box: all robots start coincident")
    rng = np.random.default_rng(config.rng_seed)
    positions = rng.uniform(lo, hi, size=(config.n0, config.d))

    if config.theta_init == "random" and config.d == 2:
        theta = rng.uniform(0.0, 2.0 * np.pi, size=config.n0)
    elif config.d == 2:
        theta = np.full(config.n0, float(config.theta_init))
    else:
        theta = np.zeros(config.n0)
    neg = NegotiationState(
        q_oi=positions.copy(), theta_oi=theta, c1=config.c1, c2=config.c2, alpha=config.alpha
    )
    refs = kernel_matrix(positions, _per_robot_world_points(shape, neg), kernel)
    est = EstimatorState.fresh(refs, config.gamma)
    return SwarmState(
        t=0.0,
        positions=positions,
        active_ids=np.arange(config.n0),
        negotiation=neg,
        estimator=est,
        frozen_pose=None,
        world=None,
        rng=rng,
        last_velocity=np.zeros_like(positions),
        next_id=config.n0,
        diagnostics={},
    )


def step(state: SwarmState, config: SimConfig, shape: SamplePointSet) -> SwarmState:
    """Advance one control period."""
    kernel = config.kernel()
    params = config.control_params()
    pos = state.positions
    g = build_graph(pos, config.r_sense)
    diag = dict(state.diagnostics)
    if not is_connected(g):
        diag["disconnected_steps"] = diag.get("disconnected_steps", 0) + 1

    neg = state.negotiation
    frozen = state.frozen_pose
    world = state.world
    if frozen is None:
        # finer substep than the control period: the signed-power coupling's
        # Euler oscillation floor must sit below the convergence tolerance
        dt_neg = config.dt_ctrl / config.negotiation_substeps
        for _ in range(config.negotiation_substeps):
            neg = negotiation_step(neg, g, dt_neg)
        if negotiation_converged(neg, config.negotiation_tol):
            frozen = _mean_pose(neg, config.d)
            world = to_world(shape, frozen)

    world_points = world.points if frozen is not None else _per_robot_world_points(shape, neg)
    refs = kernel_matrix(pos, world_points, kernel)

    est = state.estimator
    dt_sub = config.dt_ctrl / config.estimator_substeps
    for _ in range(config.estimator_substeps):
        est = estimator_step_refs(est, refs, g, dt_sub)

    estimates = (
        _oracle_estimates(pos, world_points, refs, kernel) if config.oracle_mass else est.p_hat
    )
    v_ms, v_cv, v = control_step_batch(
        pos, world_points, estimates, g.adjacency, kernel, params,
        defensive=config.defensive_estimates, diagnostics=diag,
    )
    return replace(
        state,
        t=state.t + config.dt_ctrl,
        positions=pos + config.dt_ctrl * v,
        negotiation=neg,
        estimator=est,
        frozen_pose=frozen,
        world=world,
        last_velocity=v,
        diagnostics=diag,
    )


def apply_event(state: SwarmState, event: Event, config: SimConfig,
                shape: SamplePointSet) -> SwarmState:
    """Change swarm membership and reset the estimator's internal state."""
    kernel = config.kernel()
    neg = state.negotiation
    if event.action == "remove":
        ids = np.asarray(event.ids, dtype=int)
        unknown = np.setdiff1d(ids, state.active_ids)
        if unknown.size:
            raise ConfigError(f"cannot remove unknown robot ids {unknown.tolist()}")
        keep = ~np.isin(state.active_ids, ids)
        if not keep.any():
            raise ConfigError("cannot remove every robot")
        positions = state.positions[keep]
        active = state.active_ids[keep]
        q_oi = neg.q_oi[keep]
        theta = neg.theta_oi[keep]
        last_v = state.last_velocity[keep]
        next_id = state.next_id
    else:
        if event.positions is not None:
            new_pos = np.atleast_2d(np.asarray(event.positions, dtype=float))
            if new_pos.shape[1] != config.d:
                raise ConfigError("added robot positions have the wrong dimension")
        else:
            lo = np.asarray(config.init_lo, dtype=float)
            hi = np.asarray(config.init_hi, dtype=float)
            new_pos = state.rng.uniform(lo, hi, size=(event.count, config.d))
        k = new_pos.shape[0]
        positions = np.vstack([state.positions, new_pos])
        active = np.concatenate([state.active_ids, np.arange(state.next_id, state.next_id + k)])
        next_id = state.next_id + k
        # joining robots adopt the agreed pose (or the current mean interpretation)
        if state.frozen_pose is not None:
            join_q = np.tile(state.frozen_pose.position, (k, 1))
            join_t = np.full(k, state.frozen_pose.orientation)
        else:
            join_q = np.tile(neg.q_oi.mean(axis=0), (k, 1))
            join_t = np.full(k, float(neg.theta_oi.mean()))
        q_oi = np.vstack([neg.q_oi, join_q])
        theta = np.concatenate([neg.theta_oi, join_t])
        last_v = np.vstack([state.last_velocity, np.zeros_like(new_pos)])

    neg = NegotiationState(q_oi=q_oi, theta_oi=theta, c1=neg.c1, c2=neg.c2, alpha=neg.alpha)
    if state.frozen_pose is not None:
        world_points = state.world.points
    else:
        world_points = _per_robot_world_points(shape, neg)
    refs = kernel_matrix(positions, world_points, kernel)
    est = EstimatorState.fresh(refs, state.estimator.gamma)
    diag = dict(state.diagnostics)
    diag["estimator_resets"] = diag.get("estimator_resets", 0) + 1
    return replace(
        state,
        positions=positions,
        active_ids=active,
        negotiation=neg,
        estimator=est,
        last_velocity=last_v,
        next_id=next_id,
        diagnostics=diag,
    )


def metric_e_est(p_hat: np.ndarray, true_masses: np.ndarray) -> float:
    """Worst estimate error over robots and sample points."""
    return float(np.abs(p_hat - true_masses[None, :]).max())


def metric_m_uni(positions: np.ndarray, adjacency: np.ndarray) -> float:
    """Spread of per-robot minimum neighbor distances; isolated robots excluded."""
    pos = np.atleast_2d(np.asarray(positions, dtype=float))
    n = pos.shape[0]
    diff = pos[:, None, :] - pos[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=-1))
    dist = np.where(adjacency, dist, np.inf)
    r_min = dist.min(axis=1)
    included = np.isfinite(r_min)
    if not included.any():
        return 0.0
    r = r_min[included]
    return float(((r - r.mean()) ** 2).sum())


def coverage_radius(s_shape: float, n: int) -> float:
    return float(np.sqrt(3.0 * s_shape / (2.0 * n * np.pi)))


def metric_m_cover(positions: np.ndarray, world_set: WorldSampleSet, n: int) -> float:
    """Percentage of the shape region within the coverage radius of a robot.

    The region is rasterized at pitch d_pts/4: a raster cell belongs to the
    shape when its center lies within the d_pts-sized square owned by some
    sample point, which reproduces the nominal area m * d_pts^2 for
    grid-discretized shapes.
    """
    if world_set.dim != 2:
        raise ValueError("coverage metric is only supported for d = 2")
    pos = np.atleast_2d(np.asarray(positions, dtype=float))
    q = world_set.points
    d_pts = world_set.source.d_pts
    h = d_pts / 4.0
    lo = q.min(axis=0) - d_pts / 2.0
    hi = q.max(axis=0) + d_pts / 2.0
    nx = int(np.ceil((hi[0] - lo[0]) / h))
    ny = int(np.ceil((hi[1] - lo[1]) / h))
    cx = lo[0] + (np.arange(nx) + 0.5) * h
    cy = lo[1] + (np.arange(ny) + 0.5) * h
    gx, gy = np.meshgrid(cx, cy)
    cells = np.column_stack([gx.ravel(), gy.ravel()])
    # Chebyshev membership against the owning sample point squares
    cheb = np.abs(cells[:, None, :] - q[None, :, :]).max(axis=-1)
    in_shape = (cheb <= d_pts / 2.0).any(axis=1)
    cells = cells[in_shape]
    s_shape = cells.shape[0] * h * h
    r_cover = coverage_radius(s_shape, n)
    diff = cells[:, None, :] - pos[None, :, :]
    covered = ((diff * diff).sum(axis=-1) <= r_cover * r_cover).any(axis=1)
    return 100.0 * float(covered.sum()) / cells.shape[0]


def detect_t_conv(
    trajectory: TrajectoryLog,
    world_set: WorldSampleSet,
    polygon_world: np.ndarray | None = None,
) -> float | None:
    """Earliest record time from which every robot stays inside the shape.

    Containment is point-in-polygon when the world-frame source polygon is
    given, otherwise distance at most d_pts/2 to some sample point.
    """
    ok = []
    for pos in trajectory.positions:
        if polygon_world is not None:
            inside = points_in_polygon(pos, polygon_world)
        else:
            diff = pos[:, None, :] - world_set.points[None, :, :]
            dmin = np.sqrt((diff * diff).sum(axis=-1)).min(axis=1)
            inside = dmin <= world_set.source.d_pts / 2.0
        ok.append(bool(inside.all()))
    if not ok:
        return None
    last_bad = -1
    for idx, good in enumerate(ok):
        if not good:
            last_bad = idx
    if last_bad == len(ok) - 1:
        return None
    return float(trajectory.times[last_bad + 1])


def _min_pairwise_distance(pos: np.ndarray) -> float:
    if pos.shape[0] < 2:
        return np.inf
    diff = pos[:, None, :] - pos[None, :, :]
    d2 = (diff * diff).sum(axis=-1)
    iu = np.triu_indices(pos.shape[0], k=1)
    return float(np.sqrt(d2[iu].min()))


def _metric_pose(state: SwarmState, config: SimConfig) -> ShapePose:
    if state.frozen_pose is not None:
        return state.frozen_pose
    return _mean_pose(state.negotiation, config.d)


def compute_metrics(state: SwarmState, config: SimConfig, shape: SamplePointSet) -> MetricsRecord:
    """Metrics record at the current state, against the (eventual) consensus pose.

    Before the negotiation freezes, the metric pose is the running mean of
    the per-robot interpretations (which the protocol preserves), so early
    records are provisional.
    """
    kernel = config.kernel()
    pos = state.positions
    g = build_graph(pos, config.r_sense)
    if state.frozen_pose is not None and state.world is not None:
        world = state.world
    else:
        world = to_world(shape, _metric_pose(state, config))
    e_metric = kernel_matrix(pos, world.points, kernel)
    p_true = e_metric.mean(axis=0)

    def _metrics_of(masses: np.ndarray) -> tuple[float, float, float]:
        try:
            fm, fu = f_max(masses), f_uni(masses)
            return fm + fu, fm, fu
        except ValueError:
            return np.nan, np.nan, np.nan

    f_t, f_m, f_u = _metrics_of(p_true)

    if state.frozen_pose is not None:
        refs_own = e_metric
    else:
        refs_own = kernel_matrix(
            pos, _per_robot_world_points(shape, state.negotiation), kernel
        )
    p_hat = refs_own + state.estimator.z
    rows = []
    for i in range(p_hat.shape[0]):
        row = p_hat[i]
        if np.all(row > 0.0):
            fm, fu = f_max(row), f_uni(row)
            rows.append((fm + fu, fm, fu))
    if rows:
        f_est, f_max_est, f_uni_est = (float(np.mean([r[j] for r in rows])) for j in range(3))
    else:
        f_est = f_max_est = f_uni_est = np.nan

    if config.d == 2:
        m_cover = metric_m_cover(pos, world, state.n)
    else:
        m_cover = np.nan

    return MetricsRecord(
        t=state.t,
        f_true=f_t,
        f_max_true=f_m,
        f_uni_true=f_u,
        f_est=f_est,
        f_max_est=f_max_est,
        f_uni_est=f_uni_est,
        e_est=metric_e_est(p_hat, p_true),
        m_uni=metric_m_uni(pos, g.adjacency),
        m_cover=m_cover,
        connected=is_connected(g),
        min_pairwise_distance=_min_pairwise_distance(pos),
    )


def run(
    config: SimConfig,
    shape: SamplePointSet,
    events: list[Event] | None = None,
) -> tuple[TrajectoryLog, list[MetricsRecord]]:
    """Execute a scenario: init, steps, events at their times, periodic records."""
    config.validate()
    schedule = sorted(events or [], key=lambda e: e.time)
    times = [e.time for e in schedule]
    if any(t2 < t1 for t1, t2 in zip(times, times[1:])):
        raise ConfigError("event times must be non-decreasing")

    state = init(config, shape)
    n_steps = int(round(config.duration / config.dt_ctrl))
    traj = TrajectoryLog()
    records: list[MetricsRecord] = []
    pending = list(schedule)

    for k in range(n_steps + 1):
        while pending and pending[0].time <= state.t + 1e-9:
            state = apply_event(state, pending.pop(0), config, shape)
        if k % config.traj_every == 0 or k == n_steps:
            traj.append(state)
        if k % config.metrics_every == 0 or k == n_steps:
            records.append(compute_metrics(state, config, shape))
        if k == n_steps:
            break
        state = step(state, config, shape)
        # pin boundary times to exact multiples of the control period so
        # logs and event comparisons do not accumulate float drift
        state = replace(state, t=(k + 1) * config.dt_ctrl)
    return traj, records
