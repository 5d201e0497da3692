"""Decentralized mean-shift shape formation for robot swarms.

A desired shape is a finite set of sample points; the swarm's spatial
distribution over those points is a kernel-density mass vector. Robots
negotiate the shape pose, estimate the global mass distribution by
consensus, and descend a distribution-similarity error with a meanshift
controller that stays conflict-free with collision avoidance.
"""

__version__ = "0.1.0"

from .annealing import AnnealConfig, AnnealResult, anneal_beta, e_step, m_step
from .controller import (
    ControlParams,
    VelocityCommand,
    control_step,
    kappa2,
    meanshift_command,
    repulsion_raw,
    sat,
)
from .engine import (
    Event,
    MetricsRecord,
    SimConfig,
    SwarmState,
    TrajectoryLog,
    apply_event,
    compute_metrics,
    detect_t_conv,
    init,
    metric_e_est,
    metric_m_cover,
    metric_m_uni,
    run,
    step,
)
from .errors import ConfigError, ShapeFileError
from .mass import Kernel, f_max, f_total, f_uni, grad_f_robot, mass_at, mass_vector
from .protocols import (
    CommGraph,
    EstimatorState,
    NegotiationState,
    build_graph,
    estimator_step,
    is_connected,
    min_gamma,
    negotiation_converged,
    negotiation_step,
    reset_estimator,
)
from .shapes import (
    DensityReport,
    SamplePointSet,
    ShapePose,
    WorldSampleSet,
    discretize_polygon,
    load_points,
    points_in_polygon,
    save_points,
    to_world,
    transform_points,
    validate_density,
)

__all__ = [
    "AnnealConfig",
    "AnnealResult",
    "CommGraph",
    "ConfigError",
    "ControlParams",
    "DensityReport",
    "EstimatorState",
    "Event",
    "Kernel",
    "MetricsRecord",
    "NegotiationState",
    "SamplePointSet",
    "ShapeFileError",
    "ShapePose",
    "SimConfig",
    "SwarmState",
    "TrajectoryLog",
    "VelocityCommand",
    "WorldSampleSet",
    "anneal_beta",
    "apply_event",
    "build_graph",
    "compute_metrics",
    "control_step",
    "detect_t_conv",
    "discretize_polygon",
    "e_step",
    "estimator_step",
    "f_max",
    "f_total",
    "f_uni",
    "grad_f_robot",
    "init",
    "is_connected",
    "kappa2",
    "load_points",
    "m_step",
    "mass_at",
    "mass_vector",
    "meanshift_command",
    "metric_e_est",
    "metric_m_cover",
    "metric_m_uni",
    "min_gamma",
    "negotiation_converged",
    "negotiation_step",
    "points_in_polygon",
    "repulsion_raw",
    "reset_estimator",
    "run",
    "sat",
    "save_points",
    "step",
    "to_world",
    "transform_points",
    "validate_density",
]
