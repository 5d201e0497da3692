"""Command-line front end: run scenarios, anneal bandwidths, generate shapes.

Subcommands
-----------
run       execute a scenario config against a shape file, writing a
          trajectory log, a metrics log, and a JSON run manifest
anneal    select a kernel bandwidth for a shape and swarm size
shapegen  discretize a polygon file into a sample-point file
plotdata  extract a single (t, value) metric series from a metrics log

Exit codes: 0 success, 2 configuration/usage error, 3 runtime error.
All floating-point output uses 17 significant digits so files round-trip.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .annealing import AnnealConfig, anneal_beta
from .engine import Event, MetricsRecord, SimConfig, TrajectoryLog, run
from .errors import ConfigError
from .shapes import discretize_polygon, load_points, save_points, validate_density

_CONFIG_KEYS = {
    "n0": int,
    "duration": float,
    "d": int,
    "dt_ctrl": float,
    "estimator_substeps": int,
    "r_sense": float,
    "r_avoid": float,
    "v_max": float,
    "beta": float,
    "c1": float,
    "c2": float,
    "alpha": float,
    "gamma": float,
    "sigma1": float,
    "sigma2": float,
    "eps": float,
    "rng_seed": int,
    "init_lo": "floats",
    "init_hi": "floats",
    "metrics_every": int,
    "traj_every": int,
    "negotiation_tol": float,
    "theta_init": "theta",
    "strict_gamma": "bool",
    "oracle_mass": "bool",
    "defensive_estimates": "bool",
}

_METRIC_COLUMNS = [
    "t", "f_true", "f_max_true", "f_uni_true", "f_est", "f_max_est", "f_uni_est",
    "e_est", "m_uni", "m_cover", "connected", "min_pairwise_distance",
]

_PLOT_KINDS = {"F": "f_true", "E_est": "e_est", "M_uni": "m_uni", "M_cover": "m_cover"}


def _fmt(x: float) -> str:
    return format(x, ".17g")


def _parse_bool(raw: str, key: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"config key {key}: expected a boolean, got {raw!r}")


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse the flat key=value scenario format; unknown keys are errors."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}: line {lineno}: expected 'key = value'")
        key, _, rhs = line.partition("=")
        key, rhs = key.strip(), rhs.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{source}: line {lineno}: unknown config key {key!r}")
        kind = _CONFIG_KEYS[key]
        try:
            if kind == "bool":
                values[key] = _parse_bool(rhs, key)
            elif kind == "floats":
                values[key] = tuple(float(f) for f in rhs.split(","))
            elif kind == "theta":
                values[key] = "random" if rhs == "random" else float(rhs)
            else:
                values[key] = kind(rhs)
        except ConfigError:
            raise
        except ValueError:
            raise ConfigError(f"{source}: line {lineno}: bad value {rhs!r} for key {key!r}")
    return values


def load_config(path: Path) -> SimConfig:
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    values = parse_config_text(path.read_text(), source=str(path))
    missing = {"n0", "duration"} - values.keys()
    if missing:
        raise ConfigError(f"{path}: missing required config keys: {sorted(missing)}")
    try:
        return SimConfig(**values)
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}")


def load_events(path: Path, d: int) -> list[Event]:
    """Events file: one per line, 't add x,y[;x,y...]' / 't add K' / 't remove id[,id...]'."""
    if not path.exists():
        raise ConfigError(f"events file not found: {path}")
    events: list[Event] = []
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(None, 2)
        if len(parts) != 3:
            raise ConfigError(f"{path}: line {lineno}: expected 't action payload'")
        t_str, action, payload = parts
        try:
            t = float(t_str)
        except ValueError:
            raise ConfigError(f"{path}: line {lineno}: bad event time {t_str!r}")
        if action == "remove":
            try:
                ids = tuple(int(s) for s in payload.split(","))
            except ValueError:
                raise ConfigError(f"{path}: line {lineno}: bad id list {payload!r}")
            events.append(Event(time=t, action="remove", ids=ids))
        elif action == "add":
            if ";" in payload or "," in payload:
                try:
                    pts = [[float(c) for c in chunk.split(",")] for chunk in payload.split(";")]
                except ValueError:
                    raise ConfigError(f"{path}: line {lineno}: bad position list {payload!r}")
                arr = np.asarray(pts, dtype=float)
                if arr.shape[1] != d:
                    raise ConfigError(f"{path}: line {lineno}: positions must have {d} coordinates")
                events.append(Event(time=t, action="add", positions=arr))
            else:
                try:
                    count = int(payload)
                except ValueError:
                    raise ConfigError(f"{path}: line {lineno}: bad add payload {payload!r}")
                events.append(Event(time=t, action="add", count=count))
        else:
            raise ConfigError(f"{path}: line {lineno}: unknown action {action!r}")
    return events


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_trajectory(path: Path, traj: TrajectoryLog, header: str) -> None:
    lines = ["# swarmshape trajectory v1", header]
    if traj.positions:
        d = traj.positions[0].shape[1]
        cols = " ".join(f"x{j}" for j in range(d)) + " " + " ".join(f"v{j}" for j in range(d))
        lines.append(f"# columns: t robot_id {cols}")
    for t, ids, pos, vel in zip(traj.times, traj.ids, traj.positions, traj.velocities):
        for rid, p, v in zip(ids, pos, vel):
            coords = " ".join(_fmt(c) for c in p)
            vels = " ".join(_fmt(c) for c in v)
            lines.append(f"{_fmt(t)} {rid} {coords} {vels}")
    path.write_text("\n".join(lines) + "\n")


def _write_metrics(path: Path, records: list[MetricsRecord], header: str) -> None:
    lines = ["# swarmshape metrics v1", header, "# columns: " + " ".join(_METRIC_COLUMNS)]
    for r in records:
        lines.append(
            " ".join(
                [
                    _fmt(r.t), _fmt(r.f_true), _fmt(r.f_max_true), _fmt(r.f_uni_true),
                    _fmt(r.f_est), _fmt(r.f_max_est), _fmt(r.f_uni_est), _fmt(r.e_est),
                    _fmt(r.m_uni), _fmt(r.m_cover), str(int(r.connected)),
                    _fmt(r.min_pairwise_distance),
                ]
            )
        )
    path.write_text("\n".join(lines) + "\n")


def read_metrics_table(path: Path) -> tuple[list[str], np.ndarray]:
    """Parse a metrics log back into its column names and value rows."""
    if not path.exists():
        raise ConfigError(f"metrics log not found: {path}")
    columns: list[str] = []
    rows = []
    for raw in path.read_text().splitlines():
        line = raw.strip()
        if line.startswith("# columns:"):
            columns = line.split(":", 1)[1].split()
            continue
        if not line or line.startswith("#"):
            continue
        rows.append([float(f) for f in line.split()])
    if not columns:
        columns = list(_METRIC_COLUMNS)
    if not rows:
        raise ConfigError(f"{path}: metrics log has no data rows")
    return columns, np.asarray(rows, dtype=float)


def cmd_run(args) -> int:
    config = load_config(Path(args.config))
    if args.seed is not None:
        config = SimConfig(**{**config.__dict__, "rng_seed": args.seed})
    overrides = {}
    if args.oracle_mass:
        overrides["oracle_mass"] = True
    if args.strict_gamma:
        overrides["strict_gamma"] = True
    if overrides:
        config = SimConfig(**{**config.__dict__, **overrides})
    shape_path = Path(args.shape)
    if not shape_path.exists():
        raise ConfigError(f"shape file not found: {shape_path}")
    shape = load_points(shape_path)
    events = []
    events_hash = None
    if args.events:
        events = load_events(Path(args.events), config.d)
        events_hash = _sha256(Path(args.events))
    config.validate()

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    traj, records = run(config, shape, events)

    config_hash = _sha256(Path(args.config))
    shape_hash = _sha256(shape_path)
    header = (
        f"# config_sha256={config_hash} shape_sha256={shape_hash} "
        f"events_sha256={events_hash or 'none'} seed={config.rng_seed}"
    )
    traj_path = out_dir / "trajectory.txt"
    metrics_path = out_dir / "metrics.txt"
    _write_trajectory(traj_path, traj, header)
    _write_metrics(metrics_path, records, header)
    manifest = {
        "tool": "swarmshape",
        "tool_version": __version__,
        "config": {"path": str(args.config), "sha256": config_hash},
        "shape": {"path": str(args.shape), "sha256": shape_hash},
        "events": {"path": args.events, "sha256": events_hash} if args.events else None,
        "seed": config.rng_seed,
        "t_start": traj.times[0],
        "t_end": traj.times[-1],
        "trajectory_records": len(traj),
        "metrics_records": len(records),
        "outputs": {
            "trajectory": {"path": traj_path.name, "sha256": _sha256(traj_path)},
            "metrics": {"path": metrics_path.name, "sha256": _sha256(metrics_path)},
        },
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"run complete: {len(traj)} trajectory records, {len(records)} metrics records")
    print(f"outputs in {out_dir}")
    return 0


def cmd_anneal(args) -> int:
    shape_path = Path(args.shape)
    if not shape_path.exists():
        raise ConfigError(f"shape file not found: {shape_path}")
    shape = load_points(shape_path)
    try:
        config = AnnealConfig(
            beta_initial=args.beta_initial,
            beta_final=args.beta_final,
            alpha_c=args.cooling,
            epsilon_a=args.tol,
            d_min=args.d_min,
            seed=args.seed,
        )
    except ValueError as exc:
        raise ConfigError(str(exc))
    result = anneal_beta(shape.points_local, args.robots, config)
    print(f"beta = {_fmt(result.beta)}")
    print(f"accepted = {result.accepted} after {result.rounds} bandwidth rounds")
    if args.out:
        lines = [",".join(_fmt(c) for c in p) for p in result.positions]
        Path(args.out).write_text("\n".join(lines) + "\n")
        print(f"final positions written to {args.out}")
    return 0


def cmd_shapegen(args) -> int:
    poly_path = Path(args.polygon)
    if not poly_path.exists():
        raise ConfigError(f"polygon file not found: {poly_path}")
    vertices = load_points(poly_path).points_local
    if vertices.shape[1] != 2:
        raise ConfigError("polygon file must contain 2-D vertices")
    try:
        shape = discretize_polygon(vertices, args.spacing)
    except ValueError as exc:
        raise ConfigError(str(exc))
    save_points(shape, Path(args.out))
    print(f"m = {shape.m}")
    print(f"d_pts = {_fmt(shape.d_pts)}")
    if args.robots:
        report = validate_density(shape, args.robots, args.r_avoid)
        print(
            f"density for n={args.robots}: m >= {report.min_points}: "
            f"{'pass' if report.points_ok else 'FAIL'}; "
            f"d_pts >= {_fmt(report.spacing_bound)}: "
            f"{'pass' if report.spacing_ok else 'FAIL'}"
        )
    return 0


def cmd_plotdata(args) -> int:
    if args.kind not in _PLOT_KINDS:
        raise ConfigError(
            f"unknown metric kind {args.kind!r}; choose one of {sorted(_PLOT_KINDS)}"
        )
    columns, rows = read_metrics_table(Path(args.metrics))
    column = _PLOT_KINDS[args.kind]
    try:
        t_idx, v_idx = columns.index("t"), columns.index(column)
    except ValueError:
        raise ConfigError(f"metrics log is missing column {column!r}")
    lines = [f"{_fmt(r[t_idx])} {_fmt(r[v_idx])}" for r in rows]
    Path(args.out).write_text("\n".join(lines) + "\n")
    print(f"{len(lines)} rows written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swarmshape",
        description="Decentralized mean-shift shape formation simulator.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario")
    p_run.add_argument("--config", required=True, help="scenario config file")
    p_run.add_argument("--shape", required=True, help="sample-point file")
    p_run.add_argument("--events", help="optional membership events file")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--seed", type=int, help="override the config rng_seed")
    p_run.add_argument("--oracle-mass", action="store_true",
                       help="feed controllers exact masses instead of estimates")
    p_run.add_argument("--strict-gamma", action="store_true",
                       help="error out when gamma is below the tracking bound")
    p_run.set_defaults(func=cmd_run)

    p_ann = sub.add_parser("anneal", help="select a kernel bandwidth")
    p_ann.add_argument("--shape", required=True, help="sample-point file")
    p_ann.add_argument("--robots", required=True, type=int, help="swarm size")
    p_ann.add_argument("--d-min", type=float, default=0.0, dest="d_min",
                       help="required minimum inter-robot distance")
    p_ann.add_argument("--beta-initial", type=float, default=0.01)
    p_ann.add_argument("--beta-final", type=float, default=150.0)
    p_ann.add_argument("--cooling", type=float, default=1.025)
    p_ann.add_argument("--tol", type=float, default=1e-3)
    p_ann.add_argument("--seed", type=int, default=0)
    p_ann.add_argument("--out", help="write the final annealed positions here")
    p_ann.set_defaults(func=cmd_anneal)

    p_gen = sub.add_parser("shapegen", help="discretize a polygon into sample points")
    p_gen.add_argument("--polygon", required=True, help="polygon vertex file (ordered)")
    p_gen.add_argument("--spacing", required=True, type=float, help="grid pitch d_pts")
    p_gen.add_argument("--out", required=True, help="sample-point file to write")
    p_gen.add_argument("--robots", type=int, help="report density checks for this swarm size")
    p_gen.add_argument("--r-avoid", type=float, default=1.0, dest="r_avoid")
    p_gen.set_defaults(func=cmd_shapegen)

    p_plot = sub.add_parser("plotdata", help="extract a metric series")
    p_plot.add_argument("--metrics", required=True, help="metrics log from a run")
    p_plot.add_argument("--kind", required=True, help="F | E_est | M_uni | M_cover")
    p_plot.add_argument("--out", required=True, help="two-column output file")
    p_plot.set_defaults(func=cmd_plotdata)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3


def entrypoint() -> None:
    sys.exit(main())
