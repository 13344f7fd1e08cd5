"""Built-in benchmark datasets: simulation protocol plus train/val/test partitioning.

Each partition is simulated from its own initial condition (or phase, for
the torus), downsampled, and trimmed to its last ``n_points`` samples.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import dynsys
from .errors import InvalidArgument
from .timeseries import PointCloud

SYSTEMS = ("lorenz", "lorenz-stochastic", "rossler", "ecosystem", "torus")

# integration step, downsampling factor, raw steps before trimming, observed coordinate
PROTOCOLS = {
    "lorenz": {"dt": 0.004, "downsample": 10, "steps": 125000, "observe": 0},
    "lorenz-stochastic": {"dt": 0.0004, "downsample": 100, "transient": 50000, "observe": 0},
    "rossler": {"dt": 0.125, "downsample": 10, "transient": 2000, "observe": 0},
    "ecosystem": {"dt": 0.1, "downsample": 10, "duration": 200000.0,
                  "transient_time": 100000.0, "observe": 5},
    "torus": {"dt": 0.02, "downsample": 8, "observe": 0},
}


@dataclass
class Dataset:
    name: str
    train: PointCloud
    val: PointCloud
    test: PointCloud
    observe: int
    meta: dict = field(default_factory=dict)

    def observed(self, part: str) -> np.ndarray:
        return getattr(self, part).points[:, self.observe]


def _trim(traj, factor, n_points):
    pts = traj.downsampled(factor).values
    if len(pts) < n_points:
        raise InvalidArgument(f"protocol produced {len(pts)} samples, need {n_points}")
    return PointCloud(pts[-n_points:], traj.dt * factor)


def simulate_partition(system: str, seed: int, n_points: int = 5000, **overrides) -> tuple[PointCloud, dict]:
    """One protocol-conforming trajectory segment and its parameter record."""
    if system not in PROTOCOLS:
        raise InvalidArgument(f"unknown system {system!r}; choose from {', '.join(SYSTEMS)}")
    p = dict(PROTOCOLS[system], **overrides)
    ds = int(p["downsample"])
    rng = np.random.default_rng(seed)
    if system == "lorenz":
        y0 = np.array(p.get("y0", dynsys.random_lorenz_y0(seed)), dtype=float)
        steps = int(max(p["steps"], n_points * ds))
        traj = dynsys.simulate_lorenz(y0=y0, dt=p["dt"], steps=steps, transient=0)
        record = {"y0": y0.tolist(), "steps": steps}
    elif system == "lorenz-stochastic":
        y0 = np.array(p.get("y0", dynsys.random_lorenz_y0(seed)), dtype=float)
        steps = int(p["transient"] + n_points * ds)
        traj = dynsys.simulate_lorenz_stochastic(xi0=float(p.get("xi0", 0.0)), seed=seed,
                                                 dt=p["dt"], steps=steps, y0=y0,
                                                 transient=int(p["transient"]))
        record = {"y0": y0.tolist(), "steps": steps, "xi0": float(p.get("xi0", 0.0))}
    elif system == "rossler":
        y0 = np.array(p.get("y0", [1.0, 1.0, 0.0] + rng.uniform(-1, 1, 3)), dtype=float)
        steps = int(p["transient"] + n_points * ds)
        traj = dynsys.simulate_rossler(y0=y0, dt=p["dt"], steps=steps, transient=int(p["transient"]))
        record = {"y0": y0.tolist(), "steps": steps}
    elif system == "ecosystem":
        y0 = np.array(p.get("y0", dynsys.ECO_DEFAULT_Y0 * rng.uniform(0.8, 1.2, 10)), dtype=float)
        traj = dynsys.simulate_ecosystem(y0=y0, dt=p["dt"], duration=p["duration"],
                                         transient_time=p["transient_time"])
        record = {"y0": y0.tolist(), "duration": p["duration"]}
    else:
        t0 = float(p.get("t0", rng.uniform(0.0, 2 * np.pi)))
        steps = int(p.get("steps", n_points * ds))
        traj = dynsys.simulate_torus(dt=p["dt"], steps=steps, t0=t0)
        record = {"t0": t0, "steps": steps}
    record.update({k: v for k, v in p.items() if k not in ("y0",)})
    record["seed"] = seed
    record["n_points"] = n_points
    return _trim(traj, ds, n_points), record


def load_builtin(system: str, seed: int = 0, n_points: int = 5000, **overrides) -> Dataset:
    """Train/val/test partitions from three independently seeded trajectories."""
    parts, records = [], []
    for k in range(3):
        cloud, rec = simulate_partition(system, seed * 3 + k, n_points, **overrides)
        parts.append(cloud)
        records.append(rec)
    observe = int(overrides.get("observe", PROTOCOLS[system]["observe"]))
    return Dataset(system, *parts, observe=observe,
                   meta={"system": system, "seed": seed, "partitions": records})
