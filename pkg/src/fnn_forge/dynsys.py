"""Benchmark dynamical systems and fixed-step integrators.

All simulators are deterministic functions of their parameters, initial
condition, step, step count and (for the stochastic Lorenz model) seed.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DivergenceError, InvalidArgument
from .timeseries import PointCloud, TimeSeries, downsample

VectorField = Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class OdeSystem:
    dimension: int
    vector_field: VectorField
    params: dict = field(default_factory=dict)
    name: str = ""


@dataclass(frozen=True)
class Trajectory:
    states: PointCloud
    dt: float
    discarded_transient: int = 0
    t0: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def values(self):
        return self.states.points

    def as_series(self) -> TimeSeries:
        return TimeSeries(self.states.points, self.dt, self.meta.get("system", ""))

    def downsampled(self, factor: int) -> "Trajectory":
        ts = downsample(self.as_series(), factor)
        meta = dict(self.meta, downsample=factor * self.meta.get("downsample", 1))
        return Trajectory(PointCloud(ts.values, ts.dt), ts.dt, self.discarded_transient, self.t0, meta)


def _check_step(dt, steps):
    if not dt > 0:
        raise InvalidArgument(f"dt must be positive, got {dt}")
    if int(steps) != steps or steps < 1:
        raise InvalidArgument(f"steps must be a positive integer, got {steps}")


def integrate_rk4(system: OdeSystem, y0, dt: float, steps: int, t0: float = 0.0) -> Trajectory:
    """Classical fourth-order Runge-Kutta; returns steps+1 states including y0."""
    _check_step(dt, steps)
    y = np.array(y0, dtype=np.float64).reshape(-1)
    if y.size != system.dimension:
        raise InvalidArgument(f"y0 has {y.size} components, system has {system.dimension}")
    f = system.vector_field
    out = np.empty((steps + 1, y.size))
    out[0] = y
    h = float(dt)
    for n in range(steps):
        t = t0 + n * h
        k1 = f(y, t)
        k2 = f(y + 0.5 * h * k1, t + 0.5 * h)
        k3 = f(y + 0.5 * h * k2, t + 0.5 * h)
        k4 = f(y + h * k3, t + h)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise DivergenceError(n + 1)
        out[n + 1] = y
    return Trajectory(PointCloud(out, h), h, 0, t0, {"integrator": "rk4", "system": system.name})


def _discard(traj: Trajectory, transient: int) -> Trajectory:
    if transient < 0 or transient >= len(traj.states):
        raise InvalidArgument(f"transient {transient} outside trajectory of {len(traj.states)} states")
    pts = traj.values[transient:]
    return Trajectory(PointCloud(pts, traj.dt), traj.dt, transient,
                      traj.t0 + transient * traj.dt, traj.meta)


# -- Lorenz -------------------------------------------------------------------

LORENZ_DEFAULT_Y0 = (-9.8, -15.2, 20.5)


def lorenz_field(sigma=10.0, rho=28.0, beta=2.667) -> VectorField:
    def f(y, t):
        x, yy, z = y
        return np.array([sigma * (yy - x), x * (rho - z) - yy, x * yy - beta * z])
    return f


def lorenz_system(sigma=10.0, rho=28.0, beta=2.667) -> OdeSystem:
    return OdeSystem(3, lorenz_field(sigma, rho, beta),
                     {"sigma": sigma, "rho": rho, "beta": beta}, "lorenz")


def random_lorenz_y0(seed: int):
    """On-attractor-ish initial condition drawn from a seeded box."""
    rng = np.random.default_rng(seed)
    return np.array(LORENZ_DEFAULT_Y0) + rng.uniform(-5.0, 5.0, size=3)


def simulate_lorenz(sigma=10.0, rho=28.0, beta=2.667, y0=LORENZ_DEFAULT_Y0,
                    dt=0.004, steps=125000, transient=0) -> Trajectory:
    """Lorenz trajectory with the first ``transient`` steps dropped.

    Downsampling and trimming to the kept window are left to the caller
    (see ``datasets.simulate_partition``).
    """
    sys_ = lorenz_system(sigma, rho, beta)
    traj = integrate_rk4(sys_, y0, dt, steps)
    traj = _discard(traj, transient)
    traj.meta.update(sys_.params, system="lorenz", y0=[float(v) for v in np.ravel(y0)])
    return traj


def simulate_lorenz_stochastic(xi0=0.0, seed=0, dt=0.0004, steps=100000,
                               sigma=10.0, rho=28.0, beta=2.667,
                               y0=LORENZ_DEFAULT_Y0, transient=0,
                               drift: VectorField | None = None) -> Trajectory:
    """Euler-Maruyama integration of the Lorenz field with additive white noise.

    Each step adds ``xi0 * sqrt(dt) * eta`` with eta i.i.d. standard normal per
    component. ``drift`` overrides the vector field (used to isolate the
    diffusion term in tests).
    """
    if not 0.0 <= xi0:
        raise InvalidArgument(f"xi0 must be non-negative, got {xi0}")
    _check_step(dt, steps)
    f = drift if drift is not None else lorenz_field(sigma, rho, beta)
    rng = np.random.default_rng(seed)
    y = np.array(y0, dtype=np.float64).reshape(-1)
    out = np.empty((steps + 1, y.size))
    out[0] = y
    scale = xi0 * np.sqrt(dt)
    chunk = 65536
    n = 0
    while n < steps:
        m = min(chunk, steps - n)
        noise = rng.standard_normal((m, y.size)) * scale
        for k in range(m):
            y = y + f(y, (n + k) * dt) * dt + noise[k]
            if not np.all(np.isfinite(y)):
                raise DivergenceError(n + k + 1)
            out[n + k + 1] = y
        n += m
    traj = Trajectory(PointCloud(out, dt), dt, 0, 0.0,
                      {"integrator": "euler-maruyama", "system": "lorenz-stochastic",
                       "sigma": sigma, "rho": rho, "beta": beta, "xi0": xi0, "seed": seed,
                       "y0": [float(v) for v in np.ravel(y0)]})
    return _discard(traj, transient) if transient else traj


def euler_path(system: OdeSystem, y0, dt, steps) -> np.ndarray:
    """Deterministic forward-Euler path (the zero-noise limit of the SDE scheme)."""
    y = np.array(y0, dtype=np.float64)
    out = np.empty((steps + 1, y.size))
    out[0] = y
    for n in range(steps):
        y = y + system.vector_field(y, n * dt) * dt
        out[n + 1] = y
    return out


# -- Rossler ------------------------------------------------------------------

def rossler_system(a=0.2, b=0.2, c=5.7) -> OdeSystem:
    def f(y, t):
        x, yy, z = y
        return np.array([-yy - z, x + a * yy, b + z * (x - c)])
    return OdeSystem(3, f, {"a": a, "b": b, "c": c}, "rossler")


def rossler_fixed_point(a=0.2, b=0.2, c=5.7, inner=True):
    """Closed-form equilibrium; ``inner`` selects the one near the origin."""
    disc = np.sqrt(c * c - 4 * a * b)
    x = (c - disc) / 2 if inner else (c + disc) / 2
    return np.array([x, -x / a, x / a])


def simulate_rossler(a=0.2, b=0.2, c=5.7, y0=(1.0, 1.0, 0.0), dt=0.125,
                     steps=2500, transient=0) -> Trajectory:
    sys_ = rossler_system(a, b, c)
    traj = _discard(integrate_rk4(sys_, y0, dt, steps), transient) if transient else \
        integrate_rk4(sys_, y0, dt, steps)
    traj.meta.update(sys_.params, system="rossler", y0=[float(v) for v in np.ravel(y0)])
    return traj


# -- Resource competition ecosystem ------------------------------------------

ECO_S = np.array([6.0, 10.0, 14.0, 4.0, 9.0])
# K[j, i]: half-saturation of species i on resource j
ECO_K = np.array([
    [0.39, 0.34, 0.30, 0.24, 0.23],
    [0.22, 0.39, 0.34, 0.30, 0.27],
    [0.27, 0.22, 0.39, 0.34, 0.30],
    [0.30, 0.24, 0.22, 0.39, 0.34],
    [0.34, 0.30, 0.22, 0.20, 0.39],
])
# C[j, i]: content of resource j in species i
ECO_C = np.array([
    [0.04, 0.04, 0.07, 0.04, 0.04],
    [0.08, 0.08, 0.08, 0.10, 0.08],
    [0.10, 0.10, 0.10, 0.10, 0.14],
    [0.05, 0.03, 0.03, 0.03, 0.03],
    [0.07, 0.09, 0.07, 0.07, 0.07],
])


def ecosystem_system(D=0.25, r=1.0, m=0.25, S=ECO_S, K=ECO_K, C=ECO_C) -> OdeSystem:
    """Species abundances N (first n entries) followed by resources R."""
    S, K, C = (np.asarray(a, dtype=np.float64) for a in (S, K, C))
    k, n = K.shape
    r_vec = np.broadcast_to(np.asarray(r, dtype=np.float64), (n,))
    m_vec = np.broadcast_to(np.asarray(m, dtype=np.float64), (n,))

    def f(y, t):
        N, R = y[:n], y[n:]
        mu = np.min(r_vec[None, :] * R[:, None] / (K + R[:, None]), axis=0)
        dN = N * (mu - m_vec)
        dR = D * (S - R) - C @ (mu * N)
        return np.concatenate([dN, dR])

    return OdeSystem(n + k, f, {"D": D, "r": r, "m": m, "S": S.tolist(),
                                "K": K.tolist(), "C": C.tolist()}, "ecosystem")


ECO_DEFAULT_Y0 = np.array([0.1, 0.12, 0.14, 0.16, 0.18, 6.0, 10.0, 14.0, 4.0, 9.0])


def simulate_ecosystem(y0=ECO_DEFAULT_Y0, dt=0.1, duration=200000.0, transient_time=100000.0,
                       **params) -> Trajectory:
    """Resource-competition trajectory; the first ``transient_time`` units are dropped."""
    sys_ = ecosystem_system(**params)
    steps = int(round(duration / dt))
    traj = integrate_rk4(sys_, y0, dt, steps)
    traj = _discard(traj, int(round(transient_time / dt)))
    traj.meta.update(sys_.params, system="ecosystem", y0=[float(v) for v in np.ravel(y0)])
    return traj


# -- Torus --------------------------------------------------------------------

def torus_system(r=1.0, a=0.5, n=15.3) -> OdeSystem:
    def f(y, t):
        snt, cnt = np.sin(n * t), np.cos(n * t)
        st, ct = np.sin(t), np.cos(t)
        return np.array([
            -a * n * snt * ct - (r + a * cnt) * st,
            -a * n * snt * st + (r + a * cnt) * ct,
            a * n * cnt,
        ])
    return OdeSystem(3, f, {"r": r, "a": a, "n": n}, "torus")


def torus_point(t, r=1.0, a=0.5, n=15.3):
    t = np.asarray(t, dtype=np.float64)
    return np.stack([(r + a * np.cos(n * t)) * np.cos(t),
                     (r + a * np.cos(n * t)) * np.sin(t),
                     a * np.sin(n * t)], axis=-1)


def simulate_torus(r=1.0, a=0.5, n=15.3, dt=0.02, steps=2000, t0=0.0) -> Trajectory:
    """Integrate the non-autonomous torus field from its parametric point at t0."""
    sys_ = torus_system(r, a, n)
    traj = integrate_rk4(sys_, torus_point(t0, r, a, n), dt, steps, t0=t0)
    traj.meta.update(sys_.params, system="torus")
    return traj


def torus_surface_residual(points, r=1.0, a=0.5):
    p = np.asarray(points)
    rho = np.hypot(p[:, 0], p[:, 1])
    return (rho - r) ** 2 + p[:, 2] ** 2 - a * a
