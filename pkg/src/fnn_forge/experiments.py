"""Experiment orchestration shared by the command line and the test-suite.

A run configuration is a plain JSON-compatible dict (see ``RUN_CONFIG_SCHEMA``);
``resolve_config`` fills defaults and validates it.
"""
from __future__ import annotations

import copy
import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import jsonschema
import numpy as np

from . import datasets
from .autoencoder import TrainConfig, TrainedAutoencoder, train
from .errors import InvalidArgument
from .fnn import FnnConfig
from .metrics import effective_dimension, s_dim, simplex_forecast
from .timeseries import HankelMatrix, PointCloud, TimeSeries, build_hankel, read_csv, split_train_val_test

DEFAULT_TAUS = [0, 1, 10, 20, 50]
DEFAULT_LAMBDA_GRID = [0.0, 0.003, 0.01, 0.03, 0.1, 0.3]
DEFAULT_XI_GRID = [0.0, 0.25, 0.5]
DEFAULT_FORECAST_TAUS = [1, 10, 20, 50]

_NUM = {"type": "number"}
_INT = {"type": "integer"}
RUN_CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "dataset": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "builtin": {"enum": list(datasets.SYSTEMS)},
                "seed": {"type": "integer", "minimum": 0},
                "n_points": {"type": "integer", "minimum": 100},
                "params": {"type": "object"},
                "csv": {"type": "string"},
                "column": {"type": "integer", "minimum": 0},
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "segment_len": {"type": "integer", "minimum": 10},
                "gap": {"type": "integer", "minimum": 0},
            },
            "oneOf": [{"required": ["builtin"]}, {"required": ["csv"]}],
        },
        "hankel": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"T": {"type": "integer", "minimum": 2}},
        },
        "model": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "L": {"type": "integer", "minimum": 2},
                "lambda": {"type": "number", "minimum": 0},
                "lr": {"type": "number", "exclusiveMinimum": 0},
                "epochs": {"type": "integer", "minimum": 1},
                "batch_size": {"type": "integer", "minimum": 2},
                "gn_sigma": {"type": "number", "minimum": 0},
                "seeds": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
                "fnn": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {"r_tol": _NUM, "a_tol": _NUM, "k": {"type": ["integer", "null"]},
                                   "activity": {"enum": ["second_moment", "mean"]}},
                },
            },
        },
        "metrics": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "taus": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                "homology_points": {"type": "integer", "minimum": 3},
                "seed": _INT,
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"lambdas": {"type": "array", "items": {"type": "number", "minimum": 0},
                                       "minItems": 3}},
        },
        "forecast": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "xi0": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
                "taus": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 2},
            },
        },
        "output": {"type": "string"},
    },
}

DEFAULT_CONFIG = {
    "dataset": {"builtin": "lorenz", "seed": 0, "n_points": 5000, "params": {}},
    "hankel": {"T": 10},
    "model": {"L": 10, "lambda": 0.03, "lr": 1e-3, "epochs": 100, "batch_size": 512,
              "gn_sigma": 0.5, "seeds": [0], "fnn": {}},
    "metrics": {"taus": list(DEFAULT_TAUS), "homology_points": 400, "seed": 0},
    "sweep": {"lambdas": list(DEFAULT_LAMBDA_GRID)},
    "forecast": {"xi0": list(DEFAULT_XI_GRID), "taus": list(DEFAULT_FORECAST_TAUS)},
    "output": "runs/default",
}


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "params":
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def validate_config(cfg: dict):
    """Raise InvalidArgument if ``cfg`` does not match the schema."""
    try:
        jsonschema.validate(cfg, RUN_CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise InvalidArgument(f"invalid config at {where}: {exc.message}") from None


def resolve_config(user: dict | None = None) -> dict:
    """Validate a user config and fill in defaults."""
    user = user or {}
    validate_config(user)
    if "dataset" in user and "csv" in user["dataset"]:
        base = {k: v for k, v in DEFAULT_CONFIG.items() if k != "dataset"}
        base["dataset"] = {"column": 0, "dt": 1.0, "segment_len": 5000, "gap": 1000}
    else:
        base = DEFAULT_CONFIG
    cfg = _merge(base, user)
    validate_config(cfg)
    return cfg


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def train_config(cfg: dict, seed: int, lam: float | None = None) -> TrainConfig:
    m = cfg["model"]
    return TrainConfig(lam=m["lambda"] if lam is None else lam, lr=m["lr"], epochs=m["epochs"],
                       batch_size=m["batch_size"], seed=seed, gn_sigma=m["gn_sigma"],
                       fnn=FnnConfig(**m.get("fnn", {})), latent=m["L"])


# -- data -------------------------------------------------------------------------

@dataclass
class PreparedData:
    """Standardized Hankel matrices plus the time-aligned test truth.

    ``states`` is the full test-partition state, one row per sample, for
    embeddings with their own alignment.
    """

    train: HankelMatrix
    val: HankelMatrix
    test: HankelMatrix
    truth: PointCloud
    test_series: np.ndarray
    states: np.ndarray
    meta: dict


def _hankel_std(x, mean, std, T, dt):
    return build_hankel(TimeSeries((x - mean) / std, dt), T)


def prepare_data(cfg: dict, dataset_seed: int | None = None, **overrides) -> PreparedData:
    """Simulate or read the series, standardize by training statistics, lift to Hankel rows.

    Hankel row i spans samples i..i+T-1 and is paired with the state at its
    last sample, so an embedding never sees data later than its truth row.
    """
    d = cfg["dataset"]
    T = cfg["hankel"]["T"]
    if "builtin" in d:
        seed = d["seed"] if dataset_seed is None else dataset_seed
        params = dict(d.get("params", {}), **overrides)
        ds = datasets.load_builtin(d["builtin"], seed, d["n_points"], **params)
        obs = ds.observe
        xs = [p.points[:, obs] for p in (ds.train, ds.val, ds.test)]
        truth_pts = ds.test.points
        dt = ds.test.dt
        meta = ds.meta
    else:
        series = read_csv(d["csv"], dt=d["dt"])
        if d["column"] >= series.n_channels:
            raise InvalidArgument(f"column {d['column']} out of range for {series.n_channels} columns")
        parts = split_train_val_test(series, d["segment_len"], d["gap"])
        xs = [p.values[:, d["column"]] for p in parts]
        truth_pts = parts[2].values
        dt = series.dt
        meta = {"csv": d["csv"], "column": d["column"]}
    mean, std = float(xs[0].mean()), float(xs[0].std())
    if std == 0:
        raise InvalidArgument("observed training series is constant")
    hs = [_hankel_std(x, mean, std, T, dt) for x in xs]
    truth = PointCloud(truth_pts[T - 1:T - 1 + len(hs[2])], dt)
    meta = dict(meta, standardize={"mean": mean, "std": std}, T=T)
    return PreparedData(hs[0], hs[1], hs[2], truth, (xs[2] - mean) / std, truth_pts, meta)


# -- replicate training ---------------------------------------------------------------

def worker_count(jobs: int | None) -> int:
    jobs = max(1, int(jobs or 1))
    cap = os.environ.get("FNN_FORGE_THREADS")
    if cap:
        try:
            jobs = min(jobs, max(1, int(cap)))
        except ValueError:
            raise InvalidArgument(f"FNN_FORGE_THREADS must be an integer, got {cap!r}") from None
    return jobs


def run_parallel(fn, tasks, jobs=1):
    """Map ``fn`` over ``tasks``; results come back in task order either way."""
    jobs = worker_count(jobs)
    if jobs == 1 or len(tasks) <= 1:
        return [fn(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, *zip(*tasks)))


def fit_replicate(data: PreparedData, tcfg: TrainConfig) -> tuple[TrainedAutoencoder, PointCloud]:
    model = train(data.train, data.val, tcfg)
    return model, model.embed(data.test)


def dimension_summary(truth: PointCloud, embedding: PointCloud) -> dict:
    """S_dim against the padded truth plus the latent variance profile."""
    vt = truth.points.var(axis=0)
    ve = embedding.points.var(axis=0)
    vt_pad = np.concatenate([vt, np.zeros(max(0, len(ve) - len(vt)))])
    prof = np.sort(ve / ve.sum())[::-1] if ve.sum() > 0 else np.zeros_like(ve)
    count, pr = effective_dimension(ve) if ve.sum() > 0 else (0, 0.0)
    return {"s_dim": s_dim(vt_pad, ve), "profile": prof.tolist(),
            "top3": float(prof[:3].sum()), "threshold_count": count, "participation_ratio": pr}


def _sweep_task(cfg, lam, seed):
    data = prepare_data(cfg)
    model, emb = fit_replicate(data, train_config(cfg, seed, lam))
    out = dimension_summary(data.truth, emb)
    out.update(lam=float(lam), seed=int(seed))
    return out


def sweep_lambda(cfg: dict, lambdas=None, seeds=None, jobs=1, progress=None) -> dict:
    """Train replicates over a λ grid and summarize the dimensionality error.

    The λ minimizing mean 1 - S_dim and the λ after which the mean
    participation ratio drops the most are reported; neither is imposed.
    """
    lambdas = [float(v) for v in (lambdas or cfg["sweep"]["lambdas"])]
    if len(lambdas) < 3:
        raise InvalidArgument("a λ sweep needs at least 3 grid values")
    seeds = list(seeds if seeds is not None else cfg["model"]["seeds"])
    tasks = [(cfg, lam, s) for lam in lambdas for s in seeds]
    rows = []
    for chunk_start in range(0, len(tasks), max(1, worker_count(jobs))):
        chunk = tasks[chunk_start:chunk_start + max(1, worker_count(jobs))]
        for r in run_parallel(_sweep_task, chunk, jobs):
            rows.append(r)
            if progress:
                progress(r)
    summary = []
    for lam in lambdas:
        sel = [r for r in rows if r["lam"] == lam]
        err = np.array([1.0 - r["s_dim"] for r in sel])
        pr = np.array([r["participation_ratio"] for r in sel])
        summary.append({"lambda": lam, "mean_error": float(err.mean()), "stderr_error": _stderr(err),
                        "mean_participation_ratio": float(pr.mean()),
                        "mean_top3": float(np.mean([r["top3"] for r in sel]))})
    means = np.array([s["mean_error"] for s in summary])
    best = int(np.argmin(means))
    drops = -np.diff([s["mean_participation_ratio"] for s in summary])
    knee = lambdas[int(np.argmax(drops)) + 1] if len(drops) else None
    return {"lambdas": lambdas, "seeds": seeds, "replicates": rows, "summary": summary,
            "argmin_lambda": lambdas[best], "argmin_interior": 0 < best < len(lambdas) - 1,
            "knee_lambda": knee}


def _stderr(a):
    a = np.asarray(a, dtype=float)
    return float(a.std(ddof=1) / np.sqrt(len(a))) if len(a) > 1 else 0.0


def _forecast_task(cfg, xi0, seed, taus, lam_reg):
    data = prepare_data(cfg, dataset_seed=seed, xi0=xi0)
    out = []
    for label, lam in (("regularized", lam_reg), ("unregularized", 0.0)):
        _, emb = fit_replicate(data, train_config(cfg, seed, lam))
        scores = {int(t): simplex_forecast(emb, data.truth, int(t)) for t in taus}
        out.append({"xi0": float(xi0), "seed": int(seed), "model": label, "lambda": float(lam),
                    "s_simp": scores})
    return out


def forecast_noise(cfg: dict, xi_grid=None, taus=None, seeds=None, jobs=1, progress=None) -> dict:
    """Cross-map forecast skill vs horizon for regularized and plain models on noisy Lorenz."""
    cfg = _merge(cfg, {"dataset": {"builtin": "lorenz-stochastic"}})
    xi_grid = [float(v) for v in (xi_grid or cfg["forecast"]["xi0"])]
    taus = [int(t) for t in (taus or cfg["forecast"]["taus"])]
    seeds = list(seeds if seeds is not None else cfg["model"]["seeds"])
    lam = cfg["model"]["lambda"]
    tasks = [(cfg, xi, s, taus, lam) for xi in xi_grid for s in seeds]
    rows = []
    for chunk in run_parallel(_forecast_task, tasks, jobs):
        rows.extend(chunk)
        if progress:
            progress(chunk)
    table = []
    for xi in xi_grid:
        for label in ("regularized", "unregularized"):
            sel = [r for r in rows if r["xi0"] == xi and r["model"] == label]
            for t in taus:
                v = np.array([r["s_simp"][t] for r in sel])
                table.append({"xi0": xi, "model": label, "tau": t, "mean": float(v.mean()),
                              "stderr": _stderr(v), "n": len(v)})
    return {"xi0": xi_grid, "taus": taus, "seeds": seeds, "replicates": rows, "table": table}
