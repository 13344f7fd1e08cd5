"""Similarity scores of every embedding method on the built-in systems.

Trains the autoencoder with and without the regularizer, fits the ETD and tICA
baselines and a lagged embedding, and scores each against the hidden state.
Means and standard errors over seeds go to ``table.csv``.

    python3 scripts/run_benchmark.py --systems lorenz,rossler --seeds 0,1,2 --epochs 100
"""
import argparse
import csv

import numpy as np

from _common import parse_list, progress, save
from fnn_forge.baselines import etd_embed, first_autocorrelation_zero, lagged_embed, tica_embed
from fnn_forge.experiments import fit_replicate, prepare_data, resolve_config, train_config
from fnn_forge.metrics import compare_all

METHODS = ("fnn", "ae", "etd", "tica", "lagged")


def embeddings(cfg, seed, lam):
    """Embeddings keyed by method, each paired with its own truth rows."""
    data = prepare_data(cfg)
    L = cfg["model"]["L"]
    out = {}
    truth = data.truth.points
    out["fnn"] = fit_replicate(data, train_config(cfg, seed, lam))[1].points, truth
    out["ae"] = fit_replicate(data, train_config(cfg, seed, 0.0))[1].points, truth
    out["etd"] = etd_embed(data.train, L)[0].transform(data.test), truth
    out["tica"] = tica_embed(data.train, 1, L)[0].transform(data.test), truth
    tau = first_autocorrelation_zero(data.train.rows[:, 0])
    lagged = lagged_embed(data.test_series, 3, tau).points
    out["lagged"] = lagged, data.states[2 * tau:2 * tau + len(lagged)]
    return out


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--systems", default="lorenz,rossler,torus")
    p.add_argument("--seeds", default="0,1,2")
    p.add_argument("--lambda", dest="lam", type=float, default=0.03)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--points", type=int, default=5000)
    p.add_argument("--batch-size", type=int, default=512)
    p.add_argument("--out", default="results/benchmark")
    a = p.parse_args()
    log = progress("benchmark")
    rows = []
    for system in a.systems.split(","):
        for seed in parse_list(a.seeds, int):
            cfg = resolve_config({"dataset": {"builtin": system, "seed": seed, "n_points": a.points},
                                  "model": {"epochs": a.epochs, "batch_size": a.batch_size}})
            embs = embeddings(cfg, seed, a.lam)
            for method in METHODS:
                emb, truth = embs[method]
                scores = compare_all(emb, truth, seed=seed).flat()
                rows.append({"system": system, "seed": seed, "method": method, **scores})
                log(f"{system} seed {seed} {method}")
    save(a.out, "replicates.json", rows)
    keys = [k for k in rows[0] if k.startswith("s_")]
    with open(f"{a.out}/table.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["system", "method", "score", "mean", "stderr"])
        for system in dict.fromkeys(r["system"] for r in rows):
            for method in METHODS:
                sel = [r for r in rows if r["system"] == system and r["method"] == method]
                for k in keys:
                    v = np.array([r[k] for r in sel], dtype=float)
                    se = v.std(ddof=1) / np.sqrt(len(v)) if len(v) > 1 else 0.0
                    w.writerow([system, method, k, f"{np.nanmean(v):.4f}", f"{se:.4f}"])
    print(f"wrote {a.out}/table.csv")


if __name__ == "__main__":
    main()
