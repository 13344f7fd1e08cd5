"""Cross-map forecast skill against horizon on stochastic Lorenz, with and without the regularizer.

    python3 scripts/run_forecast_noise.py --out results/forecast --seeds 0,1,2,3,4
"""
import argparse

from _common import load_config, parse_list, progress, save
from fnn_forge.experiments import forecast_noise


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config")
    p.add_argument("--xi", help="comma-separated noise amplitudes")
    p.add_argument("--taus", help="comma-separated horizons")
    p.add_argument("--seeds")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default="results/forecast_noise")
    a = p.parse_args()
    res = forecast_noise(load_config(a.config), parse_list(a.xi), parse_list(a.taus, int),
                         parse_list(a.seeds, int), jobs=a.jobs, progress=progress("pair"))
    path = save(a.out, "forecast.json", res)
    print(f"{'xi0':>5} {'model':>14} " + " ".join(f"tau={t:<4}" for t in res["taus"]))
    for xi in res["xi0"]:
        for label in ("regularized", "unregularized"):
            cells = [r for r in res["table"] if r["xi0"] == xi and r["model"] == label]
            print(f"{xi:5.2f} {label:>14} " + " ".join(f"{c['mean']:8.3f}" for c in cells))
    # per-seed wins of the regularized model
    for xi in res["xi0"]:
        for t in res["taus"]:
            by_seed = {}
            for r in res["replicates"]:
                if r["xi0"] == xi:
                    by_seed.setdefault(r["seed"], {})[r["model"]] = r["s_simp"][t]
            wins = sum(v["regularized"] > v["unregularized"] for v in by_seed.values())
            print(f"xi0={xi:g} tau={t}: regularized wins {wins}/{len(by_seed)}")
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
