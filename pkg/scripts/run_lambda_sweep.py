"""Dimensionality error and participation ratio over a grid of regularizer strengths.

    python3 scripts/run_lambda_sweep.py --out results/sweep --seeds 0,1,2,3,4
"""
import argparse

from _common import load_config, parse_list, progress, save
from fnn_forge.experiments import sweep_lambda


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", help="RunConfig JSON (defaults: Lorenz, 5000 points)")
    p.add_argument("--lambdas", help="comma-separated grid")
    p.add_argument("--seeds", help="comma-separated replicate seeds")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default="results/lambda_sweep")
    a = p.parse_args()
    res = sweep_lambda(load_config(a.config), parse_list(a.lambdas), parse_list(a.seeds, int),
                       jobs=a.jobs, progress=progress("replicate"))
    path = save(a.out, "sweep.json", res)
    print(f"{'lambda':>8} {'1-S_dim':>9} {'stderr':>8} {'PR':>6} {'top3':>6}")
    for row in res["summary"]:
        print(f"{row['lambda']:8.3g} {row['mean_error']:9.4f} {row['stderr_error']:8.4f} "
              f"{row['mean_participation_ratio']:6.2f} {row['mean_top3']:6.3f}")
    print(f"argmin λ = {res['argmin_lambda']} (interior: {res['argmin_interior']}), "
          f"largest PR drop at λ = {res['knee_lambda']}")
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
