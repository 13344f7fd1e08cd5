"""Classical false-nearest-neighbor dimension as a function of the delay.

    python3 scripts/kennel_tau_scan.py --system lorenz --taus 1,2,5,10,20,40,56
"""
import argparse

from _common import parse_list
from fnn_forge import datasets
from fnn_forge.baselines import first_autocorrelation_zero, kennel_fnn_dimension


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--system", default="lorenz")
    p.add_argument("--points", type=int, default=5000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--taus", help="delays to scan (default: first autocorrelation zero)")
    p.add_argument("--d-max", type=int, default=10)
    a = p.parse_args()
    ds = datasets.load_builtin(a.system, n_points=a.points, seed=a.seed)
    x = ds.observed("train")
    taus = parse_list(a.taus, int) or [first_autocorrelation_zero(x)]
    print(f"first autocorrelation zero: {first_autocorrelation_zero(x)}")
    for tau in taus:
        res = kennel_fnn_dimension(x, tau, a.d_max)
        fr = " ".join(f"{f:.3f}" for f in res.fractions)
        print(f"tau={tau:3d} d*={res.dimension:2d} saturated={res.saturated} fractions: {fr}")


if __name__ == "__main__":
    main()
