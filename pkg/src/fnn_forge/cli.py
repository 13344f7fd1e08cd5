"""Command-line front end: ``python3 -m fnn_forge <command>`` or ``fnn-forge <command>``.

Every command writes its outputs plus ``manifest.json`` under ``--out``;
``replay`` re-runs a command from its manifest.
Exit codes: 0 success, 2 usage or validation error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, datasets
from .baselines import etd_embed, first_autocorrelation_zero, lagged_embed, tica_embed
from .errors import DivergenceError, FnnForgeError, NumericalError
from .experiments import (
    RUN_CONFIG_SCHEMA,
    config_hash,
    dimension_summary,
    fit_replicate,
    forecast_noise,
    prepare_data,
    resolve_config,
    run_parallel,
    sweep_lambda,
    train_config,
)
from .metrics import REPORT_SCHEMA, MetricsError, MetricsReport, compare_all
from .timeseries import read_csv, write_csv

log = logging.getLogger("fnn_forge")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3


class UsageError(Exception):
    pass


# -- small writers -------------------------------------------------------------------

def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _write_table(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(f"{v:.17g}" if isinstance(v, float) else str(v) for v in row) + "\n")


def write_svg_scatter(path: Path, x, y, xlabel: str, ylabel: str, max_points: int = 2000):
    """Minimal static scatter plot: points plus two labelled axes."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    if len(x) > max_points:
        keep = np.linspace(0, len(x) - 1, max_points).astype(int)
        x, y = x[keep], y[keep]
    W, H, pad = 400, 400, 40

    def scale(v, lo, hi):
        span = hi - lo if hi > lo else 1.0
        return (v - lo) / span

    sx = pad + scale(x, x.min(), x.max()) * (W - 2 * pad)
    sy = H - pad - scale(y, y.min(), y.max()) * (H - 2 * pad)
    dots = "".join(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="1"/>' for a, b in zip(sx, sy))
    svg = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">'
           f'<rect width="{W}" height="{H}" fill="white"/>'
           f'<line x1="{pad}" y1="{H - pad}" x2="{W - pad}" y2="{H - pad}" stroke="black"/>'
           f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{H - pad}" stroke="black"/>'
           f'<text x="{W / 2}" y="{H - 10}" text-anchor="middle" font-size="12">{xlabel}</text>'
           f'<text x="12" y="{H / 2}" text-anchor="middle" font-size="12" '
           f'transform="rotate(-90 12 {H / 2})">{ylabel}</text>'
           f'<g fill="steelblue">{dots}</g></svg>\n')
    path.write_text(svg)


def _parse_list(text, kind=float):
    if text is None:
        return None
    try:
        return [kind(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"could not parse list {text!r}") from None


def _load_config(args) -> dict:
    user = {}
    if args.get("config"):
        try:
            user = json.loads(Path(args["config"]).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args['config']}: {exc}") from None
    return resolve_config(user)


def _apply_overrides(cfg: dict, args: dict, lambda_is_grid=False) -> dict:
    if args.get("seed") is not None:
        cfg["model"]["seeds"] = [int(args["seed"])]
    if args.get("epochs") is not None:
        cfg["model"]["epochs"] = int(args["epochs"])
    if args.get("lambda") is not None:
        lams = _parse_list(args["lambda"])
        if lambda_is_grid:
            cfg["sweep"]["lambdas"] = lams
        else:
            if len(lams) != 1:
                raise UsageError("--lambda takes a single value for this command")
            cfg["model"]["lambda"] = lams[0]
    if args.get("out") is not None:
        cfg["output"] = args["out"]
    return resolve_config(cfg)


def _write_embedding(path, pts):
    write_csv(path, pts, [f"h{i + 1}" for i in range(pts.shape[1])])


def _write_truth(path, pts):
    write_csv(path, pts, [f"y{i + 1}" for i in range(pts.shape[1])])


# -- commands -----------------------------------------------------------------------
# Each returns (config or None, {output name: relative path}); artifacts go under ``out``.

def cmd_simulate(args, out: Path):
    system = args["system"]
    params = {}
    for item in args.get("param") or []:
        key, sep, val = item.partition("=")
        if not sep:
            raise UsageError(f"--param expects key=value, got {item!r}")
        try:
            params[key] = json.loads(val)
        except json.JSONDecodeError:
            raise UsageError(f"--param value for {key!r} is not a number or JSON literal") from None
    seed = int(args.get("seed") or 0)
    cloud, record = datasets.simulate_partition(system, seed, int(args.get("points") or 5000), **params)
    csv_path = out / f"{system}.csv"
    write_csv(csv_path, cloud.points, [f"y{i + 1}" for i in range(cloud.dim)])
    sidecar = {"system": system, "seed": seed, "dt": cloud.dt, "rows": len(cloud), "columns": cloud.dim,
               "protocol": record}
    _write_json(out / f"{system}.json", sidecar)
    return None, {"trajectory": csv_path.name, "sidecar": f"{system}.json"}


def _embed_task(cfg, seed):
    data = prepare_data(cfg)
    try:
        model, emb = fit_replicate(data, train_config(cfg, seed))
    except NumericalError as exc:
        return {"seed": seed, "error": str(exc), "history": exc.model.history,
                "epoch": exc.epoch, "batch": exc.batch}
    return {"seed": seed, "model": model.to_dict(), "embedding": emb.points, "truth": data.truth.points,
            "summary": dimension_summary(data.truth, emb), "data_meta": data.meta}


def cmd_embed(args, out: Path):
    cfg = _apply_overrides(_load_config(args), args)
    seeds = cfg["model"]["seeds"]
    results = run_parallel(_embed_task, [(cfg, s) for s in seeds], args.get("jobs") or 1)
    outputs = {}
    failed = None
    for r in results:
        sub = out / f"seed_{r['seed']}"
        sub.mkdir(parents=True, exist_ok=True)
        rel = sub.name
        if "error" in r:
            _write_json(sub / "history.json", {"history": r["history"], "error": r["error"],
                                               "epoch": r["epoch"], "batch": r["batch"]})
            outputs[f"{rel}/history"] = f"{rel}/history.json"
            failed = r
            continue
        _write_embedding(sub / "embedding.csv", r["embedding"])
        _write_truth(sub / "truth.csv", r["truth"])
        _write_json(sub / "model.json", r["model"])
        _write_json(sub / "history.json", {"history": r["model"]["history"]})
        _write_json(sub / "summary.json", dict(r["summary"], data=r["data_meta"]))
        emb = r["embedding"]
        write_svg_scatter(sub / "latent_1_2.svg", emb[:, 0], emb[:, 1], "h1", "h2")
        if emb.shape[1] > 2:
            write_svg_scatter(sub / "latent_1_3.svg", emb[:, 0], emb[:, 2], "h1", "h3")
        for name in ("embedding.csv", "truth.csv", "model.json", "history.json", "summary.json",
                     "latent_1_2.svg", "latent_1_3.svg"):
            if (sub / name).exists():
                outputs[f"{rel}/{name.split('.')[0]}"] = f"{rel}/{name}"
    if failed is not None:
        raise _PartialFailure(cfg, outputs, NumericalError(failed["error"], failed["epoch"], failed["batch"]))
    return cfg, outputs


class _PartialFailure(Exception):
    def __init__(self, cfg, outputs, cause):
        super().__init__(str(cause))
        self.cfg, self.outputs, self.cause = cfg, outputs, cause


def cmd_baseline(args, out: Path):
    cfg = _apply_overrides(_load_config(args), args)
    method = args["method"]
    data = prepare_data(cfg)
    taus = _parse_list(args.get("tau"), int)
    L = min(cfg["model"]["L"], cfg["hankel"]["T"])
    meta = {"method": method}
    if method == "etd":
        fit, _ = etd_embed(data.train, L)
        pts = fit.transform(data.test)
        meta.update(fit.to_dict())
    elif method == "tica":
        lag = taus[0] if taus else 1
        fit, _ = tica_embed(data.train, lag, L)
        pts = fit.transform(data.test)
        meta.update(fit.to_dict())
    else:
        d = int(args.get("d") or 3)
        train_x = data.train.rows[:, 0]
        tau = taus[0] if taus else first_autocorrelation_zero(train_x)
        pts = lagged_embed(data.test_series, d, tau).points
        meta.update(d=d, tau=tau)
    if method == "lagged":
        # lagged row k ends at sample k + (d - 1) * tau
        span = (d - 1) * tau
        truth = data.states[span:span + len(pts)]
    else:
        truth = data.truth.points
    _write_embedding(out / "embedding.csv", pts)
    _write_truth(out / "truth.csv", truth)
    _write_json(out / "baseline.json", meta)
    return cfg, {"embedding": "embedding.csv", "truth": "truth.csv", "baseline": "baseline.json"}


def cmd_compare(args, out: Path):
    taus = _parse_list(args.get("tau"), int) or [0, 1, 10, 20, 50]
    seed = int(args.get("seed") or 0)
    truth = read_csv(args["truth"]).values
    reports = []
    for path in args["embeddings"]:
        emb = read_csv(path).values
        if len(emb) != len(truth):
            raise UsageError(f"{path} has {len(emb)} rows but the truth has {len(truth)}")
        reports.append(compare_all(emb, truth, taus, seed=seed))
    names = [str(Path(p)) for p in args["embeddings"]]
    flat = [r.flat() for r in reports]
    keys = list(flat[0])
    if len(reports) == 1:
        doc = reports[0].to_dict()
        rows = [(k, float(flat[0][k])) for k in keys]
        _write_table(out / "table.csv", ["score", "value"], rows)
    else:
        summary = {}
        for k in keys:
            v = np.array([f[k] for f in flat])
            summary[k] = {"mean": float(v.mean()), "stderr": float(v.std(ddof=1) / np.sqrt(len(v)))}
        doc = {"replicates": [dict(r.to_dict(), source=n) for r, n in zip(reports, names)],
               "summary": summary}
        rows = [(k, summary[k]["mean"], summary[k]["stderr"]) for k in keys]
        _write_table(out / "table.csv", ["score", "mean", "stderr"], rows)
    _write_json(out / "report.json", doc)
    return None, {"report": "report.json", "table": "table.csv"}


def cmd_sweep_lambda(args, out: Path):
    cfg = _apply_overrides(_load_config(args), args, lambda_is_grid=True)

    def progress(r):
        log.info("lambda=%g seed=%d 1-S_dim=%.3f", r["lam"], r["seed"], 1 - r["s_dim"])

    res = sweep_lambda(cfg, jobs=args.get("jobs") or 1, progress=progress)
    _write_table(out / "sweep.csv", ["lambda", "seed", "one_minus_s_dim", "top3", "participation_ratio",
                                     "threshold_count"],
                 [(r["lam"], r["seed"], 1.0 - r["s_dim"], r["top3"], r["participation_ratio"],
                   r["threshold_count"]) for r in res["replicates"]])
    L = cfg["model"]["L"]
    _write_table(out / "profiles.csv", ["lambda", "seed"] + [f"v{i + 1}" for i in range(L)],
                 [(r["lam"], r["seed"], *map(float, r["profile"])) for r in res["replicates"]])
    _write_table(out / "summary.csv", ["lambda", "mean_one_minus_s_dim", "stderr", "mean_participation_ratio",
                                       "mean_top3"],
                 [(s["lambda"], s["mean_error"], s["stderr_error"], s["mean_participation_ratio"],
                   s["mean_top3"]) for s in res["summary"]])
    _write_json(out / "sweep.json", res)
    return cfg, {"sweep": "sweep.csv", "profiles": "profiles.csv", "summary": "summary.csv",
                 "json": "sweep.json"}


def cmd_forecast_noise(args, out: Path):
    cfg = _apply_overrides(_load_config(args), args)
    xi = _parse_list(args.get("xi"))
    taus = _parse_list(args.get("tau"), int)
    res = forecast_noise(cfg, xi, taus, jobs=args.get("jobs") or 1)
    _write_table(out / "forecast.csv", ["xi0", "model", "tau", "mean", "stderr", "n"],
                 [(r["xi0"], r["model"], r["tau"], r["mean"], r["stderr"], r["n"]) for r in res["table"]])
    _write_table(out / "replicates.csv", ["xi0", "seed", "model", "tau", "s_simp"],
                 [(r["xi0"], r["seed"], r["model"], t, float(v))
                  for r in res["replicates"] for t, v in r["s_simp"].items()])
    res = dict(res, replicates=[dict(r, s_simp={str(k): v for k, v in r["s_simp"].items()})
                                for r in res["replicates"]])
    _write_json(out / "forecast.json", res)
    return cfg, {"forecast": "forecast.csv", "replicates": "replicates.csv", "json": "forecast.json"}


def cmd_schema(args, out: Path | None):
    doc = RUN_CONFIG_SCHEMA if args["which"] == "config" else REPORT_SCHEMA
    sys.stdout.write(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    return None, {}


COMMANDS = {
    "simulate": cmd_simulate,
    "embed": cmd_embed,
    "baseline": cmd_baseline,
    "compare": cmd_compare,
    "sweep-lambda": cmd_sweep_lambda,
    "forecast-noise": cmd_forecast_noise,
}


# -- argument parsing -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fnn-forge", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"fnn-forge {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True, training=True):
        if config:
            sp.add_argument("--config", help="RunConfig JSON file")
        sp.add_argument("--seed", type=int, help="seed (replicate seed for training commands)")
        sp.add_argument("--out", help="output directory")
        if training:
            sp.add_argument("--lambda", dest="lambda", help="regularizer strength (grid for sweep-lambda)")
            sp.add_argument("--epochs", type=int)
            sp.add_argument("--jobs", type=int, default=1, help="parallel replicates")

    sp = sub.add_parser("simulate", help="integrate a built-in system")
    sp.add_argument("system", choices=datasets.SYSTEMS)
    sp.add_argument("--points", type=int, default=5000)
    sp.add_argument("--param", action="append", help="protocol override key=value (repeatable)")
    common(sp, config=False, training=False)

    sp = sub.add_parser("embed", help="train autoencoders and embed the test split")
    common(sp)

    sp = sub.add_parser("baseline", help="linear or lagged embedding of the test split")
    sp.add_argument("method", choices=("etd", "tica", "lagged"))
    sp.add_argument("--tau", help="tICA lag or delay (default 1 / first autocorrelation zero)")
    sp.add_argument("--d", type=int, help="lagged embedding dimension (default 3)")
    common(sp, training=False)

    sp = sub.add_parser("compare", help="similarity scores of embeddings against a truth CSV")
    sp.add_argument("embeddings", nargs="+", help="embedding CSV(s); several = replicate mode")
    sp.add_argument("--truth", required=True)
    sp.add_argument("--tau", help="comma-separated forecast horizons")
    common(sp, config=False, training=False)

    sp = sub.add_parser("sweep-lambda", help="dimensionality error over a λ grid")
    common(sp)

    sp = sub.add_parser("forecast-noise", help="cross-map forecasting on noisy Lorenz")
    sp.add_argument("--xi", help="comma-separated noise amplitudes")
    sp.add_argument("--tau", help="comma-separated forecast horizons")
    common(sp)

    sp = sub.add_parser("replay", help="re-run a command from its manifest")
    sp.add_argument("manifest")
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("schema", help="print a JSON schema")
    sp.add_argument("which", choices=("config", "report"))
    return p


def _default_out(command, args):
    if command in ("embed", "baseline", "sweep-lambda", "forecast-noise"):
        return None  # taken from the resolved config
    return f"runs/{command}"


def execute(command: str, args: dict) -> int:
    """Run one command with a plain argument dict; writes the manifest."""
    started = time.perf_counter()
    out_arg = args.get("out") or _default_out(command, args)
    try:
        if out_arg is None:
            cfg0 = _apply_overrides(_load_config(args), args, lambda_is_grid=command == "sweep-lambda")
            out_arg = cfg0["output"]
            args = dict(args, out=out_arg)
        out = Path(out_arg)
        out.mkdir(parents=True, exist_ok=True)
        cfg, outputs = COMMANDS[command](args, out)
        status = EXIT_OK
    except _PartialFailure as exc:
        cfg, outputs, status = exc.cfg, exc.outputs, EXIT_NUMERIC
        print(f"error: {exc.cause}", file=sys.stderr)
    except (UsageError, FnnForgeError) as exc:
        if isinstance(exc, (NumericalError, DivergenceError)):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        if isinstance(exc, MetricsError) and not all(isinstance(e, ValueError) for e in exc.errors.values()):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    recorded = {k: v for k, v in args.items() if k != "out" and v is not None}
    manifest = {
        "tool": "fnn-forge", "version": __version__, "command": command, "args": recorded,
        "config": cfg, "config_hash": config_hash(cfg) if cfg else None,
        "outputs": outputs, "status": status,
        "timings": {"wall_seconds": round(time.perf_counter() - started, 3)},
    }
    _write_json(out / "manifest.json", manifest)
    if status == EXIT_OK:
        print(out)
    return status


def replay(manifest_path: str, out: str) -> int:
    """Re-run the manifest's command, with its resolved config, into ``out``."""
    try:
        m = json.loads(Path(manifest_path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read manifest: {exc}", file=sys.stderr)
        return EXIT_USAGE
    command = m.get("command")
    if command not in COMMANDS:
        print(f"error: manifest names unknown command {command!r}", file=sys.stderr)
        return EXIT_USAGE
    args = dict(m.get("args", {}))
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if m.get("config") is not None:
        cfg = dict(m["config"], output=str(out_dir))
        cfg_path = out_dir / "replayed_config.json"
        _write_json(cfg_path, cfg)
        # the resolved config already holds every override
        args = {k: v for k, v in args.items() if k not in ("lambda", "epochs", "seed", "config")}
        args["config"] = str(cfg_path)
    args["out"] = str(out_dir)
    return execute(command, args)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    args = {k: v for k, v in vars(ns).items() if k not in ("command", "verbose")}
    if ns.command == "schema":
        cmd_schema(args, None)
        return EXIT_OK
    if ns.command == "replay":
        return replay(args["manifest"], args["out"])
    return execute(ns.command, args)


if __name__ == "__main__":
    sys.exit(main())
