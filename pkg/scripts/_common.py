"""Helpers shared by the experiment runners."""
import json
import sys
import time
from pathlib import Path

from fnn_forge.experiments import resolve_config


def load_config(path):
    return resolve_config(json.loads(Path(path).read_text()) if path else {})


def parse_list(text, kind=float):
    return [kind(v) for v in text.split(",")] if text else None


def save(out, name, obj):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(json.dumps(obj, indent=2, sort_keys=True))
    return out / name


def progress(prefix):
    t0 = time.time()

    def log(item):
        print(f"[{time.time() - t0:7.1f}s] {prefix}: {item}", file=sys.stderr, flush=True)
    return log
