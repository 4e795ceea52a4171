"""CSV/JSON writers and run manifests."""
from __future__ import annotations

import csv
import json
import time
from pathlib import Path

from . import __version__

CSV_FORMAT = "{:.17g}"


def _fmt(v):
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float) or hasattr(v, "dtype"):
        return CSV_FORMAT.format(float(v))
    return str(v)


def write_csv(path, header, rows):
    """Header row, '.' decimals, 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        return header, [list(map(float, row)) for row in r]


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def manifest(command, system_hash=None, config=None, seed=None, started=None):
    return {
        "command": command,
        "system_hash": system_hash,
        "config": config or {},
        "seed": seed,
        "version": __version__,
        "wall_time": None if started is None else time.time() - started,
    }


def write_manifest(output_path, m):
    """Sidecar ``<output>.manifest.json`` so data files stay byte-identical across reruns."""
    return write_json(str(output_path) + ".manifest.json", m)
