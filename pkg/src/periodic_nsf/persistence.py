"""Checkpoints, reports and manifests on disk.

Reports never contain timestamps or host information, so identical runs
produce identical files; wall time lives only in the run manifest.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import platform
from pathlib import Path

import numpy as np

from .discretization import PeriodicField, SpaceTimeBasis
from .solvers import ApproxState

FIELD_NAMES = ("rho", "u", "log_theta", "Z")


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else repr(v)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if hasattr(value, "value") and isinstance(getattr(value, "value"), str):
        return value.value
    return value


def dumps(record: dict) -> str:
    return json.dumps(_jsonable(record), sort_keys=True)


def write_jsonl(path, records) -> Path:
    path = Path(path)
    path.write_text("".join(dumps(r) + "\n" for r in records))
    return path


def read_jsonl(path) -> list[dict]:
    return [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]


def write_metrics_csv(path, rows) -> Path:
    """``rows`` are ``(run_id, metric, value)`` triples."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["run_id", "metric", "value"])
    for run_id, metric, value in rows:
        w.writerow([run_id, metric, repr(float(value)) if isinstance(value, (int, float, np.floating))
                    and not isinstance(value, bool) else value])
    Path(path).write_text(buf.getvalue())
    return Path(path)


def read_metrics_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_checkpoint(directory, state: ApproxState) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for name in FIELD_NAMES:
        (d / f"{name}.pnf").write_bytes(getattr(state, name).to_bytes())
    meta = {"lam": state.lam, "converged": state.converged, "flags": state.flags}
    (d / "state.json").write_text(dumps(meta) + "\n")
    return d


def read_checkpoint(directory, basis: SpaceTimeBasis) -> ApproxState:
    d = Path(directory)
    flds = {n: PeriodicField.from_bytes((d / f"{n}.pnf").read_bytes(), basis) for n in FIELD_NAMES}
    meta = json.loads((d / "state.json").read_text())
    return ApproxState(**flds, lam=float(meta["lam"]), converged=bool(meta["converged"]),
                       flags=meta.get("flags", {}))


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def versions() -> dict:
    import scipy

    from . import __version__
    return {"periodic_nsf": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}
