"""Dataset files and result documents.

CSV layout: a header ``t,label1,label2,...`` followed by one row per time
point, with ``t`` in the original domain and one function per column. The
JSON layout is ``{"t": [...], "functions": [{"label": ..., "values": [...]}]}``.
Times must be uniformly spaced; they are normalized to [0, 1] on ingest.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .functions import FunctionSample, Grid
from .warping import Warping

SPACING_RTOL = 1e-6


def grid_from_times(t) -> Grid:
    t = np.asarray(t, dtype=float)
    if t.ndim != 1 or t.size < 3:
        raise InvalidInputError("need at least three time points")
    if not np.all(np.isfinite(t)):
        raise InvalidInputError("time column contains non-finite values")
    steps = np.diff(t)
    if np.any(steps <= 0):
        raise InvalidInputError("time column must be strictly increasing")
    if np.max(np.abs(steps - steps.mean())) > SPACING_RTOL * (t[-1] - t[0]):
        raise InvalidInputError("time column must be uniformly spaced; resample first")
    return Grid(t.size, float(t[0]), float(t[-1]))


def _build(t, columns, labels) -> list[FunctionSample]:
    grid = grid_from_times(t)
    if not columns:
        raise InvalidInputError("dataset contains no functions")
    if len(set(labels)) != len(labels):
        raise InvalidInputError("function labels must be unique")
    return [FunctionSample(grid, np.asarray(c, dtype=float), lab) for c, lab in zip(columns, labels)]


def read_csv(path) -> list[FunctionSample]:
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if len(rows) < 2:
        raise InvalidInputError(f"{path}: empty dataset")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2:
        raise InvalidInputError(f"{path}: need a time column and at least one function")
    try:
        data = np.array([[float(x) for x in row] for row in rows[1:]])
    except ValueError as exc:
        raise InvalidInputError(f"{path}: non-numeric entry ({exc})") from None
    if data.ndim != 2 or data.shape[1] != len(header):
        raise InvalidInputError(f"{path}: ragged rows; every row needs {len(header)} fields")
    return _build(data[:, 0], list(data[:, 1:].T), header[1:])


def read_json(path) -> list[FunctionSample]:
    try:
        doc = json.loads(Path(path).read_text())
        t = doc["t"]
        funcs = doc["functions"]
        labels = [str(f["label"]) for f in funcs]
        columns = [f["values"] for f in funcs]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise InvalidInputError(f"{path}: malformed JSON dataset ({exc})") from None
    if any(len(c) != len(t) for c in columns):
        raise InvalidInputError(f"{path}: every function needs {len(t)} values")
    return _build(t, columns, labels)


def read_dataset(path, fmt: str | None = None) -> list[FunctionSample]:
    """Read a CSV or JSON dataset; the format defaults to the file suffix."""
    path = Path(path)
    if not path.exists():
        raise InvalidInputError(f"no such file: {path}")
    fmt = fmt or ("json" if path.suffix.lower() == ".json" else "csv")
    if fmt == "json":
        return read_json(path)
    if fmt == "csv":
        return read_csv(path)
    raise InvalidInputError(f"unknown format {fmt!r}")


def _fmt(x: float) -> str:
    return repr(float(x))


def columns_csv(t, columns, labels, time_name: str = "t") -> str:
    """CSV text with a time column followed by one column per series."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([time_name, *[str(lab) for lab in labels]])
    cols = [np.asarray(c, dtype=float) for c in columns]
    for j, tj in enumerate(np.asarray(t, dtype=float)):
        writer.writerow([_fmt(tj), *[_fmt(c[j]) for c in cols]])
    return buf.getvalue()


def dataset_csv(fs) -> str:
    fs = list(fs)
    return columns_csv(fs[0].grid.original, [f.values for f in fs], [f.label for f in fs])


def write_csv(path, fs):
    Path(path).write_text(dataset_csv(fs))


def warp_original(gamma: Warping) -> np.ndarray:
    """Warp values expressed in the original time units."""
    return gamma.grid.to_original(gamma.values)


def _series(obj, grid) -> dict:
    """Serialize a function or warp as ``{"t": ..., "values": ...}`` in original units."""
    if obj is None:
        return None
    if isinstance(obj, Warping):
        values = warp_original(obj)
    elif isinstance(obj, FunctionSample):
        values = obj.values
    else:
        # difference of warp values, rescaled to original time units
        values = np.asarray(obj, dtype=float) * (grid.domain_max - grid.domain_min)
    return {"t": [float(x) for x in grid.original], "values": [float(v) for v in values]}


def result_document(result, cfg, labels, grid, version: str, data_seed=None) -> dict:
    """Plain-data summary of a :class:`ChangepointResult` for serialization."""
    k = result.k_star
    return {
        "method": result.method,
        "statistic": float(result.statistic),
        "k_star": k,
        "k_star_label": None if k is None else str(labels[k - 1]),
        "p_value": float(result.p_value),
        "lambda2": float(result.lambda2),
        "lambda2_p_value": result.lambda2_p_value,
        "alpha": cfg.alpha,
        "decision": "reject" if result.p_value <= cfg.alpha else "retain",
        "n": result.n,
        "converged": bool(result.converged),
        "degenerate": bool(result.degenerate),
        "num_components": result.num_components,
        "eigenvalues": [float(x) for x in result.eigenvalues],
        "cusum_trace": [float(x) for x in result.cusum_trace],
        "mean_before": _series(result.mean_before, grid),
        "mean_after": _series(result.mean_after, grid),
        "delta_hat": _series(result.delta_hat, grid),
        "config": config_echo(cfg),
        "seeds": {"mc": cfg.rng_seed, "data": data_seed},
        "version": version,
    }


def config_echo(cfg) -> dict:
    sel = cfg.component_selector
    selector = {"fixed": sel.d} if hasattr(sel, "d") else {"fraction": sel.fraction}
    return {
        "alpha": cfg.alpha,
        "mc_reps": cfg.mc_reps,
        "mc_grid": cfg.mc_grid,
        "component_selector": selector,
        "eigen_truncation": cfg.eigen_truncation,
        "rng_seed": cfg.rng_seed,
        "karcher_tol": cfg.karcher_tol,
        "karcher_max_iter": cfg.karcher_max_iter,
        "prefix_mode": cfg.prefix_mode,
        "continuity_correction": cfg.continuity_correction,
        "lambda2_permutations": cfg.lambda2_permutations,
        "limit_grid": cfg.limit_grid,
    }


def dumps(doc: dict) -> str:
    """Deterministic JSON text (sorted keys, shortest round-trip floats)."""
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def loads(text: str) -> dict:
    return json.loads(text)
