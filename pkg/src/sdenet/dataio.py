"""Dataset and result serialization.

A dataset is a CSV table with a single timestamp column ``t``, node
columns ``y1..yp``, and optional input columns ``u1..uq``, plus a JSON
sidecar carrying metadata (and the generating system when simulated).
All writers are deterministic: same content in, same bytes out.
"""

import csv
import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .simulator import SystemMatrices


@dataclass
class TimeSeriesData:
    times: np.ndarray
    z: np.ndarray
    u: np.ndarray | None = None
    system: SystemMatrices | None = None
    meta: dict | None = None

    @property
    def n_nodes(self):
        return self.z.shape[1]

    @property
    def n_inputs(self):
        return 0 if self.u is None else self.u.shape[1]


def sidecar_path(csv_path):
    root, _ = os.path.splitext(csv_path)
    return root + ".json"


def _fmt(x):
    return repr(float(x))


def save_dataset(csv_path, data, sidecar=None):
    """Write the CSV table and its JSON sidecar; returns the sidecar path."""
    times = np.asarray(data.times, dtype=float)
    z = np.asarray(data.z, dtype=float)
    u = None if data.u is None else np.asarray(data.u, dtype=float)
    p = z.shape[1]
    q = 0 if u is None else u.shape[1]
    header = ["t"] + [f"y{j + 1}" for j in range(p)] + [f"u{j + 1}" for j in range(q)]
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i in range(len(times)):
            row = [_fmt(times[i])] + [_fmt(v) for v in z[i]]
            if u is not None:
                row += [_fmt(v) for v in u[i]]
            writer.writerow(row)
    side = sidecar if sidecar is not None else sidecar_path(csv_path)
    payload = {
        "format": "sdenet-dataset",
        "version": 1,
        "n_nodes": int(p),
        "n_inputs": int(q),
        "n_samples": int(len(times)),
        "system": None if data.system is None else data.system.to_dict(),
        "meta": data.meta or {},
    }
    write_json(side, payload)
    return side


def load_dataset(csv_path, sidecar=None):
    """Read a dataset, validating shape and monotone timestamps."""
    if not os.path.exists(csv_path):
        raise DataError(f"dataset not found: {csv_path}")
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{csv_path}: empty file") from None
        rows = list(reader)
    if not header or header[0] != "t":
        raise DataError(f"{csv_path}: first column must be 't'")
    y_cols = [i for i, name in enumerate(header) if name.startswith("y")]
    u_cols = [i for i, name in enumerate(header) if name.startswith("u")]
    if len(y_cols) + len(u_cols) + 1 != len(header):
        extra = [
            name
            for name in header[1:]
            if not (name.startswith("y") or name.startswith("u"))
        ]
        raise DataError(f"{csv_path}: unrecognized columns {extra}")
    if not y_cols:
        raise DataError(f"{csv_path}: no node columns (y1..)")
    if len(rows) < 2:
        raise DataError(f"{csv_path}: need at least 2 samples")
    table = np.empty((len(rows), len(header)))
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(f"{csv_path}: row {i + 2} has {len(row)} fields")
        try:
            table[i] = [float(v) for v in row]
        except ValueError as exc:
            raise DataError(f"{csv_path}: row {i + 2}: {exc}") from exc
    if not np.all(np.isfinite(table)):
        raise DataError(f"{csv_path}: non-finite values")
    times = table[:, 0]
    if np.any(np.diff(times) <= 0):
        raise DataError(f"{csv_path}: timestamps must be strictly increasing")

    side = sidecar if sidecar is not None else sidecar_path(csv_path)
    system, meta = None, {}
    if os.path.exists(side):
        info = read_json(side)
        if not isinstance(info, dict):
            raise DataError(f"{side}: sidecar must be a JSON object")
        meta = info.get("meta", {})
        if info.get("system") is not None:
            system = SystemMatrices.from_dict(info["system"])
        declared = info.get("n_nodes")
        if declared is not None and declared != len(y_cols):
            raise DataError(
                f"{side}: sidecar declares {declared} nodes, CSV has {len(y_cols)}"
            )
    return TimeSeriesData(
        times=times,
        z=table[:, y_cols],
        u=table[:, u_cols] if u_cols else None,
        system=system,
        meta=meta,
    )


# ---------------------------------------------------------------------------
# generic result writers


def write_json(path, obj):
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(_jsonable(obj), fh, sort_keys=True, indent=2, allow_nan=False)
        fh.write("\n")
    os.replace(tmp, path)


def read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return _jsonable(obj.item())
    if isinstance(obj, float) and not np.isfinite(obj):  # NaN/inf -> null
        return None
    return obj


def write_table_csv(path, header, rows):
    """Delimited writer with round-trip float formatting."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row]
            )


def write_trajectory_csv(path, t, y):
    """Plot-ready posterior-mean trajectories: t, y1..yp."""
    y = np.asarray(y)
    header = ["t"] + [f"y{j + 1}" for j in range(y.shape[1])]
    rows = [[float(t[i])] + [float(v) for v in y[i]] for i in range(len(t))]
    write_table_csv(path, header, rows)


def write_edge_csv(path, edge_prob, s_map=None, scores=None):
    """Per-edge table: source, target, probability, MAP flag, score."""
    edge_prob = np.asarray(edge_prob)
    p = edge_prob.shape[0]
    header = ["target", "source", "probability"]
    if s_map is not None:
        header.append("map")
    if scores is not None:
        header.append("score")
    rows = []
    for r in range(p):
        for j in range(p):
            row = [r + 1, j + 1, float(edge_prob[r, j])]
            if s_map is not None:
                row.append(int(s_map[r, j]))
            if scores is not None:
                row.append(float(scores[r, j]))
            rows.append(row)
    write_table_csv(path, header, rows)


def summary_payload(summary):
    """JSON-ready view of a posterior summary."""
    return {
        "n_nodes": summary.n_nodes,
        "n_inputs": summary.n_inputs,
        "burn_in": summary.burn_in,
        "n_kept": summary.n_kept,
        "link_prob": summary.link_prob,
        "s_map": summary.s_map,
        "s_threshold": summary.s_threshold,
        "sigma_mean": summary.sigma_mean,
        "lam_mean": summary.lam_mean,
        "gamma_mean": summary.gamma_mean,
        "beta_mean": summary.beta_mean,
        "acceptance_rates": summary.acceptance_rates,
        "lag_times": summary.lag_times,
    }
