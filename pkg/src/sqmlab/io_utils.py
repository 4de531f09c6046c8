"""CSV/JSON serialization of simulation artifacts.

These files are the on-disk contract consumed by the figure package and by
downstream analysis:

* records: ``t,V1[,V2,...]`` CSV plus a JSON sidecar (``<file>.json``) with
  the step, channel parameters, and seed;
* trajectories: ``t,x,y,z`` CSV;
* distributions: ``x,y,p`` (in-plane) or ``x,y,z,p`` (ball voxels) CSV over
  the full grid of bin centers;
* angular-variance series: ``t,variance`` CSV;
* disturbance fields: ``x,y,z,d`` CSV;
* tomographic comparisons: one row per voxel and component;
* transfer maps: 16 matrix entries (row-major) plus a log-offset column.

All floating-point values are written with 17 significant digits, enough
for float64 to round-trip exactly, and files end with a trailing newline.
Rates appear in sidecars as Hz-over-2pi (the quoting convention of the
surrounding tooling) and angles as degrees; readers convert back to the
angular-frequency and radian units used internally.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .analysis import DisturbanceField, TomoComparison
from .distributions import AngularVarianceSeries, BlochDistribution
from .engine import MeasurementRecord, Trajectory
from .retrodiction import TransferMap
from .states import MeasChannel

__all__ = [
    "read_distribution",
    "read_record",
    "read_trajectory",
    "read_transfer_maps",
    "write_disturbance_field",
    "write_distribution",
    "write_json",
    "write_record",
    "write_tomo_comparison",
    "write_trajectory",
    "write_transfer_maps",
    "write_variance_series",
]

TWO_PI = 2.0 * np.pi


def _fmt(value) -> str:
    return format(float(value), ".17g")


def _write_rows(path, header: list[str], rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _read_table(
    path, expected_header: list[str] | None = None
) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if expected_header is not None and header != expected_header:
            raise ValueError(
                f"{path}: header {header} does not match expected {expected_header}"
            )
        rows = [row for row in reader if row]
    return header, rows


def _json_coerce(obj):
    """Map numpy scalars and arrays onto plain JSON types."""
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def write_json(path, payload: dict) -> None:
    """Write a JSON document deterministically (sorted keys, LF newline)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_coerce)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Measurement records
# ---------------------------------------------------------------------------


def channel_config(ch: MeasChannel) -> dict:
    entry = {
        "delta_deg": float(np.degrees(ch.delta)),
        "gamma_hz_2pi": ch.gamma / TWO_PI,
        "eta": ch.eta,
    }
    if ch.dephasing_only:
        entry["dephasing_only"] = True
    if ch.ringup_kappa is not None:
        entry["ringup_kappa_hz_2pi"] = ch.ringup_kappa / TWO_PI
    return entry


def channel_from_config(entry: dict) -> MeasChannel:
    ringup = entry.get("ringup_kappa_hz_2pi")
    return MeasChannel(
        delta=float(np.radians(entry["delta_deg"])),
        gamma=float(entry["gamma_hz_2pi"]) * TWO_PI,
        eta=float(entry["eta"]),
        dephasing_only=bool(entry.get("dephasing_only", False)),
        ringup_kappa=None if ringup is None else float(ringup) * TWO_PI,
    )


def record_sidecar_path(path) -> Path:
    return Path(str(path) + ".json")


def write_record(path, record: MeasurementRecord) -> None:
    """Write record samples as ``t,V1[,V2,...]`` CSV plus a JSON sidecar.

    Row k holds the record of the step starting at ``t = k * dt``.  The
    sidecar at ``<path>.json`` carries the step, every channel (including
    dephasing-only channels, which have no sample column), and the seed.
    """
    n_active = record.samples.shape[1]
    header = ["t"] + [f"V{i + 1}" for i in range(n_active)]
    times = np.arange(record.n_steps) * record.dt
    rows = (
        [_fmt(times[k])] + [_fmt(v) for v in record.samples[k]]
        for k in range(record.n_steps)
    )
    _write_rows(path, header, rows)
    sidecar = {
        "dt": record.dt,
        "channels": [channel_config(ch) for ch in record.channels],
        "seed": record.seed,
    }
    write_json(record_sidecar_path(path), sidecar)


def read_record(path) -> MeasurementRecord:
    """Read a record CSV and its JSON sidecar back into a MeasurementRecord."""
    with open(record_sidecar_path(path)) as fh:
        sidecar = json.load(fh)
    channels = tuple(channel_from_config(e) for e in sidecar["channels"])
    header, rows = _read_table(path)
    if not header or header[0] != "t" or any(
        h != f"V{i + 1}" for i, h in enumerate(header[1:])
    ):
        raise ValueError(f"{path}: malformed record header {header}")
    samples = np.array([[float(v) for v in row[1:]] for row in rows])
    seed = sidecar.get("seed")
    return MeasurementRecord(
        dt=float(sidecar["dt"]),
        samples=samples.reshape(len(rows), len(header) - 1),
        channels=channels,
        seed=None if seed is None else int(seed),
    )


# ---------------------------------------------------------------------------
# Trajectories and distributions
# ---------------------------------------------------------------------------


def write_trajectory(path, trajectory: Trajectory) -> None:
    """Write conditioned Bloch snapshots as ``t,x,y,z`` CSV."""
    rows = (
        [_fmt(trajectory.times[k])] + [_fmt(c) for c in trajectory.bloch[k]]
        for k in range(len(trajectory))
    )
    _write_rows(path, ["t", "x", "y", "z"], rows)


def read_trajectory(path) -> Trajectory:
    """Read a ``t,x,y,z`` CSV back into a Trajectory (seed is not stored)."""
    _, rows = _read_table(path, ["t", "x", "y", "z"])
    data = np.array([[float(v) for v in row] for row in rows])
    if data.shape[0] < 2:
        raise ValueError(f"{path}: a trajectory needs at least two snapshots")
    times = data[:, 0]
    steps = np.diff(times)
    dt = float(steps[0])
    if dt <= 0 or not np.allclose(steps, dt, rtol=1e-9, atol=0.0):
        raise ValueError(f"{path}: snapshot times are not uniformly spaced")
    return Trajectory(times=times, bloch=data[:, 1:], dt=dt)


def write_distribution(path, dist: BlochDistribution) -> None:
    """Write bin centers and probabilities (``x,y,p`` or ``x,y,z,p`` CSV)."""
    centers = dist.centers
    header = ["x", "y", "p"] if dist.ndim == 2 else ["x", "y", "z", "p"]
    grids = np.meshgrid(*centers, indexing="ij")
    coords = [g.ravel() for g in grids]
    probs = dist.probs.ravel()
    rows = (
        [_fmt(c[k]) for c in coords] + [_fmt(probs[k])]
        for k in range(probs.size)
    )
    _write_rows(path, header, rows)


def _edges_from_centers(centers: np.ndarray, path) -> np.ndarray:
    if centers.size < 2:
        raise ValueError(f"{path}: grid needs at least two bins per axis")
    widths = np.diff(centers)
    h = widths[0]
    if h <= 0 or not np.allclose(widths, h, rtol=1e-6, atol=0.0):
        raise ValueError(f"{path}: bin centers are not uniformly spaced")
    return np.concatenate([centers - 0.5 * h, [centers[-1] + 0.5 * h]])


def read_distribution(path, *, time: float = 0.0) -> BlochDistribution:
    """Read a distribution CSV written by :func:`write_distribution`.

    The full uniform grid is reconstructed from the unique coordinate
    values; the file must enumerate every bin.
    """
    header, rows = _read_table(path)
    if header not in (["x", "y", "p"], ["x", "y", "z", "p"]):
        raise ValueError(f"{path}: malformed distribution header {header}")
    data = np.array([[float(v) for v in row] for row in rows])
    ndim = len(header) - 1
    centers = [np.unique(data[:, i]) for i in range(ndim)]
    shape = tuple(c.size for c in centers)
    if int(np.prod(shape)) != data.shape[0]:
        raise ValueError(f"{path}: grid is not a full cartesian product")
    edges = tuple(_edges_from_centers(c, path) for c in centers)
    order = np.lexsort([data[:, i] for i in reversed(range(ndim))])
    probs = data[order, ndim].reshape(shape)
    return BlochDistribution(edges=edges, probs=probs, time=time)


def write_variance_series(path, series: AngularVarianceSeries) -> None:
    """Write the angular-variance time series as ``t,variance`` CSV."""
    rows = (
        [_fmt(series.times[k]), _fmt(series.variances[k])]
        for k in range(series.times.size)
    )
    _write_rows(path, ["t", "variance"], rows)


# ---------------------------------------------------------------------------
# Analysis artifacts
# ---------------------------------------------------------------------------


def write_disturbance_field(path, field: DisturbanceField) -> None:
    """Write disturbance samples as ``x,y,z,d`` CSV (sphere rows first)."""
    rows = (
        [_fmt(c) for c in field.points[k]] + [_fmt(field.values[k])]
        for k in range(field.points.shape[0])
    )
    _write_rows(path, ["x", "y", "z", "d"], rows)


def write_tomo_comparison(path, comparison: TomoComparison) -> None:
    """Write the per-voxel tomography comparison table."""
    header = [
        "voxel_ix",
        "voxel_iy",
        "voxel_iz",
        "component",
        "predicted",
        "measured",
        "err",
        "count",
    ]
    rows = (
        [str(int(i)) for i in comparison.voxel_index[k]]
        + [
            str(comparison.component[k]),
            _fmt(comparison.predicted[k]),
            _fmt(comparison.measured[k]),
            _fmt(comparison.err[k]),
            str(int(comparison.count[k])),
        ]
        for k in range(len(comparison))
    )
    _write_rows(path, header, rows)


def write_transfer_maps(path, maps) -> None:
    """Write transfer maps, one per row: 16 matrix reals plus log_offset."""
    header = [f"m{i}{j}" for i in range(4) for j in range(4)] + ["log_offset"]
    rows = (
        [_fmt(v) for v in tm.matrix.ravel()] + [_fmt(tm.log_offset)]
        for tm in maps
    )
    _write_rows(path, header, rows)


def read_transfer_maps(path) -> list[TransferMap]:
    """Read transfer maps written by :func:`write_transfer_maps`."""
    header = [f"m{i}{j}" for i in range(4) for j in range(4)] + ["log_offset"]
    _, rows = _read_table(path, header)
    out = []
    for row in rows:
        values = [float(v) for v in row]
        out.append(
            TransferMap(
                matrix=np.array(values[:16]).reshape(4, 4),
                log_offset=values[16],
            )
        )
    return out
