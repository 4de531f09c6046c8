"""Command-line interface orchestrating simulation, analysis and reports.

Subcommands
-----------
``simulate``
    Generate conditioned trajectories and measurement records.
``filter``
    Replay measurement records from disk into filtered trajectories.
``distributions``
    Propagate an initial state into binned Bloch-ball snapshots.
``diffusion``
    Angular-variance growth of an equatorial ring ensemble, with the
    locally predicted diffusion rate for comparison.
``disturbance``
    Sample the per-step state-disturbance field over the Bloch sphere
    and the equatorial disk.
``mle``
    Retrodict the most likely initial state from simulated records.
``calibrate``
    Closure test of the dephasing-rate and efficiency estimators.
``oracle``
    Validate the effective measurement model against the joint
    qubit-cavity simulation.
``acceptance``
    Run the acceptance checklist and write a pass/fail report.

Conventions
-----------
* Configuration comes from an optional JSON file (one object, nested per
  subcommand) plus repeated ``--set dotted.path=value`` overrides; values
  are parsed as JSON with a plain-string fallback.
* At the command boundary all rates are quoted in Hz-over-2pi (the
  ``*_hz_2pi`` keys) and all angles in degrees (``*_deg``); they are
  converted to angular units internally.  Times are in seconds.
* Every run requires an explicit integer ``seed``; nothing is seeded
  from the clock.
* Outputs land in an output directory resolved as ``--out`` flag, then
  the ``SQMLAB_OUT`` environment variable, then ``sqmlab-<command>``.
  Alongside the outputs, ``manifest.json`` records the command, the full
  resolved configuration, the seed, package versions and the unit
  convention, which together regenerate every file byte-for-byte.  The
  worker count and output directory are execution details and do not
  enter the manifest, so outputs are byte-identical across worker
  counts.
* Exit codes: 0 success, 2 configuration error, 3 runtime failure,
  4 acceptance-criteria failure.  Failures print a single-line JSON
  object ``{"error": {"type": ..., "message": ...}}`` to stderr and
  remove any partially written outputs.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import os
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .analysis import (
    disturbance_map,
    estimate_eta,
    estimate_gamma_ramsey,
)
from .cavity import oracle_report, params_for_rate, simulate_conditioned
from .distributions import (
    BlochDistribution,
    angular_diffusion_rate,
    angular_variance_series,
    propagate_mc,
)
from .engine import (
    ImperfectionParams,
    MeasurementRecord,
    Trajectory,
    _n_steps,
    filter_record,
    simulate_ensemble,
)
from .fokker_planck import propagate_pde
from .io_utils import (
    channel_from_config,
    read_record,
    write_disturbance_field,
    write_distribution,
    write_json,
    write_record,
    write_trajectory,
    write_variance_series,
)
from .retrodiction import composite_maps_batch, mle_initial_state
from .states import MeasChannel, from_bloch

TWO_PI = 2.0 * math.pi

UNITS_NOTE = (
    "rates in Hz-over-2pi (multiplied by 2*pi internally), angles in "
    "degrees, times in seconds"
)

ENV_OUTDIR = "SQMLAB_OUT"

_PAPER_CHANNELS = [
    {"delta_deg": 0.0, "gamma_hz_2pi": 122e3, "eta": 0.41},
    {"delta_deg": 90.0, "gamma_hz_2pi": 122e3, "eta": 0.49},
]


class ConfigError(Exception):
    """A configuration value is missing, malformed or out of range."""


def _defaults() -> dict:
    """Fresh per-subcommand default configuration (command-boundary units)."""
    return {
        "simulate": {
            "seed": None,
            "channels": copy.deepcopy(_PAPER_CHANNELS),
            "initial": [0.0, 0.0, 0.0],
            "duration": 1e-6,
            "dt": 16e-9,
            "substeps": 4,
            "n_traj": 1,
            "imperfections": None,
        },
        "filter": {
            "seed": None,
            "records": [],
            "initial": [0.0, 0.0, 0.0],
            "channels": None,
            "imperfections": None,
        },
        "distributions": {
            "seed": None,
            "channels": copy.deepcopy(_PAPER_CHANNELS),
            "initial": [0.0, 0.0, 0.0],
            "times": [0.4e-6, 0.96e-6, 1.6e-6],
            "method": "mc",
            "n_traj": 20000,
            "n_bins": 101,
            "ndim": 2,
            "dt": 16e-9,
            "substeps": 1,
            "pde_dt": 4e-9,
            "blob_sigma": 0.08,
        },
        "diffusion": {
            "seed": None,
            "channels": copy.deepcopy(_PAPER_CHANNELS),
            "ring_inner": 0.86,
            "ring_outer": 0.92,
            "times": [k * 64e-9 for k in range(13)],
            "n_traj": 6000,
            "dt": 16e-9,
            "start_angle_deg": 0.0,
            "substeps": 1,
        },
        "disturbance": {
            "seed": None,
            "channels": copy.deepcopy(_PAPER_CHANNELS),
            "dt": 64e-9,
            "n_polar": 41,
            "n_azimuth": 64,
            "n_disk_radial": 24,
            "check_interior": True,
        },
        "mle": {
            "seed": None,
            "channels": copy.deepcopy(_PAPER_CHANNELS),
            "true_initial": [0.6, 0.0, 0.0],
            "duration": 0.32e-6,
            "dt": 16e-9,
            "substeps": 1,
            "n_records": 2000,
            "n_grid": 61,
            "write_maps": False,
        },
        "calibrate": {
            "seed": None,
            "gamma_hz_2pi": 122e3,
            "eta": 0.45,
            "delta_deg": 0.0,
            "dt": 16e-9,
            "ramsey": {"duration": 3.2e-6, "n_traj": 5000,
                       "snapshot_every": 5},
            "efficiency": {"tau": 1e-6, "n_traj": 10000},
        },
        "oracle": {
            "seed": None,
            "gamma_hz_2pi": 122e3,
            "chi_hz_2pi": 0.18e6,
            "kappa_hz_2pi": 7.2e6,
            "delta_deg": 45.0,
            "eta": 1.0,
            "fock_dim": 40,
            "duration": 2e-6,
            "dt": 1e-9,
            "write_record": False,
            "record": {"duration": 0.5e-6, "dt": 2e-9,
                       "initial": [0.0, 0.0, 1.0]},
        },
        "acceptance": {
            "seed": None,
            "only": None,
        },
    }


# ---------------------------------------------------------------------------
# configuration plumbing
# ---------------------------------------------------------------------------

def _merge(base: dict, override: dict, crumb: str) -> None:
    """Recursively update ``base`` from ``override``, rejecting unknown keys."""
    for key, value in override.items():
        here = f"{crumb}.{key}" if crumb else str(key)
        if key not in base:
            raise ConfigError(f"unknown configuration key: {here}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            _merge(base[key], value, here)
        else:
            base[key] = value


def _set_by_path(cfg, dotted: str, value) -> None:
    parts = dotted.split(".")
    node = cfg
    for i, part in enumerate(parts[:-1]):
        key = int(part) if part.lstrip("-").isdigit() else part
        try:
            node = node[key]
        except (KeyError, IndexError, TypeError):
            raise ConfigError(
                f"unknown configuration path: {'.'.join(parts[: i + 1])}"
            ) from None
    last = parts[-1]
    if isinstance(node, list):
        if not last.lstrip("-").isdigit():
            raise ConfigError(f"list index expected at the end of {dotted}")
        idx = int(last)
        if not -len(node) <= idx < len(node):
            raise ConfigError(f"index out of range in {dotted}")
        node[idx] = value
    elif isinstance(node, dict):
        if last not in node:
            raise ConfigError(f"unknown configuration path: {dotted}")
        node[last] = value
    else:
        raise ConfigError(f"cannot assign into {dotted}")


def _parse_set(expr: str):
    if "=" not in expr:
        raise ConfigError(f"--set expects path=value, got {expr!r}")
    path, raw = expr.split("=", 1)
    if not path:
        raise ConfigError(f"--set expects path=value, got {expr!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return path, value


def resolve_config(command: str, config_path, sets) -> dict:
    """Merge defaults, the optional config file and ``--set`` overrides."""
    full = _defaults()
    if config_path is not None:
        try:
            with open(config_path, encoding="utf-8") as fh:
                loaded = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(loaded) - set(full)
        if unknown:
            raise ConfigError(
                f"unknown subcommand section(s): {sorted(unknown)}"
            )
        for section, body in loaded.items():
            if not isinstance(body, dict):
                raise ConfigError(f"section {section!r} must be an object")
            _merge(full[section], body, section)
    for expr in sets or ():
        path, value = _parse_set(expr)
        if "." not in path:
            raise ConfigError(
                f"--set path must start with a subcommand section: {path}"
            )
        _set_by_path(full, path, value)
    cfg = full[command]
    seed = cfg.get("seed")
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError(
            f"{command}.seed must be an explicit integer (no clock seeding)"
        )
    return cfg


def _rate(hz_2pi, crumb: str) -> float:
    try:
        return TWO_PI * float(hz_2pi)
    except (TypeError, ValueError):
        raise ConfigError(f"{crumb} must be a number") from None


def _angle(deg, crumb: str) -> float:
    try:
        return math.radians(float(deg))
    except (TypeError, ValueError):
        raise ConfigError(f"{crumb} must be a number") from None


def _channels(entries, crumb: str):
    if not isinstance(entries, list) or not entries:
        raise ConfigError(f"{crumb} must be a non-empty list of channels")
    try:
        return tuple(channel_from_config(e) for e in entries)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad channel entry under {crumb}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"bad channel value under {crumb}: {exc}") from exc


def _bloch(value, crumb: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.shape != (3,):
        raise ConfigError(f"{crumb} must be a 3-vector")
    if np.linalg.norm(arr) > 1.0 + 1e-9:
        raise ConfigError(f"{crumb} must lie inside the Bloch ball")
    return arr


def _imperfections(entry, crumb: str) -> ImperfectionParams | None:
    if entry is None:
        return None
    if not isinstance(entry, dict):
        raise ConfigError(f"{crumb} must be an object or null")
    known = {"rabi_detuning_hz_2pi", "lo_leak_hz_2pi", "coherent_b_hz_2pi",
             "t1"}
    unknown = set(entry) - known
    if unknown:
        raise ConfigError(f"unknown key(s) under {crumb}: {sorted(unknown)}")
    leaks = entry.get("lo_leak_hz_2pi", ())
    try:
        return ImperfectionParams(
            rabi_detuning_rate=_rate(entry.get("rabi_detuning_hz_2pi", 0.0),
                                     crumb),
            lo_leak_rates=tuple(_rate(v, crumb) for v in leaks),
            coherent_b_rate=_rate(entry.get("coherent_b_hz_2pi", 0.0), crumb),
            t1=entry.get("t1"),
        )
    except ValueError as exc:
        raise ConfigError(f"bad value under {crumb}: {exc}") from exc


# ---------------------------------------------------------------------------
# output plumbing
# ---------------------------------------------------------------------------

class OutputSet:
    """Tracks files written by one run so failures can clean them up."""

    def __init__(self, outdir: Path):
        self.outdir = outdir
        self.paths: list[Path] = []

    def path(self, name: str) -> Path:
        self.outdir.mkdir(parents=True, exist_ok=True)
        p = self.outdir / name
        self.paths.append(p)
        return p

    def discard_all(self) -> None:
        for p in self.paths:
            try:
                p.unlink()
            except OSError:
                pass

    def names(self) -> list[str]:
        return sorted(p.name for p in self.paths)


def _resolve_outdir(flag_value, command: str) -> Path:
    if flag_value:
        return Path(flag_value)
    env = os.environ.get(ENV_OUTDIR)
    if env:
        return Path(env)
    return Path(f"sqmlab-{command}")


def _write_manifest(out: OutputSet, command: str, cfg: dict) -> Path:
    manifest = {
        "command": command,
        "config": cfg,
        "seed": cfg["seed"],
        "units": UNITS_NOTE,
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "sqmlab": __version__,
        },
        "outputs": out.names(),
    }
    path = out.path("manifest.json")
    write_json(path, manifest)
    return path


def _index_width(n: int) -> int:
    return max(3, len(str(max(n - 1, 0))))


# ---------------------------------------------------------------------------
# subcommand runners
# ---------------------------------------------------------------------------

def _run_simulate(cfg: dict, out: OutputSet, workers: int) -> None:
    channels = _channels(cfg["channels"], "simulate.channels")
    initial = _bloch(cfg["initial"], "simulate.initial")
    imperfections = _imperfections(cfg["imperfections"],
                                   "simulate.imperfections")
    n_traj = int(cfg["n_traj"])
    dt = float(cfg["dt"])
    duration = float(cfg["duration"])
    boundaries = np.arange(_n_steps(duration, dt) + 1) * dt
    result = simulate_ensemble(
        initial, channels, duration, dt,
        n_traj=n_traj, master_seed=cfg["seed"],
        imperfections=imperfections, substeps=int(cfg["substeps"]),
        keep_records=True, snapshot_times=boundaries, workers=workers,
    )
    width = _index_width(n_traj)
    for i in range(n_traj):
        tag = str(i).zfill(width)
        rec = MeasurementRecord(dt=dt, samples=result.records[i],
                                channels=channels, seed=cfg["seed"])
        write_record(out.path(f"record_{tag}.csv"), rec)
        out.paths.append(out.outdir / f"record_{tag}.csv.json")
        traj = Trajectory(times=boundaries, bloch=result.snapshots[:, i, :],
                          dt=dt, seed=None)
        write_trajectory(out.path(f"trajectory_{tag}.csv"), traj)


def _run_filter(cfg: dict, out: OutputSet, workers: int) -> None:
    paths = cfg["records"]
    if not isinstance(paths, list) or not paths:
        raise ConfigError("filter.records must list at least one record CSV")
    initial = from_bloch(_bloch(cfg["initial"], "filter.initial"))
    override = (None if cfg["channels"] is None
                else _channels(cfg["channels"], "filter.channels"))
    imperfections = _imperfections(cfg["imperfections"],
                                   "filter.imperfections")
    records = []
    for p in paths:
        if not Path(p).is_file():
            raise ConfigError(f"record file not found: {p}")
        records.append(read_record(p))
    width = _index_width(len(records))
    for i, rec in enumerate(records):
        traj = filter_record(initial, rec, channels=override,
                             imperfections=imperfections)
        write_trajectory(out.path(f"filtered_{str(i).zfill(width)}.csv"),
                         traj)


def _blob_distribution(center: np.ndarray, n_bins: int,
                       sigma: float) -> BlochDistribution:
    if sigma <= 0:
        raise ConfigError("distributions.blob_sigma must be positive")
    edges = np.linspace(-1.0, 1.0, n_bins + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    gx, gy = np.meshgrid(mid, mid, indexing="ij")
    probs = np.exp(-((gx - center[0]) ** 2 + (gy - center[1]) ** 2)
                   / (2.0 * sigma**2))
    probs[gx**2 + gy**2 > 1.0] = 0.0
    total = probs.sum()
    if total <= 0:
        raise ConfigError("initial blob carries no mass inside the disk")
    return BlochDistribution(edges=(edges, edges), probs=probs / total)


def _run_distributions(cfg: dict, out: OutputSet, workers: int) -> None:
    channels = _channels(cfg["channels"], "distributions.channels")
    initial = _bloch(cfg["initial"], "distributions.initial")
    times = [float(t) for t in cfg["times"]]
    if not times:
        raise ConfigError("distributions.times must be non-empty")
    method = cfg["method"]
    if method == "mc":
        dists = propagate_mc(
            initial, channels, times, int(cfg["n_traj"]), cfg["seed"],
            dt=float(cfg["dt"]), n_bins=int(cfg["n_bins"]),
            ndim=int(cfg["ndim"]), substeps=int(cfg["substeps"]),
        )
    elif method == "pde":
        if int(cfg["ndim"]) != 2:
            raise ConfigError("the pde method supports only ndim=2")
        if abs(initial[2]) > 1e-12:
            raise ConfigError("the pde method needs an in-plane initial "
                              "state (z = 0)")
        blob = _blob_distribution(initial, int(cfg["n_bins"]),
                                  float(cfg["blob_sigma"]))
        dists = [propagate_pde(blob, channels, t, float(cfg["pde_dt"]),
                               n_bins=int(cfg["n_bins"])) for t in times]
    else:
        raise ConfigError("distributions.method must be 'mc' or 'pde'")
    width = _index_width(len(dists))
    files = []
    for i, dist in enumerate(dists):
        name = f"distribution_{str(i).zfill(width)}.csv"
        write_distribution(out.path(name), dist)
        files.append({"file": name, "time": dist.time})
    write_json(out.path("distributions.json"),
               {"method": method, "snapshots": files})


def _run_diffusion(cfg: dict, out: OutputSet, workers: int) -> None:
    channels = _channels(cfg["channels"], "diffusion.channels")
    times = np.asarray([float(t) for t in cfg["times"]])
    start = _angle(cfg["start_angle_deg"], "diffusion.start_angle_deg")
    series = angular_variance_series(
        channels, float(cfg["ring_inner"]), float(cfg["ring_outer"]),
        times, int(cfg["n_traj"]), cfg["seed"],
        dt=float(cfg["dt"]), start_angle=start,
        substeps=int(cfg["substeps"]),
    )
    write_variance_series(out.path("variance.csv"), series)
    mid = 0.5 * (float(cfg["ring_inner"]) + float(cfg["ring_outer"]))
    local = float(angular_diffusion_rate(channels, start, mid))
    write_json(out.path("diffusion.json"), {
        "slope_rad2_per_s": float(series.slope),
        "intercept_rad2": float(series.intercept),
        "diffusive": bool(series.diffusive),
        "bimodal_any": bool(series.bimodal.any()),
        "local_rate_rad2_per_s": local,
        "slope_over_local_rate": float(series.slope / local)
        if local else None,
    })


def _run_disturbance(cfg: dict, out: OutputSet, workers: int) -> None:
    channels = _channels(cfg["channels"], "disturbance.channels")
    field = disturbance_map(
        channels, dt=float(cfg["dt"]), n_polar=int(cfg["n_polar"]),
        n_azimuth=int(cfg["n_azimuth"]),
        n_disk_radial=int(cfg["n_disk_radial"]),
        check_interior=bool(cfg["check_interior"]),
    )
    write_disturbance_field(out.path("disturbance.csv"), field)
    write_json(out.path("disturbance.json"), {
        "dt": field.dt,
        "n_points": int(field.values.size),
        "min": float(field.values.min()),
        "max": float(field.values.max()),
    })


def _run_mle(cfg: dict, out: OutputSet, workers: int) -> None:
    channels = _channels(cfg["channels"], "mle.channels")
    truth = _bloch(cfg["true_initial"], "mle.true_initial")
    n_records = int(cfg["n_records"])
    if n_records < 1:
        raise ConfigError("mle.n_records must be at least 1")
    result = simulate_ensemble(
        truth, channels, float(cfg["duration"]), float(cfg["dt"]),
        n_traj=n_records, master_seed=cfg["seed"], keep_records=True,
        substeps=int(cfg["substeps"]), workers=workers,
    )
    maps = composite_maps_batch(result.records, channels, float(cfg["dt"]))
    fit = mle_initial_state(maps)
    write_json(out.path("mle.json"), fit.to_report(n_grid=int(cfg["n_grid"])))
    if cfg["write_maps"]:
        from .io_utils import write_transfer_maps

        write_transfer_maps(out.path("transfer_maps.csv"), maps)


def _run_calibrate(cfg: dict, out: OutputSet, workers: int) -> None:
    gamma = _rate(cfg["gamma_hz_2pi"], "calibrate.gamma_hz_2pi")
    eta = float(cfg["eta"])
    delta = _angle(cfg["delta_deg"], "calibrate.delta_deg")
    dt = float(cfg["dt"])
    try:
        channel = (MeasChannel(delta=delta, gamma=gamma, eta=eta),)
    except ValueError as exc:
        raise ConfigError(f"bad calibrate channel: {exc}") from exc
    ram = cfg["ramsey"]
    axis = np.array([math.cos(delta), math.sin(delta), 0.0])
    perp = np.array([-math.sin(delta), math.cos(delta), 0.0])
    n_steps = int(round(float(ram["duration"]) / dt))
    every = int(ram["snapshot_every"])
    snaps = np.arange(0, n_steps + 1, every) * dt
    ramsey = simulate_ensemble(
        perp, channel, float(ram["duration"]), dt,
        n_traj=int(ram["n_traj"]), master_seed=cfg["seed"],
        snapshot_times=snaps, workers=workers,
    )
    gamma_est = estimate_gamma_ramsey(ramsey)
    eff = cfg["efficiency"]
    tau = float(eff["tau"])
    # the simulated record spans a whole number of steps; scale the
    # estimator with that span, not the requested tau, to avoid bias
    tau_eff = _n_steps(tau, dt) * dt
    recs = {}
    for sign, sub in ((+1, 1), (-1, 2)):
        run = simulate_ensemble(
            sign * axis, channel, tau, dt, n_traj=int(eff["n_traj"]),
            master_seed=cfg["seed"] + sub, keep_records=True,
            workers=workers,
        )
        recs[sign] = run.records[:, :, 0]
    eta_est = estimate_eta(recs[+1], recs[-1], gamma, tau_eff)
    write_json(out.path("calibration.json"), {
        "gamma_true_hz_2pi": gamma / TWO_PI,
        "gamma_est_hz_2pi": gamma_est / TWO_PI,
        "gamma_rel_err": abs(gamma_est - gamma) / gamma,
        "eta_true": eta,
        "eta_est": eta_est,
        "eta_rel_err": abs(eta_est - eta) / eta if eta else None,
    })


def _run_oracle(cfg: dict, out: OutputSet, workers: int) -> None:
    params = params_for_rate(
        _rate(cfg["gamma_hz_2pi"], "oracle.gamma_hz_2pi"),
        chi=_rate(cfg["chi_hz_2pi"], "oracle.chi_hz_2pi"),
        kappa=_rate(cfg["kappa_hz_2pi"], "oracle.kappa_hz_2pi"),
        delta=_angle(cfg["delta_deg"], "oracle.delta_deg"),
        fock_dim=int(cfg["fock_dim"]),
        eta=float(cfg["eta"]),
    )
    report = oracle_report(params, duration=float(cfg["duration"]),
                           dt=float(cfg["dt"]))
    report["gamma_fit_hz_2pi"] = report.pop("gamma_fit") / TWO_PI
    report["gamma_target_hz_2pi"] = report.pop("gamma_target") / TWO_PI
    write_json(out.path("oracle.json"), report)
    if cfg["write_record"]:
        rec_cfg = cfg["record"]
        run = simulate_conditioned(
            params, _bloch(rec_cfg["initial"], "oracle.record.initial"),
            float(rec_cfg["duration"]), float(rec_cfg["dt"]), cfg["seed"],
        )
        write_record(out.path("oracle_record.csv"), run.record)
        out.paths.append(out.outdir / "oracle_record.csv.json")


def _run_acceptance(cfg: dict, out: OutputSet, workers: int) -> bool:
    from .acceptance import ALL_CHECKS, acceptance_report, run_acceptance

    only = cfg["only"]
    if only is not None:
        if not isinstance(only, list) or not only:
            raise ConfigError(
                "acceptance.only must be null or a non-empty list")
        unknown = [n for n in only if n not in ALL_CHECKS]
        if unknown:
            raise ConfigError(
                f"acceptance.only: unknown criteria {unknown}; "
                f"known: {sorted(ALL_CHECKS)}")
    checks = run_acceptance(seed=cfg["seed"], workers=workers, only=only)
    report = acceptance_report(checks)
    write_json(out.path("acceptance.json"), report)
    for c in checks:
        flag = "PASS" if c.passed else "FAIL"
        print(f"{flag} {c.name}: {c.detail}")
    return bool(report["all_passed"])


_RUNNERS = {
    "simulate": _run_simulate,
    "filter": _run_filter,
    "distributions": _run_distributions,
    "diffusion": _run_diffusion,
    "disturbance": _run_disturbance,
    "mle": _run_mle,
    "calibrate": _run_calibrate,
    "oracle": _run_oracle,
}


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sqmlab",
        description="simultaneous-measurement qubit laboratory",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in list(_RUNNERS) + ["acceptance"]:
        p = sub.add_parser(name, help=f"run the {name} pipeline")
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--set", action="append", default=[], metavar="K=V",
                       help="override a configuration leaf (dotted path)")
        p.add_argument("--out", help="output directory "
                       f"(default ${ENV_OUTDIR} or sqmlab-<command>)")
        p.add_argument("--workers", type=int, default=None,
                       help="ensemble worker processes (default: all cores)")
    return parser


def _fail(kind: str, message: str, code: int) -> int:
    payload = {"error": {"type": kind, "message": message}}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    workers = (args.workers if args.workers is not None
               else os.cpu_count() or 1)
    if workers < 1:
        return _fail("config", "--workers must be a positive integer", 2)
    try:
        cfg = resolve_config(args.command, args.config, args.set)
    except ConfigError as exc:
        return _fail("config", str(exc), 2)
    out = OutputSet(_resolve_outdir(args.out, args.command))
    try:
        if args.command == "acceptance":
            all_passed = _run_acceptance(cfg, out, workers)
        else:
            _RUNNERS[args.command](cfg, out, workers)
            all_passed = True
    except ConfigError as exc:
        out.discard_all()
        return _fail("config", str(exc), 2)
    except Exception as exc:  # noqa: BLE001 - boundary of the process
        out.discard_all()
        return _fail("runtime", f"{type(exc).__name__}: {exc}", 3)
    manifest = _write_manifest(out, args.command, cfg)
    print(manifest)
    if not all_passed:
        return _fail("acceptance", "one or more acceptance criteria failed",
                     4)
    return 0


if __name__ == "__main__":
    sys.exit(main())
