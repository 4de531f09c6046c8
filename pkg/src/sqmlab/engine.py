"""Stochastic trajectory engine for simultaneous weak measurement of two
equatorial qubit observables.

Physics
-------
Each monitored channel i measures sigma(delta_i) with ensemble dephasing rate
Gamma_i and efficiency eta_i.  Over a step dt the measurement outcome is the
pair of scaled records V_i, and the conditioned update is the positivity-
preserving measurement-operator form

    Omega(V) = exp[ sum_i -(Gamma_i eta_i / 2) (V_i - sigma(delta_i))^2 dt ],
    rho' = E_ineff( Omega rho Omega^dagger ) / Tr[.],

where ``E_ineff`` contracts, for every channel, the two Bloch components
orthogonal to the measured axis (the in-plane perpendicular and z) by
exp[-(1 - eta_i) Gamma_i dt].  The joint exponent is Hermitian, so the 2x2
exponential has the closed Pauli form exp(aI + b.sigma) =
e^a (cosh|b| I + sinh|b| bhat.sigma); all updates below use it directly in
Bloch coordinates (states never leave the unit ball, any V).

The simulated record is the diffusive-limit model

    V_i = <sigma(delta_i)> + dW_i / (sqrt(2 eta_i Gamma_i) dt),  dW_i ~ N(0, dt),

so each sample has conditional variance 1 / (2 eta_i Gamma_i dt).  Expanding
the update to first order in dt reproduces the Ito stochastic master equation
with dissipators (Gamma_i/2) D[sigma(delta_i)] and noise terms
sqrt(Gamma_i eta_i / 2) H[sigma(delta_i)] dW_i.

Determinism
-----------
Every trajectory draws its noise from its own generator family,
``numpy.random.default_rng([master_seed, trajectory_index, channel_index])``,
one independent substream per channel (initial-state sampling, when used,
takes the reserved substream index 1000003).  Ensembles are processed in
fixed-size chunks; results are identical for any worker count or chunk split.
"""

from __future__ import annotations

import concurrent.futures
import math
from dataclasses import dataclass

import numpy as np

from .states import MeasChannel, QubitState, from_bloch

__all__ = [
    "ImperfectionParams",
    "MeasurementRecord",
    "Trajectory",
    "EnsembleResult",
    "kraus_step",
    "generate_step",
    "simulate_trajectory",
    "filter_record",
    "filter_records_batch",
    "simulate_ensemble",
    "trajectory_rng",
]

_GAMMA_DT_MAX = 0.1
_INIT_STREAM = 1_000_003  # reserved substream index for initial-state sampling


def trajectory_rng(master_seed: int, trajectory_index: int, stream: int) -> np.random.Generator:
    """Deterministic per-(trajectory, substream) generator."""
    return np.random.default_rng([master_seed, trajectory_index, stream])


# ---------------------------------------------------------------------------
# Parameter containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ImperfectionParams:
    """Optional hardware non-idealities applied after each measurement step.

    rabi_detuning_rate : angular rate (rad/s) of a spurious z rotation.
    lo_leak_rates : per-channel angular rates (rad/s) of spurious rotation
        about that channel's measurement axis (carrier leakage).
    coherent_b_rate : angular rate (rad/s) of a transient rotation about the
        first channel's axis; decays with exp(-kappa t / 2) when that channel
        carries a ring-up kappa, otherwise constant.
    t1 : optional amplitude-damping time constant (s) toward the +z ground
        state; None disables it (the default model excludes energy decay).
    """

    rabi_detuning_rate: float = 0.0
    lo_leak_rates: tuple[float, ...] = ()
    coherent_b_rate: float = 0.0
    t1: float | None = None

    def __post_init__(self) -> None:
        if self.t1 is not None and self.t1 <= 0:
            raise ValueError("t1 must be positive when set")


@dataclass(frozen=True)
class MeasurementRecord:
    """Measured record samples for the active channels of a run.

    samples[k, j] is the record V of active channel j over step k; dt is the
    record step.  ``channels`` keeps the full channel tuple (including any
    dephasing-only channels, which emit no column) so a record is
    self-describing for :func:`filter_record`.
    """

    dt: float
    samples: np.ndarray
    channels: tuple[MeasChannel, ...]
    seed: int | None = None

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 2:
            raise ValueError("samples must be (n_steps, n_active_channels)")
        n_active = sum(1 for ch in self.channels if _is_active(ch))
        if samples.shape[1] != n_active:
            raise ValueError(
                f"record has {samples.shape[1]} columns but {n_active} active channels"
            )
        if not np.all(np.isfinite(samples)):
            raise ValueError("record contains non-finite samples")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "channels", tuple(self.channels))

    @property
    def n_steps(self) -> int:
        return self.samples.shape[0]

    @property
    def active_channels(self) -> tuple[MeasChannel, ...]:
        return tuple(ch for ch in self.channels if _is_active(ch))


@dataclass(frozen=True)
class Trajectory:
    """Conditioned state path sampled at record boundaries.

    times has length n_steps + 1 and bloch is the matching (n_steps + 1, 3)
    array of Bloch vectors; states(i) materializes the density matrix.
    """

    times: np.ndarray
    bloch: np.ndarray
    dt: float
    seed: int | None = None

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        bloch = np.asarray(self.bloch, dtype=float)
        if bloch.shape != (times.shape[0], 3):
            raise ValueError("times and bloch lengths disagree")
        radii = np.linalg.norm(bloch, axis=1)
        if radii.max(initial=0.0) > 1.0 + 1e-9:
            raise ValueError("trajectory leaves the Bloch ball")
        times.flags.writeable = False
        bloch.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "bloch", bloch)

    def state(self, i: int) -> QubitState:
        return from_bloch(self.bloch[i])

    @property
    def final_state(self) -> QubitState:
        return self.state(-1)

    def __len__(self) -> int:
        return self.times.shape[0]


@dataclass(frozen=True)
class EnsembleResult:
    """Vectorized ensemble output; see :func:`simulate_ensemble`."""

    dt: float
    channels: tuple[MeasChannel, ...]
    master_seed: int
    n_traj: int
    snapshot_times: np.ndarray | None = None
    snapshots: np.ndarray | None = None      # (n_times, n_traj, 3)
    finals: np.ndarray | None = None         # (n_traj, 3)
    records: np.ndarray | None = None        # (n_traj, n_steps, n_active)
    initials: np.ndarray | None = None       # (n_traj, 3)


# ---------------------------------------------------------------------------
# Core Bloch-space update (vectorized)
# ---------------------------------------------------------------------------

def _is_active(ch: MeasChannel) -> bool:
    return (not ch.dephasing_only) and ch.gamma > 0.0 and ch.eta > 0.0


def _axes(channels) -> np.ndarray:
    return np.stack([ch.axis for ch in channels])


def _measurement_update(r: np.ndarray, v_dt_ge: np.ndarray, axes: np.ndarray) -> np.ndarray:
    """Apply Omega rho Omega^dagger / Tr in Bloch form.

    Parameters
    ----------
    r : (n, 3) Bloch vectors.
    v_dt_ge : (n, n_ch) products Gamma_i eta_i V_i dt for each channel.
    axes : (n_ch, 3) measurement axes.
    """
    b = v_dt_ge @ axes                       # (n, 3) joint exponent vector
    bnorm = np.linalg.norm(b, axis=1)
    two_b = 2.0 * bnorm
    ch = np.cosh(two_b)
    small = bnorm < 1e-14
    safe = np.where(small, 1.0, bnorm)
    f = np.where(small, 2.0, np.sinh(two_b) / safe)          # sinh(2B)/B
    g = np.where(small, 2.0, (ch - 1.0) / (safe * safe))     # (cosh(2B)-1)/B^2
    br = np.einsum("ni,ni->n", b, r)
    w = ch + f * br
    if not np.all(np.isfinite(w)) or np.any(w <= 0.0):
        raise FloatingPointError("measurement update normalization failed")
    r_new = (r + (f + g * br)[:, None] * b) / w[:, None]
    # clip roundoff-level excursions outside the ball
    nrm = np.einsum("ni,ni->n", r_new, r_new)
    over = nrm > 1.0
    if np.any(over):
        r_new[over] /= np.sqrt(nrm[over])[:, None]
    return r_new


def _dephase(r: np.ndarray, axes: np.ndarray, residual_dt: np.ndarray) -> np.ndarray:
    """Contract components orthogonal to each axis by exp(-residual_dt_i)."""
    for i in range(axes.shape[0]):
        rd = residual_dt[i]
        if rd == 0.0:
            continue
        kappa = math.exp(-rd)
        n = axes[i]
        proj = (r @ n)[:, None] * n
        r = proj + kappa * (r - proj)
    return r


def _rotate(r: np.ndarray, axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation of Bloch vectors about a unit axis."""
    c, s = math.cos(angle), math.sin(angle)
    cross = np.cross(np.broadcast_to(axis, r.shape), r)
    dot = (r @ axis)[:, None]
    return r * c + cross * s + axis * dot * (1.0 - c)


def _apply_imperfections(
    r: np.ndarray,
    channels,
    axes: np.ndarray,
    imp: ImperfectionParams | None,
    dt: float,
    t: float,
) -> np.ndarray:
    if imp is None:
        return r
    if imp.rabi_detuning_rate != 0.0:
        r = _rotate(r, np.array([0.0, 0.0, 1.0]), imp.rabi_detuning_rate * dt)
    for i, rate in enumerate(imp.lo_leak_rates):
        if rate != 0.0:
            r = _rotate(r, axes[i], rate * dt)
    if imp.coherent_b_rate != 0.0:
        kappa = channels[0].ringup_kappa
        env = math.exp(-0.5 * kappa * t) if kappa is not None else 1.0
        r = _rotate(r, axes[0], imp.coherent_b_rate * env * dt)
    if imp.t1 is not None:
        p = -math.expm1(-dt / imp.t1)
        amp = math.sqrt(1.0 - p)
        r = r.copy()
        r[:, 0] *= amp
        r[:, 1] *= amp
        r[:, 2] = r[:, 2] * (1.0 - p) + p
    return r


def _effective_rates(channels, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-channel (gamma, gamma*eta) at time t, zeroing the measured part
    for dephasing-only channels."""
    gam = np.empty(len(channels))
    ge = np.empty(len(channels))
    for i, chn in enumerate(channels):
        g, e = chn.rates_at(t)
        gam[i] = g
        ge[i] = 0.0 if chn.dephasing_only else g * e
    return gam, ge


def _check_weak(channels, dt: float) -> None:
    if dt <= 0.0 or not math.isfinite(dt):
        raise ValueError("dt must be a positive finite number")
    gmax = max((ch.gamma for ch in channels), default=0.0)
    if gmax * dt > _GAMMA_DT_MAX:
        raise ValueError(
            f"Gamma*dt = {gmax * dt:.3g} exceeds the weak-measurement bound {_GAMMA_DT_MAX}"
        )


def _n_steps(duration: float, dt: float) -> int:
    if duration < 0 or dt <= 0:
        raise ValueError("duration must be >= 0 and dt positive")
    if duration == 0.0:
        return 0
    x = duration / dt
    # round half away from zero, with a relative guard so that ratios that
    # are exactly half-integral in decimal (e.g. 1e-6 / 16e-9 = 62.5) are
    # not pushed below the boundary by binary roundoff
    n = math.floor(x + 0.5 + 1e-12 * max(1.0, x))
    if n < 1:
        raise ValueError("duration shorter than one step")
    return n


# ---------------------------------------------------------------------------
# Single-step API
# ---------------------------------------------------------------------------

def kraus_step(
    state: QubitState,
    signals,
    channels,
    dt: float,
    *,
    imperfections: ImperfectionParams | None = None,
    t: float = 0.0,
) -> QubitState:
    """One conditioned measurement-operator update for given record values.

    ``signals`` lists V for the active channels, in channel order;
    dephasing-only channels take no signal but still contract the state.
    """
    channels = tuple(channels)
    _check_weak(channels, dt)
    signals = np.atleast_1d(np.asarray(signals, dtype=float))
    active = [i for i, ch in enumerate(channels) if _is_active(ch)]
    if signals.shape != (len(active),):
        raise ValueError(f"expected {len(active)} signals, got {signals.shape}")
    if not np.all(np.isfinite(signals)):
        raise ValueError("non-finite signal")
    axes = _axes(channels)
    gam, ge = _effective_rates(channels, t)
    v_full = np.zeros(len(channels))
    v_full[active] = signals
    r = state.bloch[None, :]
    r = _measurement_update(r, (v_full * ge * dt)[None, :], axes)
    r = _dephase(r, axes, (gam - ge) * dt)
    r = _apply_imperfections(r, channels, axes, imperfections, dt, t)
    return from_bloch(r[0])


def generate_step(
    state: QubitState,
    channels,
    dt: float,
    rng: np.random.Generator,
    *,
    imperfections: ImperfectionParams | None = None,
    t: float = 0.0,
) -> tuple[np.ndarray, QubitState]:
    """Draw one step of records from the current state and apply it.

    Returns (signals, next_state); signals has one entry per active channel,
    V_i = <sigma(delta_i)> + dW_i / (sqrt(2 eta_i Gamma_i) dt) with
    dW_i ~ Normal(0, dt).
    """
    channels = tuple(channels)
    active = [i for i, ch in enumerate(channels) if _is_active(ch)]
    if not active:
        raise ValueError("record generation needs at least one active channel "
                         "(gamma*eta > 0 and not dephasing_only)")
    _, ge = _effective_rates(channels, t)
    if np.any(ge[active] <= 0.0):
        # ring-up envelope can zero the rates at t == 0; the record is then
        # pure noise with divergent variance, which we cannot draw
        raise ValueError("effective gamma*eta vanished; cannot draw a record sample")
    axes = _axes(channels)
    r = state.bloch
    dw = rng.standard_normal(len(active)) * math.sqrt(dt)
    mean = axes[active] @ r
    signals = mean + dw / (np.sqrt(2.0 * ge[active]) * dt)
    new = kraus_step(state, signals, channels, dt, imperfections=imperfections, t=t)
    return signals, new


# ---------------------------------------------------------------------------
# Chunked ensemble core
# ---------------------------------------------------------------------------

def _evolve_chunk(
    r: np.ndarray,
    channels,
    n_steps: int,
    dt: float,
    substeps: int,
    imperfections: ImperfectionParams | None,
    noise: np.ndarray | None,
    records: np.ndarray | None,
    snapshot_steps: np.ndarray,
) -> tuple[np.ndarray, np.ndarray | None]:
    """March a chunk of Bloch vectors through n_steps record steps.

    noise : (n, n_steps*substeps, n_active) standard normals when generating,
        None when filtering (then ``records`` supplies V per record step).
    Returns (snapshots (n_snap, n, 3), generated records or None).
    """
    channels = tuple(channels)
    axes = _axes(channels)
    active = np.array([i for i, ch in enumerate(channels) if _is_active(ch)], dtype=int)
    n_ch = len(channels)
    dt_sub = dt / substeps
    n_sub = n_steps * substeps
    sqrt_dt = math.sqrt(dt_sub)
    generating = noise is not None
    out_records = (
        np.zeros((r.shape[0], n_steps, len(active))) if generating else None
    )
    snapshots = np.empty((len(snapshot_steps), r.shape[0], 3))
    snap_lookup = {int(s): j for j, s in enumerate(snapshot_steps)}
    if 0 in snap_lookup:
        snapshots[snap_lookup[0]] = r
    accum = np.zeros((r.shape[0], len(active))) if generating else None

    time_dependent = any(ch.ringup_kappa is not None for ch in channels)
    gam0, ge0 = _effective_rates(channels, 0.0)

    for k in range(n_sub):
        t = k * dt_sub
        if time_dependent:
            gam, ge = _effective_rates(channels, t)
        else:
            gam, ge = gam0, ge0
        v_full = np.zeros((r.shape[0], n_ch))
        if generating:
            mean = r @ axes[active].T
            scale = np.sqrt(2.0 * np.maximum(ge[active], 1e-300)) * dt_sub
            v = mean + noise[:, k, :] * sqrt_dt / scale
            v_full[:, active] = v
            accum += v
            if (k + 1) % substeps == 0:
                out_records[:, k // substeps, :] = accum / substeps
                accum[:] = 0.0
        else:
            v_full[:, active] = records[:, k, :]
        r = _measurement_update(r, v_full * (ge * dt_sub), axes)
        r = _dephase(r, axes, (gam - ge) * dt_sub)
        r = _apply_imperfections(r, channels, axes, imperfections, dt_sub, t)
        j = snap_lookup.get(k + 1)
        if j is not None:
            snapshots[j] = r
    return snapshots, out_records


def _chunk_noise(master_seed, indices, n_sub, n_active) -> np.ndarray:
    noise = np.empty((len(indices), n_sub, n_active))
    for j, idx in enumerate(indices):
        for c in range(n_active):
            noise[j, :, c] = trajectory_rng(master_seed, int(idx), c).standard_normal(n_sub)
    return noise


def _run_ensemble_chunk(args) -> tuple[np.ndarray, np.ndarray | None, np.ndarray]:
    (
        master_seed,
        indices,
        initial,
        channels,
        n_steps,
        dt,
        substeps,
        imperfections,
        snapshot_steps,
        sample_initial,
    ) = args
    if sample_initial:
        r0 = np.empty((len(indices), 3))
        for j, idx in enumerate(indices):
            rng = trajectory_rng(master_seed, int(idx), _INIT_STREAM)
            r0[j] = initial(rng)
    else:
        r0 = np.broadcast_to(np.asarray(initial, dtype=float), (len(indices), 3)).copy()
    n_active = sum(1 for ch in channels if _is_active(ch))
    noise = _chunk_noise(master_seed, indices, n_steps * substeps, n_active)
    snaps, recs = _evolve_chunk(
        r0, channels, n_steps, dt, substeps, imperfections, noise, None, snapshot_steps
    )
    return snaps, recs, r0


def simulate_ensemble(
    initial,
    channels,
    duration: float,
    dt: float,
    n_traj: int,
    master_seed: int,
    *,
    imperfections: ImperfectionParams | None = None,
    substeps: int = 1,
    snapshot_times=None,
    keep_records: bool = False,
    keep_initials: bool = False,
    workers: int = 1,
    chunk_size: int = 4096,
) -> EnsembleResult:
    """Simulate n_traj independent conditioned trajectories.

    Parameters
    ----------
    initial : (3,) Bloch vector shared by all trajectories, or a callable
        ``f(rng) -> (3,)`` sampled once per trajectory from its own substream.
    duration, dt : total time and record step; the engine integrates at
        dt/substeps and decimates records by averaging.
    snapshot_times : times (multiples of dt/substeps) at which the full
        ensemble of Bloch vectors is stored; the final time is always kept.
    workers : process count; results are identical for any value.
    """
    channels = tuple(channels)
    _check_weak(channels, dt / substeps)
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    n_steps = _n_steps(duration, dt)
    n_sub = n_steps * substeps
    dt_sub = dt / substeps
    active = [ch for ch in channels if _is_active(ch)]
    if keep_records and not active:
        raise ValueError("no active channels to record")

    if snapshot_times is None:
        snapshot_times = []
    snapshot_steps = []
    for st in snapshot_times:
        # snap to the nearest integration step; actual grid times are
        # reported back in EnsembleResult.snapshot_times
        k = int(round(st / dt_sub))
        if not 0 <= k <= n_sub:
            raise ValueError(f"snapshot time {st} outside the simulated window")
        snapshot_steps.append(k)
    if n_sub not in snapshot_steps:
        snapshot_steps.append(n_sub)
    snapshot_steps = np.array(sorted(set(snapshot_steps)), dtype=int)

    sample_initial = callable(initial)
    if not sample_initial:
        initial = np.asarray(initial, dtype=float)

    chunks = [
        np.arange(lo, min(lo + chunk_size, n_traj))
        for lo in range(0, n_traj, chunk_size)
    ]
    args = [
        (
            master_seed,
            idx,
            initial,
            channels,
            n_steps,
            dt,
            substeps,
            imperfections,
            snapshot_steps,
            sample_initial,
        )
        for idx in chunks
    ]
    if workers > 1 and len(chunks) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_ensemble_chunk, args))
    else:
        results = [_run_ensemble_chunk(a) for a in args]

    snaps = np.concatenate([res[0] for res in results], axis=1)
    records = (
        np.concatenate([res[1] for res in results], axis=0) if keep_records else None
    )
    initials = (
        np.concatenate([res[2] for res in results], axis=0) if keep_initials else None
    )
    return EnsembleResult(
        dt=dt,
        channels=channels,
        master_seed=master_seed,
        n_traj=n_traj,
        snapshot_times=snapshot_steps * dt_sub,
        snapshots=snaps,
        finals=snaps[-1],
        records=records,
        initials=initials,
    )


# ---------------------------------------------------------------------------
# Single-trajectory API
# ---------------------------------------------------------------------------

def simulate_trajectory(
    initial: QubitState,
    channels,
    duration: float,
    dt: float,
    seed: int,
    *,
    imperfections: ImperfectionParams | None = None,
    substeps: int = 1,
) -> tuple[Trajectory, MeasurementRecord]:
    """Generate one conditioned trajectory and its measurement record.

    The trajectory holds n_steps + 1 states at record boundaries; with
    substeps == 1 (the default) filter_record() replays it exactly.
    The generator noise matches trajectory index 0 of
    :func:`simulate_ensemble` run with ``master_seed=seed``.
    """
    channels = tuple(channels)
    _check_weak(channels, dt / substeps)
    n_steps = _n_steps(duration, dt)
    active = [ch for ch in channels if _is_active(ch)]
    if not active:
        raise ValueError("record generation needs at least one active channel")
    snapshot_steps = np.arange(0, n_steps * substeps + 1, substeps)
    noise = _chunk_noise(seed, [0], n_steps * substeps, len(active))
    r0 = initial.bloch[None, :]
    snaps, recs = _evolve_chunk(
        r0, channels, n_steps, dt, substeps, imperfections, noise, None, snapshot_steps
    )
    times = snapshot_steps * (dt / substeps)
    traj = Trajectory(times=times, bloch=snaps[:, 0, :], dt=dt, seed=seed)
    record = MeasurementRecord(dt=dt, samples=recs[0], channels=channels, seed=seed)
    return traj, record


def filter_records_batch(
    initial_bloch,
    samples: np.ndarray,
    channels,
    dt: float,
    *,
    imperfections: ImperfectionParams | None = None,
) -> np.ndarray:
    """Replay many records at once; returns the final Bloch vectors (n, 3).

    ``samples`` is (n, n_steps, n_active); ``initial_bloch`` is one shared
    Bloch vector or an (n, 3) array of per-record initial vectors.
    """
    channels = tuple(channels)
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 3:
        raise ValueError("samples must be (n, n_steps, n_active)")
    n_active = sum(1 for ch in channels if _is_active(ch))
    if samples.shape[2] != n_active:
        raise ValueError("channel set does not match record columns")
    _check_weak(channels, dt)
    initial_bloch = np.asarray(initial_bloch, dtype=float)
    if initial_bloch.ndim == 1:
        r0 = np.broadcast_to(initial_bloch, (samples.shape[0], 3)).copy()
    else:
        r0 = initial_bloch.copy()
    n_steps = samples.shape[1]
    snaps, _ = _evolve_chunk(
        r0, channels, n_steps, dt, 1, imperfections, None, samples,
        np.array([n_steps]),
    )
    return snaps[0]


def filter_record(
    initial: QubitState,
    record: MeasurementRecord,
    *,
    imperfections: ImperfectionParams | None = None,
    channels=None,
) -> Trajectory:
    """Replay a measurement record through the conditioned update.

    ``channels`` overrides the record's stored channels (used for
    deliberately miscalibrated replays); shapes must agree.
    """
    chs = tuple(channels) if channels is not None else record.channels
    n_active = sum(1 for ch in chs if _is_active(ch))
    if n_active != record.samples.shape[1]:
        raise ValueError("channel set does not match record columns")
    _check_weak(chs, record.dt)
    n_steps = record.n_steps
    snapshot_steps = np.arange(0, n_steps + 1)
    r0 = initial.bloch[None, :]
    snaps, _ = _evolve_chunk(
        r0,
        chs,
        n_steps,
        record.dt,
        1,
        imperfections,
        None,
        record.samples[None, :, :],
        snapshot_steps,
    )
    times = snapshot_steps * record.dt
    return Trajectory(times=times, bloch=snaps[:, 0, :], dt=record.dt, seed=record.seed)
