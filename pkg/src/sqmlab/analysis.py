"""Measurement-disturbance fields, calibration estimators, and tomographic
cross-validation for the two-channel weak-measurement model.

Disturbance
-----------
Over one step dt the conditioned state moves by a stochastic kick plus an
O(dt) drift.  The ensemble-mean squared displacement Tr[d rho^dagger d rho]
at leading order is carried entirely by the stochastic part,

    D(r) = dt * sum_i Gamma_i eta_i (1 - (2 - |r|^2) <sigma_i>^2),

which for pure states reduces to dt * sum_i Gamma_i eta_i Var(sigma_i); the
deterministic drift enters only at O(dt^2) and is excluded.  D is bounded
below by the non-commutativity of the two measured observables,

    D(r) >= |<[sigma_1, sigma_2]>| sqrt(eta1 eta2 Gamma1 Gamma2) dt
          = 2 |sin(d2 - d1)| |z| sqrt(eta1 eta2 Gamma1 Gamma2) dt,

with equality at the +-z poles for symmetric orthogonal channels.  D
vanishes only where both measured observables are sharp, i.e. at the two
pure states +-axis when the channels are parallel; for any other relative
angle there is no zero anywhere in the Bloch ball.

Calibration
-----------
``estimate_gamma_ramsey`` recovers the ensemble dephasing rate from the
exponential decay of the mean Bloch component orthogonal to the measured
axis; ``estimate_eta`` recovers the quantum efficiency from the separation
of time-integrated records of aligned vs anti-aligned preparations,
eta = (mu_up - mu_down)^2 / (8 tau sigma^2 Gamma).

Tomography
----------
``tomo_validate`` replays the experiment's self-consistency check: each
trajectory's true final state is interrogated with one of seven pulses
{I, +-pi/2 x, +-pi/2 y, +-pi x} followed by a projective z readout;
trajectories are grouped into Bloch-space voxels by their *predicted*
(filtered) final state, and per-voxel weighted least squares reconstructs
the equatorial components with binomial error bars.  A calibrated filter
should land within 1 sigma at the Gaussian rate (~68%).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize, stats

from .engine import EnsembleResult
from .states import QubitState

__all__ = [
    "disturbance_at",
    "commutator_bound",
    "DisturbanceField",
    "disturbance_map",
    "estimate_gamma_ramsey",
    "estimate_eta",
    "TOMO_PULSES",
    "TomoComparison",
    "tomo_validate",
]


# ---------------------------------------------------------------------------
# Disturbance
# ---------------------------------------------------------------------------

def _measured_rates(channels) -> tuple[np.ndarray, np.ndarray]:
    axes = np.stack([ch.axis for ch in channels])
    ge = np.array(
        [0.0 if ch.dephasing_only else ch.gamma * ch.eta for ch in channels]
    )
    return axes, ge


def _disturbance_bloch(r: np.ndarray, channels, dt: float) -> np.ndarray:
    """Vectorized D for Bloch vectors r of shape (..., 3)."""
    axes, ge = _measured_rates(channels)
    proj = r @ axes.T                                  # (..., n_ch)
    r2 = np.einsum("...i,...i->...", r, r)
    return dt * np.einsum(
        "c,...c->...", ge, 1.0 - (2.0 - r2)[..., None] * proj**2
    )


def disturbance_at(state: QubitState, channels, dt: float) -> float:
    """Ensemble-mean Tr[d rho^dagger d rho] over one step of length dt.

    Uses each channel's plateau rates; dephasing-only channels contribute
    nothing (their conditional evolution carries no stochastic part).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    return float(_disturbance_bloch(state.bloch, tuple(channels), dt))


def commutator_bound(state: QubitState, channels, dt: float) -> float:
    """Lower disturbance bound |<[sigma_1, sigma_2]>| sqrt(e1 e2 G1 G2) dt."""
    channels = tuple(channels)
    if len(channels) != 2:
        raise ValueError("the bound involves exactly two channels")
    _, ge = _measured_rates(channels)
    d_rel = channels[1].delta - channels[0].delta
    z = state.bloch[2]
    return 2.0 * abs(math.sin(d_rel)) * abs(z) * math.sqrt(ge[0] * ge[1]) * dt


@dataclass(frozen=True)
class DisturbanceField:
    """Disturbance values sampled on the Bloch sphere and the z = 0 disk.

    ``region`` labels each point 'sphere' or 'disk'; values are the per-step
    disturbance over ``dt`` and are nonnegative everywhere.
    """

    points: np.ndarray
    values: np.ndarray
    region: np.ndarray
    dt: float

    def __post_init__(self) -> None:
        points = np.asarray(self.points, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if points.ndim != 2 or points.shape[1] != 3 or values.shape != points.shape[:1]:
            raise ValueError("points must be (n, 3) with matching values")
        if values.min(initial=0.0) < -1e-15:
            raise ValueError("disturbance values must be nonnegative")
        for arr in (points, values):
            arr.flags.writeable = False
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "region", np.asarray(self.region))

    def zero_points(self, *, threshold_rel: float = 1e-6) -> np.ndarray:
        """Sphere-surface points where D falls below threshold_rel * max."""
        on_sphere = self.region == "sphere"
        thresh = threshold_rel * self.values.max()
        return self.points[on_sphere & (self.values <= thresh)]

    @property
    def sphere_values(self) -> np.ndarray:
        return self.values[self.region == "sphere"]

    @property
    def disk_values(self) -> np.ndarray:
        return self.values[self.region == "disk"]


def _sphere_grid(n_polar: int, n_azimuth: int) -> np.ndarray:
    theta = np.linspace(0.0, np.pi, n_polar)
    phi = np.linspace(0.0, 2.0 * np.pi, n_azimuth, endpoint=False)
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    pts = np.stack(
        [np.sin(tt) * np.cos(pp), np.sin(tt) * np.sin(pp), np.cos(tt)], axis=-1
    ).reshape(-1, 3)
    # poles appear once each
    return np.unique(np.round(pts, 15), axis=0)


def _disk_grid(n_radial: int, n_azimuth: int) -> np.ndarray:
    radii = np.linspace(0.0, 1.0, n_radial)
    phi = np.linspace(0.0, 2.0 * np.pi, n_azimuth, endpoint=False)
    rr, pp = np.meshgrid(radii, phi, indexing="ij")
    pts = np.stack(
        [rr * np.cos(pp), rr * np.sin(pp), np.zeros_like(rr)], axis=-1
    ).reshape(-1, 3)
    return np.unique(np.round(pts, 15), axis=0)


def disturbance_map(
    channels,
    dt: float = 64e-9,
    *,
    n_polar: int = 41,
    n_azimuth: int = 80,
    n_disk_radial: int = 26,
    check_interior: bool = True,
) -> DisturbanceField:
    """Evaluate the disturbance over the sphere surface and the z = 0 disk.

    For non-parallel channel axes the disturbance is provably positive
    everywhere in the ball; ``check_interior`` verifies that numerically on
    a radial-shell grid and raises if a zero is found.
    """
    channels = tuple(channels)
    sphere = _sphere_grid(n_polar, n_azimuth)
    disk = _disk_grid(n_disk_radial, n_azimuth)
    points = np.vstack([sphere, disk])
    region = np.array(["sphere"] * len(sphere) + ["disk"] * len(disk))
    # D >= 0 exactly; roundoff at the zeros can leave -1e-17-level residue
    values = np.maximum(_disturbance_bloch(points, channels, dt), 0.0)

    d_rel = (channels[1].delta - channels[0].delta) % math.pi if len(channels) == 2 else 0.0
    if check_interior and len(channels) == 2 and not math.isclose(d_rel, 0.0, abs_tol=1e-12):
        interior = np.vstack(
            [sphere * s for s in np.linspace(0.05, 0.999, 24)] + [np.zeros((1, 3))]
        )
        vals_in = _disturbance_bloch(interior, channels, dt)
        if vals_in.min() <= 0.0:
            raise AssertionError(
                "disturbance vanished inside the ball for non-parallel axes"
            )
    return DisturbanceField(points=points, values=values, region=region, dt=dt)


# ---------------------------------------------------------------------------
# Calibration estimators
# ---------------------------------------------------------------------------

def estimate_gamma_ramsey(ensemble: EnsembleResult) -> float:
    """Dephasing rate from the decay of the mean orthogonal Bloch component.

    The ensemble must be generated with a single dephasing channel (at most
    one channel with nonzero Gamma) from a preparation with support
    orthogonal to the measured axis, and carry snapshots of the ensemble
    through time.
    """
    rates = [ch for ch in ensemble.channels if ch.gamma > 0.0]
    if len(rates) > 1:
        raise ValueError("Ramsey calibration requires a single dephasing channel")
    ch = rates[0] if rates else ensemble.channels[0]
    if ensemble.snapshots is None or len(ensemble.snapshot_times) < 4:
        raise ValueError("need ensemble snapshots at >= 4 times for the decay fit")
    if ensemble.n_traj < 100:
        raise ValueError("insufficient ensemble size for a stable fit")
    perp = np.array([-math.sin(ch.delta), math.cos(ch.delta), 0.0])
    comp = ensemble.snapshots @ perp
    mean = comp.mean(axis=1)
    if abs(mean[0]) < 0.2:
        raise ValueError("preparation must be (mostly) orthogonal to the measured axis")
    times = np.asarray(ensemble.snapshot_times, dtype=float)
    span = times[-1] - times[0]
    guess = max(1.0 / span, ch.gamma)
    with warnings.catch_warnings():
        # a rate of zero fits perfectly and leaves the covariance singular
        warnings.simplefilter("ignore", optimize.OptimizeWarning)
        popt, _ = optimize.curve_fit(
            lambda t, a, g: a * np.exp(-g * t),
            times,
            mean,
            p0=[mean[0], guess],
            maxfev=10_000,
        )
    return float(popt[1])


def estimate_eta(
    up_samples: np.ndarray,
    down_samples: np.ndarray,
    gamma: float,
    tau: float,
    *,
    clip_tol: float = 0.05,
) -> float:
    """Quantum efficiency from aligned / anti-aligned record separation.

    ``up_samples`` and ``down_samples`` are (n_records, n_steps) record
    arrays of a single channel, taken over total duration ``tau`` from
    preparations along +axis and -axis.  Returns
    (mu_up - mu_down)^2 / (8 tau sigma^2 Gamma), clipped to [0, 1+clip_tol].
    """
    up = np.asarray(up_samples, dtype=float)
    down = np.asarray(down_samples, dtype=float)
    if up.ndim != 2 or down.ndim != 2:
        raise ValueError("record arrays must be (n_records, n_steps)")
    if gamma <= 0 or tau <= 0:
        raise ValueError("gamma and tau must be positive")
    s_up = up.mean(axis=1) * tau
    s_down = down.mean(axis=1) * tau
    var = 0.5 * (s_up.var(ddof=1) + s_down.var(ddof=1))
    scale = max(abs(s_up.mean()), abs(s_down.mean()))
    if var <= (1e-9 * scale) ** 2:
        raise ValueError("degenerate records: zero variance")
    eta = (s_up.mean() - s_down.mean()) ** 2 / (8.0 * tau * var * gamma)
    return float(np.clip(eta, 0.0, 1.0 + clip_tol))


# ---------------------------------------------------------------------------
# Tomographic cross-validation
# ---------------------------------------------------------------------------

# pulse name and the design row mapping the pre-pulse Bloch vector to the
# post-pulse <sigma_z> measured by the projective readout
TOMO_PULSES: tuple[tuple[str, tuple[float, float, float]], ...] = (
    ("I", (0.0, 0.0, 1.0)),
    ("+x90", (0.0, 1.0, 0.0)),    # +pi/2 about x maps y onto z
    ("-x90", (0.0, -1.0, 0.0)),
    ("+y90", (-1.0, 0.0, 0.0)),   # +pi/2 about y maps x onto -z
    ("-y90", (1.0, 0.0, 0.0)),
    ("+x180", (0.0, 0.0, -1.0)),
    ("-x180", (0.0, 0.0, -1.0)),
)
_DESIGN = np.array([row for _, row in TOMO_PULSES])

_ONE_SIGMA = math.erf(1.0 / math.sqrt(2.0))  # ~0.6827


@dataclass(frozen=True)
class TomoComparison:
    """Per-voxel comparison of filtered predictions vs tomographic estimates.

    One row per (occupied voxel, equatorial component); ``low_count`` marks
    voxels below the requested minimum occupancy, excluded from the summary
    fraction but kept in the table.
    """

    voxel_index: np.ndarray
    component: np.ndarray
    predicted: np.ndarray
    measured: np.ndarray
    err: np.ndarray
    count: np.ndarray
    low_count: np.ndarray
    n_voxels: int
    n_trajectories: int

    def __len__(self) -> int:
        return self.predicted.shape[0]

    @property
    def within_one_sigma(self) -> np.ndarray:
        return np.abs(self.predicted - self.measured) <= self.err

    @property
    def fraction_within(self) -> float:
        ok = ~self.low_count
        if not np.any(ok):
            return float("nan")
        return float(self.within_one_sigma[ok].mean())

    def self_consistency_pvalue(self) -> float:
        """Two-sided binomial p-value against the Gaussian 1-sigma rate."""
        ok = ~self.low_count
        trials = int(ok.sum())
        if trials == 0:
            return float("nan")
        hits = int(self.within_one_sigma[ok].sum())
        return float(stats.binomtest(hits, trials, p=_ONE_SIGMA).pvalue)


def _simulate_readout(
    true_finals: np.ndarray, seed: int, fidelity: float
) -> tuple[np.ndarray, np.ndarray]:
    """Round-robin pulse assignment and Bernoulli projective z readout."""
    n = true_finals.shape[0]
    pulse = np.arange(n) % len(TOMO_PULSES)
    z_after = np.einsum("nc,nc->n", _DESIGN[pulse], true_finals)
    rng = np.random.default_rng(seed)
    p_plus = 0.5 * (1.0 + np.clip(z_after, -1.0, 1.0))
    outcome = np.where(rng.random(n) < p_plus, 1, -1)
    if fidelity < 1.0:
        flip = rng.random(n) > fidelity
        outcome = np.where(flip, -outcome, outcome)
    return pulse, outcome


def tomo_validate(
    predicted_finals: np.ndarray,
    true_finals: np.ndarray,
    seed: int,
    *,
    n_voxels: int = 15,
    fidelity: float = 1.0,
    min_count: int = 35,
) -> TomoComparison:
    """Validate filtered final states against simulated tomography.

    ``true_finals`` drive the simulated pulse + readout outcomes;
    ``predicted_finals`` (the filter's output for the same trajectories)
    define the voxel grouping and the predictions under test.  Per voxel and
    per equatorial component the tomographic estimate comes from weighted
    least squares over the seven pulse outcome frequencies, with error bars
    from the binomial counting statistics.
    """
    pred = np.asarray(predicted_finals, dtype=float)
    true = np.asarray(true_finals, dtype=float)
    if pred.shape != true.shape or pred.ndim != 2 or pred.shape[1] != 3:
        raise ValueError("predicted and true finals must both be (n, 3)")
    if not 0.0 <= fidelity <= 1.0:
        raise ValueError("fidelity must be in [0, 1]")
    n = pred.shape[0]
    empty = dict(
        voxel_index=np.empty((0, 3), dtype=int),
        component=np.empty(0, dtype="U1"),
        predicted=np.empty(0),
        measured=np.empty(0),
        err=np.empty(0),
        count=np.empty(0, dtype=int),
        low_count=np.empty(0, dtype=bool),
        n_voxels=n_voxels,
        n_trajectories=n,
    )
    if n == 0:
        return TomoComparison(**empty)

    pulse, outcome = _simulate_readout(true, seed, fidelity)
    vox = np.clip(
        np.floor((pred + 1.0) * 0.5 * n_voxels).astype(int), 0, n_voxels - 1
    )
    flat = (vox[:, 0] * n_voxels + vox[:, 1]) * n_voxels + vox[:, 2]
    order = np.argsort(flat, kind="stable")
    flat_sorted = flat[order]
    boundaries = np.flatnonzero(np.diff(flat_sorted)) + 1
    groups = np.split(order, boundaries)

    rows: dict[str, list] = {k: [] for k in ("vi", "comp", "pred", "meas", "err", "cnt", "low")}
    for members in groups:
        count = members.size
        vi = vox[members[0]]
        # per-pulse success counts
        n_p = np.bincount(pulse[members], minlength=7)
        k_p = np.bincount(
            pulse[members], weights=(outcome[members] + 1) / 2, minlength=7
        )
        present = n_p > 0
        if present.sum() < 3:
            continue
        phat = np.zeros(7)
        phat[present] = k_p[present] / n_p[present]
        # clip away exact 0/1 frequencies so weights and error bars are finite
        lo = 1.0 / (2.0 * np.maximum(n_p, 1))
        phat = np.clip(phat, lo, 1.0 - lo)
        z_meas = 2.0 * phat - 1.0
        d = _DESIGN[present]
        sol = None
        # two weighted LS passes: the second takes binomial variances from
        # the first pass's model probabilities, which keeps error bars honest
        # in cells where the raw frequency sits at 0 or 1
        p_w = phat
        for _ in range(2):
            w = n_p / (4.0 * p_w * (1.0 - p_w))
            dtw = d.T * w[present]
            normal = dtw @ d
            if np.linalg.matrix_rank(normal) < 3:
                sol = None
                break
            cov = np.linalg.inv(normal)
            sol = cov @ (dtw @ z_meas[present])
            p_model = 0.5 * (1.0 + np.clip(_DESIGN @ sol, -1.0, 1.0))
            p_w = np.clip(p_model, lo, 1.0 - lo)
        if sol is None:
            continue
        pred_mean = pred[members].mean(axis=0)
        for ci, comp in ((0, "x"), (1, "y")):
            rows["vi"].append(vi)
            rows["comp"].append(comp)
            rows["pred"].append(pred_mean[ci])
            rows["meas"].append(sol[ci])
            rows["err"].append(math.sqrt(cov[ci, ci]))
            rows["cnt"].append(count)
            rows["low"].append(count < min_count)

    if not rows["vi"]:
        return TomoComparison(**empty)
    return TomoComparison(
        voxel_index=np.array(rows["vi"], dtype=int),
        component=np.array(rows["comp"], dtype="U1"),
        predicted=np.array(rows["pred"]),
        measured=np.array(rows["meas"]),
        err=np.array(rows["err"]),
        count=np.array(rows["cnt"], dtype=int),
        low_count=np.array(rows["low"], dtype=bool),
        n_voxels=n_voxels,
        n_trajectories=n,
    )
