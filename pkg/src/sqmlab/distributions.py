"""Distribution-level dynamics of the measurement-conditioned qubit state.

An ensemble of conditioned trajectories defines a probability distribution
over the Bloch ball.  This module propagates such distributions by Monte
Carlo (histogramming trajectory ensembles on a fixed Cartesian grid) and
extracts the angular random-walk signatures of simultaneous equatorial
measurements: wrapped-normal fits of the in-plane angle, the linear growth
of the fitted angular variance, and the local angular diffusion rate
implied by the measurement backaction.

For two measurement axes in the equatorial plane a state with ``z = 0``
stays in the plane, so planar ensembles are fully described by 2D
histograms over ``(x, y)``; three-dimensional voxel grids are available
for everything else.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .engine import EnsembleResult, simulate_ensemble

__all__ = [
    "BlochDistribution",
    "WrappedNormalFit",
    "AngularVarianceSeries",
    "total_variation",
    "propagate_mc",
    "fit_wrapped_normal",
    "angular_variance_series",
    "angular_diffusion_rate",
]

_SUM_TOL = 1e-9
#: Dirac-comb truncation of the wrapped-normal density; the neglected terms
#: are below 1e-12 for the variances this module fits.
_WRAP_K = 5


# ---------------------------------------------------------------------------
# Histogram container
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BlochDistribution:
    """Binned probability distribution over the Bloch ball.

    Parameters
    ----------
    edges : tuple of arrays
        Bin edges per Cartesian axis; two arrays for an in-plane ``(x, y)``
        grid, three for a voxel grid over the ball.
    probs : ndarray
        Bin probabilities, shape ``tuple(len(e) - 1 for e in edges)``.
        Non-negative, normalized to 1 within 1e-9, supported inside the
        unit ball within one bin width.
    time : float
        Timestamp of the snapshot (s).
    """

    edges: tuple[np.ndarray, ...]
    probs: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        edges = tuple(np.asarray(e, dtype=float) for e in self.edges)
        object.__setattr__(self, "edges", edges)
        probs = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "probs", probs)
        if len(edges) not in (2, 3):
            raise ValueError("expected 2 (in-plane) or 3 (ball) axes")
        if probs.shape != tuple(len(e) - 1 for e in edges):
            raise ValueError("probability array does not match the grid")
        if probs.min() < 0.0:
            raise ValueError("negative bin probability")
        if abs(probs.sum() - 1.0) > _SUM_TOL:
            raise ValueError("probabilities must sum to 1 within 1e-9")
        width = max(e[1] - e[0] for e in edges)
        radii = self._center_radii()
        if radii[probs > 0].size and radii[probs > 0].max() > 1.0 + width:
            raise ValueError("support extends beyond the unit ball")

    # -- geometry -----------------------------------------------------------

    @property
    def ndim(self) -> int:
        return len(self.edges)

    @property
    def centers(self) -> tuple[np.ndarray, ...]:
        return tuple(0.5 * (e[1:] + e[:-1]) for e in self.edges)

    def _center_radii(self) -> np.ndarray:
        grids = np.meshgrid(*self.centers, indexing="ij")
        return np.sqrt(sum(g**2 for g in grids))

    # -- constructors -------------------------------------------------------

    @classmethod
    def from_points(cls, points, *, time: float = 0.0, n_bins: int = 101,
                    ndim: int = 2) -> "BlochDistribution":
        """Histogram Bloch vectors on a uniform grid over ``[-1, 1]^ndim``.

        ``ndim=2`` histograms the in-plane components ``(x, y)``;
        ``ndim=3`` histograms full Bloch vectors on a voxel grid.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.ndim != 2 or points.shape[1] != 3:
            raise ValueError("expected an (n, 3) array of Bloch vectors")
        if ndim not in (2, 3):
            raise ValueError("ndim must be 2 or 3")
        edges = tuple(np.linspace(-1.0, 1.0, n_bins + 1) for _ in range(ndim))
        counts, _ = np.histogramdd(points[:, :ndim], bins=edges)
        return cls(edges=edges, probs=counts / len(points), time=time)

    # -- summaries ----------------------------------------------------------

    def radial_marginal(self, n_bins: int = 50) -> tuple[np.ndarray, np.ndarray]:
        """Probability per radial shell of bin-center radius."""
        r_edges = np.linspace(0.0, 1.0 + max(e[1] - e[0] for e in self.edges),
                              n_bins + 1)
        idx = np.clip(np.digitize(self._center_radii().ravel(), r_edges) - 1,
                      0, n_bins - 1)
        weights = np.bincount(idx, weights=self.probs.ravel(), minlength=n_bins)
        return 0.5 * (r_edges[1:] + r_edges[:-1]), weights

    def peak_radius(self, n_bins: int = 50) -> float:
        centers, weights = self.radial_marginal(n_bins)
        return float(centers[np.argmax(weights)])

    def azimuthal_marginal(self, n_bins: int = 64) -> tuple[np.ndarray, np.ndarray]:
        """Probability per in-plane angle bin over ``[-pi, pi)``."""
        grids = np.meshgrid(*self.centers, indexing="ij")
        phi = np.arctan2(grids[1], grids[0]).ravel()
        edges = np.linspace(-np.pi, np.pi, n_bins + 1)
        idx = np.clip(np.digitize(phi, edges) - 1, 0, n_bins - 1)
        weights = np.bincount(idx, weights=self.probs.ravel(), minlength=n_bins)
        return 0.5 * (edges[1:] + edges[:-1]), weights

    # -- sampling -----------------------------------------------------------

    def sample_one(self, rng: np.random.Generator, flat_index: int) -> np.ndarray:
        """Draw a Bloch vector uniformly from the bin at ``flat_index``.

        Draws outside the unit ball (possible only in bins straddling the
        boundary) are redrawn; in-plane grids return ``z = 0`` vectors.
        """
        index = np.unravel_index(flat_index, self.probs.shape)
        low = np.array([e[:-1][i] for e, i in zip(self.edges, index)])
        high = np.array([e[1:][i] for e, i in zip(self.edges, index)])
        for _ in range(100):
            pt = rng.uniform(low, high)
            if pt @ pt <= 1.0:
                break
        else:
            pt = pt / np.linalg.norm(pt)
        if self.ndim == 2:
            pt = np.append(pt, 0.0)
        return pt

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw ``n`` Bloch vectors: a bin by probability, uniform within it."""
        cum = np.cumsum(self.probs.ravel())
        cum[-1] = 1.0
        bins = np.searchsorted(cum, rng.uniform(size=n))
        return np.stack([self.sample_one(rng, int(b)) for b in bins])


def total_variation(a: BlochDistribution, b: BlochDistribution) -> float:
    """Total-variation distance between two distributions on the same grid."""
    if a.probs.shape != b.probs.shape or not all(
        np.array_equal(ea, eb) for ea, eb in zip(a.edges, b.edges)
    ):
        raise ValueError("distributions live on different grids")
    return 0.5 * float(np.abs(a.probs - b.probs).sum())


# ---------------------------------------------------------------------------
# Monte Carlo propagation
# ---------------------------------------------------------------------------

def _initial_sampler(initial):
    """Normalize the ``initial`` argument of :func:`propagate_mc`."""
    if isinstance(initial, BlochDistribution):
        cum = np.cumsum(initial.probs.ravel())
        cum[-1] = 1.0

        def sampler(rng):
            bin_index = int(np.searchsorted(cum, rng.uniform()))
            return initial.sample_one(rng, bin_index)

        return sampler
    if callable(initial):
        return initial
    return np.asarray(initial, dtype=float)


def propagate_mc(initial, channels, times, n_traj: int, seed: int, *,
                 dt: float, n_bins: int = 101, ndim: int = 2,
                 substeps: int = 1) -> list[BlochDistribution]:
    """Propagate a Bloch-ball distribution by trajectory Monte Carlo.

    Parameters
    ----------
    initial : (3,) Bloch vector, ``BlochDistribution`` or callable
        Shared initial state, a distribution to sample initial states from,
        or a per-trajectory sampler ``f(rng) -> (3,)``.
    times : array-like
        Strictly increasing snapshot times; each must be an integer
        multiple of ``dt``.
    n_traj : int
        Ensemble size, at least 1000 for meaningful histograms.
    ndim : int
        2 histograms the in-plane components, 3 builds voxel grids.

    Returns
    -------
    list of BlochDistribution, one per requested time, deterministic for a
    fixed seed.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if times.size == 0:
        raise ValueError("no snapshot times requested")
    if np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    if times[0] < 0:
        raise ValueError("times must be non-negative")
    steps = times / dt
    if np.any(np.abs(steps - np.round(steps)) > 1e-9 * np.maximum(1.0, steps)):
        raise ValueError("every snapshot time must be a multiple of dt")
    if n_traj < 1000:
        raise ValueError("n_traj must be >= 1000 for distribution outputs")

    res: EnsembleResult = simulate_ensemble(
        _initial_sampler(initial), channels, float(times[-1]), dt, n_traj,
        seed, snapshot_times=times, substeps=substeps,
    )
    order = {round(float(t) / dt): k for k, t in enumerate(res.snapshot_times)}
    out = []
    for t in times:
        snap = res.snapshots[order[round(float(t) / dt)]]
        out.append(BlochDistribution.from_points(
            snap, time=float(t), n_bins=n_bins, ndim=ndim))
    return out


# ---------------------------------------------------------------------------
# Wrapped-normal angle statistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WrappedNormalFit:
    """Maximum-likelihood wrapped-normal fit of a sample of angles.

    The density is a normal convolved with a 2*pi-periodic Dirac comb,
    truncated at ``|k| <= 5``.
    """

    mean: float
    variance: float
    converged: bool


def _wrap(angles: np.ndarray) -> np.ndarray:
    return np.mod(angles + np.pi, 2.0 * np.pi) - np.pi


def fit_wrapped_normal(angles) -> WrappedNormalFit:
    """Fit (mean, variance) of a wrapped normal by maximum likelihood.

    Initialized at the circular-moment estimate ``variance = -2 log R``
    with ``R = |mean(exp(i phi))|`` and refined with L-BFGS-B.
    """
    angles = np.asarray(angles, dtype=float).ravel()
    if angles.size == 0:
        raise ValueError("no angles to fit")
    m1 = np.exp(1j * angles).mean()
    mu0 = float(np.angle(m1))
    rbar = min(abs(m1), 1.0)
    if rbar > 1.0 - 1e-12:
        return WrappedNormalFit(mean=mu0, variance=0.0, converged=True)
    var0 = -2.0 * math.log(rbar)

    offsets = 2.0 * np.pi * np.arange(-_WRAP_K, _WRAP_K + 1)

    def nll(params):
        mu, log_var = params
        var = math.exp(log_var)
        d = _wrap(angles - mu)[:, None] + offsets[None, :]
        a = -0.5 * d**2 / var
        amax = a.max(axis=1)
        ll = amax + np.log(np.exp(a - amax[:, None]).sum(axis=1))
        return -(ll.sum() - 0.5 * angles.size * math.log(2.0 * math.pi * var))

    res = optimize.minimize(
        nll, x0=[mu0, math.log(max(var0, 1e-10))], method="L-BFGS-B",
        bounds=[(mu0 - np.pi, mu0 + np.pi), (math.log(1e-10), math.log(50.0))],
    )
    return WrappedNormalFit(
        mean=float(_wrap(np.array([res.x[0]]))[0]),
        variance=float(math.exp(res.x[1])),
        converged=bool(res.success),
    )


@dataclass(frozen=True)
class AngularVarianceSeries:
    """Wrapped-normal variance of the in-plane angle versus time.

    ``slope``/``intercept`` are the least-squares line through
    ``(times, variances)``.  ``bimodal`` flags times where the circular
    moments indicate two antipodal lobes rather than a single diffusing
    packet (``|m2| > |m1| + 0.2``); ``diffusive`` is False when any time is
    flagged, in which case the slope is not a diffusion-rate estimate.
    """

    times: np.ndarray
    variances: np.ndarray
    slope: float
    intercept: float
    bimodal: np.ndarray
    diffusive: bool


def angular_variance_series(channels, ring_inner: float, ring_outer: float,
                            times, n_traj: int, seed: int, *, dt: float,
                            start_angle: float = 0.0,
                            substeps: int = 1) -> AngularVarianceSeries:
    """Angular variance growth of a ring ensemble under measurement.

    Trajectories start in the equatorial plane at angle ``start_angle``
    with radii drawn uniformly from ``[ring_inner, ring_outer]``; the
    in-plane angle at each snapshot time is fitted with a wrapped normal.

    Raises
    ------
    ValueError
        If the ring is empty or outside the ball.
    RuntimeError
        If a wrapped-normal fit fails to converge.
    """
    if not (0.0 < ring_inner <= ring_outer <= 1.0):
        raise ValueError("empty ring: need 0 < inner <= outer <= 1")
    times = np.atleast_1d(np.asarray(times, dtype=float))

    def ring_sampler(rng):
        r = rng.uniform(ring_inner, ring_outer)
        return np.array([r * math.cos(start_angle),
                         r * math.sin(start_angle), 0.0])

    res = simulate_ensemble(ring_sampler, channels, float(times[-1]), dt,
                            n_traj, seed, snapshot_times=times,
                            substeps=substeps)
    order = {round(float(t) / dt): k for k, t in enumerate(res.snapshot_times)}
    variances = np.empty(times.size)
    bimodal = np.empty(times.size, dtype=bool)
    for j, t in enumerate(times):
        snap = res.snapshots[order[round(float(t) / dt)]]
        phi = np.arctan2(snap[:, 1], snap[:, 0])
        z = np.exp(1j * phi)
        bimodal[j] = abs((z**2).mean()) > abs(z.mean()) + 0.2
        fit = fit_wrapped_normal(phi)
        if not fit.converged:
            raise RuntimeError(f"wrapped-normal fit did not converge at t={t}")
        variances[j] = fit.variance
    slope, intercept = np.polyfit(times, variances, 1)
    return AngularVarianceSeries(
        times=times, variances=variances, slope=float(slope),
        intercept=float(intercept), bimodal=bimodal,
        diffusive=not bool(bimodal.any()),
    )


def angular_diffusion_rate(channels, phi, radius) -> np.ndarray:
    """Local variance growth rate of the in-plane angle (rad^2/s).

    The measurement backaction of a channel with axis angle ``delta``
    displaces an in-plane state at angle ``phi`` and radius ``r``
    azimuthally by ``sqrt(2 gamma eta) sin(delta - phi) / r`` per unit
    root-time, so the angle accumulates variance at

        d Var(phi) / dt = sum_i 2 gamma_i eta_i sin^2(phi - delta_i) / r^2.
    """
    phi = np.asarray(phi, dtype=float)
    radius = np.asarray(radius, dtype=float)
    rate = np.zeros(np.broadcast(phi, radius).shape)
    for ch in channels:
        if ch.dephasing_only or ch.gamma <= 0.0 or ch.eta <= 0.0:
            continue
        rate = rate + 2.0 * ch.gamma * ch.eta * np.sin(phi - ch.delta) ** 2
    return rate / radius**2
