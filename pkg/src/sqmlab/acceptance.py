"""End-to-end acceptance checklist for the package's headline claims.

Each criterion is a function returning a :class:`CriterionCheck` with a
pass/fail verdict, a one-line numeric summary and the measured values.
:func:`run_acceptance` executes a selection of criteria in a fixed order
and :func:`acceptance_report` collects the outcome into a JSON-ready
report (the ``acceptance`` CLI subcommand writes exactly that).

All randomness derives from one master seed; sub-streams use disjoint
offsets so criteria are statistically independent.  Scales (ensemble
sizes, durations, grids) are fixed by the checklist itself rather than
configurable, so a pass means the same thing everywhere.

One criterion is expected to fail and is flagged ``expected_failure``:
the steady-state radius rule r = sqrt(eta) at eta = 0.45.  The radial
drift of the conditioned dynamics does vanish at sqrt(eta), but the
multiplicative record noise concentrates the stationary radial density
near 0.88 for symmetric orthogonal channels, far from sqrt(0.45) =
0.671, so the peak-position test cannot pass under the exact dynamics
it is defined by.  The check is implemented as stated and reported
honestly; the equal-radius form only emerges as eta approaches 1.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .analysis import (
    commutator_bound,
    disturbance_at,
    disturbance_map,
    estimate_eta,
    estimate_gamma_ramsey,
    tomo_validate,
)
from .cavity import filter_crosscheck, oracle_report, params_for_rate
from .distributions import (
    BlochDistribution,
    angular_variance_series,
    propagate_mc,
    total_variation,
)
from .engine import (
    MeasurementRecord,
    filter_record,
    filter_records_batch,
    simulate_ensemble,
)
from .fokker_planck import propagate_pde
from .retrodiction import composite_maps_batch, mle_initial_state
from .states import MeasChannel, from_bloch

GAMMA = 2.0 * math.pi * 122e3
DT = 16e-9

# probability that a unit-variance normal lands within one standard error
_P0 = math.erf(1.0 / math.sqrt(2.0))

_SX = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
_SY = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
_SZ = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
_EYE = np.eye(2, dtype=complex)


@dataclass(frozen=True)
class CriterionCheck:
    """Outcome of one acceptance criterion."""

    name: str
    passed: bool
    detail: str
    values: dict = field(default_factory=dict)
    expected_failure: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "passed", bool(self.passed))


def _sub(seed: int, offset: int) -> int:
    """Per-criterion master seed derived from the user's master seed."""
    return seed * 1009 + offset


def _paper_channels():
    return (MeasChannel(delta=0.0, gamma=GAMMA, eta=0.41),
            MeasChannel(delta=math.pi / 2, gamma=GAMMA, eta=0.49))


def _sym_channels(eta: float):
    return (MeasChannel(delta=0.0, gamma=GAMMA, eta=eta),
            MeasChannel(delta=math.pi / 2, gamma=GAMMA, eta=eta))


def _round_duration(duration: float) -> float:
    return round(duration / DT) * DT


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------

def check_backaction_identity(seed: int, workers: int) -> CriterionCheck:
    """State disturbance equals the measured-variance sum and exceeds the
    commutator bound, for random pure states and channel parameters."""
    rng = np.random.default_rng([seed, 11])
    n = 10_000
    v = rng.normal(size=(n, 3))
    r = v / np.linalg.norm(v, axis=1, keepdims=True)
    deltas = rng.uniform(0.0, 2.0 * math.pi, size=(n, 2))
    gammas = 2.0 * math.pi * 10 ** rng.uniform(4.0, 7.0, size=(n, 2))
    etas = rng.uniform(0.05, 1.0, size=(n, 2))
    max_dev = 0.0
    min_gap = math.inf
    for k in range(n):
        rho = 0.5 * (_EYE + r[k, 0] * _SX + r[k, 1] * _SY + r[k, 2] * _SZ)
        ito = 0.0
        variance_sum = 0.0
        for i in range(2):
            sig = math.cos(deltas[k, i]) * _SX + math.sin(deltas[k, i]) * _SY
            mean = np.trace(sig @ rho).real
            jump = sig @ rho + rho @ sig - 2.0 * mean * rho
            ito += 0.5 * gammas[k, i] * etas[k, i] * np.trace(jump @ jump).real
            variance_sum += gammas[k, i] * etas[k, i] * (1.0 - mean**2)
        channels = tuple(
            MeasChannel(delta=deltas[k, i], gamma=gammas[k, i],
                        eta=etas[k, i])
            for i in range(2)
        )
        state = from_bloch(r[k])
        scale = float((gammas[k] * etas[k]).sum()) * DT
        ito_dt = ito * DT
        max_dev = max(
            max_dev,
            abs(ito_dt - variance_sum * DT) / scale,
            abs(disturbance_at(state, channels, DT) - ito_dt) / scale,
        )
        min_gap = min(
            min_gap, (ito_dt - commutator_bound(state, channels, DT)) / scale
        )
    passed = max_dev <= 1e-12 and min_gap >= -1e-12
    return CriterionCheck(
        name="backaction-identity",
        passed=passed,
        detail=(f"identity deviation {max_dev:.2e} (tol 1e-12), "
                f"bound margin {min_gap:.2e} (tol -1e-12) over {n} states"),
        values={"max_identity_deviation": max_dev,
                "min_bound_margin": min_gap, "n_states": n},
    )


def _steady_radius(eta: float, seed: int, workers: int,
                   expected_failure: bool) -> CriterionCheck:
    duration = _round_duration(20.0 / GAMMA)
    res = simulate_ensemble(
        np.zeros(3), _sym_channels(eta), duration, DT, n_traj=10_000,
        master_seed=_sub(seed, 21 if eta == 1.0 else 22), workers=workers,
    )
    radius = np.linalg.norm(res.finals, axis=1)
    hist, edges = np.histogram(radius, bins=100, range=(0.0, 1.0))
    peak = 0.5 * (edges[np.argmax(hist)] + edges[np.argmax(hist) + 1])
    target = math.sqrt(eta)
    rel = abs(peak - target) / target
    passed = rel <= 0.02
    note = ""
    if expected_failure:
        note = ("; known deviation: the stationary radial density of the "
                "exact conditioned dynamics peaks near 0.88 (the radial "
                "drift zero is at sqrt(eta) but the multiplicative noise "
                "piles mass above it), so the sqrt(eta) peak rule only "
                "holds as eta -> 1")
    return CriterionCheck(
        name=f"steady-radius-eta-{eta:g}",
        passed=passed,
        detail=(f"radial peak {peak:.4f} vs sqrt(eta) {target:.4f} "
                f"(rel {rel:.3f}, tol 0.02, 10000 trajectories at "
                f"t = 20/Gamma){note}"),
        values={"eta": eta, "peak": float(peak), "target": target,
                "rel_error": float(rel), "mean_radius": float(radius.mean())},
        expected_failure=expected_failure,
    )


def check_steady_radius_ideal(seed: int, workers: int) -> CriterionCheck:
    """Radial-marginal peak matches sqrt(eta) for efficiency 1."""
    return _steady_radius(1.0, seed, workers, expected_failure=False)


def check_steady_radius_lossy(seed: int, workers: int) -> CriterionCheck:
    """Radial-marginal peak vs sqrt(eta) at efficiency 0.45 (known to
    deviate under the exact dynamics; reported honestly)."""
    return _steady_radius(0.45, seed, workers, expected_failure=True)


def _reference_slope(seed: int, times: np.ndarray, *, n: int = 8000,
                     dt_em: float = 1e-9, inner: float = 0.86,
                     outer: float = 0.92) -> float:
    """Angular-variance slope from an independent Euler-Maruyama run.

    Integrates the diffusion-limit Bloch equation with its own fine step
    and estimates the angle variance through the circular moment, giving
    a target for the engine's ring-ensemble slope that shares nothing
    with the engine's discretization.
    """
    rng = np.random.default_rng([seed, 32])
    axes = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    gam = np.array([GAMMA, GAMMA])
    eta = np.array([0.41, 0.49])
    r = np.zeros((n, 3))
    r[:, 0] = rng.uniform(inner, outer, size=n)
    n_steps = int(round(times[-1] / dt_em))
    sample_steps = {int(round(t / dt_em)) for t in times}
    variances = {}
    for step in range(n_steps + 1):
        if step in sample_steps:
            phi = np.arctan2(r[:, 1], r[:, 0])
            variances[step] = -2.0 * math.log(
                abs(np.exp(1j * phi).mean()))
        if step == n_steps:
            break
        drift = np.zeros_like(r)
        noise = np.zeros_like(r)
        dw = rng.normal(0.0, math.sqrt(dt_em), size=(2, n))
        for i in range(2):
            ndotr = r @ axes[i]
            drift += gam[i] * (ndotr[:, None] * axes[i] - r)
            noise += (math.sqrt(2.0 * gam[i] * eta[i])
                      * (axes[i] - ndotr[:, None] * r) * dw[i][:, None])
        r = r + drift * dt_em + noise
    series = np.array([variances[int(round(t / dt_em))] for t in times])
    return float(np.polyfit(times, series, 1)[0])


def check_angular_slope(seed: int, workers: int) -> CriterionCheck:
    """Ring-ensemble angular-variance slope matches the independently
    integrated diffusion target within 10%."""
    times = np.arange(13) * 64e-9
    series = angular_variance_series(
        _paper_channels(), 0.86, 0.92, times, 6000, _sub(seed, 31), dt=DT,
    )
    target = _reference_slope(seed, times)
    rel = abs(series.slope - target) / target
    passed = rel <= 0.10 and series.diffusive and not series.bimodal.any()
    return CriterionCheck(
        name="angular-slope",
        passed=passed,
        detail=(f"slope {series.slope / 1e6:.3f} rad^2/us vs reference "
                f"{target / 1e6:.3f} (rel {rel:.3f}, tol 0.10), "
                f"diffusive={bool(series.diffusive)}"),
        values={"slope_rad2_per_s": float(series.slope),
                "reference_rad2_per_s": target, "rel_error": float(rel),
                "diffusive": bool(series.diffusive)},
    )


def check_collapse_transition(seed: int, workers: int) -> CriterionCheck:
    """Aligned axes collapse onto the two measurement poles; orthogonal
    axes leave an azimuthally uniform steady distribution."""
    aligned = (MeasChannel(delta=0.0, gamma=GAMMA, eta=0.9),
               MeasChannel(delta=0.0, gamma=GAMMA, eta=0.9))
    res = simulate_ensemble(
        np.zeros(3), aligned, _round_duration(5.0 / GAMMA), DT,
        n_traj=2000, master_seed=_sub(seed, 41), workers=workers,
    )
    axis = np.array([1.0, 0.0, 0.0])
    pole_dist = np.minimum(np.linalg.norm(res.finals - axis, axis=1),
                           np.linalg.norm(res.finals + axis, axis=1))
    pole_fraction = float((pole_dist <= 0.05).mean())

    orthogonal = _sym_channels(0.9)
    res = simulate_ensemble(
        np.zeros(3), orthogonal, _round_duration(20.0 / GAMMA), DT,
        n_traj=40_000, master_seed=_sub(seed, 42), workers=workers,
    )
    phi = np.arctan2(res.finals[:, 1], res.finals[:, 0])
    counts, _ = np.histogram(phi, bins=16, range=(-math.pi, math.pi))
    tv_uniform = float(0.5 * np.abs(counts / counts.sum() - 1.0 / 16).sum())

    passed = pole_fraction >= 0.99 and tv_uniform < 0.02
    return CriterionCheck(
        name="collapse-transition",
        passed=passed,
        detail=(f"aligned axes: {pole_fraction:.4f} of trajectories within "
                f"0.05 of a pole at t = 5/Gamma (need >= 0.99); orthogonal "
                f"axes: azimuthal TV to uniform {tv_uniform:.4f} "
                f"(need < 0.02)"),
        values={"pole_fraction": pole_fraction, "tv_uniform": tv_uniform},
    )


def check_disturbance_topology(seed: int, workers: int) -> CriterionCheck:
    """Exactly two zero-disturbance points for aligned axes; strictly
    positive disturbance everywhere for separated axes."""
    axis = np.array([1.0, 0.0, 0.0])
    results = {}
    passed = True
    for separation in (0.0, math.pi / 4, math.pi / 2):
        channels = (MeasChannel(delta=0.0, gamma=GAMMA, eta=0.41),
                    MeasChannel(delta=separation, gamma=GAMMA, eta=0.49))
        fld = disturbance_map(channels, dt=64e-9)
        vmax = float(fld.values.max())
        vmin = float(fld.values.min())
        zeros = fld.points[fld.values <= 1e-9 * vmax]
        if separation == 0.0:
            to_plus = np.linalg.norm(zeros - axis, axis=1)
            to_minus = np.linalg.norm(zeros + axis, axis=1)
            two_points = (
                len(zeros) > 0
                and float(np.minimum(to_plus, to_minus).max()) <= 0.05
                and bool((to_plus < to_minus).any())
                and bool((to_plus > to_minus).any())
            )
            passed = passed and two_points
            results["aligned_zero_points"] = int(len(zeros))
            results["aligned_two_poles"] = bool(two_points)
        else:
            positive = vmin > 0.0 and vmin >= 1e-3 * vmax
            passed = passed and positive
            results[f"min_over_max_sep_{separation:.3f}"] = vmin / vmax
    return CriterionCheck(
        name="disturbance-topology",
        passed=passed,
        detail=(f"aligned axes: zeros only at the two measurement poles "
                f"({results['aligned_zero_points']} grid hits); separated "
                f"axes: min/max "
                f"{results['min_over_max_sep_0.785']:.3f} and "
                f"{results['min_over_max_sep_1.571']:.3f} > 0"),
        values=results,
    )


_MLE_PREPS = None


def _mle_preps() -> np.ndarray:
    global _MLE_PREPS
    if _MLE_PREPS is None:
        s3 = 1.0 / math.sqrt(3.0)
        s2 = 1.0 / math.sqrt(2.0)
        _MLE_PREPS = np.array([
            (1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0),
            (0, 0, 1), (0, 0, -1),
            (0.89 * s3, 0.89 * s3, 0.89 * s3),
            (0.89 * s3, -0.89 * s3, -0.89 * s3),
            (-0.89 * s3, 0.89 * s3, -0.89 * s3),
            (-0.89 * s3, -0.89 * s3, 0.89 * s3),
            (0.6 * math.cos(math.pi / 6), 0.6 * math.sin(math.pi / 6), 0.0),
            (0.6 * math.cos(5 * math.pi / 6),
             0.6 * math.sin(5 * math.pi / 6), 0.0),
            (0.0, -0.6, 0.0),
            (0.0, 0.0, 0.0),
            (0.3 * s3, 0.3 * s3, 0.3 * s3),
            (-0.45 * s2, 0.0, 0.45 * s2),
        ], dtype=float)
    return _MLE_PREPS


def check_mle_coverage(seed: int, workers: int) -> CriterionCheck:
    """The 95% likelihood region contains the true preparation for at
    least 13 of 16 preparations, each retrodicted from 2000 records."""
    channels = _paper_channels()
    hits = 0
    contained = []
    for i, prep in enumerate(_mle_preps()):
        res = simulate_ensemble(
            prep, channels, 0.32e-6, DT, n_traj=2000,
            master_seed=_sub(seed, 50 + i), keep_records=True,
            workers=workers,
        )
        maps = composite_maps_batch(res.records, channels, DT)
        fit = mle_initial_state(maps)
        inside = bool(fit.contains(prep))
        hits += inside
        contained.append(inside)
    passed = hits >= 13
    return CriterionCheck(
        name="mle-coverage",
        passed=passed,
        detail=(f"true preparation inside the 95% likelihood region for "
                f"{hits}/16 preparations (need >= 13), "
                f"2000 records each"),
        values={"hits": hits, "n_preps": 16, "contained": contained},
    )


def check_filter_closure(seed: int, workers: int) -> CriterionCheck:
    """Replaying a generated record through the filter reproduces the
    generating trajectory to numerical precision at every step."""
    channels = _paper_channels()
    prep = np.array([0.3, -0.2, 0.4])
    n_steps = round(1e-6 / DT)
    boundaries = np.arange(n_steps + 1) * DT
    res = simulate_ensemble(
        prep, channels, 1e-6, DT, n_traj=100, master_seed=_sub(seed, 71),
        keep_records=True, snapshot_times=boundaries, workers=workers,
    )
    worst = 0.0
    for i in range(100):
        record = MeasurementRecord(dt=DT, samples=res.records[i],
                                   channels=channels, seed=None)
        traj = filter_record(from_bloch(prep), record)
        dist = 0.5 * np.linalg.norm(traj.bloch - res.snapshots[:, i, :],
                                    axis=1)
        worst = max(worst, float(dist.max()))
    passed = worst < 1e-9
    return CriterionCheck(
        name="filter-closure",
        passed=passed,
        detail=(f"worst per-step trace distance {worst:.2e} over 100 "
                f"record round-trips (tol 1e-9)"),
        values={"worst_trace_distance": worst, "n_trajectories": 100},
    )


def check_calibration_closure(seed: int, workers: int) -> CriterionCheck:
    """The Ramsey rate estimator and the record-separation efficiency
    estimator recover their simulated inputs within 3%."""
    channel = (MeasChannel(delta=0.0, gamma=GAMMA, eta=0.41),)
    snaps = np.arange(0, 201, 5) * DT
    res = simulate_ensemble(
        [0.0, 1.0, 0.0], channel, 3.2e-6, DT, n_traj=5000,
        master_seed=_sub(seed, 81), snapshot_times=snaps, workers=workers,
    )
    gamma_rel = abs(estimate_gamma_ramsey(res) - GAMMA) / GAMMA

    eta_rel = {}
    tau = 64 * DT  # integer number of steps, so the record spans exactly tau
    for k, eta in enumerate((0.41, 0.49, 1.0)):
        ch = (MeasChannel(delta=0.0, gamma=GAMMA, eta=eta),)
        recs = {}
        for sign, sub in ((+1, 0), (-1, 1)):
            run = simulate_ensemble(
                [float(sign), 0.0, 0.0], ch, tau, DT, n_traj=60_000,
                master_seed=_sub(seed, 82 + 2 * k + sub),
                keep_records=True, workers=workers,
            )
            recs[sign] = run.records[:, :, 0]
        est = estimate_eta(recs[+1], recs[-1], GAMMA, tau)
        eta_rel[eta] = abs(est - eta) / eta
    worst_eta = max(eta_rel.values())
    passed = gamma_rel <= 0.03 and worst_eta <= 0.03
    return CriterionCheck(
        name="calibration-closure",
        passed=passed,
        detail=(f"Ramsey rate rel error {gamma_rel:.4f}, efficiency rel "
                f"errors {[f'{v:.4f}' for v in eta_rel.values()]} at eta "
                f"{list(eta_rel)} (tol 0.03)"),
        values={"gamma_rel_error": float(gamma_rel),
                "eta_rel_errors": {str(k): float(v)
                                   for k, v in eta_rel.items()}},
    )


def check_cavity_oracle(seed: int, workers: int) -> CriterionCheck:
    """The joint qubit-cavity simulation reproduces the configured
    dephasing rate, measurement axis and conditioned trajectories."""
    params = params_for_rate(GAMMA, delta=math.pi / 4, eta=1.0, fock_dim=40)
    report = oracle_report(params, duration=2e-6, dt=1e-9)
    rate_rel = (abs(report["gamma_fit"] - report["gamma_target"])
                / report["gamma_target"])
    axis_err = abs(report["axis_fit_deg"] - 45.0)

    params_cond = params_for_rate(GAMMA, delta=math.pi / 4, eta=0.41,
                                  fock_dim=24)
    crosscheck = filter_crosscheck(params_cond, np.array([0.0, 0.0, 1.0]),
                                   1e-6, 1e-9, _sub(seed, 91))
    mean_td = float(crosscheck.mean_trace_distance)
    passed = rate_rel <= 0.05 and axis_err <= 2.0 and mean_td < 0.02
    return CriterionCheck(
        name="cavity-oracle",
        passed=passed,
        detail=(f"rate rel error {rate_rel:.5f} (tol 0.05), axis error "
                f"{axis_err:.3f} deg (tol 2), filter-vs-joint mean trace "
                f"distance {mean_td:.5f} over 1 us (tol 0.02)"),
        values={"rate_rel_error": float(rate_rel),
                "axis_error_deg": float(axis_err),
                "mean_trace_distance": mean_td,
                "truncation_max_pop": report["truncation_max_pop"]},
    )


def _smooth_blob(sigma: float = 0.18, n_bins: int = 101) -> BlochDistribution:
    edges = np.linspace(-1.0, 1.0, n_bins + 1)
    marginal_x = np.diff(stats.norm.cdf(edges / sigma))
    probs = np.outer(marginal_x, marginal_x)
    mid = edges[:-1] + 0.5 * np.diff(edges)
    gx, gy = np.meshgrid(mid, mid, indexing="ij")
    probs[np.hypot(gx, gy) > 1.0] = 0.0
    return BlochDistribution(edges=(edges, edges), probs=probs / probs.sum())


def check_fokker_planck(seed: int, workers: int) -> CriterionCheck:
    """Deterministic density propagation agrees with trajectory Monte
    Carlo within total-variation 0.05 for three axis separations."""
    times = [0.4e-6, 0.96e-6, 1.6e-6]
    blob = _smooth_blob()
    worst = 0.0
    tvs = {}
    for separation in (0.0, math.pi / 4, math.pi / 2):
        channels = (MeasChannel(delta=0.0, gamma=GAMMA, eta=0.41),
                    MeasChannel(delta=separation, gamma=GAMMA, eta=0.49))
        mc = propagate_mc(blob, channels, times, 1_000_000,
                          _sub(seed, 101), dt=DT)
        for t_final, reference in zip(times, mc):
            solved = propagate_pde(blob, channels, t_final, 2e-9,
                                   n_r=256, n_phi=320)
            tv = float(total_variation(reference, solved))
            tvs[f"sep_{separation:.3f}_t_{t_final * 1e6:.2f}us"] = tv
            worst = max(worst, tv)
    passed = worst < 0.05
    return CriterionCheck(
        name="fokker-planck-consistency",
        passed=passed,
        detail=(f"worst MC-vs-PDE total variation {worst:.4f} over three "
                f"axis separations x three times (tol 0.05)"),
        values={"worst_tv": worst, "tv": tvs},
    )


def check_tomography(seed: int, workers: int) -> CriterionCheck:
    """Simulated tomography validates the calibrated filter (two-sided
    binomial test at 99%) and rejects a +30% rate miscalibration."""
    channels = _paper_channels()
    res = simulate_ensemble(
        np.zeros(3), channels, 1e-6, DT, n_traj=200_000,
        master_seed=_sub(seed, 111), keep_records=True, workers=workers,
    )
    miscal = tuple(
        MeasChannel(delta=ch.delta, gamma=1.3 * ch.gamma, eta=ch.eta)
        for ch in channels
    )
    p_values = {}
    fractions = {}
    for tag, channel_set in (("calibrated", channels), ("miscal", miscal)):
        predicted = filter_records_batch(np.zeros(3), res.records,
                                         channel_set, DT)
        comp = tomo_validate(predicted, res.finals, _sub(seed, 112),
                             n_voxels=7, min_count=1500)
        eligible = ~comp.low_count
        n = int(eligible.sum())
        within = np.abs(comp.predicted - comp.measured) <= comp.err
        k = int(within[eligible].sum())
        p_values[tag] = float(stats.binomtest(k, n, _P0).pvalue)
        fractions[tag] = k / n
    passed = p_values["calibrated"] >= 0.01 and p_values["miscal"] < 0.01
    return CriterionCheck(
        name="tomography-consistency",
        passed=passed,
        detail=(f"calibrated within-error fraction "
                f"{fractions['calibrated']:.3f} (p = "
                f"{p_values['calibrated']:.3g}, need >= 0.01); +30% rate "
                f"miscalibration fraction {fractions['miscal']:.3f} (p = "
                f"{p_values['miscal']:.3g}, need < 0.01)"),
        values={"p_calibrated": p_values["calibrated"],
                "p_miscalibrated": p_values["miscal"],
                "fraction_calibrated": fractions["calibrated"],
                "fraction_miscalibrated": fractions["miscal"]},
    )


ALL_CHECKS = {
    "backaction-identity": check_backaction_identity,
    "steady-radius-eta-1": check_steady_radius_ideal,
    "steady-radius-eta-0.45": check_steady_radius_lossy,
    "angular-slope": check_angular_slope,
    "collapse-transition": check_collapse_transition,
    "disturbance-topology": check_disturbance_topology,
    "mle-coverage": check_mle_coverage,
    "filter-closure": check_filter_closure,
    "calibration-closure": check_calibration_closure,
    "cavity-oracle": check_cavity_oracle,
    "fokker-planck-consistency": check_fokker_planck,
    "tomography-consistency": check_tomography,
}


def run_acceptance(*, seed: int = 1, workers: int = 1,
                   only=None) -> list[CriterionCheck]:
    """Run the checklist (or the subset named in ``only``) in order."""
    if only is None:
        names = list(ALL_CHECKS)
    else:
        unknown = [n for n in only if n not in ALL_CHECKS]
        if unknown:
            raise ValueError(
                f"unknown acceptance criteria: {unknown}; "
                f"known: {list(ALL_CHECKS)}"
            )
        names = [n for n in ALL_CHECKS if n in set(only)]
    return [ALL_CHECKS[name](seed, workers) for name in names]


def acceptance_report(checks) -> dict:
    """JSON-ready report over a list of criterion outcomes."""
    checks = list(checks)
    return {
        "criteria": [asdict(c) for c in checks],
        "n_passed": sum(c.passed for c in checks),
        "n_failed": sum(not c.passed for c in checks),
        "expected_failures": [c.name for c in checks
                              if c.expected_failure and not c.passed],
        "all_passed": all(c.passed for c in checks),
    }
