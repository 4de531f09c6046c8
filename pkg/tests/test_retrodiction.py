"""Tests for record likelihoods and maximum-likelihood retrodiction."""

import math

import numpy as np
import pytest

from sqmlab import (
    ImperfectionParams,
    MeasChannel,
    MeasurementRecord,
    filter_record,
    from_bloch,
    simulate_trajectory,
    trace_distance,
)
from sqmlab.retrodiction import (
    CONFIDENCE_DELTA_95,
    TransferMap,
    choi_matrix,
    composite_map,
    composite_maps_batch,
    log_likelihood,
    mle_initial_state,
    step_map,
)

from oracles import rho_of, sig

GAMMA = 2 * np.pi * 122e3
DT = 16e-9


def two_channels(e1=0.41, e2=0.49):
    return (
        MeasChannel(delta=0.0, gamma=GAMMA, eta=e1),
        MeasChannel(delta=np.pi / 2, gamma=GAMMA, eta=e2),
    )


def oracle_log_weight(signals, deltas, gammas, etas, dt, bloch):
    """Record-step density via scipy expm: c * Tr[Omega rho Omega^dag]."""
    from scipy.linalg import expm

    rho = rho_of(bloch)
    a = np.zeros((2, 2), dtype=complex)
    logc = 0.0
    for v, d, g, e in zip(signals, deltas, gammas, etas):
        s = sig(d)
        m = v * np.eye(2) - s
        a += -(0.5 * g * e * dt) * (m @ m)
        logc += 0.5 * math.log(g * e * dt / math.pi)
    om = expm(a)
    return logc + math.log(np.trace(om @ rho @ om.conj().T).real)


# ---------------------------------------------------------------------------
# step-level density
# ---------------------------------------------------------------------------

def test_step_weight_matches_matrix_oracle():
    rng = np.random.default_rng(31)
    for _ in range(100):
        deltas = rng.uniform(0, 2 * np.pi, size=2)
        gammas = rng.uniform(0.3, 1.0, size=2) * GAMMA
        etas = rng.uniform(0.1, 1.0, size=2)
        channels = tuple(
            MeasChannel(delta=d, gamma=g, eta=e)
            for d, g, e in zip(deltas, gammas, etas)
        )
        signals = rng.normal(scale=6.0, size=2)
        r = rng.normal(size=3)
        r *= rng.uniform(0, 1) / np.linalg.norm(r)
        tm = step_map(signals, channels, DT)
        want = oracle_log_weight(signals, deltas, gammas, etas, DT, r)
        assert abs(tm.log_weight(r) - want) < 1e-10


def test_single_step_likelihood_ratio_closed_form():
    """For one channel along x, the density ratio between the two eigenstates
    of the measured observable is exp(4 Gamma eta V dt)  [frozen oracle]."""
    ch = (MeasChannel(delta=0.0, gamma=GAMMA, eta=0.37),)
    rng = np.random.default_rng(5)
    for v in rng.normal(scale=10.0, size=25):
        tm = step_map([v], ch, DT)
        got = tm.log_weight([1.0, 0.0, 0.0]) - tm.log_weight([-1.0, 0.0, 0.0])
        want = 4.0 * GAMMA * 0.37 * v * DT
        assert abs(got - want) < 1e-12 + 1e-12 * abs(want)
        # cross-check the same ratio against the expm oracle
        o = oracle_log_weight([v], [0.0], [GAMMA], [0.37], DT, [1, 0, 0]) - \
            oracle_log_weight([v], [0.0], [GAMMA], [0.37], DT, [-1, 0, 0])
        assert abs(got - o) < 1e-10


def test_outcome_density_normalization():
    """The one-step outcome density integrates to 1 over (V1, V2): exactly for
    commuting axes, and up to an O((Gamma dt)^3) defect for orthogonal ones."""
    nodes, weights = np.polynomial.hermite_e.hermegauss(48)
    weights = weights / np.sqrt(2 * np.pi)

    def integral(delta2, g, e1, e2, dt, bloch):
        chs = (
            MeasChannel(delta=0.0, gamma=g, eta=e1),
            MeasChannel(delta=delta2, gamma=g, eta=e2),
        )
        s1, s2 = 1 / math.sqrt(2 * g * e1 * dt), 1 / math.sqrt(2 * g * e2 * dt)
        total = 0.0
        for z1, w1 in zip(nodes, weights):
            for z2, w2 in zip(nodes, weights):
                v = (z1 * s1, z2 * s2)
                lw = step_map(v, chs, dt).log_weight(bloch)
                # strip the Gaussian weight the quadrature supplies
                total += w1 * w2 * math.exp(lw + 0.5 * (z1**2 + z2**2)) * s1 * s2 * 2 * np.pi
        return total

    bloch = np.array([0.4, 0.3, 0.2])
    dt_small = 1e-3 / GAMMA
    assert abs(integral(np.pi / 2, GAMMA, 0.5, 0.5, dt_small, bloch) - 1.0) < 1e-6
    # commuting axes: exact completeness at much larger Gamma dt
    assert abs(integral(0.0, GAMMA, 0.5, 0.7, 0.08 / GAMMA, bloch) - 1.0) < 1e-9
    # non-commuting defect grows as w1*w2/6 with w_i = 2 Gamma_i eta_i dt,
    # which is ~2e-5 at the working step
    w1, w2 = 2 * GAMMA * 0.41 * DT, 2 * GAMMA * 0.49 * DT
    defect = abs(integral(np.pi / 2, GAMMA, 0.41, 0.49, DT, bloch) - 1.0)
    assert defect < 3.0 * w1 * w2 / 6.0


# ---------------------------------------------------------------------------
# composition
# ---------------------------------------------------------------------------

def test_composition_associativity():
    channels = two_channels()
    traj, rec = simulate_trajectory(
        from_bloch([0.6, 0.0, 0.4]), channels, duration=1e-6, dt=DT, seed=88
    )
    maps = [step_map(rec.samples[k], channels, DT) for k in range(rec.n_steps)]
    left = TransferMap.identity()
    for m in maps:
        left = left.then(m)
    # fold in two halves, then join
    mid = len(maps) // 2
    first = TransferMap.identity()
    for m in maps[:mid]:
        first = first.then(m)
    second = TransferMap.identity()
    for m in maps[mid:]:
        second = second.then(m)
    joined = first.then(second)
    whole = composite_map(rec)
    for r in ([0.2, 0.1, -0.5], [0.9, 0, 0], [0, 0, 0]):
        assert abs(left.log_weight(r) - joined.log_weight(r)) < 1e-9
        assert abs(left.log_weight(r) - whole.log_weight(r)) < 1e-9


def test_composite_apply_matches_filter():
    channels = two_channels()
    init = from_bloch([0.2, -0.5, 0.6])
    traj, rec = simulate_trajectory(init, channels, duration=2e-6, dt=DT, seed=17)
    final, _ = composite_map(rec).apply(init)
    assert trace_distance(final, filter_record(init, rec).final_state) < 1e-9


def test_long_record_stays_finite():
    channels = two_channels()
    _, rec = simulate_trajectory(
        from_bloch([1.0, 0.0, 0.0]), channels, duration=40e-6, dt=DT, seed=2
    )
    tm = composite_map(rec)
    assert np.isfinite(tm.log_offset)
    assert np.abs(tm.matrix).max() <= 1.0 + 1e-12
    assert np.isfinite(tm.log_weight([0.3, 0.2, 0.1]))


def test_choi_matrix_positive_semidefinite():
    channels = two_channels()
    _, rec = simulate_trajectory(
        from_bloch([0.0, 1.0, 0.0]), channels, duration=1e-6, dt=DT, seed=9
    )
    tm = composite_map(rec)
    evals = np.linalg.eigvalsh(choi_matrix(tm))
    assert evals.min() > -1e-10 * evals.max()
    # single step too
    evs = np.linalg.eigvalsh(choi_matrix(step_map([2.0, -1.0], channels, DT)))
    assert evs.min() > -1e-12 * evs.max()


# ---------------------------------------------------------------------------
# retrodiction
# ---------------------------------------------------------------------------

def test_likelihood_affine_in_initial_state():
    channels = two_channels()
    _, rec = simulate_trajectory(
        from_bloch([0.5, 0.5, 0.0]), channels, duration=1e-6, dt=DT, seed=4
    )
    tm = composite_map(rec)
    rng = np.random.default_rng(0)
    for _ in range(20):
        r1, r2 = rng.normal(size=3), rng.normal(size=3)
        r1 *= 0.9 / np.linalg.norm(r1)
        r2 *= 0.9 / np.linalg.norm(r2)
        lam = rng.uniform()
        mix = lam * r1 + (1 - lam) * r2
        w = lambda r: math.exp(tm.log_weight(r) - tm.log_offset)
        assert abs(w(mix) - (lam * w(r1) + (1 - lam) * w(r2))) < 1e-9 * w(mix)


def test_records_carry_no_initial_z_information():
    channels = two_channels()
    _, rec = simulate_trajectory(
        from_bloch([0.0, 0.8, 0.0]), channels, duration=2e-6, dt=DT, seed=12
    )
    tm = composite_map(rec)
    assert abs(tm.matrix[0, 3]) < 1e-14
    assert abs(tm.log_weight([0.3, 0.4, 0.0]) - tm.log_weight([0.3, 0.4, 0.7])) < 1e-10


def test_mle_is_pure_and_beats_all_other_states():
    channels = two_channels()
    _, rec = simulate_trajectory(
        from_bloch([-0.7, 0.3, 0.0]), channels, duration=1e-6, dt=DT, seed=21
    )
    res = mle_initial_state(rec)
    assert not res.degenerate
    assert abs(np.linalg.norm(res.bloch) - 1.0) < 1e-12
    assert abs(res.bloch[2]) < 1e-12  # equatorial
    rng = np.random.default_rng(1)
    for _ in range(200):
        r = rng.normal(size=3)
        r *= rng.uniform(0, 1) / np.linalg.norm(r)
        assert res.objective(r) <= res.log_likelihood + 1e-12


def test_mle_confidence_region_is_calibrated_loosely():
    """The true preparation should fall inside the 95% likelihood region in
    the vast majority of repetitions (exact coverage is checked at the
    acceptance level)."""
    channels = two_channels()
    prep = np.array([0.8 * np.cos(0.7), 0.8 * np.sin(0.7), 0.0])
    hits = 0
    n_rep = 40
    for k in range(n_rep):
        _, rec = simulate_trajectory(
            from_bloch(prep), channels, duration=1e-6, dt=DT, seed=1000 + k
        )
        res = mle_initial_state(rec)
        hits += res.contains(prep)
    assert hits >= int(0.8 * n_rep)


def test_mle_matches_brute_force_grid_maximum():
    """The analytic maximizer must agree with an exhaustive scan of the
    likelihood, evaluated through the independent expm oracle, over a dense
    ring of pure equatorial candidates."""
    channels = two_channels()
    _, rec = simulate_trajectory(
        from_bloch([0.0, -1.0, 0.0]), channels, duration=0.3e-6, dt=DT, seed=73
    )
    res = mle_initial_state(rec)
    thetas = np.linspace(0, 2 * np.pi, 720, endpoint=False)
    best_lw, best_theta = -np.inf, None
    for th in thetas:
        r = [np.cos(th), np.sin(th), 0.0]
        # oracle likelihood of the whole record: product of conditional step
        # densities, each conditioned on the filtered state so far
        lw = _oracle_record_log_weight(r, rec)
        if lw > best_lw:
            best_lw, best_theta = lw, th
    got_theta = math.atan2(res.bloch[1], res.bloch[0]) % (2 * np.pi)
    dtheta = abs((got_theta - best_theta + np.pi) % (2 * np.pi) - np.pi)
    assert dtheta < 2 * np.pi / 720 + 1e-9
    # at the same candidate the two likelihood routes agree numerically
    r_best = [np.cos(best_theta), np.sin(best_theta), 0.0]
    assert abs(res.objective(r_best) - best_lw) < 1e-6
    assert res.log_likelihood >= best_lw - 1e-9


def _oracle_record_log_weight(r0, rec):
    """p(record | r0) via chained conditional densities: each step's density
    given the normalized filtered state, using the expm oracle throughout."""
    from oracles import bloch_of, matrix_kraus_step

    r = np.asarray(r0, dtype=float)
    total = 0.0
    for k in range(rec.n_steps):
        v = rec.samples[k]
        total += oracle_log_weight(v, [0.0, np.pi / 2], [GAMMA, GAMMA], [0.41, 0.49], DT, r)
        r = bloch_of(
            matrix_kraus_step(
                rho_of(r), v, [0.0, np.pi / 2], [GAMMA, GAMMA], [0.41, 0.49], DT
            )
        )
    return total


def test_degenerate_record_flagged():
    channels = two_channels()
    rec = MeasurementRecord(dt=DT, samples=np.zeros((0, 2)), channels=channels)
    res = mle_initial_state(rec)
    assert res.degenerate
    assert np.allclose(res.bloch, 0.0)
    assert res.contains([0.99, 0.0, 0.0])


def test_imperfection_maps_and_t1_rejection():
    channels = two_channels()
    imp = ImperfectionParams(rabi_detuning_rate=2 * np.pi * 30e3)
    init = from_bloch([0.7, 0.0, 0.0])
    traj, rec = simulate_trajectory(
        init, channels, duration=1e-6, dt=DT, seed=33, imperfections=imp
    )
    final, _ = composite_map(rec, imperfections=imp).apply(init)
    want = filter_record(init, rec, imperfections=imp).final_state
    assert trace_distance(final, want) < 1e-9
    with pytest.raises(NotImplementedError):
        composite_map(rec, imperfections=ImperfectionParams(t1=30e-6))
    assert CONFIDENCE_DELTA_95 == pytest.approx(7.815 / 2)


# ---------------------------------------------------------------------------
# ensemble maximum likelihood
# ---------------------------------------------------------------------------

def _ensemble_maps(prep, n_records, seed, duration=0.5e-6, channels=None):
    from sqmlab import simulate_ensemble

    channels = channels or two_channels()
    res = simulate_ensemble(
        prep, channels, duration, DT, n_traj=n_records, master_seed=seed,
        keep_records=True,
    )
    return composite_maps_batch(res.records, channels, DT)


def test_batch_map_builder_matches_sequential_composition():
    from sqmlab import simulate_ensemble

    channels = two_channels()
    res = simulate_ensemble(
        [0.4, -0.2, 0.0], channels, 0.3e-6, DT, n_traj=6, master_seed=8,
        keep_records=True,
    )
    batch = composite_maps_batch(res.records, channels, DT)
    for j in range(6):
        rec = MeasurementRecord(dt=DT, samples=res.records[j], channels=channels)
        single = composite_map(rec)
        assert np.allclose(batch[j].matrix, single.matrix, atol=1e-12)
        assert batch[j].log_offset == pytest.approx(single.log_offset, abs=1e-9)


def test_ensemble_mle_concentrates_on_truth():
    # commuting channels along +x: 2000 records pin the x component hard
    channels = (
        MeasChannel(delta=0.0, gamma=GAMMA, eta=0.41),
        MeasChannel(delta=0.0, gamma=GAMMA, eta=0.49),
    )
    maps = _ensemble_maps([1.0, 0.0, 0.0], 2000, seed=5, channels=channels)
    res = mle_initial_state(maps)
    assert res.converged and not res.degenerate
    assert res.bloch[0] > 0.9
    assert np.linalg.norm(res.bloch) <= 1.0 + 1e-12


def test_ensemble_mle_agrees_with_grid_scan():
    maps = _ensemble_maps([0.5, 0.35, 0.0], 250, seed=17)
    res = mle_initial_state(maps)
    ax = np.linspace(-1.0, 1.0, 21)
    best, arg = -np.inf, None
    for x in ax:
        for y in ax:
            for z in ax:
                if x * x + y * y + z * z > 1.0:
                    continue
                v = res.objective([x, y, z])
                if v > best:
                    best, arg = v, np.array([x, y, z])
    # ascent must beat every grid point and sit within one lattice spacing
    # in the informative (equatorial) directions; z is unidentifiable here,
    # and the ascent reports the z = 0 representative
    assert res.log_likelihood >= best - 1e-9
    assert abs(res.bloch[2]) < 1e-12
    assert np.linalg.norm(res.bloch[:2] - arg[:2]) <= np.sqrt(2) * 0.1 + 1e-12


def test_ensemble_mle_estimator_consistency():
    # median retrodiction error over nine disjoint replicates per ensemble
    # size must fall as the ensemble grows
    truth = np.array([0.5, 0.35, 0.0])
    maps = _ensemble_maps(truth, 36_000, seed=29, duration=0.3e-6)
    medians = []
    for n in (250, 1000, 4000):
        errs = []
        for k in range(9):
            res = mle_initial_state(maps[k * n : (k + 1) * n])
            errs.append(np.linalg.norm(res.bloch - truth))
        medians.append(np.median(errs))
    assert medians[0] > medians[1] > medians[2]


def test_mean_log_likelihood_peaks_at_truth():
    maps = _ensemble_maps([0.0, -1.0, 0.0], 2000, seed=41)
    res = mle_initial_state(maps)
    at_truth = res.objective([0.0, -1.0, 0.0])
    at_flip = res.objective([0.0, 1.0, 0.0])
    assert at_truth > at_flip


def test_objective_concave_along_chords():
    maps = _ensemble_maps([0.3, 0.1, 0.0], 50, seed=53)
    res = mle_initial_state(maps)
    rng = np.random.default_rng(3)
    for _ in range(20):
        a = rng.normal(size=3)
        a *= rng.uniform(0, 0.9) / np.linalg.norm(a)
        b = rng.normal(size=3)
        b *= rng.uniform(0, 0.9) / np.linalg.norm(b)
        lams = np.linspace(0.0, 1.0, 9)
        vals = np.array([res.objective(a + l * (b - a)) for l in lams])
        second = vals[2:] - 2 * vals[1:-1] + vals[:-2]
        assert np.all(second <= 1e-9 * max(1.0, np.abs(vals).max()))


def test_degenerate_map_ensemble_and_report():
    res = mle_initial_state([TransferMap.identity() for _ in range(3)])
    assert res.degenerate
    assert np.allclose(res.bloch, 0.0)
    assert res.contains([0.0, 0.0, 0.99])
    report = res.to_report(n_grid=21)
    assert set(report) == {"mle", "loglik", "region_boundary", "n_records"}
    assert report["n_records"] == 3
    # degenerate region is the whole ball; its boundary hugs the sphere
    radii = np.linalg.norm(np.asarray(report["region_boundary"]), axis=1)
    assert radii.max() <= 1.0 + 1e-9
    assert radii.min() >= 0.5


def test_confidence_region_shrinks_with_ensemble_size():
    maps = _ensemble_maps([0.5, 0.35, 0.0], 2000, seed=61)
    small = mle_initial_state(maps[:200])
    large = mle_initial_state(maps)
    reg_small = small.confidence_region(n_grid=41)
    reg_large = large.confidence_region(n_grid=41)
    assert len(reg_large) < len(reg_small)
    # the region always contains the maximizer
    assert small.contains(small.bloch) and large.contains(large.bloch)
