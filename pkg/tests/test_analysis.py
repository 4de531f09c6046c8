"""Tests for disturbance fields, calibration estimators, and tomography.

The disturbance identity is checked against an independent density-matrix
route (noise-operator second moments), the bound against its commutator
form, the estimators against the generator they calibrate, and the
tomography pipeline against its own binomial self-consistency statistics.
"""

import math

import numpy as np
import pytest
from scipy.linalg import expm

from sqmlab import (
    MeasChannel,
    filter_records_batch,
    from_bloch,
    simulate_ensemble,
)
from sqmlab.analysis import (
    TOMO_PULSES,
    commutator_bound,
    disturbance_at,
    disturbance_map,
    estimate_eta,
    estimate_gamma_ramsey,
    tomo_validate,
)

from oracles import rho_of, sig

GAMMA = 2 * np.pi * 122e3
DT = 16e-9


def channels_at(d1, d2, g1=GAMMA, g2=GAMMA, e1=0.41, e2=0.49):
    return (
        MeasChannel(delta=d1, gamma=g1, eta=e1),
        MeasChannel(delta=d2, gamma=g2, eta=e2),
    )


def random_bloch(rng, pure=False):
    r = rng.normal(size=3)
    r /= np.linalg.norm(r)
    if not pure:
        r *= rng.uniform(0, 1) ** (1 / 3)
    return r


def matrix_route_disturbance(r, channels, dt):
    """Independent oracle: sum_i Tr[M_i^dagger M_i] dt with the noise
    operators M_i = sqrt(G_i eta_i / 2)(s rho + rho s - 2<s> rho)."""
    rho = rho_of(r)
    total = 0.0
    for ch in channels:
        s = sig(ch.delta)
        mean = np.trace(s @ rho).real
        m = np.sqrt(ch.gamma * ch.eta / 2.0) * (s @ rho + rho @ s - 2.0 * mean * rho)
        total += np.trace(m.conj().T @ m).real * dt
    return total


# ---------------------------------------------------------------------------
# disturbance identity, bound, map
# ---------------------------------------------------------------------------

def test_disturbance_identity_against_matrix_route():
    rng = np.random.default_rng(7)
    for _ in range(10_000):
        pure = rng.uniform() < 0.5
        r = random_bloch(rng, pure=pure)
        channels = channels_at(
            rng.uniform(0, 2 * np.pi),
            rng.uniform(0, 2 * np.pi),
            g1=rng.uniform(0.2, 1.5) * GAMMA,
            g2=rng.uniform(0.2, 1.5) * GAMMA,
            e1=rng.uniform(0.05, 1.0),
            e2=rng.uniform(0.05, 1.0),
        )
        got = disturbance_at(from_bloch(r), channels, DT)
        want = matrix_route_disturbance(r, channels, DT)
        assert abs(got - want) < 1e-12


def test_disturbance_pure_state_variance_form():
    rng = np.random.default_rng(8)
    channels = channels_at(0.0, np.pi / 2)
    for _ in range(200):
        r = random_bloch(rng, pure=True)
        var_sum = sum(
            ch.gamma * ch.eta * (1.0 - (ch.axis @ r) ** 2) for ch in channels
        )
        assert disturbance_at(from_bloch(r), channels, DT) == pytest.approx(
            var_sum * DT, abs=1e-15
        )


def test_disturbance_bound_holds_and_is_tight_at_poles():
    rng = np.random.default_rng(9)
    for _ in range(10_000):
        r = random_bloch(rng, pure=True)
        channels = channels_at(
            rng.uniform(0, 2 * np.pi),
            rng.uniform(0, 2 * np.pi),
            e1=rng.uniform(0.05, 1.0),
            e2=rng.uniform(0.05, 1.0),
        )
        state = from_bloch(r)
        gap = disturbance_at(state, channels, DT) - commutator_bound(state, channels, DT)
        assert gap >= -1e-12
    # symmetric orthogonal channels saturate the bound at the +-z poles
    sym = channels_at(0.0, np.pi / 2, e1=0.45, e2=0.45)
    for pole in ([0.0, 0.0, 1.0], [0.0, 0.0, -1.0]):
        state = from_bloch(pole)
        d = disturbance_at(state, sym, DT)
        b = commutator_bound(state, sym, DT)
        assert d == pytest.approx(2 * GAMMA * 0.45 * DT, rel=1e-12)
        assert abs(d - b) < 1e-12


def test_disturbance_trivial_zeros():
    # commuting channels, measured eigenstate
    channels = channels_at(0.7, 0.7)
    axis = np.array([np.cos(0.7), np.sin(0.7), 0.0])
    assert disturbance_at(from_bloch(axis), channels, DT) == pytest.approx(0.0, abs=1e-15)
    # maximally mixed state with eta = 0 on both channels (pure dephasing)
    deph = channels_at(0.0, np.pi / 2, e1=0.0, e2=0.0)
    assert disturbance_at(from_bloch([0, 0, 0]), deph, DT) == 0.0
    with pytest.raises(ValueError):
        disturbance_at(from_bloch([0, 0, 0]), channels, 0.0)
    with pytest.raises(ValueError):
        commutator_bound(from_bloch([0, 0, 0]), channels[:1], DT)


def test_disturbance_map_zero_structure():
    dt = 64e-9
    # parallel axes: exactly two zeros, at +-measured axis on the sphere
    field0 = disturbance_map(channels_at(0.0, 0.0), dt)
    zeros = field0.zero_points()
    assert zeros.shape[0] == 2
    assert np.allclose(np.sort(zeros[:, 0]), [-1.0, 1.0], atol=1e-12)
    assert np.allclose(zeros[:, 1:], 0.0, atol=1e-12)
    # non-parallel axes: no zeros anywhere (sphere, disk, interior)
    for d_rel in (np.pi / 4, np.pi / 2):
        field = disturbance_map(channels_at(0.0, d_rel), dt)
        assert field.zero_points().shape[0] == 0
        assert field.values.min() >= 0.0
        assert field.disk_values.min() > 1e-6 * field.values.max()
    assert field0.values.min() == 0.0
    assert field0.sphere_values.size + field0.disk_values.size == field0.values.size


def test_disturbance_matches_monte_carlo_steps():
    # ensemble variance of the one-step Bloch displacement, against the
    # closed-form rate, at 20 random pure states; 4e4 steps per state keep
    # the Monte Carlo noise floor (~0.7%) well inside the 2% tolerance
    from sqmlab.engine import _axes, _dephase, _measurement_update

    rng = np.random.default_rng(12)
    channels = channels_at(0.0, np.pi / 2)
    dt = 2e-9
    axes = _axes(channels)
    ge = np.array([ch.gamma * ch.eta for ch in channels])
    gam = np.array([ch.gamma for ch in channels])
    n = 40_000
    for _ in range(20):
        r0 = random_bloch(rng, pure=True)
        mean = axes @ r0
        noise = rng.standard_normal((n, 2))
        v = mean + noise / (np.sqrt(2 * ge) * np.sqrt(dt))
        r1 = _measurement_update(np.broadcast_to(r0, (n, 3)).copy(), v * ge * dt, axes)
        r1 = _dephase(r1, axes, (gam - ge) * dt)
        dr = r1 - r0
        # variance (drift subtracted): the O(dt) stochastic displacement
        mc = 0.5 * ((dr - dr.mean(axis=0)) ** 2).sum(axis=1).mean()
        want = disturbance_at(from_bloch(r0), channels, dt)
        assert mc == pytest.approx(want, rel=0.02)


# ---------------------------------------------------------------------------
# calibration estimators
# ---------------------------------------------------------------------------

def test_gamma_ramsey_closure():
    ch = (MeasChannel(delta=0.0, gamma=GAMMA, eta=0.41),)
    duration = 3.2e-6
    times = np.arange(0, 201, 5) * DT
    res = simulate_ensemble(
        [0.0, 1.0, 0.0], ch, duration, DT, n_traj=5000, master_seed=71,
        snapshot_times=times,
    )
    est = estimate_gamma_ramsey(res)
    assert est == pytest.approx(GAMMA, rel=0.03)


def test_gamma_ramsey_zero_rate_and_errors():
    silent = (MeasChannel(delta=0.0, gamma=0.0, eta=0.5),)
    times = np.arange(0, 201, 20) * DT
    res = simulate_ensemble(
        [0.0, 1.0, 0.0], silent, 3.2e-6, DT, n_traj=200, master_seed=3,
        snapshot_times=times,
    )
    assert abs(estimate_gamma_ramsey(res)) < 1e3

    two = channels_at(0.0, np.pi / 2)
    res2 = simulate_ensemble(
        [0.0, 1.0, 0.0], two, 1e-6, DT, n_traj=200, master_seed=3,
        snapshot_times=np.arange(0, 63, 6) * DT,
    )
    with pytest.raises(ValueError):
        estimate_gamma_ramsey(res2)
    # no snapshots kept -> cannot fit
    res3 = simulate_ensemble(
        [0.0, 1.0, 0.0], (MeasChannel(delta=0.0, gamma=GAMMA, eta=0.41),),
        1e-6, DT, n_traj=200, master_seed=3,
    )
    with pytest.raises(ValueError):
        estimate_gamma_ramsey(res3)


@pytest.mark.parametrize("eta", [0.49, 1.0])
def test_eta_closure(eta):
    ch = (MeasChannel(delta=0.0, gamma=GAMMA, eta=eta),)
    tau = 1e-6
    recs = {}
    for sign, seed in ((+1, 101), (-1, 202)):
        res = simulate_ensemble(
            [float(sign), 0.0, 0.0], ch, tau, DT, n_traj=10_000,
            master_seed=seed, keep_records=True,
        )
        recs[sign] = res.records[:, :, 0]
    est = estimate_eta(recs[+1], recs[-1], GAMMA, tau)
    assert est == pytest.approx(eta, rel=0.03)


def test_eta_formula_edge_cases():
    rng = np.random.default_rng(5)
    noise = rng.normal(size=(500, 63))
    # identical preparations: numerator vanishes
    assert estimate_eta(noise, noise.copy(), GAMMA, 1e-6) == 0.0
    # zero variance is degenerate
    with pytest.raises(ValueError):
        estimate_eta(np.ones((10, 4)), -np.ones((10, 4)), GAMMA, 1e-6)
    # absurd separation clips at 1 + tolerance
    up = noise + 500.0
    down = noise - 500.0
    assert estimate_eta(up, down, GAMMA, 1e-6) <= 1.05
    with pytest.raises(ValueError):
        estimate_eta(noise, noise, 0.0, 1e-6)


# ---------------------------------------------------------------------------
# tomography
# ---------------------------------------------------------------------------

def test_tomo_design_rows_match_rotation_oracle():
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sy = np.array([[0, -1j], [1j, 0]], dtype=complex)
    sz = np.diag([1.0, -1.0]).astype(complex)
    gens = {"x": sx, "y": sy}
    angles = {"90": np.pi / 2, "180": np.pi}
    rng = np.random.default_rng(2)
    for name, row in TOMO_PULSES:
        r = random_bloch(rng)
        rho = rho_of(r)
        if name == "I":
            u = np.eye(2, dtype=complex)
        else:
            sign = 1.0 if name[0] == "+" else -1.0
            u = expm(-0.5j * sign * angles[name[2:]] * gens[name[1]])
        z_after = np.trace(sz @ u @ rho @ u.conj().T).real
        assert z_after == pytest.approx(np.array(row) @ r, abs=1e-12)


@pytest.fixture(scope="module")
def tomo_sim():
    channels = channels_at(0.0, np.pi / 2)

    def ball_sampler(rng):
        r = rng.normal(size=3)
        return r * rng.uniform(0, 1) ** (1 / 3) / np.linalg.norm(r)

    res = simulate_ensemble(
        ball_sampler, channels, 1.0e-6, DT, n_traj=720_000, master_seed=99,
        keep_records=True, keep_initials=True,
    )
    predicted = filter_records_batch(res.initials, res.records, channels, DT)
    assert np.allclose(predicted, res.finals, atol=1e-9)
    return channels, res, predicted


def test_tomo_calibrated_filter_is_self_consistent(tomo_sim):
    _, res, predicted = tomo_sim
    comp = tomo_validate(predicted, res.finals, seed=17, min_count=1500)
    assert int((~comp.low_count).sum()) > 150
    assert (comp.err[~comp.low_count] > 0).all()
    # the within-1-sigma fraction is statistically compatible with the
    # Gaussian expectation of ~68% at the 99% level
    assert comp.self_consistency_pvalue() > 0.01
    assert abs(comp.fraction_within - 0.683) < 0.06


def test_tomo_miscalibrated_filter_fails(tomo_sim):
    channels, res, predicted = tomo_sim
    wrong = tuple(
        MeasChannel(delta=ch.delta, gamma=1.3 * ch.gamma, eta=ch.eta)
        for ch in channels
    )
    biased = filter_records_batch(res.initials, res.records, wrong, DT)
    comp_ok = tomo_validate(predicted, res.finals, seed=17, min_count=1500)
    comp_bad = tomo_validate(biased, res.finals, seed=17, min_count=1500)
    assert comp_bad.fraction_within < comp_ok.fraction_within - 0.05
    assert comp_bad.self_consistency_pvalue() < 1e-4


def test_tomo_readout_infidelity_degrades_consistency(tomo_sim):
    _, res, predicted = tomo_sim
    comp = tomo_validate(predicted, res.finals, seed=17, min_count=1500, fidelity=0.85)
    assert comp.self_consistency_pvalue() < 1e-4


def test_tomo_empty_and_validation():
    comp = tomo_validate(np.empty((0, 3)), np.empty((0, 3)), seed=1)
    assert len(comp) == 0
    assert math.isnan(comp.fraction_within)
    assert math.isnan(comp.self_consistency_pvalue())
    with pytest.raises(ValueError):
        tomo_validate(np.zeros((5, 3)), np.zeros((4, 3)), seed=1)
    with pytest.raises(ValueError):
        tomo_validate(np.zeros((5, 3)), np.zeros((5, 3)), seed=1, fidelity=1.5)
