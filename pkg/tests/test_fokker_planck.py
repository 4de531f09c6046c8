"""Tests for the in-plane Fokker-Planck solver and its MC cross-validation."""

import numpy as np
import pytest
import sympy as sp
from scipy import stats

from sqmlab.distributions import (
    BlochDistribution,
    propagate_mc,
    total_variation,
)
from sqmlab.engine import MeasChannel, simulate_ensemble
from sqmlab.fokker_planck import (
    FokkerPlanckSolver,
    _drift_diffusion,
    _fitted_face_coefficients,
    propagate_pde,
    stationary_peak_radius,
    stationary_radial_density,
)

GAMMA = 2.0 * np.pi * 122e3
DT = 16e-9


def channel_pair(separation, eta1=0.41, eta2=0.49):
    return (
        MeasChannel(delta=0.0, gamma=GAMMA, eta=eta1),
        MeasChannel(delta=separation, gamma=GAMMA, eta=eta2),
    )


def symmetric_pair(eta=0.45):
    return channel_pair(np.pi / 2, eta, eta)


def gaussian_blob(sigma=0.18, mu=(0.0, 0.0), n_bins=101):
    """In-plane Gaussian distribution truncated to the unit disk."""
    edges = np.linspace(-1.0, 1.0, n_bins + 1)
    mx = np.diff(stats.norm.cdf((edges - mu[0]) / sigma))
    my = np.diff(stats.norm.cdf((edges - mu[1]) / sigma))
    probs = np.outer(mx, my)
    cent = edges[:-1] + 0.5 * np.diff(edges)
    cx, cy = np.meshgrid(cent, cent, indexing="ij")
    probs[np.hypot(cx, cy) > 1.0] = 0.0
    probs /= probs.sum()
    return BlochDistribution(edges=(edges, edges), probs=probs, time=0.0)


def in_plane_moments(dist):
    cx, cy = np.meshgrid(*dist.centers, indexing="ij")
    return (dist.probs * cx).sum(), (dist.probs * cy).sum()


# -- coefficient fields ------------------------------------------------------


def test_polar_coefficients_match_symbolic_derivation():
    """Derive the polar Ito coefficients from the vector SDE with sympy.

    The in-plane diffusion limit is dr = sum_i gamma_i ((n_i.r) n_i - r) dt
    + sum_i sqrt(2 gamma_i eta_i) (n_i - (n_i.r) r) dW_i.  Changing
    variables to (|r|, angle) via the Ito formula must reproduce the
    closed-form fields used to assemble the generator.
    """
    channels = (
        MeasChannel(delta=0.0, gamma=GAMMA, eta=0.41),
        MeasChannel(delta=1.1, gamma=1.7 * GAMMA, eta=0.37),
        MeasChannel(delta=2.3, gamma=0.6 * GAMMA, eta=0.0,
                    dephasing_only=True),
    )
    x, y = sp.symbols("x y", real=True)
    pos = sp.Matrix([x, y])
    drift = sp.zeros(2, 1)
    noises = []
    for ch in channels:
        axis = sp.Matrix([sp.cos(ch.delta), sp.sin(ch.delta)])
        drift += ch.gamma * (axis.dot(pos) * axis - pos)
        eta = 0.0 if ch.dephasing_only else ch.eta
        noises.append(sp.sqrt(2 * ch.gamma * eta)
                      * (axis - axis.dot(pos) * pos))
    fr = sp.sqrt(x**2 + y**2)
    fphi = sp.atan2(y, x)
    symbols = {}
    for name, f in [("r", fr), ("phi", fphi)]:
        grad = sp.Matrix([sp.diff(f, x), sp.diff(f, y)])
        hess = sp.hessian(f, (x, y))
        a = grad.dot(drift)
        for g in noises:
            a += (g.T * hess * g)[0, 0] / 2
        symbols["a_" + name] = sp.simplify(a)
        symbols["grad_" + name] = grad
    for one, two in [("r", "r"), ("phi", "phi"), ("r", "phi")]:
        d = sum((g.dot(symbols["grad_" + one]))
                * (g.dot(symbols["grad_" + two])) for g in noises)
        symbols["d_" + one + two] = sp.simplify(d)
    funcs = {k: sp.lambdify((x, y), symbols[k], "numpy")
             for k in ("a_r", "a_phi", "d_rr", "d_phiphi", "d_rphi")}

    rng = np.random.default_rng(3)
    rr = rng.uniform(0.05, 0.98, 25)
    pp = rng.uniform(-np.pi, np.pi, 25)
    a_r, a_p, d_rr, d_pp, d_rp = _drift_diffusion(channels, rr, pp)
    xs, ys = rr * np.cos(pp), rr * np.sin(pp)
    assert np.allclose(a_r, funcs["a_r"](xs, ys), rtol=1e-9)
    assert np.allclose(a_p, funcs["a_phi"](xs, ys), rtol=1e-9)
    assert np.allclose(d_rr, funcs["d_rr"](xs, ys), rtol=1e-9)
    assert np.allclose(d_pp, funcs["d_phiphi"](xs, ys), rtol=1e-9)
    assert np.allclose(d_rp, funcs["d_rphi"](xs, ys), rtol=1e-9, atol=1e-6)


def test_generator_matches_symbolic_flux_divergence():
    """Applying the generator to a smooth field reproduces -div J."""
    channels = channel_pair(np.pi / 3)
    r, phi = sp.symbols("r phi", positive=True)
    a_r = sp.Integer(0)
    a_p = sp.Integer(0)
    d_rr = sp.Integer(0)
    d_pp = sp.Integer(0)
    d_rp = sp.Integer(0)
    for ch in channels:
        g, e, d = sp.Float(ch.gamma), sp.Float(ch.eta), sp.Float(ch.delta)
        c, s = sp.cos(phi - d), sp.sin(phi - d)
        a_r += g * s**2 * (e / r - r)
        a_p += g * c * s * (2 * e * (1 - r**2) / r**2 - 1)
        d_rr += 2 * g * e * c**2 * (1 - r**2) ** 2
        d_pp += 2 * g * e * s**2 / r**2
        d_rp += -2 * g * e * c * s * (1 - r**2) / r
    q = sp.exp(-(((r - sp.Rational(6, 10)) / sp.Rational(15, 100)) ** 2)
               - ((phi - sp.Rational(8, 10)) / sp.Rational(1, 2)) ** 2)
    flux_r = a_r * q - sp.diff(d_rr * q, r) / 2 - sp.diff(d_rp * q, phi) / 2
    flux_p = a_p * q - sp.diff(d_pp * q, phi) / 2 - sp.diff(d_rp * q, r) / 2
    rhs = -(sp.diff(flux_r, r) + sp.diff(flux_p, phi))
    f_q = sp.lambdify((r, phi), q, "numpy")
    f_rhs = sp.lambdify((r, phi), rhs, "numpy")

    solver = FokkerPlanckSolver(channels)
    rc = solver.r_centers[:, None]
    pc = solver.phi_centers[None, :]
    applied = (solver._generator @ f_q(rc, pc).ravel()).reshape(
        solver.n_r, solver.n_phi)
    truth = f_rhs(rc, pc)
    window = np.broadcast_to(
        (rc > 0.25) & (rc < 0.92) & (np.abs(pc - 0.8) < 1.1), applied.shape)
    scale = np.abs(truth[window]).max()
    assert np.abs(applied - truth)[window].max() < 5e-3 * scale


def test_fitted_face_coefficients_limits():
    rng = np.random.default_rng(11)
    a = rng.normal(0.0, 3.0, 200)
    d_lo = rng.uniform(0.0, 2.0, 200)
    d_hi = rng.uniform(0.0, 2.0, 200)
    c_lo, c_hi = _fitted_face_coefficients(a, d_lo, d_hi, 0.1)
    # sign-stable weights hold for any coefficients
    assert (c_lo >= 0.0).all()
    assert (c_hi <= 0.0).all()
    # diffusion-resolved faces reduce to the centered flux
    tiny = np.full(4, 1e-7)
    d = np.array([0.5, 0.8, 1.1, 0.3])
    c_lo, c_hi = _fitted_face_coefficients(tiny, d, d, 0.1)
    assert np.allclose(c_lo, d / (2 * 0.1) + tiny / 2, rtol=1e-6)
    assert np.allclose(c_hi, -d / (2 * 0.1) + tiny / 2, rtol=1e-6)
    # degenerate faces upwind on the corrected drift
    a = np.array([2.0, -3.0])
    c_lo, c_hi = _fitted_face_coefficients(a, np.zeros(2), np.zeros(2), 0.1)
    assert np.allclose(c_lo, [2.0, 0.0])
    assert np.allclose(c_hi, [0.0, -3.0])


# -- propagation basics ------------------------------------------------------


def test_propagate_conserves_mass_and_is_deterministic():
    channels = channel_pair(np.pi / 4)
    solver = FokkerPlanckSolver(channels)
    q0 = solver.from_distribution(gaussian_blob())
    q1 = solver.propagate(q0, 0.3e-6, 4e-9)
    q2 = solver.propagate(q0, 0.3e-6, 4e-9)
    assert np.array_equal(q1, q2)
    assert abs(q1.sum() * solver.dr * solver.dphi - 1.0) < 1e-9
    out = propagate_pde(gaussian_blob(), channels, 0.2e-6, 4e-9)
    assert out.time == pytest.approx(0.2e-6)
    assert abs(out.probs.sum() - 1.0) < 1e-9


def test_courant_guard_rejects_coarse_steps():
    solver = FokkerPlanckSolver(channel_pair(np.pi / 2))
    assert solver.courant_limit() < DT
    q0 = solver.from_distribution(gaussian_blob())
    with pytest.raises(ValueError):
        solver.propagate(q0, 0.8e-6, DT)
    solver.propagate(q0, 0.08e-6, 4e-9)


def test_propagate_pde_rejects_three_dimensional_input():
    rng = np.random.default_rng(0)
    points = rng.normal(0.0, 0.05, (500, 3))
    dist = BlochDistribution.from_points(points, n_bins=21, ndim=3)
    with pytest.raises(ValueError):
        propagate_pde(dist, channel_pair(np.pi / 2), 0.1e-6, 4e-9)
    with pytest.raises(ValueError):
        propagate_pde(dist, channel_pair(0.0), 0.1e-6, 4e-9)


def test_isotropy_preserved_from_central_start():
    """A symmetric orthogonal pair keeps an origin start isotropic."""
    point = BlochDistribution.from_points(np.zeros((1, 3)), n_bins=101,
                                          ndim=2)
    out = propagate_pde(point, symmetric_pair(), 0.4e-6, 4e-9)
    cx, cy = np.meshgrid(*out.centers, indexing="ij")
    angles = np.arctan2(cy, cx)
    for k in (1, 2):
        moment = np.abs((out.probs * np.exp(1j * k * angles)).sum())
        assert moment < 1e-3


def test_polar_cartesian_roundtrip_is_faithful():
    blob = gaussian_blob(mu=(0.15, -0.2))
    solver = FokkerPlanckSolver(symmetric_pair())
    back = solver.to_distribution(solver.from_distribution(blob))
    assert total_variation(blob, back) < 0.05


# -- stationary state --------------------------------------------------------


def test_stationary_peak_radius_closed_form():
    assert stationary_peak_radius(1.0) == pytest.approx(1.0)
    for eta in (0.2, 0.45, 0.9):
        u = stationary_peak_radius(eta) ** 2
        assert 4 * u**2 - (4 - 1 / eta) * u - 1 == pytest.approx(0.0, abs=1e-12)
    for bad in (0.0, -0.5, 1.2):
        with pytest.raises(ValueError):
            stationary_peak_radius(bad)


def test_stationary_state_flux_free_and_peaked():
    solver = FokkerPlanckSolver(symmetric_pair())
    q = solver.stationary()
    assert q.min() >= -1e-6 * q.max()
    for op in (solver._flux_r_op, solver._flux_phi_op):
        scale = (np.abs(op) @ np.abs(q)).max()
        assert np.abs(op @ q).max() < 1e-6 * scale
    radial = q.reshape(solver.n_r, solver.n_phi).sum(axis=1) * solver.dphi
    peak = solver.r_centers[np.argmax(radial)]
    assert abs(peak - stationary_peak_radius(0.45)) <= solver.dr
    density = stationary_radial_density(solver.r_centers, 0.45)
    tv = 0.5 * np.abs(radial / radial.sum() - density / density.sum()).sum()
    assert tv < 5e-3


def test_stationary_rejects_degenerate_configurations():
    degenerate = [
        channel_pair(0.0),
        channel_pair(np.pi),
        channel_pair(np.pi / 2, 1.0, 1.0),
    ]
    for channels in degenerate:
        with pytest.raises(RuntimeError):
            FokkerPlanckSolver(channels).stationary()


def test_stationary_radial_density_domain():
    with pytest.raises(ValueError):
        stationary_radial_density(np.linspace(0, 1, 5), 1.0)
    grid = np.linspace(0.0, 1.0 - 1e-9, 2001)
    dens = stationary_radial_density(grid, 0.45)
    assert np.trapezoid(dens, grid) == pytest.approx(1.0, rel=1e-3)


def test_stationary_peak_matches_ensemble():
    res = simulate_ensemble(np.zeros(3), symmetric_pair(), 4.0e-6, DT,
                            n_traj=50_000, master_seed=21)
    radius = np.linalg.norm(res.finals, axis=1)
    hist, edges = np.histogram(radius, bins=50, range=(0.0, 1.0))
    mc_peak = 0.5 * (edges[np.argmax(hist)] + edges[np.argmax(hist) + 1])
    solver = FokkerPlanckSolver(symmetric_pair())
    q = solver.stationary()
    radial = q.reshape(solver.n_r, solver.n_phi).sum(axis=1)
    pde_peak = solver.r_centers[np.argmax(radial)]
    assert abs(mc_peak - pde_peak) <= 0.02 + solver.dr


# -- collinear (single-axis) configurations ----------------------------------


def test_pure_dephasing_contracts_transverse_component_exactly():
    blob = gaussian_blob(mu=(0.15, -0.2))
    channels = (MeasChannel(delta=0.0, gamma=GAMMA, eta=0.0,
                            dephasing_only=True),)
    t_final = 0.8e-6
    out = propagate_pde(blob, channels, t_final, 4e-9)
    x0, y0 = in_plane_moments(blob)
    x1, y1 = in_plane_moments(out)
    assert x1 == pytest.approx(x0, abs=1e-9)
    assert y1 == pytest.approx(y0 * np.exp(-GAMMA * t_final), rel=1e-2)


def test_collinear_measurement_is_a_martingale_with_contracting_transverse():
    blob = gaussian_blob(mu=(0.15, -0.2))
    channels = channel_pair(0.0)
    t_final = 1.6e-6
    out = propagate_pde(blob, channels, t_final, 4e-9)
    x0, y0 = in_plane_moments(blob)
    x1, y1 = in_plane_moments(out)
    assert abs(x1 - x0) < 5e-3
    # |<y>| <= exp(-lambda t) <|u|> with u = y / sqrt(1 - x^2) invariant
    lam = sum(ch.gamma * (1.0 - ch.eta) for ch in channels)
    cx, cy = np.meshgrid(*blob.centers, indexing="ij")
    u0 = np.abs(cy) / np.sqrt(np.maximum(1.0 - cx**2, 1e-12))
    bound = np.exp(-lam * t_final) * (blob.probs * u0).sum()
    assert abs(y1) <= bound + 5e-3
    assert abs(y1) < abs(y0)


# -- Monte-Carlo cross-validation --------------------------------------------


def test_mc_pde_cross_validation():
    """Total-variation agreement between ensembles and the PDE.

    Three channel geometries (common axis, 45 degrees, orthogonal) from a
    smooth in-plane blob, compared on the standard Cartesian grid at three
    matched times spanning the collapse transient.
    """
    times = [0.4e-6, 0.96e-6, 1.6e-6]
    blob = gaussian_blob()
    for separation in (0.0, np.pi / 4, np.pi / 2):
        channels = channel_pair(separation)
        mc = propagate_mc(blob, channels, times, 1_000_000, 42, dt=DT)
        for t_final, reference in zip(times, mc):
            solved = propagate_pde(blob, channels, t_final, 2e-9,
                                   n_r=256, n_phi=320)
            assert total_variation(reference, solved) < 0.05
