"""Reference implementations used to cross-check the package.

Everything here favors directness over speed: density matrices, scipy matrix
exponentials, Euler-Maruyama steps.  The tests treat these as independent
oracles for the optimized Bloch-space code in the package itself.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import expm

ID2 = np.eye(2, dtype=complex)
SX = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SY = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SZ = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)


def sig(delta: float) -> np.ndarray:
    return np.cos(delta) * SX + np.sin(delta) * SY


def rho_of(r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    return 0.5 * (ID2 + r[0] * SX + r[1] * SY + r[2] * SZ)


def bloch_of(rho) -> np.ndarray:
    return np.array(
        [np.trace(rho @ SX).real, np.trace(rho @ SY).real, np.trace(rho @ SZ).real]
    )


def matrix_kraus_step(rho, signals, deltas, gammas, etas, dt):
    """Measurement-operator update via scipy expm, then inefficiency dephasing
    applied as the mixed-unitary channel p rho + (1-p) s rho s per axis."""
    a = np.zeros((2, 2), dtype=complex)
    for v, d, g, e in zip(signals, deltas, gammas, etas):
        s = sig(d)
        m = v * ID2 - s
        a += -(0.5 * g * e * dt) * (m @ m)
    omega = expm(a)
    out = omega @ rho @ omega.conj().T
    out = out / np.trace(out).real
    for d, g, e in zip(deltas, gammas, etas):
        s = sig(d)
        k = np.exp(-(1.0 - e) * g * dt)
        out = 0.5 * (1.0 + k) * out + 0.5 * (1.0 - k) * (s @ out @ s)
    return out


def sme_euler_step(rho, dws, deltas, gammas, etas, dt):
    """One Euler-Maruyama step of the diffusive conditioned master equation."""
    drho = np.zeros((2, 2), dtype=complex)
    for dw, d, g, e in zip(dws, deltas, gammas, etas):
        s = sig(d)
        drho += 0.5 * g * dt * (s @ rho @ s - rho)
        innov = s @ rho + rho @ s - 2.0 * np.trace(s @ rho).real * rho
        drho += np.sqrt(0.5 * g * e) * dw * innov
    return rho + drho


def lindblad_map_bloch(r0, deltas, gammas, t):
    """Unconditional (ensemble-average) evolution of a Bloch vector."""
    r = np.asarray(r0, dtype=float).copy()
    for d, g in zip(deltas, gammas):
        n = np.array([np.cos(d), np.sin(d), 0.0])
        k = np.exp(-g * t)
        proj = n * (n @ r)
        r = proj + k * (r - proj)
    return r


def gauss_hermite_step_moments(step_fn, n_channels, order=21):
    """Mean and covariance of a step's Bloch output over the noise measure.

    step_fn maps a vector z of standard normals (one per channel) to the
    post-step Bloch vector; the z-integral uses a tensor Gauss-Hermite grid.
    """
    nodes, weights = np.polynomial.hermite_e.hermegauss(order)
    weights = weights / np.sqrt(2.0 * np.pi)
    grids = np.meshgrid(*([nodes] * n_channels), indexing="ij")
    zs = np.stack([g.ravel() for g in grids], axis=1)
    ws = np.prod(
        np.stack([g.ravel() for g in np.meshgrid(*([weights] * n_channels), indexing="ij")]),
        axis=0,
    )
    outs = np.stack([step_fn(z) for z in zs])
    mean = ws @ outs
    centered = outs - mean
    cov = (centered * ws[:, None]).T @ centered
    return mean, cov


def euler_maruyama_bloch_paths(r0, deltas, gammas, etas, dt, n_steps, rng, n_traj):
    """Brute-force conditioned Bloch paths from the Ito equation itself.

    Returns an array (n_steps + 1, n_traj, 3).  Euler steps can leave the
    unit ball at finite dt; excursions are clipped back to the sphere, which
    is the standard projection fix and affects nothing at the dt used here.
    """
    r = np.tile(np.asarray(r0, dtype=float), (n_traj, 1))
    out = np.empty((n_steps + 1, n_traj, 3))
    out[0] = r
    axes = [np.array([np.cos(d), np.sin(d), 0.0]) for d in deltas]
    for k in range(n_steps):
        dr = np.zeros_like(r)
        for n, g, e in zip(axes, gammas, etas):
            proj = (r @ n)[:, None] * n
            dr += -g * dt * (r - proj)
            dw = rng.standard_normal(r.shape[0])[:, None] * np.sqrt(dt)
            exp_n = (r @ n)[:, None]
            dr += np.sqrt(2.0 * g * e) * dw * (n[None, :] - exp_n * r)
        r = r + dr
        nrm = np.linalg.norm(r, axis=1)
        over = nrm > 1.0
        if np.any(over):
            r[over] /= nrm[over][:, None]
        out[k + 1] = r
    return out
