"""Fokker-Planck propagation of in-plane Bloch distributions.

For two equatorial measurement axes a state with ``z = 0`` stays in the
plane, so the conditioned-state distribution obeys a two-dimensional
Fokker-Planck equation on the unit disk.  Writing the in-plane state in
polar coordinates ``(r, phi)`` and the axis angles ``delta_i``, the Ito
expansion of the diffusion-limit trajectory equation gives, with
``c_i = cos(phi - delta_i)`` and ``s_i = sin(phi - delta_i)``,

    drift      a_r   = sum_i gamma_i s_i^2 (eta_i / r - r)
               a_phi = sum_i gamma_i c_i s_i (2 eta_i (1 - r^2) / r^2 - 1)
    diffusion  D_rr     = sum_i 2 gamma_i eta_i c_i^2 (1 - r^2)^2
               D_phiphi = sum_i 2 gamma_i eta_i s_i^2 / r^2
               D_rphi   = -sum_i 2 gamma_i eta_i c_i s_i (1 - r^2) / r

where ``eta_i`` is taken as zero for dephasing-only channels.  The density
``q(r, phi)`` with respect to ``dr dphi`` evolves as
``dq/dt = -d_r J_r - d_phi J_phi`` with

    J_r   = a_r q   - (1/2) d_r (D_rr q)     - (1/2) d_phi (D_rphi q)
    J_phi = a_phi q - (1/2) d_phi (D_phiphi q) - (1/2) d_r (D_rphi q).

The solver discretizes these fluxes with finite volumes on a polar grid
(default 200 radial x 256 angular cells, periodic in angle, zero flux
through the origin and the unit circle, the origin ring acting as a
regularized origin cell) and steps in time with Crank-Nicolson using a
precomputed sparse LU factorization; the first two steps use backward
Euler to damp the stiff angular modes near the origin.

For a symmetric orthogonal pair (equal rates and efficiencies, axes 90
degrees apart) the generator is isotropic and the stationary radial
density has the closed form

    p(r) proportional to r (1 - r^2)^(-5/2) exp[-(1 - eta) / (2 eta (1 - r^2))]

whose mode solves ``4 u^2 - (4 - 1/eta) u - 1 = 0`` with ``u = r^2``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .distributions import BlochDistribution

__all__ = [
    "FokkerPlanckSolver",
    "propagate_pde",
    "stationary_radial_density",
    "stationary_peak_radius",
]

#: Advective Courant guard is evaluated outside this radius; the inner
#: disk is diffusion-dominated and handled by the implicit solver.
_COURANT_RADIUS = 0.5


def _drift_diffusion(channels, r, phi):
    """Polar drift and diffusion fields of the in-plane dynamics.

    ``r`` and ``phi`` broadcast; returns ``(a_r, a_phi, d_rr, d_pp, d_rp)``.
    """
    a_r = np.zeros(np.broadcast(r, phi).shape)
    a_p = np.zeros_like(a_r)
    d_rr = np.zeros_like(a_r)
    d_pp = np.zeros_like(a_r)
    d_rp = np.zeros_like(a_r)
    for ch in channels:
        if ch.gamma <= 0.0:
            continue
        eta = 0.0 if ch.dephasing_only else ch.eta
        c = np.cos(phi - ch.delta)
        s = np.sin(phi - ch.delta)
        ge = ch.gamma * eta
        a_r += ch.gamma * s**2 * (eta / r - r)
        a_p += ch.gamma * c * s * (2.0 * eta * (1.0 - r**2) / r**2 - 1.0)
        d_rr += 2.0 * ge * c**2 * (1.0 - r**2) ** 2
        d_pp += 2.0 * ge * s**2 / r**2
        d_rp += -2.0 * ge * c * s * (1.0 - r**2) / r
    return a_r, a_p, d_rr, d_pp, d_rp


def _bernoulli(x):
    """``x / (exp(x) - 1)``, stable for small and large arguments."""
    out = np.empty_like(x, dtype=float)
    small = np.abs(x) < 1e-8
    out[small] = 1.0 - 0.5 * x[small]
    big = x > 500.0
    out[big] = 0.0
    rest = ~(small | big)
    out[rest] = x[rest] / np.expm1(x[rest])
    return out


def _fitted_face_coefficients(a_face, d_lo, d_hi, h):
    """Exponential-fitted (Scharfetter-Gummel) face-flux weights.

    For the flux ``J = a q - (1/2) d(D q)`` between two cells a spacing
    ``h`` apart, returns ``(c_lo, c_hi)`` such that the face flux is
    ``c_lo q_lo + c_hi q_hi``.  The drift is corrected for the gradient
    of the diffusion coefficient (``a~ = a - D'/2``, ``D~ = D/2``);
    degenerate faces (``D~ = 0``) fall back to pure upwinding, so
    ``c_lo >= 0 >= c_hi`` always holds.
    """
    d_tilde = 0.25 * (d_lo + d_hi)
    a_tilde = a_face - (d_hi - d_lo) / (2.0 * h)
    ok = d_tilde > 0.0
    peclet = np.where(ok, a_tilde * h / np.where(ok, d_tilde, 1.0), 0.0)
    base = d_tilde / h
    c_lo = np.where(ok, base * _bernoulli(-peclet), np.maximum(a_tilde, 0.0))
    c_hi = np.where(ok, -base * _bernoulli(peclet), np.minimum(a_tilde, 0.0))
    return c_lo, c_hi


def stationary_peak_radius(eta: float) -> float:
    """Mode of the stationary radial density of a symmetric orthogonal pair."""
    if not 0.0 < eta <= 1.0:
        raise ValueError("eta must be in (0, 1]")
    b = 4.0 - 1.0 / eta
    u = (b + math.sqrt(b * b + 16.0)) / 8.0
    return math.sqrt(u)


def stationary_radial_density(r, eta: float) -> np.ndarray:
    """Stationary radial density (normalized on [0, 1)) at efficiency eta.

    Probability per unit radius of the zero-flux solution for a symmetric
    orthogonal measurement pair.  Requires ``eta < 1``: at unit efficiency
    the stationary distribution is a point mass on the unit circle.
    """
    if not 0.0 < eta < 1.0:
        raise ValueError("eta must be in (0, 1) for a normalizable density")
    r = np.asarray(r, dtype=float)
    u = np.clip(r, 0.0, 1.0 - 1e-12) ** 2
    log_p = (np.log(np.maximum(r, 1e-300)) - 2.5 * np.log1p(-u)
             - (1.0 - eta) / (2.0 * eta * (1.0 - u)))
    p = np.exp(log_p - log_p.max())
    grid = np.linspace(0.0, 1.0 - 1e-9, 4001)
    log_ref = (np.log(np.maximum(grid, 1e-300)) - 2.5 * np.log1p(-grid**2)
               - (1.0 - eta) / (2.0 * eta * (1.0 - grid**2)))
    norm = np.trapezoid(np.exp(log_ref - log_p.max()), grid)
    return p / norm


class FokkerPlanckSolver:
    """Finite-volume Crank-Nicolson solver on the unit disk.

    The state vector ``q`` holds the density with respect to ``dr dphi``
    on cell centers, flattened with the radial index slowest.
    """

    def __init__(self, channels, *, n_r: int = 200, n_phi: int = 256):
        self.channels = tuple(channels)
        self.n_r = int(n_r)
        self.n_phi = int(n_phi)
        if self.n_r < 8 or self.n_phi < 8:
            raise ValueError("grid too coarse")
        self.dr = 1.0 / self.n_r
        self.dphi = 2.0 * np.pi / self.n_phi
        self.r_faces = np.linspace(0.0, 1.0, self.n_r + 1)
        self.r_centers = self.r_faces[:-1] + 0.5 * self.dr
        # cell centers sit at -pi + k dphi so that the angles 0 and pi --
        # where measurement axes usually point -- are center, not face,
        # angles; face k lies between cells k-1 and k
        self.phi_centers = -np.pi + self.dphi * np.arange(self.n_phi)
        self.phi_faces = self.phi_centers - 0.5 * self.dphi
        self._generator = self._build_generator()
        self._factor_cache: dict[float, tuple] = {}

    # -- operator assembly ---------------------------------------------------

    def _build_generator(self) -> sparse.csr_matrix:
        n_r, n_phi = self.n_r, self.n_phi
        dr, dphi = self.dr, self.dphi
        eye_phi = sparse.identity(n_phi, format="csr")
        eye_r = sparse.identity(n_r, format="csr")
        # periodic shift: row k picks column k-1
        roll = sparse.csr_matrix(
            (np.ones(n_phi), (np.arange(n_phi), (np.arange(n_phi) - 1) % n_phi)),
            shape=(n_phi, n_phi),
        )

        # radial face averaging, zero rows at r=0 and r=1 (no through-flux)
        rows = np.repeat(np.arange(1, n_r), 2)
        cols = np.ravel(np.column_stack([np.arange(1, n_r) - 1, np.arange(1, n_r)]))
        avg_r = sparse.csr_matrix(
            (np.full(rows.size, 0.5), (rows, cols)), shape=(n_r + 1, n_r))

        # angular face averaging (face k sits between cells k-1 and k)
        avg_phi = 0.5 * (eye_phi + roll)
        # centered angular derivative at the angular center of a radial face
        cent_phi = 0.5 * (roll.T - roll)

        # one-sided-at-edges radial derivative at cell centers
        main = np.zeros(n_r)
        lower = np.full(n_r - 1, -0.5)
        upper = np.full(n_r - 1, 0.5)
        cd_r = sparse.diags([lower, main, upper], [-1, 0, 1], format="lil")
        cd_r[0, 0], cd_r[0, 1] = -1.0, 1.0
        cd_r[-1, -2], cd_r[-1, -1] = -1.0, 1.0
        cd_r = sparse.csr_matrix(cd_r)

        # cell-centered coefficient fields
        rc = self.r_centers[:, None]
        pc = self.phi_centers[None, :]
        _, _, d_rr, d_pp, d_rp = _drift_diffusion(self.channels, rc, pc)
        d_rp = sparse.diags(d_rp.ravel())

        # face-centered advection coefficients
        rf = self.r_faces[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            ar_f, _, _, _, _ = _drift_diffusion(
                self.channels, np.where(rf == 0.0, np.nan, rf), pc)
            _, ap_f, _, _, _ = _drift_diffusion(
                self.channels, self.r_centers[:, None], self.phi_faces[None, :])

        # The advection + like-component diffusion part of each face flux,
        # -- J = a~ q - D~ dq with a~ = a - d(D)/2 and D~ = D/2 -- uses
        # exponential fitting (Scharfetter-Gummel): central differencing
        # where diffusion resolves the mesh, upwinding where it degenerates
        # (e.g. D_rr vanishes on the line perpendicular to a common axis),
        # so the generator keeps sign-stable off-diagonals throughout.
        kk = np.arange(n_phi)

        jj = np.arange(1, n_r)  # interior radial faces
        sg_lo, sg_hi = _fitted_face_coefficients(
            ar_f[jj, :], d_rr[jj - 1, :], d_rr[jj, :], dr)
        rows = np.repeat(jj * n_phi, n_phi) + np.tile(kk, n_r - 1)
        sg_r = sparse.csr_matrix(
            (np.concatenate([sg_lo.ravel(), sg_hi.ravel()]),
             (np.concatenate([rows, rows]),
              np.concatenate([rows - n_phi, rows]))),
            shape=((n_r + 1) * n_phi, n_r * n_phi))

        sg_lo, sg_hi = _fitted_face_coefficients(
            ap_f, d_pp[:, (kk - 1) % n_phi], d_pp, dphi)
        rows = np.repeat(np.arange(n_r) * n_phi, n_phi) + np.tile(kk, n_r)
        cols_lo = (np.repeat(np.arange(n_r) * n_phi, n_phi)
                   + np.tile((kk - 1) % n_phi, n_r))
        sg_phi = sparse.csr_matrix(
            (np.concatenate([sg_lo.ravel(), sg_hi.ravel()]),
             (np.concatenate([rows, rows]),
              np.concatenate([cols_lo, rows]))),
            shape=(n_r * n_phi, n_r * n_phi))

        # cross-diffusion terms stay centered; they vanish on every axis
        # of symmetry, where the fitted part is doing the stabilising
        flux_r = sg_r - (0.5 / dphi) * sparse.kron(avg_r, cent_phi) @ d_rp
        flux_phi = sg_phi - (0.5 / dr) * sparse.kron(cd_r, avg_phi) @ d_rp
        self._flux_r_op = flux_r.tocsr()
        self._flux_phi_op = flux_phi.tocsr()

        div_r = sparse.csr_matrix(
            (np.tile([-1.0, 1.0], n_r) / dr,
             (np.repeat(np.arange(n_r), 2),
              np.ravel(np.column_stack([np.arange(n_r), np.arange(n_r) + 1])))),
            shape=(n_r, n_r + 1),
        )
        div_phi = (roll.T - eye_phi) / dphi
        gen = -(sparse.kron(div_r, eye_phi) @ flux_r
                + sparse.kron(eye_r, div_phi) @ flux_phi)
        return gen.tocsr()

    # -- conversions -----------------------------------------------------------

    def _origin_angle_weights(self) -> np.ndarray:
        """Angular profile with which mass leaves the exact origin.

        The first backaction kick from the origin is a centered Gaussian
        with covariance proportional to ``sum_i 2 gamma_i eta_i n_i n_i^T``,
        so the exit-direction density is ``1 / (u^T C^{-1} u)``: uniform
        for a symmetric orthogonal pair, a pair of spikes along the common
        axis when the channels commute.
        """
        cov = np.zeros((2, 2))
        for ch in self.channels:
            eta = 0.0 if ch.dephasing_only else ch.eta
            if ch.gamma * eta <= 0.0:
                continue
            u = np.array([math.cos(ch.delta), math.sin(ch.delta)])
            cov += 2.0 * ch.gamma * eta * np.outer(u, u)
        weights = np.full(self.n_phi, 1.0 / self.n_phi)
        if cov.trace() <= 0.0:
            return weights
        vals, vecs = np.linalg.eigh(cov)
        if vals[0] < 1e-12 * vals[1]:
            # rank-one kick: all mass exits along the common axis
            major = math.atan2(vecs[1, 1], vecs[0, 1])
            weights = np.zeros(self.n_phi)
            for angle in (major, major + np.pi):
                k = int(np.round((angle + np.pi) / self.dphi)) % self.n_phi
                weights[k] += 0.5
            return weights
        inv = np.linalg.inv(cov)
        u = np.stack([np.cos(self.phi_centers), np.sin(self.phi_centers)])
        weights = 1.0 / np.einsum("ik,ij,jk->k", u, inv, u)
        return weights / weights.sum()

    def from_distribution(self, dist: BlochDistribution) -> np.ndarray:
        """Deposit a 2D Cartesian distribution onto the polar grid.

        Mass with bin-center radius below one radial cell enters the
        innermost ring with the origin exit profile of
        :meth:`_origin_angle_weights` (a point at the origin has no angle
        of its own).
        """
        if dist.ndim != 2:
            raise ValueError("the PDE runs on in-plane (2D) distributions")
        cx, cy = np.meshgrid(*dist.centers, indexing="ij")
        width = max(e[1] - e[0] for e in dist.edges)
        if (dist.probs.ravel()[np.hypot(cx, cy).ravel() > 1.0 + width] > 0.0).any():
            raise ValueError("initial mass off the unit disk")
        # spread each Cartesian bin over 3x3 subpoints, mirroring the
        # subcell deposit used in the reverse direction
        sub = np.array([-1.0, 0.0, 1.0]) / 3.0
        ox, oy = np.meshgrid(width * sub, width * sub, indexing="ij")
        x = (cx.ravel()[:, None] + ox.ravel()[None, :]).ravel()
        y = (cy.ravel()[:, None] + oy.ravel()[None, :]).ravel()
        mass = np.repeat(dist.probs.ravel(), 9) / 9.0
        radius = np.hypot(x, y)
        q = np.zeros((self.n_r, self.n_phi))
        origin = radius < self.dr
        keep = (~origin) & (mass > 0.0)
        j = np.minimum((np.minimum(radius[keep], 1.0 - 1e-12) / self.dr).astype(int),
                       self.n_r - 1)
        k = np.round((np.arctan2(y[keep], x[keep]) + np.pi)
                     / self.dphi).astype(int) % self.n_phi
        np.add.at(q, (j, k), mass[keep])
        q[0, :] += mass[origin].sum() * self._origin_angle_weights()
        return q.ravel() / (self.dr * self.dphi)

    def to_distribution(self, q: np.ndarray, *, time: float = 0.0,
                        n_bins: int = 101) -> BlochDistribution:
        """Deposit the polar solution onto a Cartesian grid (3x3 subcells)."""
        sub = np.array([-1.0, 0.0, 1.0]) / 3.0
        r_sub = (self.r_centers[:, None] + self.dr * sub).ravel()
        p_sub = (self.phi_centers[:, None] + self.dphi * sub).ravel()
        mass = np.repeat(
            np.repeat(q.reshape(self.n_r, self.n_phi) / 9.0, 3, axis=0),
            3, axis=1) * (self.dr * self.dphi)
        x = r_sub[:, None] * np.cos(p_sub)[None, :]
        y = r_sub[:, None] * np.sin(p_sub)[None, :]
        edges = np.linspace(-1.0, 1.0, n_bins + 1)
        ix = np.clip(np.digitize(x.ravel(), edges) - 1, 0, n_bins - 1)
        iy = np.clip(np.digitize(y.ravel(), edges) - 1, 0, n_bins - 1)
        probs = np.zeros((n_bins, n_bins))
        np.add.at(probs, (ix, iy), mass.ravel())
        probs = np.maximum(probs, 0.0)
        probs /= probs.sum()
        return BlochDistribution(edges=(edges, edges), probs=probs, time=time)

    # -- diagnostics -----------------------------------------------------------

    def face_fluxes(self, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Discrete fluxes (radial faces, angular faces) of a state."""
        j_r = (self._flux_r_op @ q).reshape(self.n_r + 1, self.n_phi)
        j_p = (self._flux_phi_op @ q).reshape(self.n_r, self.n_phi)
        return j_r, j_p

    def courant_limit(self) -> float:
        """Largest time step satisfying the advective Courant estimate.

        Evaluated for ``r > 0.5`` where distributions concentrate; the
        stiff inner-disk terms are stabilized by the implicit scheme.
        """
        rc = self.r_centers[:, None]
        pc = self.phi_centers[None, :]
        a_r, a_p, _, _, _ = _drift_diffusion(self.channels, rc, pc)
        outer = (self.r_centers > _COURANT_RADIUS)[:, None]
        speed = (np.abs(a_r[outer.ravel(), :]) / self.dr
                 + np.abs(a_p[outer.ravel(), :]) / self.dphi)
        return 1.0 / speed.max()

    # -- time stepping -----------------------------------------------------------

    def _factors(self, dt: float):
        key = round(dt, 18)
        if key not in self._factor_cache:
            n = self._generator.shape[0]
            eye = sparse.identity(n, format="csc")
            half = 0.5 * dt * self._generator
            self._factor_cache[key] = (
                splu((eye - half).tocsc()),
                (eye + half).tocsr(),
                splu((eye - dt * self._generator).tocsc()),
            )
        return self._factor_cache[key]

    def propagate(self, q: np.ndarray, t_final: float, dt_pde: float,
                  *, damp_start: bool = True) -> np.ndarray:
        """Advance a polar state by ``t_final``.

        The step count is ``round(t_final / dt_pde)`` with the step size
        adjusted to land exactly on ``t_final``.  Raises ``ValueError``
        when the requested step violates the advective Courant estimate.
        """
        if t_final < 0.0 or dt_pde <= 0.0:
            raise ValueError("t_final must be >= 0 and dt_pde > 0")
        if t_final == 0.0:
            return q.copy()
        n_steps = max(1, int(round(t_final / dt_pde)))
        dt = t_final / n_steps
        if dt > self.courant_limit():
            raise ValueError(
                f"dt_pde={dt:.3g} s violates the advective Courant estimate "
                f"(limit {self.courant_limit():.3g} s for this grid)")
        cn_solve, cn_rhs, be_solve = self._factors(dt)
        out = q.astype(float).copy()
        for step in range(n_steps):
            if damp_start and step < 2:
                out = be_solve.solve(out)
            else:
                out = cn_solve.solve(cn_rhs @ out)
        return out

    def stationary(self) -> np.ndarray:
        """Stationary state of the discrete generator.

        Solves the generator's null vector with the total mass pinned to
        one.  Meaningful when the dynamics are ergodic on the disk: the
        axes must be neither identical nor opposite, and efficiencies must
        be below one (at unit efficiency the stationary distribution
        concentrates on the unit circle and has no density).  The returned
        state is not clipped, so discrete fluxes evaluated on it vanish to
        solver precision.
        """
        if _collinear_axis(self.channels) is not None:
            raise RuntimeError(
                "no stationary density: the measurement axes coincide, so "
                "the long-time distribution is singular on the common axis")
        if all(ch.gamma <= 0.0
               or (not ch.dephasing_only and ch.eta >= 1.0 - 1e-12)
               for ch in self.channels):
            raise RuntimeError(
                "no stationary density: without any inefficiency the "
                "long-time distribution concentrates on the unit circle")
        n = self._generator.shape[0]
        mat = self._generator.tolil(copy=True)
        mat[0, :] = self.dr * self.dphi
        rhs = np.zeros(n)
        rhs[0] = 1.0
        q = splu(mat.tocsc()).solve(rhs)
        # backward-error check: |L q| small relative to the row-wise scale
        denom = np.abs(self._generator) @ np.abs(q)
        residual = np.max(np.abs(self._generator @ q) / (denom + denom.max() * 1e-30))
        if residual > 1e-8 or q.min() < -1e-6 * q.max():
            raise RuntimeError("stationary solve failed to produce a "
                               "non-negative density")
        return q / (q.sum() * self.dr * self.dphi)


def _collinear_axis(channels):
    """Common measurement axis of the channels, or None when they span two.

    Channels with zero rate are ignored; with no active channel at all the
    dynamics are trivial and any axis (zero) serves.
    """
    axis = None
    for ch in channels:
        if ch.gamma <= 0.0:
            continue
        if axis is None:
            axis = ch.delta
        elif abs(math.sin(ch.delta - axis)) > 1e-12:
            return None
    return 0.0 if axis is None else axis


class _CollinearSolver:
    """Exact-factorization solver for channels sharing one axis.

    When every active channel measures (or dephases) along the same axis,
    the diffusion tensor is rank one and the dynamics factorize exactly in
    the coordinates ``(x, u)`` with ``x`` the component along the axis and
    ``u = y / sqrt(1 - x^2)`` the scaled transverse component: each
    measurement update is a hyperbolic rotation that leaves ``u``
    invariant, so ``x`` performs a one-dimensional zero-drift diffusion
    with ``D = sum_i 2 gamma_i eta_i (1 - x^2)^2`` while ``u`` contracts
    deterministically at the total dephasing rate
    ``lambda = sum_i gamma_i (1 - eta_i)``.  A grid-split polar scheme
    cannot keep that structure (the degenerate angular diffusion traps
    mass on the axis cells), so collinear configurations take this path.
    """

    def __init__(self, channels, axis: float, *, n_x: int = 400,
                 n_u: int = 256):
        self.axis = float(axis)
        self.n_x = int(n_x)
        self.n_u = int(n_u)
        self.hx = 2.0 / self.n_x
        self.hu = 2.0 / self.n_u
        self.x_centers = -1.0 + self.hx * (np.arange(self.n_x) + 0.5)
        self.u_centers = -1.0 + self.hu * (np.arange(self.n_u) + 0.5)
        self.d_sum = sum(2.0 * ch.gamma * ch.eta for ch in channels
                         if ch.gamma > 0.0 and not ch.dephasing_only)
        self.lam = sum(ch.gamma * (1.0 - (0.0 if ch.dephasing_only else ch.eta))
                       for ch in channels if ch.gamma > 0.0)
        d_cell = self.d_sum * (1.0 - self.x_centers**2) ** 2
        c_lo, c_hi = _fitted_face_coefficients(
            np.zeros(self.n_x - 1), d_cell[:-1], d_cell[1:], self.hx)
        a_tilde = -(d_cell[1:] - d_cell[:-1]) / (2.0 * self.hx)
        self._dt_max = math.inf if not a_tilde.any() else (
            self.hx / np.abs(a_tilde).max())
        # d/dt q_i = -(J_{i+1} - J_i)/hx with zero flux through x = +-1
        idx = np.arange(self.n_x - 1)
        gen = sparse.coo_matrix(
            (np.concatenate([-c_lo, -c_hi, c_lo, c_hi]) / self.hx,
             (np.concatenate([idx, idx, idx + 1, idx + 1]),
              np.concatenate([idx, idx + 1, idx, idx + 1]))),
            shape=(self.n_x, self.n_x))
        self._generator = gen.tocsc()
        self._factor_cache: dict[float, tuple] = {}

    def _factors(self, dt: float):
        key = round(dt, 18)
        if key not in self._factor_cache:
            eye = sparse.identity(self.n_x, format="csc")
            half = 0.5 * dt * self._generator
            self._factor_cache[key] = (
                splu((eye - half).tocsc()),
                (eye + half).tocsr(),
                splu((eye - dt * self._generator).tocsc()),
            )
        return self._factor_cache[key]

    def propagate_distribution(self, dist: BlochDistribution, t_final: float,
                               dt_pde: float, *,
                               n_bins: int = 101) -> BlochDistribution:
        if dist.ndim != 2:
            raise ValueError("the PDE runs on in-plane (2D) distributions")
        if t_final < 0.0 or dt_pde <= 0.0:
            raise ValueError("t_final must be >= 0 and dt_pde > 0")
        cx, cy = np.meshgrid(*dist.centers, indexing="ij")
        width = max(e[1] - e[0] for e in dist.edges)
        if (dist.probs.ravel()[np.hypot(cx, cy).ravel() > 1.0 + width]
                > 0.0).any():
            raise ValueError("initial mass off the unit disk")
        sub = np.array([-1.0, 0.0, 1.0]) / 3.0
        ox, oy = np.meshgrid(width * sub, width * sub, indexing="ij")
        x = (cx.ravel()[:, None] + ox.ravel()[None, :]).ravel()
        y = (cy.ravel()[:, None] + oy.ravel()[None, :]).ravel()
        mass = np.repeat(dist.probs.ravel(), 9) / 9.0
        cos_a, sin_a = math.cos(self.axis), math.sin(self.axis)
        xr = cos_a * x + sin_a * y
        yr = -sin_a * x + cos_a * y
        w2 = np.maximum(1.0 - xr**2, 0.0)
        u = np.where(w2 > 1e-24, yr / np.sqrt(np.maximum(w2, 1e-24)), 0.0)
        ix = np.clip(((xr + 1.0) / self.hx).astype(int), 0, self.n_x - 1)
        iu = np.clip(((np.clip(u, -1.0, 1.0) + 1.0) / self.hu).astype(int),
                     0, self.n_u - 1)
        state = np.zeros((self.n_x, self.n_u))
        np.add.at(state, (ix, iu), mass)

        if t_final > 0.0:
            n_steps = max(1, int(round(t_final / dt_pde)))
            dt = t_final / n_steps
            if dt > self._dt_max:
                raise ValueError(
                    f"dt_pde={dt:.3g} s violates the advective Courant "
                    f"estimate (limit {self._dt_max:.3g} s for this grid)")
            cn_solve, cn_rhs, be_solve = self._factors(dt)
            for step in range(n_steps):
                if step < 2:
                    state = be_solve.solve(state)
                else:
                    state = cn_solve.solve(cn_rhs @ state)

        shrink = math.exp(-self.lam * t_final)
        x_s = (self.x_centers[:, None, None, None]
               + (self.hx / 3.0) * sub[None, :, None, None])
        u_s = ((self.u_centers[None, None, :, None]
                + (self.hu / 3.0) * sub[None, None, None, :]) * shrink)
        y_s = u_s * np.sqrt(np.maximum(1.0 - x_s**2, 0.0))
        xc = cos_a * x_s - sin_a * y_s
        yc = sin_a * x_s + cos_a * y_s
        w = np.broadcast_to(state[:, None, :, None] / 9.0, xc.shape)
        edges = np.linspace(-1.0, 1.0, n_bins + 1)
        probs, _, _ = np.histogram2d(
            np.clip(xc, -1.0, 1.0 - 1e-12).ravel(),
            np.clip(yc, -1.0, 1.0 - 1e-12).ravel(),
            bins=(edges, edges), weights=w.ravel())
        probs = np.maximum(probs, 0.0)
        probs /= probs.sum()
        return BlochDistribution(edges=(edges, edges), probs=probs,
                                 time=dist.time + t_final)


def propagate_pde(initial: BlochDistribution, channels, t_final: float,
                  dt_pde: float, *, n_r: int = 200, n_phi: int = 256,
                  n_bins: int = 101) -> BlochDistribution:
    """Propagate an in-plane distribution with the Fokker-Planck solver.

    ``initial`` must be a 2D distribution supported on the unit disk.  The
    result is histogrammed back onto an ``n_bins`` square Cartesian grid
    and carries timestamp ``initial.time + t_final``; total mass is
    conserved to machine precision.

    Channels sharing a single measurement axis are integrated in the
    exactly factorizing coordinates of :class:`_CollinearSolver`; all
    other configurations run on the polar grid.
    """
    axis = _collinear_axis(channels)
    if axis is not None:
        solver = _CollinearSolver(channels, axis, n_x=2 * n_r, n_u=n_phi)
        return solver.propagate_distribution(initial, t_final, dt_pde,
                                             n_bins=n_bins)
    solver = FokkerPlanckSolver(channels, n_r=n_r, n_phi=n_phi)
    q = solver.from_distribution(initial)
    q = solver.propagate(q, t_final, dt_pde)
    return solver.to_distribution(q, time=initial.time + t_final,
                                  n_bins=n_bins)
