"""Record likelihoods and maximum-likelihood retrodiction of initial states.

The probability density of a full measurement record given an initial state
rho_0 is

    p(record | rho_0) = c * Tr[ E_n ( ... E_1(rho_0) ... ) ],

where E_k is the (unnormalized, completely positive) one-step map
rho -> D_k(Omega_k rho Omega_k^dagger) built from the step's record values,
and c collects the Gaussian measure prefactors prod_i sqrt(Gamma_i eta_i dt / pi).
Because every E_k is linear, the whole functional is *affine* in the Bloch
vector of rho_0:

    p(record | r) = exp(log_offset) * (m_0 + m . r),

with a single row vector (m_0, m) obtained by composing 4x4 transfer matrices
acting on the extended coordinates (1, x, y, z).  Two consequences used here:

* log p is concave on the Bloch ball, so likelihood regions are convex;
* the constrained maximizer is analytic: the pure state r = m / |m|
  (any state when m = 0, and the likelihood is then flat / degenerate).

For channels measuring equatorial axes (and no tilted imperfection
rotations), the z component of m vanishes identically -- records carry no
information about the initial z component -- so retrodicted states lie in
the equatorial plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .engine import ImperfectionParams, MeasurementRecord, _effective_rates, _is_active
from .states import QubitState, from_bloch

__all__ = [
    "TransferMap",
    "step_map",
    "composite_map",
    "composite_maps_batch",
    "log_likelihood",
    "choi_matrix",
    "LikelihoodResult",
    "mle_initial_state",
    "CONFIDENCE_DELTA_95",
]



@dataclass(frozen=True)
class TransferMap:
    """Affine record-likelihood functional on extended Bloch coordinates.

    ``matrix`` acts on u = (1, x, y, z); the physical weight carries an
    overall factor exp(log_offset) kept separately so long records never
    underflow.  For a density matrix with Bloch vector r,

        Tr[E(rho)] * prefactors = exp(log_offset) * (matrix @ u)[0].
    """

    matrix: np.ndarray
    log_offset: float = 0.0

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (4, 4):
            raise ValueError("transfer matrix must be 4x4")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @staticmethod
    def identity() -> "TransferMap":
        return TransferMap(np.eye(4), 0.0)

    def then(self, later: "TransferMap") -> "TransferMap":
        """Composition: apply self first, then ``later``."""
        m = later.matrix @ self.matrix
        scale = np.abs(m).max()
        if scale == 0.0 or not np.isfinite(scale):
            raise FloatingPointError("transfer map degenerated")
        return TransferMap(m / scale, self.log_offset + later.log_offset + math.log(scale))

    def log_weight(self, bloch) -> float:
        """log of the unnormalized record density for initial Bloch vector r."""
        u = np.concatenate(([1.0], np.asarray(bloch, dtype=float)))
        val = float(self.matrix[0] @ u)
        if val <= 0.0:
            raise FloatingPointError("non-positive record weight")
        return self.log_offset + math.log(val)

    def apply(self, state: QubitState) -> tuple[QubitState, float]:
        """Propagate a state, returning (normalized state, log trace weight)."""
        u = np.concatenate(([1.0], state.bloch))
        out = self.matrix @ u
        if out[0] <= 0.0:
            raise FloatingPointError("non-positive trace under transfer map")
        return from_bloch(out[1:] / out[0]), self.log_offset + math.log(out[0])


def step_map(
    signals,
    channels,
    dt: float,
    *,
    imperfections: ImperfectionParams | None = None,
    t: float = 0.0,
) -> TransferMap:
    """Transfer map of one record step (measurement, dephasing, rotations)."""
    channels = tuple(channels)
    signals = np.atleast_1d(np.asarray(signals, dtype=float))
    active = [i for i, ch in enumerate(channels) if _is_active(ch)]
    if signals.shape != (len(active),):
        raise ValueError(f"expected {len(active)} signals, got {signals.shape}")
    gam, ge = _effective_rates(channels, t)
    axes = np.stack([ch.axis for ch in channels])

    v_full = np.zeros(len(channels))
    v_full[active] = signals
    b = (v_full * ge * dt) @ axes
    bnorm = float(np.linalg.norm(b))
    ch2 = math.cosh(2.0 * bnorm)
    sh2 = math.sinh(2.0 * bnorm)
    bhat = b / bnorm if bnorm > 1e-300 else np.zeros(3)
    meas = np.eye(4)
    meas[0, 0] = ch2
    meas[0, 1:] = sh2 * bhat
    meas[1:, 0] = sh2 * bhat
    meas[1:, 1:] = np.eye(3) + (ch2 - 1.0) * np.outer(bhat, bhat)
    # scalar weight: exp(2a) with a = -sum_i (G_i e_i / 2)(V_i^2 + 1) dt, and
    # the Gaussian measure prefactors sqrt(G_i e_i dt / pi) per active channel
    log_w = float(-(ge * dt) @ (v_full**2 + 1.0))
    for i in active:
        log_w += 0.5 * math.log(ge[i] * dt / math.pi)

    deph = np.eye(4)
    block = np.eye(3)
    for i in range(len(channels)):
        rd = (gam[i] - ge[i]) * dt
        if rd == 0.0:
            continue
        kappa = math.exp(-rd)
        n = axes[i]
        block = (kappa * np.eye(3) + (1.0 - kappa) * np.outer(n, n)) @ block
    deph[1:, 1:] = block

    total = deph @ meas
    if imperfections is not None:
        total = _rotation_matrix(channels, axes, imperfections, dt, t) @ total
    scale = np.abs(total).max()
    return TransferMap(total / scale, log_w + math.log(scale))


def _rotation_matrix(channels, axes, imp: ImperfectionParams, dt: float, t: float) -> np.ndarray:
    def rot(axis, angle):
        c, s = math.cos(angle), math.sin(angle)
        k = np.array(
            [[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]]
        )
        return np.eye(3) + s * k + (1 - c) * (k @ k)

    r3 = np.eye(3)
    if imp.rabi_detuning_rate != 0.0:
        r3 = rot([0.0, 0.0, 1.0], imp.rabi_detuning_rate * dt) @ r3
    for i, rate in enumerate(imp.lo_leak_rates):
        if rate != 0.0:
            r3 = rot(axes[i], rate * dt) @ r3
    if imp.coherent_b_rate != 0.0:
        kappa = channels[0].ringup_kappa
        env = math.exp(-0.5 * kappa * t) if kappa is not None else 1.0
        r3 = rot(axes[0], imp.coherent_b_rate * env * dt) @ r3
    if imp.t1 is not None:
        raise NotImplementedError(
            "retrodiction transfer maps do not support T1 damping (affine offset)"
        )
    out = np.eye(4)
    out[1:, 1:] = r3
    return out


def composite_map(
    record: MeasurementRecord,
    *,
    channels=None,
    imperfections: ImperfectionParams | None = None,
    t0: float = 0.0,
) -> TransferMap:
    """Compose the whole record into a single transfer map."""
    chs = tuple(channels) if channels is not None else record.channels
    total = TransferMap.identity()
    for k in range(record.n_steps):
        total = total.then(
            step_map(
                record.samples[k],
                chs,
                record.dt,
                imperfections=imperfections,
                t=t0 + k * record.dt,
            )
        )
    return total


def log_likelihood(tm: TransferMap, state) -> float:
    """log p(record | initial state); ``state`` is a QubitState or Bloch vector."""
    bloch = state.bloch if isinstance(state, QubitState) else np.asarray(state, float)
    return tm.log_weight(bloch)


def choi_matrix(tm: TransferMap) -> np.ndarray:
    """Choi matrix of the (unnormalized) linear map encoded by ``tm``.

    Complete positivity of the step maps shows up as a positive semidefinite
    Choi matrix; the exp(log_offset) scale is omitted.
    """
    paulis = [
        np.eye(2, dtype=complex),
        np.array([[0, 1], [1, 0]], dtype=complex),
        np.array([[0, -1j], [1j, 0]], dtype=complex),
        np.array([[1, 0], [0, -1]], dtype=complex),
    ]
    # map on rho = (u . pauli)/2 in coordinates u = (tr, x, y, z)
    choi = np.zeros((4, 4), dtype=complex)
    for i in range(2):
        for j in range(2):
            e = np.zeros((2, 2), dtype=complex)
            e[i, j] = 1.0
            u = np.array([np.trace(p.conj().T @ e) for p in paulis])
            out_u = tm.matrix @ u
            out = 0.5 * sum(c * p for c, p in zip(out_u, paulis))
            choi[2 * i : 2 * i + 2, 2 * j : 2 * j + 2] = out
    return choi




def composite_maps_batch(
    samples: np.ndarray,
    channels,
    dt: float,
    *,
    imperfections: ImperfectionParams | None = None,
    t0: float = 0.0,
) -> list[TransferMap]:
    """Compose transfer maps for many equal-length records at once.

    ``samples`` is (n_records, n_steps, n_active) as produced by
    :func:`sqmlab.simulate_ensemble` with ``keep_records=True``; all records
    share the channel set and step.  Equivalent to calling
    :func:`composite_map` per record, but vectorized across records.
    """
    channels = tuple(channels)
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 3:
        raise ValueError("samples must be (n_records, n_steps, n_active)")
    active = [i for i, ch in enumerate(channels) if _is_active(ch)]
    if samples.shape[2] != len(active):
        raise ValueError("channel set does not match record columns")
    n, n_steps, _ = samples.shape
    axes = np.stack([ch.axis for ch in channels])

    total = np.broadcast_to(np.eye(4), (n, 4, 4)).copy()
    offsets = np.zeros(n)
    time_dependent = any(ch.ringup_kappa is not None for ch in channels)
    rot = None
    if imperfections is not None and not time_dependent:
        rot = _rotation_matrix(channels, axes, imperfections, dt, t0)
    for k in range(n_steps):
        t = t0 + k * dt
        gam, ge = _effective_rates(channels, t)
        v_full = np.zeros((n, len(channels)))
        v_full[:, active] = samples[:, k, :]
        b = (v_full * (ge * dt)) @ axes                       # (n, 3)
        bnorm = np.linalg.norm(b, axis=1)
        ch2 = np.cosh(2.0 * bnorm)
        sh2 = np.sinh(2.0 * bnorm)
        safe = np.where(bnorm > 1e-300, bnorm, 1.0)
        bhat = b / safe[:, None]
        meas = np.zeros((n, 4, 4))
        meas[:, 0, 0] = ch2
        meas[:, 0, 1:] = sh2[:, None] * bhat
        meas[:, 1:, 0] = sh2[:, None] * bhat
        meas[:, 1:, 1:] = np.eye(3) + (ch2 - 1.0)[:, None, None] * np.einsum(
            "ni,nj->nij", bhat, bhat
        )
        step = np.eye(4)
        block = np.eye(3)
        for i in range(len(channels)):
            rd = (gam[i] - ge[i]) * dt
            if rd != 0.0:
                kap = math.exp(-rd)
                block = (kap * np.eye(3) + (1.0 - kap) * np.outer(axes[i], axes[i])) @ block
        step[1:, 1:] = block
        if imperfections is not None:
            if time_dependent:
                rot = _rotation_matrix(channels, axes, imperfections, dt, t)
            step = rot @ step
        total = np.einsum("ij,njk,nkl->nil", step, meas, total)
        log_w = -(ge * dt) @ (v_full**2 + 1.0).T
        for i in active:
            log_w = log_w + 0.5 * math.log(ge[i] * dt / math.pi)
        scale = np.abs(total).max(axis=(1, 2))
        if np.any(scale <= 0.0) or not np.all(np.isfinite(scale)):
            raise FloatingPointError("transfer map degenerated")
        total /= scale[:, None, None]
        offsets += log_w + np.log(scale)
    return [TransferMap(total[j], float(offsets[j])) for j in range(n)]


# ---------------------------------------------------------------------------
# Maximum-likelihood retrodiction over record ensembles
# ---------------------------------------------------------------------------

# half the 95% quantile of chi^2 with 3 degrees of freedom (7.815 / 2): the
# log-likelihood drop defining the retrodiction confidence region
CONFIDENCE_DELTA_95 = 3.9075


@dataclass(frozen=True)
class LikelihoodResult:
    """Maximum-likelihood retrodiction of a shared initial state.

    The objective sum_k log Tr[E_k(rho0)] is a sum of logs of affine
    functions of the initial Bloch vector, hence concave where defined; the
    maximizer over the closed Bloch ball is found by projected gradient
    ascent (analytically for a single record, whose maximizer is the pure
    state along the likelihood gradient).  ``rows`` holds the first row
    (m0, m) of every composed transfer map so the objective can be
    re-evaluated anywhere, e.g. for confidence regions.

    When every map carries (numerically) no Bloch dependence the likelihood
    is flat: ``degenerate`` is set, the center is returned, and the
    confidence region is the whole ball.
    """

    bloch: np.ndarray
    log_likelihood: float
    rows: np.ndarray
    log_offset_total: float
    gradient_norm: float
    degenerate: bool
    n_records: int
    iterations: int
    converged: bool

    @property
    def state(self) -> QubitState:
        return from_bloch(self.bloch)

    def objective(self, bloch) -> float:
        """Joint log-likelihood at an arbitrary initial Bloch vector."""
        bloch = np.asarray(bloch, dtype=float)
        args = self.rows[:, 0] + self.rows[:, 1:] @ bloch
        if np.any(args <= 0.0):
            return -math.inf
        # pairwise-tree summation (np.sum) keeps the reduction deterministic
        return float(np.sum(np.log(args))) + self.log_offset_total

    def contains(self, bloch, *, delta: float = CONFIDENCE_DELTA_95) -> bool:
        """Is ``bloch`` inside the likelihood-drop confidence region?"""
        if self.degenerate:
            return float(np.linalg.norm(np.asarray(bloch, float))) <= 1.0 + 1e-12
        return self.objective(bloch) >= self.log_likelihood - delta

    def _grid_mask(self, n_grid: int, delta: float):
        ax = np.linspace(-1.0, 1.0, n_grid)
        gx, gy, gz = np.meshgrid(ax, ax, ax, indexing="ij")
        pts = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
        in_ball = np.einsum("ni,ni->n", pts, pts) <= 1.0 + 1e-12
        mask = np.zeros(pts.shape[0], dtype=bool)
        if self.degenerate:
            mask = in_ball
        else:
            thresh = self.log_likelihood - delta - self.log_offset_total
            idx = np.flatnonzero(in_ball)
            for lo in range(0, idx.size, 8192):
                sel = idx[lo : lo + 8192]
                args = self.rows[:, 0][None, :] + pts[sel] @ self.rows[:, 1:].T
                ok = np.all(args > 0.0, axis=1)
                vals = np.full(sel.size, -np.inf)
                if np.any(ok):
                    vals[ok] = np.log(args[ok]).sum(axis=1)
                mask[sel] = vals >= thresh
        return pts, mask.reshape((n_grid,) * 3)

    def confidence_region(
        self, *, n_grid: int = 61, delta: float = CONFIDENCE_DELTA_95
    ) -> np.ndarray:
        """Bloch points of the likelihood-drop region on an n_grid^3 lattice.

        The maximizer itself is always appended, so the region is never
        empty even when narrower than the lattice spacing.
        """
        pts, mask = self._grid_mask(n_grid, delta)
        inside = pts[mask.ravel()]
        return np.vstack([inside, self.bloch[None, :]])

    def region_boundary(
        self, *, n_grid: int = 61, delta: float = CONFIDENCE_DELTA_95
    ) -> np.ndarray:
        """Grid points on the boundary of the confidence region.

        A region point is a boundary point when any of its six lattice
        neighbours (or the lattice edge) falls outside the region.
        """
        pts, mask = self._grid_mask(n_grid, delta)
        interior = np.ones_like(mask)
        for axis in range(3):
            for shift in (1, -1):
                rolled = np.roll(mask, shift, axis=axis)
                edge = [slice(None)] * 3
                edge[axis] = 0 if shift == 1 else -1
                rolled[tuple(edge)] = False
                interior &= rolled
        boundary = mask & ~interior
        out = pts[boundary.ravel()]
        if out.size == 0:
            out = self.bloch[None, :]
        return out

    def to_report(self, *, n_grid: int = 61) -> dict:
        """JSON-ready summary of the estimate and its confidence region."""
        return {
            "mle": [float(c) for c in self.bloch],
            "loglik": float(self.log_likelihood),
            "region_boundary": [[float(c) for c in p] for p in self.region_boundary(n_grid=n_grid)],
            "n_records": int(self.n_records),
        }


def _coerce_rows(maps) -> tuple[np.ndarray, float, int]:
    if isinstance(maps, (TransferMap, MeasurementRecord)):
        maps = [maps]
    tms = [composite_map(m) if isinstance(m, MeasurementRecord) else m for m in maps]
    if not tms:
        raise ValueError("need at least one transfer map or record")
    if not all(isinstance(tm, TransferMap) for tm in tms):
        raise TypeError("maps must be TransferMap or MeasurementRecord instances")
    rows = np.stack([tm.matrix[0] for tm in tms])
    offset = float(np.sum([tm.log_offset for tm in tms]))
    return rows, offset, len(tms)


def mle_initial_state(
    maps,
    *,
    max_iterations: int = 10_000,
    tol: float = 1e-12,
    degenerate_tol: float = 1e-12,
) -> LikelihoodResult:
    """Retrodict the most likely shared initial state for a record ensemble.

    Parameters
    ----------
    maps : TransferMap, MeasurementRecord, or a sequence of either.  Records
        are composed into transfer maps first (see
        :func:`composite_maps_batch` to amortize that over many records).

    Raises
    ------
    RuntimeError if the ascent has not converged after ``max_iterations``.
    """
    rows, offset, n = _coerce_rows(maps)
    m0 = rows[:, 0]
    grads = rows[:, 1:]
    if np.any(m0 <= 0.0):
        raise FloatingPointError("a transfer map has non-positive weight at the center")

    informative = np.linalg.norm(grads, axis=1) > degenerate_tol * np.abs(m0)
    if not np.any(informative):
        res_rows = rows
        zero = np.zeros(3)
        result = LikelihoodResult(
            bloch=zero,
            log_likelihood=float(np.sum(np.log(m0))) + offset,
            rows=res_rows,
            log_offset_total=offset,
            gradient_norm=0.0,
            degenerate=True,
            n_records=n,
            iterations=0,
            converged=True,
        )
        return result

    if n == 1:
        # affine likelihood: the constrained maximizer is the pure state
        # along the gradient
        direction = grads[0] / np.linalg.norm(grads[0])
        val = float(np.log(m0[0] + grads[0] @ direction)) + offset
        return LikelihoodResult(
            bloch=direction,
            log_likelihood=val,
            rows=rows,
            log_offset_total=offset,
            gradient_norm=float(np.linalg.norm(grads[0])),
            degenerate=False,
            n_records=1,
            iterations=0,
            converged=True,
        )

    def value(r):
        args = m0 + grads @ r
        if np.any(args <= 0.0):
            return -math.inf, None
        return float(np.sum(np.log(args))), args

    r = np.zeros(3)
    val, args = value(r)
    step = 1.0
    converged = False
    it = 0
    pg_norm = math.inf
    for it in range(1, max_iterations + 1):
        g = grads.T @ (1.0 / args)
        rn = np.linalg.norm(r)
        pg = g.copy()
        if rn >= 1.0 - 1e-12:
            outward = float(g @ r) / max(rn, 1e-300)
            if outward > 0.0:
                # pinned at the sphere: step tangentially, or the radial
                # part of g swamps the achievable in-sphere motion
                pg = g - outward * (r / rn)
        pg_norm = float(np.linalg.norm(pg))
        if pg_norm <= tol * max(1.0, abs(val)):
            converged = True
            break
        step *= 2.0
        moved = False
        while step > 1e-18:
            cand = r + step * pg
            nrm = np.linalg.norm(cand)
            if nrm > 1.0:
                cand = cand / nrm
            cval, cargs = value(cand)
            gain = float(pg @ (cand - r))
            if cval >= val + 1e-4 * gain and cval > -math.inf:
                moved = np.linalg.norm(cand - r) > 0.0
                if moved:
                    r, val, args = cand, cval, cargs
                break
            step *= 0.5
        if not moved:
            # no admissible step improves the objective: at the constrained
            # optimum up to floating-point resolution
            converged = True
            break
    if not converged:
        raise RuntimeError(f"likelihood ascent did not converge in {max_iterations} iterations")

    return LikelihoodResult(
        bloch=r,
        log_likelihood=val + offset,
        rows=rows,
        log_offset_total=offset,
        gradient_norm=pg_norm,
        degenerate=False,
        n_records=n,
        iterations=it,
        converged=True,
    )
