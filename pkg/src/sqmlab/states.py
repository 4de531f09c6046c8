"""Qubit states, in-plane observables and measurement channels.

Conventions used throughout the package:

* Basis order is (|g>, |e>) with ``sigma_z = diag(+1, -1)``, so the +z pole
  of the Bloch sphere is the ground state.
* A state is written ``rho = (I + r . sigma) / 2`` with Bloch vector
  ``r = (x, y, z)``, ``|r| <= 1``.
* The measured observables form the equatorial family
  ``sigma(delta) = sigma_x cos(delta) + sigma_y sin(delta)``,
  i.e. the unit axis ``n(delta) = (cos delta, sin delta, 0)``.

All angles are radians and all rates are angular (rad/s) inside the library;
unit conversions from cycles-per-second inputs happen at the CLI boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SIGMA_X",
    "SIGMA_Y",
    "SIGMA_Z",
    "PAULIS",
    "QubitState",
    "Observable",
    "MeasChannel",
    "from_bloch",
    "sigma_delta",
    "axis_vector",
    "expectation",
    "purity_radius",
    "trace_distance",
]

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
#: (I, sigma_x, sigma_y, sigma_z) — the operator basis used for 4x4 transfer maps.
PAULIS = np.stack([np.eye(2, dtype=complex), SIGMA_X, SIGMA_Y, SIGMA_Z])

_HERM_TOL = 1e-9
_TRACE_TOL = 1e-9
_PSD_TOL = 1e-9


def _bloch_of_rho(rho: np.ndarray) -> np.ndarray:
    return np.array(
        [
            2.0 * rho[1, 0].real,
            2.0 * rho[1, 0].imag,
            (rho[0, 0] - rho[1, 1]).real,
        ]
    )


@dataclass(frozen=True)
class QubitState:
    """A qubit density matrix with its Bloch-vector view.

    The 2x2 density matrix is the stored truth; the Bloch vector is derived.
    Construction validates hermiticity, unit trace and positivity (within
    1e-9 tolerances) and rejects anything outside the Bloch ball.
    """

    rho: np.ndarray

    def __post_init__(self) -> None:
        rho = np.asarray(self.rho, dtype=complex)
        if rho.shape != (2, 2):
            raise ValueError(f"density matrix must be 2x2, got {rho.shape}")
        if np.abs(rho - rho.conj().T).max() > _HERM_TOL:
            raise ValueError("density matrix is not Hermitian within 1e-9")
        if abs(rho[0, 0].real + rho[1, 1].real - 1.0) > _TRACE_TOL:
            raise ValueError("density matrix trace differs from 1 by more than 1e-9")
        r = _bloch_of_rho(rho)
        norm = float(np.linalg.norm(r))
        if norm > 1.0 + 2.0 * _PSD_TOL:
            raise ValueError(f"Bloch vector norm {norm} exceeds 1 (state not PSD)")
        if norm > 1.0:  # clip roundoff-level excursions back onto the sphere
            r *= 1.0 / norm
            rho = (np.eye(2, dtype=complex) + r[0] * SIGMA_X + r[1] * SIGMA_Y + r[2] * SIGMA_Z) / 2.0
        rho = 0.5 * (rho + rho.conj().T)
        rho.flags.writeable = False
        object.__setattr__(self, "rho", rho)

    @property
    def bloch(self) -> np.ndarray:
        """Bloch vector (x, y, z)."""
        return _bloch_of_rho(self.rho)

    @property
    def purity(self) -> float:
        """Tr[rho^2] = (1 + |r|^2) / 2."""
        return float((1.0 + np.dot(self.bloch, self.bloch)) / 2.0)

    @property
    def radius(self) -> float:
        """Bloch-vector norm |r|."""
        return float(np.linalg.norm(self.bloch))

    def to_flat8(self) -> np.ndarray:
        """Row-major (re, im) interleaved 8-real serialization of rho."""
        flat = self.rho.reshape(-1)
        out = np.empty(8)
        out[0::2] = flat.real
        out[1::2] = flat.imag
        return out

    @staticmethod
    def from_flat8(values: np.ndarray) -> "QubitState":
        values = np.asarray(values, dtype=float)
        if values.shape != (8,):
            raise ValueError("flat density-matrix serialization must have 8 reals")
        rho = (values[0::2] + 1j * values[1::2]).reshape(2, 2)
        return QubitState(rho)


@dataclass(frozen=True)
class Observable:
    """A Hermitian qubit observable; for the equatorial family ``delta`` is set.

    Observables created by :func:`sigma_delta` square to the identity
    (eigenvalues exactly +-1) and have zero trace.
    """

    matrix: np.ndarray
    delta: float | None = None

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError("observable must be 2x2")
        if np.abs(m - m.conj().T).max() > _HERM_TOL:
            raise ValueError("observable is not Hermitian within 1e-9")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)


@dataclass(frozen=True)
class MeasChannel:
    """One continuously monitored channel measuring ``sigma(delta)``.

    Parameters
    ----------
    delta : float
        Measurement-axis angle in the equatorial plane (radians).
    gamma : float
        Ensemble dephasing rate of the channel (rad/s, >= 0).
    eta : float
        Quantum efficiency in [0, 1].
    dephasing_only : bool
        If True the channel contracts the state but produces no record
        (used for the single-channel limits; generation with gamma*eta == 0
        is rejected otherwise since the record variance would be undefined).
    ringup_kappa : float or None
        If set, rates follow the cavity ring-up envelope
        gamma(t) = gamma*(1 - exp(-kappa t/2)), eta(t) = eta*(1 - exp(-kappa t/2)),
        so the information rate carries the squared envelope while the
        ensemble dephasing rate carries a single factor.
    """

    delta: float
    gamma: float
    eta: float
    dephasing_only: bool = False
    ringup_kappa: float | None = None

    def __post_init__(self) -> None:
        if not np.isfinite(self.delta):
            raise ValueError("delta must be finite")
        if not (self.gamma >= 0.0 and np.isfinite(self.gamma)):
            raise ValueError("gamma must be finite and >= 0")
        if not (0.0 <= self.eta <= 1.0):
            raise ValueError("eta must lie in [0, 1]")

    @property
    def axis(self) -> np.ndarray:
        """Unit Bloch axis (cos delta, sin delta, 0)."""
        return axis_vector(self.delta)

    def rates_at(self, t: float) -> tuple[float, float]:
        """Effective (gamma, eta) at time t, applying the ring-up envelope if set."""
        if self.ringup_kappa is None:
            return self.gamma, self.eta
        env = -np.expm1(-0.5 * self.ringup_kappa * t)
        return self.gamma * env, self.eta * env


def axis_vector(delta: float) -> np.ndarray:
    """Equatorial unit axis for the observable at angle ``delta``."""
    return np.array([np.cos(delta), np.sin(delta), 0.0])


def from_bloch(bloch, *, tol: float = 1e-9) -> QubitState:
    """Build a state from a Bloch vector, rejecting vectors outside the ball.

    Parameters
    ----------
    bloch : array_like, shape (3,)
        Cartesian Bloch components (x, y, z) with |r| <= 1 (+ tol).
    """
    r = np.asarray(bloch, dtype=float)
    if r.shape != (3,):
        raise ValueError("Bloch vector must have shape (3,)")
    norm = float(np.linalg.norm(r))
    if norm > 1.0 + tol:
        raise ValueError(f"Bloch vector norm {norm} lies outside the unit ball")
    if norm > 1.0:
        r = r / norm
    rho = (np.eye(2, dtype=complex) + r[0] * SIGMA_X + r[1] * SIGMA_Y + r[2] * SIGMA_Z) / 2.0
    return QubitState(rho)


def sigma_delta(delta: float) -> Observable:
    """Equatorial observable sigma_x cos(delta) + sigma_y sin(delta)."""
    if not np.isfinite(delta):
        raise ValueError("delta must be finite")
    return Observable(np.cos(delta) * SIGMA_X + np.sin(delta) * SIGMA_Y, delta=float(delta))


def expectation(state: QubitState, observable: Observable) -> float:
    """<O> = Tr[rho O] (real for Hermitian O)."""
    return float(np.trace(state.rho @ observable.matrix).real)


def purity_radius(state: QubitState) -> tuple[float, float]:
    """Return (purity, Bloch radius); purity = (1 + radius^2) / 2."""
    return state.purity, state.radius


def trace_distance(a: QubitState | np.ndarray, b: QubitState | np.ndarray) -> float:
    """Qubit trace distance, |r_a - r_b| / 2 in Bloch coordinates."""
    ra = a.bloch if isinstance(a, QubitState) else np.asarray(a, dtype=float)
    rb = b.bloch if isinstance(b, QubitState) else np.asarray(b, dtype=float)
    return float(np.linalg.norm(ra - rb) / 2.0)
