"""Integration of the counting-field Bloch equation with dense output.

The augmented ODE state carries the four Bloch components next to the six
generator coefficients (and, on request, their counting-field sensitivities:
d(v)/d(eta) obeys ds/dt = G s + (dG/d(eta)) v with s(0) = 0, giving the mean
dissipated heat without finite-difference noise).

Conventions: omega0 = 1 fixes the time unit; all inputs are in these units.
Everything is integrated in complex arithmetic and realness is asserted by
the callers/tests rather than assumed, so a bath-module bug cannot hide
behind a silent real cast.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .bath import BathParams, SpectralDensity
from .generator import (
    _block_matrix,
    coefficient_rates,
    sensitivity_coefficient_rates,
)

__all__ = [
    "BlochVector",
    "SolverOptions",
    "SolverStats",
    "Trajectory",
    "PropagatorTrajectory",
    "SolverFailure",
    "PositivityWarning",
    "evolve",
    "evolve_with_sensitivity",
    "evolve_propagator",
    "steady_state_check",
]


class SolverFailure(RuntimeError):
    """Integrator gave up (step-size underflow or tolerance failure)."""

    def __init__(self, message: str, t: float):
        super().__init__(f"integration failed at t = {t:.6g}: {message}")
        self.t = t


class PositivityWarning(UserWarning):
    """A trajectory left the Bloch ball beyond tolerance (regime breakdown)."""


@dataclass
class BlochVector:
    """Bloch components (v_x, v_y, v_z) plus the trace component v_0."""

    vx: float
    vy: float
    vz: float
    v0: float = 1.0

    @classmethod
    def from_array(cls, values) -> "BlochVector":
        values = np.asarray(values, dtype=float)
        if values.shape == (3,):
            return cls(*values)
        if values.shape == (4,):
            return cls(*values)
        raise ValueError(f"expected 3 or 4 components, got shape {values.shape}")

    def as_array(self) -> np.ndarray:
        return np.array([self.vx, self.vy, self.vz, self.v0], dtype=complex)

    @property
    def norm(self) -> float:
        return float(np.sqrt(self.vx**2 + self.vy**2 + self.vz**2))

    def require_physical(self, tol: float = 1e-12) -> "BlochVector":
        if self.norm > 1.0 + tol:
            raise ValueError(f"Bloch vector norm {self.norm} exceeds 1")
        if abs(self.v0 - 1.0) > tol:
            raise ValueError(f"initial trace component must be 1, got {self.v0}")
        return self


@dataclass(frozen=True)
class SolverOptions:
    """Adaptive Runge-Kutta settings (order 5(4) by default, dense output)."""

    rtol: float = 1e-10
    atol: float = 1e-12
    method: str = "RK45"
    max_step: float = np.inf


@dataclass
class SolverStats:
    accepted_steps: int
    nfev: int
    rejected_steps_estimate: Optional[int]
    message: str = ""


#: embedded stage counts used for the rejected-step estimate; scipy does not
#: expose rejected attempts, so this is reconstructed from nfev.
_STAGES = {"RK45": 6, "RK23": 3, "DOP853": 12}


def _stats_from(sol, method: str) -> SolverStats:
    accepted = len(sol.t) - 1
    rejected = None
    stages = _STAGES.get(method)
    if stages is not None:
        dense_extra = 3 * accepted if method == "DOP853" else 0
        attempts = max(0, (sol.nfev - 1 - dense_extra)) // stages
        rejected = max(0, attempts - accepted)
    return SolverStats(accepted, sol.nfev, rejected, sol.message or "")


@dataclass
class Trajectory:
    """Dense-output samples of one counting-field Bloch trajectory."""

    eta: float
    times: np.ndarray
    states: np.ndarray            # (T, 4) complex, columns (vx, vy, vz, v0)
    coefficients: np.ndarray      # (T, 6) complex, COEFFICIENT_ORDER
    stats: SolverStats
    sensitivity: Optional[np.ndarray] = None              # (T, 4) d v / d eta
    sensitivity_coefficients: Optional[np.ndarray] = None # (T, 6)
    dense: Optional[Callable] = field(default=None, repr=False)

    @property
    def v0(self) -> np.ndarray:
        return self.states[:, 3]

    def bloch_norms(self) -> np.ndarray:
        return np.linalg.norm(self.states[:, :3].real, axis=1)

    def max_imag(self) -> float:
        worst = float(np.max(np.abs(self.states.imag)))
        if self.sensitivity is not None:
            worst = max(worst, float(np.max(np.abs(self.sensitivity.imag))))
        return worst

    def state_at(self, t: float) -> np.ndarray:
        """Interpolated 4-component state at arbitrary t inside the horizon."""
        if self.dense is None:
            raise ValueError("trajectory was integrated without dense output")
        return self.dense(t)[:4]

    def sensitivity_at(self, t: float) -> np.ndarray:
        if self.dense is None or self.sensitivity is None:
            raise ValueError("trajectory carries no sensitivity interpolant")
        return self.dense(t)[10:14]


@dataclass
class PropagatorTrajectory:
    """Fundamental matrix Phi(t) of the Bloch equation, v(t) = Phi(t) v(0).

    When integrated with sensitivity, Psi(t) = d Phi / d(eta) at eta is also
    carried, so d v(t)/d(eta) = Psi(t) v(0) for any eta-independent initial
    state.  One propagator solve serves every initial condition by linearity.
    """

    eta: float
    times: np.ndarray
    transfer: np.ndarray                     # (T, 4, 4) complex
    coefficients: np.ndarray                 # (T, 6)
    stats: SolverStats
    sensitivity_transfer: Optional[np.ndarray] = None  # (T, 4, 4)
    dense: Optional[Callable] = field(default=None, repr=False)

    def apply(self, initials: np.ndarray) -> np.ndarray:
        """States for a batch of initial 4-vectors: (P, 4) -> (P, T, 4)."""
        initials = np.asarray(initials, dtype=complex)
        return np.einsum("tij,pj->pti", self.transfer, initials)

    def apply_sensitivity(self, initials: np.ndarray) -> np.ndarray:
        if self.sensitivity_transfer is None:
            raise ValueError("propagator carries no sensitivity transfer")
        initials = np.asarray(initials, dtype=complex)
        return np.einsum("tij,pj->pti", self.sensitivity_transfer, initials)

    def transfer_at(self, t: float) -> np.ndarray:
        if self.dense is None:
            raise ValueError("propagator was integrated without dense output")
        return self.dense(t)[:16].reshape(4, 4)

    def sensitivity_transfer_at(self, t: float) -> np.ndarray:
        if self.dense is None or self.sensitivity_transfer is None:
            raise ValueError("propagator carries no sensitivity interpolant")
        return self.dense(t)[22:38].reshape(4, 4)


def _make_rhs(sd, bp, eta, omega0, n_cols, with_sensitivity):
    nv = 4 * n_cols

    def rhs(t, y):
        v = y[:nv].reshape(4, n_cols)
        coeffs = y[nv : nv + 6]
        gen = _block_matrix(coeffs, omega0)
        dv = gen @ v
        dcoeffs = coefficient_rates(sd, bp, eta, t, omega0)
        if not with_sensitivity:
            return np.concatenate([dv.ravel(), dcoeffs])
        s = y[nv + 6 : 2 * nv + 6].reshape(4, n_cols)
        scoeffs = y[2 * nv + 6 :]
        dgen = _block_matrix(scoeffs, 0.0)
        ds = gen @ s + dgen @ v
        dscoeffs = sensitivity_coefficient_rates(sd, bp, eta, t, omega0)
        return np.concatenate([dv.ravel(), dcoeffs, ds.ravel(), dscoeffs])

    return rhs


def _report_grid(t_final: float, report_grid) -> np.ndarray:
    if report_grid is None:
        grid = np.linspace(0.0, t_final, 501)
    else:
        grid = np.asarray(report_grid, dtype=float)
        if grid.ndim != 1 or grid.size < 2:
            raise ValueError("report grid must be a 1-d array with >= 2 samples")
        if grid[0] != 0.0:
            raise ValueError("report grid must start at t = 0")
        if np.any(np.diff(grid) <= 0.0):
            raise ValueError("report grid must be strictly increasing")
        if grid[-1] > t_final * (1.0 + 1e-12):
            raise ValueError("report grid extends past t_final")
    return grid


def _integrate(y0, sd, bp, eta, omega0, t_final, grid, opts, n_cols, with_sens):
    rhs = _make_rhs(sd, bp, eta, omega0, n_cols, with_sens)
    sol = solve_ivp(
        rhs,
        (0.0, float(t_final)),
        y0,
        method=opts.method,
        rtol=opts.rtol,
        atol=opts.atol,
        max_step=opts.max_step,
        dense_output=True,
    )
    if not sol.success:
        raise SolverFailure(sol.message, t=float(sol.t[-1]) if len(sol.t) else 0.0)
    samples = sol.sol(grid).T  # (T, n_states)
    samples[0] = y0  # first sample is the initial condition, exactly
    return samples, sol


def evolve(
    initial,
    eta: float,
    sd: SpectralDensity,
    bp: BathParams,
    omega0: float = 1.0,
    t_final: float = 50.0,
    report_grid: Optional[Sequence[float]] = None,
    solver_options: Optional[SolverOptions] = None,
) -> Trajectory:
    """Integrate dv/dt = G(t) v from a physical initial state.

    Parameters
    ----------
    initial : BlochVector or length-3/4 sequence
        Initial state inside the closed Bloch ball (trace component 1).
    eta : float
        Counting field; 0 recovers ordinary reduced dynamics (conserved
        trace), beta gives the trace whose negative log is the
        fluctuation-relation bound.

    Returns
    -------
    Trajectory sampled on the reporting grid, with dense output attached
    for later refinement.  For eta = 0 trajectories whose Bloch norm leaves
    the unit ball by more than 1e-8 a PositivityWarning is emitted.
    """
    if not isinstance(initial, BlochVector):
        initial = BlochVector.from_array(initial)
    initial.require_physical()
    if t_final <= 0.0:
        raise ValueError("t_final must be positive")
    opts = solver_options or SolverOptions()
    grid = _report_grid(t_final, report_grid)
    y0 = np.concatenate([initial.as_array(), np.zeros(6, dtype=complex)])
    samples, sol = _integrate(
        y0, sd, bp, float(eta), omega0, t_final, grid, opts, 1, False
    )
    traj = Trajectory(
        eta=float(eta),
        times=grid,
        states=samples[:, :4],
        coefficients=samples[:, 4:10],
        stats=_stats_from(sol, opts.method),
        dense=sol.sol,
    )
    if eta == 0.0:
        worst = float(np.max(traj.bloch_norms()))
        if worst > 1.0 + 1e-8:
            warnings.warn(
                f"Bloch norm reached {worst:.12g} > 1: positivity of the "
                "second-order dynamics is breaking down for these parameters",
                PositivityWarning,
                stacklevel=2,
            )
    return traj


def evolve_with_sensitivity(
    initial,
    sd: SpectralDensity,
    bp: BathParams,
    omega0: float = 1.0,
    t_final: float = 50.0,
    report_grid: Optional[Sequence[float]] = None,
    solver_options: Optional[SolverOptions] = None,
) -> Trajectory:
    """evolve at eta = 0 with the counting-field sensitivity system attached.

    The returned trajectory carries d(v)/d(eta) at eta = 0; its fourth
    component gives the mean dissipated heat as -d(v_0)/d(eta).
    """
    if not isinstance(initial, BlochVector):
        initial = BlochVector.from_array(initial)
    initial.require_physical()
    if t_final <= 0.0:
        raise ValueError("t_final must be positive")
    opts = solver_options or SolverOptions()
    grid = _report_grid(t_final, report_grid)
    y0 = np.concatenate(
        [initial.as_array(), np.zeros(6 + 4 + 6, dtype=complex)]
    )
    samples, sol = _integrate(y0, sd, bp, 0.0, omega0, t_final, grid, opts, 1, True)
    return Trajectory(
        eta=0.0,
        times=grid,
        states=samples[:, :4],
        coefficients=samples[:, 4:10],
        stats=_stats_from(sol, opts.method),
        sensitivity=samples[:, 10:14],
        sensitivity_coefficients=samples[:, 14:20],
        dense=sol.sol,
    )


def evolve_propagator(
    eta: float,
    sd: SpectralDensity,
    bp: BathParams,
    omega0: float = 1.0,
    t_final: float = 50.0,
    report_grid: Optional[Sequence[float]] = None,
    solver_options: Optional[SolverOptions] = None,
    with_sensitivity: bool = False,
) -> PropagatorTrajectory:
    """Integrate the fundamental matrix (and optionally its eta-derivative).

    Sweeps over many initial states reuse a single propagator solve; the
    linearity of the equation makes this exact, and the block structure of
    G(t) is inherited by Phi(t).
    """
    if t_final <= 0.0:
        raise ValueError("t_final must be positive")
    opts = solver_options or SolverOptions()
    grid = _report_grid(t_final, report_grid)
    pieces = [np.eye(4, dtype=complex).ravel(), np.zeros(6, dtype=complex)]
    if with_sensitivity:
        pieces += [np.zeros(16, dtype=complex), np.zeros(6, dtype=complex)]
    y0 = np.concatenate(pieces)
    samples, sol = _integrate(
        y0, sd, bp, float(eta), omega0, t_final, grid, opts, 4, with_sensitivity
    )
    n_t = len(grid)
    return PropagatorTrajectory(
        eta=float(eta),
        times=grid,
        transfer=samples[:, :16].reshape(n_t, 4, 4),
        coefficients=samples[:, 16:22],
        stats=_stats_from(sol, opts.method),
        sensitivity_transfer=(
            samples[:, 22:38].reshape(n_t, 4, 4) if with_sensitivity else None
        ),
        dense=sol.sol,
    )


def steady_state_check(traj: Trajectory, window: float, tol: float):
    """Has the trajectory settled over its trailing window?

    Returns (settled, residual) where residual is the largest peak-to-peak
    variation of any of the four components over [t_end - window, t_end].
    """
    t_end = traj.times[-1]
    if window > t_end - traj.times[0]:
        raise ValueError("window longer than the trajectory span")
    mask = traj.times >= t_end - window
    tail = traj.states[mask]
    residual = float(
        max(np.max(np.ptp(tail.real, axis=0)), np.max(np.ptp(tail.imag, axis=0)))
    )
    return residual < tol, residual
