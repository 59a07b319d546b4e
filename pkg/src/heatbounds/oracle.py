"""Exact reference dynamics on a truncated bosonic environment.

A spin-1/2 plus a handful of truncated harmonic modes is small enough to
diagonalize exactly.  That gives (i) the tilted trace by direct similarity
transform of the propagator, (ii) the dissipated heat from the environment
energy balance, (iii) every term of the heat/entropy/information balance
for the erasure protocol, and (iv) ground truth against which the
second-order engine's error must shrink like the fourth power of the
coupling.

The environment Gibbs state is renormalized after truncation, so the
balance identity holds exactly on the truncated space; the discarded
thermal mass is available in closed form and checked against a budget.
Propagation uses one eigendecomposition per environment (H is real
symmetric), after which any two-operator trace Tr[U X U^T Y] costs one
elementwise phase sum per time point.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .bath import BathParams, DiscreteModes
from .dynamics import BlochVector, SolverOptions, evolve, evolve_with_sensitivity
from .observables import mean_heat

__all__ = [
    "TruncatedEnvironment",
    "TruncationError",
    "LandauerTerms",
    "ScalingEntry",
    "Tcl2ExactReport",
    "build_hamiltonians",
    "exact_modified_trace",
    "exact_heat",
    "exact_total_state",
    "landauer_equality_terms",
    "tcl2_vs_exact_report",
]

_SZ = np.diag([1.0, -1.0])
_SX = np.array([[0.0, 1.0], [1.0, 0.0]])


class TruncationError(RuntimeError):
    """Requested accuracy is incompatible with the Fock-space truncation."""


@dataclass(frozen=True)
class TruncatedEnvironment:
    """Bosonic modes (frequency, real coupling amplitude) with a Fock cap."""

    modes: tuple                  # ((omega_k, g_k), ...)
    n_max: int
    dimension_limit: int = 4096

    def __post_init__(self):
        modes = tuple((float(w), float(g)) for w, g in self.modes)
        if any(w <= 0.0 for w, _ in modes):
            raise ValueError("all mode frequencies must be > 0")
        if self.n_max < 0:
            raise ValueError("n_max must be >= 0")
        object.__setattr__(self, "modes", modes)
        if self.dimension > self.dimension_limit:
            raise ValueError(
                f"total dimension {self.dimension} exceeds the configured "
                f"limit {self.dimension_limit}"
            )

    @property
    def env_dimension(self) -> int:
        return (self.n_max + 1) ** len(self.modes)

    @property
    def dimension(self) -> int:
        return 2 * self.env_dimension

    def scaled(self, s: float) -> "TruncatedEnvironment":
        """Same environment with every coupling amplitude multiplied by s."""
        return TruncatedEnvironment(
            tuple((w, s * g) for w, g in self.modes),
            self.n_max,
            self.dimension_limit,
        )

    def spectral_density(self) -> DiscreteModes:
        """The DiscreteModes law seen by the second-order engine."""
        return DiscreteModes(
            tuple(w for w, _ in self.modes),
            tuple(g * g for _, g in self.modes),
        )

    def recurrence_time(self) -> float:
        """2*pi / (minimum mode spacing); period of a single mode."""
        freqs = sorted(w for w, _ in self.modes)
        if not freqs:
            return math.inf
        if len(freqs) == 1:
            return 2.0 * math.pi / freqs[0]
        spacing = min(b - a for a, b in zip(freqs, freqs[1:]))
        if spacing <= 0.0:
            return math.inf
        return 2.0 * math.pi / spacing

    def gibbs_truncation_mass(self, beta: float) -> float:
        """Thermal probability discarded by the Fock cap (closed form)."""
        retained = 1.0
        for w, _ in self.modes:
            retained *= -np.expm1(-beta * w * (self.n_max + 1))
        return float(1.0 - retained)


def _env_operators(env: TruncatedEnvironment):
    """Environment-space H_E diagonal and the coupling operator B_E."""
    k = len(env.modes)
    d_env = env.env_dimension
    if k == 0:
        return np.zeros(1), np.zeros((1, 1))
    occs = np.array(
        list(itertools.product(range(env.n_max + 1), repeat=k)), dtype=float
    )
    freqs = np.array([w for w, _ in env.modes])
    e_diag = occs @ freqs
    ladder = np.diag(np.sqrt(np.arange(1.0, env.n_max + 1)), 1)
    x_single = ladder + ladder.T
    b_env = np.zeros((d_env, d_env))
    for idx, (_, g) in enumerate(env.modes):
        op = np.eye(1)
        for j in range(k):
            op = np.kron(op, x_single if j == idx else np.eye(env.n_max + 1))
        b_env += g * op
    return e_diag, b_env


def build_hamiltonians(env: TruncatedEnvironment, omega0: float = 1.0):
    """Dense Hermitian (H_S, H_E, H_SE, H).

    H_S is 2x2 on the system space, H_E acts on the environment space and is
    diagonal in the number basis, H_SE and H act on the full product space.
    """
    e_diag, b_env = _env_operators(env)
    d_env = env.env_dimension
    h_s = 0.5 * omega0 * _SZ
    h_e = np.diag(e_diag)
    h_se = np.kron(_SX, b_env)
    h = (
        np.kron(h_s, np.eye(d_env))
        + np.kron(np.eye(2), h_e)
        + h_se
    )
    return h_s, h_e, h_se, h


class _ExactModel:
    def __init__(self, env: TruncatedEnvironment, bp: BathParams, omega0: float):
        self.env = env
        self.bp = bp
        self.omega0 = omega0
        e_diag, b_env = _env_operators(env)
        self.env_energies = e_diag
        d_env = env.env_dimension
        h = (
            np.kron(0.5 * omega0 * _SZ, np.eye(d_env))
            + np.kron(np.eye(2), np.diag(e_diag))
            + np.kron(_SX, b_env)
        )
        self.evals, self.evecs = np.linalg.eigh(h)
        self.full_env_energies = np.concatenate([e_diag, e_diag])
        weights = np.exp(-bp.beta * (e_diag - e_diag.min()))
        self.gibbs = weights / weights.sum()
        self.truncation_mass = env.gibbs_truncation_mass(bp.beta)

    def rho_total0(self, rho_s: np.ndarray) -> np.ndarray:
        return np.kron(rho_s, np.diag(self.gibbs))

    def propagator(self, t: float) -> np.ndarray:
        phase = np.exp(-1j * self.evals * t)
        return (self.evecs * phase) @ self.evecs.T

    def pair_kernel(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Kernel K with Tr[U(t) X U(t)^+ Y] = sum_ij K_ij e^{-i(E_i - E_j) t}."""
        a = self.evecs.T @ x @ self.evecs
        b = self.evecs.T @ y @ self.evecs
        return a * b.T

    def pair_trace(self, kernel: np.ndarray, t: float) -> complex:
        phase = np.exp(-1j * self.evals * t)
        return complex(phase @ kernel @ phase.conj())


@lru_cache(maxsize=32)
def _model(env: TruncatedEnvironment, bp: BathParams, omega0: float) -> _ExactModel:
    return _ExactModel(env, bp, omega0)


def _system_state(rho_s0) -> np.ndarray:
    if isinstance(rho_s0, BlochVector):
        v = rho_s0
        return 0.5 * (
            np.eye(2) * v.v0 + v.vx * _SX
            + v.vy * np.array([[0.0, -1j], [1j, 0.0]]) + v.vz * _SZ
        )
    arr = np.asarray(rho_s0)
    if arr.shape in ((3,), (4,)):
        return _system_state(BlochVector.from_array(arr.real))
    if arr.shape == (2, 2):
        return arr.astype(complex)
    raise ValueError("rho_s0 must be a BlochVector, 3/4-vector, or 2x2 matrix")


def _check_budget(model: _ExactModel, budget: float):
    if model.truncation_mass > budget:
        raise TruncationError(
            f"Gibbs truncation mass {model.truncation_mass:.3e} exceeds the "
            f"budget {budget:.3e}; raise n_max or the budget"
        )


@lru_cache(maxsize=256)
def _tilted_kernel(env, bp, omega0, rho_bytes, dim, eta):
    model = _model(env, bp, omega0)
    rho_s = np.frombuffer(rho_bytes, dtype=complex).reshape(2, 2)
    rho0 = model.rho_total0(rho_s)
    tilt = np.exp(0.5 * eta * model.full_env_energies)
    x = rho0 * np.outer(tilt, tilt)             # e^{eta H_E/2} rho0 e^{eta H_E/2}
    y = np.diag(np.exp(-eta * model.full_env_energies))
    return model.pair_kernel(x, y)


def exact_modified_trace(
    rho_s0,
    env: TruncatedEnvironment,
    bp: BathParams,
    eta: float,
    t: float,
    omega0: float = 1.0,
    truncation_budget: float = 1e-4,
) -> float:
    """Trace of the eta-tilted reduced state at time t (equals e^{CGF}).

    1 at eta = 0 (trace preservation) and at t = 0; positive real always.
    """
    model = _model(env, bp, omega0)
    _check_budget(model, truncation_budget)
    rho_s = np.ascontiguousarray(_system_state(rho_s0))
    kernel = _tilted_kernel(
        env, bp, omega0, rho_s.tobytes(), rho_s.shape[0], float(eta)
    )
    value = model.pair_trace(kernel, float(t))
    if abs(value.imag) > 1e-10 * max(1.0, abs(value.real)):
        raise TruncationError(
            f"tilted trace has imaginary part {value.imag:.3e}; "
            "linear algebra integrity lost"
        )
    return float(value.real)


def exact_heat(
    rho_s0,
    env: TruncatedEnvironment,
    bp: BathParams,
    t: float,
    omega0: float = 1.0,
    truncation_budget: float = 1e-4,
) -> float:
    """Dissipated heat Tr[H_E (rho_E(t) - rho_E(0))], positive into the bath."""
    model = _model(env, bp, omega0)
    _check_budget(model, truncation_budget)
    rho_s = np.ascontiguousarray(_system_state(rho_s0))
    energy_kernel = _energy_kernel(env, bp, omega0, rho_s.tobytes())
    e_t = model.pair_trace(energy_kernel, float(t)).real
    e_0 = float(model.gibbs @ model.env_energies)
    return float(e_t - e_0)


@lru_cache(maxsize=256)
def _energy_kernel(env, bp, omega0, rho_bytes):
    model = _model(env, bp, omega0)
    rho_s = np.frombuffer(rho_bytes, dtype=complex).reshape(2, 2)
    rho0 = model.rho_total0(rho_s)
    return model.pair_kernel(rho0, np.diag(model.full_env_energies))


@lru_cache(maxsize=256)
def _observable_kernel(env, bp, omega0, rho_bytes, which):
    model = _model(env, bp, omega0)
    rho_s = np.frombuffer(rho_bytes, dtype=complex).reshape(2, 2)
    rho0 = model.rho_total0(rho_s)
    d_env = env.env_dimension
    if which == "sz":
        obs = np.kron(_SZ, np.eye(d_env))
    else:
        raise ValueError(which)
    return model.pair_kernel(rho0, obs)


def exact_total_state(
    rho_s0,
    env: TruncatedEnvironment,
    bp: BathParams,
    t: float,
    omega0: float = 1.0,
) -> np.ndarray:
    """Full system+environment density matrix at time t."""
    model = _model(env, bp, omega0)
    u = model.propagator(float(t))
    rho0 = model.rho_total0(_system_state(rho_s0))
    return u @ rho0 @ u.conj().T


def _entropy_of(rho: np.ndarray, label: str) -> float:
    vals = np.linalg.eigvalsh(rho)
    if vals.min() < -1e-10:
        raise TruncationError(
            f"{label} has negative eigenvalue {vals.min():.3e}"
        )
    vals = np.clip(vals, 0.0, None)
    pos = vals[vals > 0.0]
    return float(-np.sum(pos * np.log(pos)))


@dataclass
class LandauerTerms:
    """The four terms of the heat/entropy/information balance at one time."""

    beta_heat: float
    entropy_drop: float
    mutual_information: float
    relative_entropy: float

    @property
    def residual(self) -> float:
        return self.beta_heat - (
            self.entropy_drop + self.mutual_information + self.relative_entropy
        )

    def as_tuple(self):
        return (
            self.beta_heat,
            self.entropy_drop,
            self.mutual_information,
            self.relative_entropy,
        )


def landauer_equality_terms(
    rho_s0,
    env: TruncatedEnvironment,
    bp: BathParams,
    t: float,
    omega0: float = 1.0,
    truncation_budget: float = 1e-4,
) -> LandauerTerms:
    """beta*heat split exactly into entropy drop + mutual info + rel. entropy.

    All four numbers refer to the truncated, renormalized model, for which
    the balance is an identity; mutual information and relative entropy are
    individually nonnegative.
    """
    model = _model(env, bp, omega0)
    _check_budget(model, truncation_budget)
    rho_s = _system_state(rho_s0)
    d_env = env.env_dimension
    rho_tot_t = exact_total_state(rho_s, env, bp, t, omega0)
    r4 = rho_tot_t.reshape(2, d_env, 2, d_env)
    rho_s_t = np.einsum("ikjk->ij", r4)
    rho_e_t = np.einsum("kikj->ij", r4)

    s_s0 = _entropy_of(rho_s, "initial system state")
    s_st = _entropy_of(rho_s_t, "system state")
    s_et = _entropy_of(rho_e_t, "environment state")
    s_tot = _entropy_of(rho_tot_t, "total state")

    # ln rho_E(0) is diagonal: -beta E_i - ln Z on the renormalized space
    e_min = model.env_energies.min()
    log_z = float(
        np.log(np.sum(np.exp(-bp.beta * (model.env_energies - e_min))))
        - bp.beta * e_min
    )
    pops_e_t = np.real(np.diag(rho_e_t))
    cross = float(-bp.beta * (pops_e_t @ model.env_energies) - log_z)
    rel_entropy = -s_et - cross

    heat = exact_heat(rho_s, env, bp, t, omega0, truncation_budget)
    return LandauerTerms(
        beta_heat=bp.beta * heat,
        entropy_drop=s_s0 - s_st,
        mutual_information=s_st + s_et - s_tot,
        relative_entropy=rel_entropy,
    )


@dataclass
class ScalingEntry:
    """Peak deviations between exact and second-order dynamics at one scale."""

    scale: float
    err_vz: float
    err_v0_beta: float
    err_heat: float

    def values(self):
        return {"vz": self.err_vz, "v0_beta": self.err_v0_beta, "heat": self.err_heat}


@dataclass
class Tcl2ExactReport:
    entries: list
    times: np.ndarray
    recurrence_time: float
    noise_floor: float = 1e-9

    def ratios(self):
        """error(larger scale) / error(smaller scale) per adjacent pair."""
        out = []
        ordered = sorted(self.entries, key=lambda e: e.scale)
        for small, big in zip(ordered, ordered[1:]):
            for name in ("vz", "v0_beta", "heat"):
                lo = small.values()[name]
                hi = big.values()[name]
                out.append(
                    {
                        "quantity": name,
                        "scale_small": small.scale,
                        "scale_big": big.scale,
                        "ratio": hi / lo if lo > 0 else math.inf,
                        "resolved": lo > self.noise_floor,
                    }
                )
        return out

    def scaling_ok(self, lo: float = 8.0, hi: float = 32.0) -> bool:
        """Fourth-order error scaling: halving the coupling divides every
        resolved deviation by a factor inside [lo, hi]."""
        checked = [r for r in self.ratios() if r["resolved"]]
        if not checked:
            return False
        return all(lo <= r["ratio"] <= hi for r in checked)


def tcl2_vs_exact_report(
    rho_s0,
    env: TruncatedEnvironment,
    bp: BathParams,
    omega0: float,
    t_grid: Sequence[float],
    scales: Sequence[float],
    solver_options: Optional[SolverOptions] = None,
    truncation_budget: float = 1e-4,
) -> Tcl2ExactReport:
    """Deviation table of the second-order engine against exact dynamics.

    Every coupling amplitude is multiplied by each entry of `scales`; the
    deviations of (v_z, tilted trace at eta = beta, heat) over t_grid should
    shrink by ~16x per halving of the scale.  Comparisons are only
    trustworthy below the environment recurrence time.
    """
    t_grid = np.asarray(sorted(float(t) for t in t_grid))
    if t_grid[0] < 0.0:
        raise ValueError("t_grid must be nonnegative")
    recurrence = env.recurrence_time()
    if t_grid[-1] > recurrence:
        warnings.warn(
            f"t_grid extends past the recurrence time {recurrence:.3g}; "
            "the comparison is not meaningful there",
            stacklevel=2,
        )
    if not isinstance(rho_s0, BlochVector):
        rho_s0 = BlochVector.from_array(np.asarray(rho_s0, dtype=float))
    opts = solver_options or SolverOptions()
    grid = np.concatenate([[0.0], t_grid[t_grid > 0.0]])
    entries = []
    for s in scales:
        env_s = env.scaled(float(s))
        model = _model(env_s, bp, omega0)
        _check_budget(model, truncation_budget)
        rho_s = np.ascontiguousarray(_system_state(rho_s0))
        kern_sz = _observable_kernel(env_s, bp, omega0, rho_s.tobytes(), "sz")
        kern_v0 = _tilted_kernel(
            env_s, bp, omega0, rho_s.tobytes(), 2, float(bp.beta)
        )
        e_kern = _energy_kernel(env_s, bp, omega0, rho_s.tobytes())
        e_0 = float(model.gibbs @ model.env_energies)
        exact_vz = np.array([model.pair_trace(kern_sz, t).real for t in grid])
        exact_v0b = np.array([model.pair_trace(kern_v0, t).real for t in grid])
        exact_q = np.array(
            [model.pair_trace(e_kern, t).real - e_0 for t in grid]
        )
        sd = env_s.spectral_density()
        traj0 = evolve_with_sensitivity(
            rho_s0, sd, bp, omega0, t_final=grid[-1], report_grid=grid,
            solver_options=opts,
        )
        traj_b = evolve(
            rho_s0, bp.beta, sd, bp, omega0, t_final=grid[-1], report_grid=grid,
            solver_options=opts,
        )
        tcl_vz = traj0.states[:, 2].real
        tcl_v0b = traj_b.v0.real
        tcl_q = mean_heat(traj0.sensitivity[:, 3])
        entries.append(
            ScalingEntry(
                scale=float(s),
                err_vz=float(np.max(np.abs(tcl_vz - exact_vz))),
                err_v0_beta=float(np.max(np.abs(tcl_v0b - exact_v0b))),
                err_heat=float(np.max(np.abs(tcl_q - exact_q))),
            )
        )
    return Tcl2ExactReport(entries=entries, times=grid, recurrence_time=recurrence)
