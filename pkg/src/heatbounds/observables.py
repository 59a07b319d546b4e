"""Entropy, the two lower bounds, mean dissipated heat, and crossover times.

The entropic bound is the drop of the system's von Neumann entropy between
t = 0 and t; the thermodynamic bound is -ln of the trace of the state tilted
by eta = beta (a heat fluctuation relation via Jensen's inequality); the
mean dissipated heat is the counting-field derivative -d(v_0)/d(eta) at
eta = 0.  Both bounds sit below beta * <heat> whenever the second-order
dynamics stays positive.

Entropy is computed from the qubit eigenvalues (1 +- |v|)/2 with the
x ln x -> 0 continuation; the equivalent artanh closed form (kept for
cross-checking) subtracts two divergent terms near a pure state, so the
eigenvalue route is the numerically stable one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .dynamics import BlochVector, Trajectory

__all__ = [
    "NonpositiveTraceError",
    "von_neumann_entropy",
    "entropy_from_norm",
    "entropic_bound",
    "entropic_bound_closed_form",
    "thermodynamic_bound",
    "mean_heat",
    "cgf",
    "BoundsSeries",
    "bounds_from_trajectories",
    "CrossoverResult",
    "crossover_time",
]

_NORM_SLACK = 1e-12


class NonpositiveTraceError(RuntimeError):
    """The tilted trace came out <= 0: solver or regime failure upstream."""


def _norm_of(v) -> np.ndarray:
    if isinstance(v, BlochVector):
        return np.asarray(v.norm)
    arr = np.asarray(v, dtype=float)
    if arr.ndim >= 1 and arr.shape[-1] in (3, 4):
        return np.linalg.norm(arr[..., :3], axis=-1)
    raise ValueError(f"expected a Bloch vector with 3 or 4 components, got {arr.shape}")


def _xlogx(p: np.ndarray) -> np.ndarray:
    out = np.zeros_like(p)
    pos = p > 0.0
    out[pos] = p[pos] * np.log(p[pos])
    return out


def entropy_from_norm(r) -> np.ndarray:
    """Qubit von Neumann entropy (nats) as a function of the Bloch norm."""
    r = np.asarray(r, dtype=float)
    if np.any(r > 1.0 + _NORM_SLACK):
        raise ValueError(f"Bloch norm {np.max(r)} exceeds 1")
    r = np.minimum(r, 1.0)
    p = 0.5 * (1.0 + r)
    q = 0.5 * (1.0 - r)
    s = -_xlogx(np.atleast_1d(p)) - _xlogx(np.atleast_1d(q))
    return s.reshape(r.shape) if r.ndim else float(s[0])


def von_neumann_entropy(v) -> float:
    """Entropy -Tr[rho ln rho] of the state with Bloch vector v, in nats."""
    return entropy_from_norm(_norm_of(v))


def entropic_bound(v_initial, v_t):
    """Entropy drop S(t=0) - S(t): the information-erasure lower bound."""
    return von_neumann_entropy(v_initial) - von_neumann_entropy(v_t)


def entropic_bound_closed_form(norm_initial: float, norm_t: float) -> float:
    """artanh form of the entropic bound; valid away from |v| = 1.

    Kept as an independent expression for cross-checks; use entropic_bound
    in production (stable at the pure-state boundary).
    """
    def half(r):
        return -np.log(np.sqrt(1.0 - r * r)) - r * np.arctanh(r)

    return float(half(norm_initial) - half(norm_t))


def thermodynamic_bound(v0_at_beta):
    """-ln of the tilted trace at eta = beta (fluctuation-relation bound)."""
    v0 = np.asarray(v0_at_beta, dtype=float)
    if np.any(v0 <= 0.0):
        raise NonpositiveTraceError(
            f"tilted trace must be positive, got min {np.min(v0)}"
        )
    out = -np.log(v0)
    return out if out.ndim else float(out)


def mean_heat(dv0_deta, imag_tol: float = 1e-6):
    """Mean dissipated heat -d(v_0)/d(eta) at eta = 0 (units of omega0).

    Accepts the scalar or array sensitivity component; a residual imaginary
    part beyond imag_tol signals an upstream integration problem.
    """
    arr = np.asarray(dv0_deta, dtype=complex)
    worst = float(np.max(np.abs(arr.imag))) if arr.size else 0.0
    if worst > imag_tol * max(1.0, float(np.max(np.abs(arr.real))) if arr.size else 1.0):
        raise ValueError(
            f"heat sensitivity has imaginary part {worst:.3e}; "
            "the trajectory violates realness"
        )
    out = -arr.real
    return out if out.ndim else float(out)


def cgf(v0_eta):
    """Cumulant generating function ln v_0 at the trajectory's eta."""
    v0 = np.asarray(v0_eta, dtype=float)
    if np.any(v0 <= 0.0):
        raise NonpositiveTraceError(
            f"tilted trace must be positive, got min {np.min(v0)}"
        )
    out = np.log(v0)
    return out if out.ndim else float(out)


@dataclass
class BoundsSeries:
    """Heat and both bounds on a common reporting grid (all dimensionless)."""

    times: np.ndarray
    beta_heat: np.ndarray
    entropic: np.ndarray
    thermodynamic: np.ndarray
    beta: float


def bounds_from_trajectories(
    traj_zero: Trajectory, traj_beta: Trajectory, beta: float
) -> BoundsSeries:
    """Assemble beta*heat, the entropic and the thermodynamic bound series.

    traj_zero must carry the sensitivity system (heat);
    traj_beta must be the same initial state evolved at eta = beta.
    """
    if traj_zero.sensitivity is None:
        raise ValueError("eta = 0 trajectory must be integrated with sensitivity")
    if traj_beta.eta != beta:
        raise ValueError(f"second trajectory has eta = {traj_beta.eta}, expected {beta}")
    if traj_zero.times.shape != traj_beta.times.shape or np.any(
        traj_zero.times != traj_beta.times
    ):
        raise ValueError("trajectories must share a reporting grid")
    norms = traj_zero.bloch_norms()
    b_en = entropy_from_norm(norms[0]) - entropy_from_norm(norms)
    b_th = thermodynamic_bound(traj_beta.v0.real)
    heat = mean_heat(traj_zero.sensitivity[:, 3])
    return BoundsSeries(
        times=traj_zero.times.copy(),
        beta_heat=beta * heat,
        entropic=b_en,
        thermodynamic=b_th,
        beta=beta,
    )


@dataclass
class CrossoverResult:
    """First time the tighter bound switches identity, if it ever does."""

    time: Optional[float]
    additional: tuple = ()


def crossover_time(
    times: Sequence[float],
    entropic: Sequence[float],
    thermodynamic: Sequence[float],
    diff_fn: Optional[Callable[[float], float]] = None,
    refine_tol: float = 1e-3,
) -> CrossoverResult:
    """Earliest sign change of (thermodynamic - entropic), refined by bisection.

    diff_fn, when given, evaluates the difference on the continuous
    interpolant; otherwise the refinement bisects the linear interpolation of
    the sampled series.  Later re-crossings are reported in `additional` at
    grid resolution.  Leading samples where the difference is exactly zero
    (both bounds start at zero) are skipped.
    """
    times = np.asarray(times, dtype=float)
    entropic = np.asarray(entropic, dtype=float)
    thermodynamic = np.asarray(thermodynamic, dtype=float)
    if times.shape != entropic.shape or times.shape != thermodynamic.shape:
        raise ValueError("series must share one grid")
    diff = thermodynamic - entropic

    start = 0
    while start < len(diff) and diff[start] == 0.0:
        start += 1

    crossings = []
    for k in range(start, len(diff) - 1):
        if diff[k] == 0.0:
            continue
        if diff[k] * diff[k + 1] < 0.0 or (
            diff[k + 1] == 0.0 and k + 2 < len(diff) and diff[k] * diff[k + 2] < 0.0
        ):
            crossings.append(k)
    if not crossings:
        return CrossoverResult(None)

    k = crossings[0]
    lo, hi = times[k], times[k + 1]
    if diff_fn is None:
        t0, t1, d0, d1 = lo, hi, diff[k], diff[k + 1]
        root = t0 - d0 * (t1 - t0) / (d1 - d0)
    else:
        f_lo = diff_fn(lo)
        f_hi = diff_fn(hi)
        if f_lo == 0.0:
            root = lo
        elif f_lo * f_hi > 0.0:
            # interpolant disagrees with samples at the edge; fall back
            root = 0.5 * (lo + hi)
        else:
            while hi - lo > refine_tol:
                mid = 0.5 * (lo + hi)
                f_mid = diff_fn(mid)
                if f_mid == 0.0:
                    lo = hi = mid
                    break
                if f_lo * f_mid < 0.0:
                    hi = mid
                else:
                    lo, f_lo = mid, f_mid
            root = 0.5 * (lo + hi)
    extra = tuple(float(times[j]) for j in crossings[1:])
    return CrossoverResult(float(root), extra)
