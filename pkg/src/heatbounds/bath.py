"""Counting-field-modified correlation functions of a bosonic environment.

The environment is a collection of harmonic modes, H_E = sum_k w_k b_k^+ b_k,
coupled to the system through B = sum_k (g_k b_k^+ + g_k^* b_k) and held in a
Gibbs state at inverse temperature beta.  The coupling spectrum is either a
continuous Ohmic law with exponential cutoff, J(w) = coupling * w * exp(-w /
cutoff), or an explicit list of discrete modes (w_k, |g_k|^2).  Units are
hbar = k_B = 1 with the qubit splitting as the frequency unit.

Derivation notes (the generator module relies on these identities, so they
are recorded here).  The counting-field tilt B^(eta) = e^{-eta H_E/2} B
e^{+eta H_E/2} multiplies mode operators by scalars, b_k^+ -> e^{-eta w_k/2}
b_k^+ and b_k -> e^{+eta w_k/2} b_k.  In the *same-sign* autocorrelation
<B^(eta) B^(eta)(-tau)> each surviving thermal pairing combines e^{-eta w/2}
with e^{+eta w/2}; the tilt cancels identically and the correlator is
eta-independent:

    C(tau) = int dw J(w) [ n(w) e^{+i w tau} + (n(w)+1) e^{-i w tau} ]

(with the corresponding mode sum for discrete spectra).  In the
*opposite-sign* correlator the tilt factors add instead of cancelling:

    <B^(-eta) B^(eta)(-tau)> = int dw J(w) [ n(w) e^{eta w} e^{+i w tau}
                                  + (n(w)+1) e^{-eta w} e^{-i w tau} ].

At eta = 0 the two coincide, so h_minus vanishes identically.  At eta = beta,
detailed balance n(w) e^{beta w} = n(w) + 1 turns the opposite-sign
correlator into conj(C(tau)).

Continuum integrals are evaluated with composite 16-point Gauss-Legendre
panels on [0, w_max] with w_max = cutoff * max(40, 10 + |eta - beta| *
cutoff * 40), chosen so the integrand tail is below 1e-14 of its peak.  The
panel density adapts to the largest requested |tau| (the integrand
oscillates like e^{i w tau}); each node table is verified against a
double-resolution table when it is built and the achieved error is kept.
"""

from __future__ import annotations

import math
import threading
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np

__all__ = [
    "OhmicExpCutoff",
    "DiscreteModes",
    "SpectralDensity",
    "BathParams",
    "BathDomainError",
    "QuadratureError",
    "LowTemperatureWarning",
    "bose_occupation",
    "correlation_same_sign",
    "correlation_opposite_sign",
    "correlation_eta_derivative",
    "h_pm",
    "thermal_spectral_parts",
    "discretize_ohmic",
]

#: below beta * omega0 ~ 0.2 the second-order (weak-coupling) generator is
#: unreliable; constructing such a bath emits LowTemperatureWarning.
LOW_TEMPERATURE_BETA = 0.2

_GAUSS_ORDER = 16
#: maximum phase advance of e^{i w tau} across one Gauss-Legendre panel, in
#: radians; 16-point Gauss resolves this span to ~1e-15 relative error.
_PHASE_PER_PANEL = 7.5
#: relative error demanded of a node table against its doubled-resolution
#: check when the table is built.
_TABLE_RTOL = 1e-11


class BathDomainError(ValueError):
    """Arguments outside the physical/convergent domain of a correlator."""


class QuadratureError(RuntimeError):
    """Quadrature self-check failed; carries the achieved error estimate."""

    def __init__(self, message: str, estimate: float):
        super().__init__(f"{message} (achieved error estimate {estimate:.3e})")
        self.estimate = estimate


class LowTemperatureWarning(UserWarning):
    """Bath temperature high enough to strain the weak-coupling generator."""


@dataclass(frozen=True)
class OhmicExpCutoff:
    """Ohmic spectral density J(w) = coupling * w * exp(-w / cutoff)."""

    coupling: float
    cutoff: float

    def __post_init__(self):
        if self.coupling < 0.0:
            raise BathDomainError(f"coupling must be >= 0, got {self.coupling}")
        if self.cutoff <= 0.0:
            raise BathDomainError(f"cutoff must be > 0, got {self.cutoff}")

    def j(self, omega):
        """Spectral density evaluated elementwise at omega >= 0."""
        omega = np.asarray(omega, dtype=float)
        return self.coupling * omega * np.exp(-omega / self.cutoff)


@dataclass(frozen=True)
class DiscreteModes:
    """Explicit environment modes: frequencies w_k > 0 and weights |g_k|^2."""

    frequencies: tuple
    couplings_sq: tuple

    def __post_init__(self):
        freqs = tuple(float(w) for w in self.frequencies)
        g2 = tuple(float(g) for g in self.couplings_sq)
        if len(freqs) != len(g2):
            raise BathDomainError("frequencies and couplings_sq differ in length")
        if any(w <= 0.0 for w in freqs):
            raise BathDomainError("all mode frequencies must be > 0")
        if any(g < 0.0 for g in g2):
            raise BathDomainError("all squared couplings must be >= 0")
        object.__setattr__(self, "frequencies", freqs)
        object.__setattr__(self, "couplings_sq", g2)


SpectralDensity = Union[OhmicExpCutoff, DiscreteModes]


@dataclass(frozen=True)
class BathParams:
    """Environment thermal state parameter (inverse temperature, hbar=k_B=1)."""

    beta: float

    def __post_init__(self):
        if self.beta <= 0.0:
            raise BathDomainError(f"beta must be > 0, got {self.beta}")
        if self.beta < LOW_TEMPERATURE_BETA:
            warnings.warn(
                f"beta = {self.beta} is outside the low-temperature regime "
                f"(beta * omega0 >= {LOW_TEMPERATURE_BETA}) where the "
                "second-order generator is trustworthy",
                LowTemperatureWarning,
                stacklevel=2,
            )


def bose_occupation(beta: float, omega: float):
    """Thermal occupation n(w) = 1 / (e^{beta w} - 1) for omega > 0.

    The omega -> 0 limit is never taken here; quadrature integrands handle it
    via the analytic J(w) n(w) -> coupling / beta substitution.
    """
    if beta <= 0.0:
        raise BathDomainError(f"beta must be > 0, got {beta}")
    omega_arr = np.asarray(omega, dtype=float)
    if np.any(omega_arr <= 0.0):
        raise BathDomainError("bose_occupation requires omega > 0")
    with np.errstate(over="ignore"):
        out = 1.0 / np.expm1(beta * omega_arr)
    if np.isscalar(omega) or omega_arr.ndim == 0:
        return float(out)
    return out


def thermal_spectral_parts(sd: OhmicExpCutoff, bp: BathParams, omegas):
    """Return (J*n, J*(n+1)) sampled at omegas, finite down to omega = 0.

    For omega below 1e-12 * cutoff the analytic limit J(w) n(w) -> coupling /
    beta is substituted, so the samples are finite everywhere on [0, inf).
    """
    omegas = np.asarray(omegas, dtype=float)
    jn = np.empty_like(omegas)
    jp = np.empty_like(omegas)
    small = omegas < 1e-12 * sd.cutoff
    big = ~small
    j_big = sd.j(omegas[big])
    with np.errstate(over="ignore"):
        n_big = 1.0 / np.expm1(bp.beta * omegas[big])
    jn[big] = j_big * n_big
    jp[big] = j_big * (n_big + 1.0)
    # analytic w -> 0 limit: J(w) n(w) -> coupling / beta, J(w)(n+1) -> same
    jn[small] = sd.coupling / bp.beta * np.exp(-omegas[small] / sd.cutoff)
    jp[small] = jn[small]
    return jn, jp


def _eta_bounds(sd: OhmicExpCutoff, bp: BathParams):
    # n(w) e^{eta w} decays like e^{-(beta - eta + 1/cutoff) w}: safe for
    # eta <= beta.  (n+1) e^{-eta w} decays like e^{-(eta + 1/cutoff) w}:
    # negative eta is tolerated up to a fraction of 1/cutoff, enough for
    # finite-difference probes around eta = 0.
    return (-0.5 / sd.cutoff, bp.beta)


def _check_eta(sd: SpectralDensity, bp: BathParams, eta: float):
    if isinstance(sd, DiscreteModes):
        return  # finite sums converge for any real eta
    lo, hi = _eta_bounds(sd, bp)
    slack = 1e-12 * max(1.0, abs(hi))
    if not (lo - slack <= eta <= hi + slack):
        raise BathDomainError(
            f"counting field eta = {eta} outside the convergent window "
            f"[{lo:.6g}, {hi:.6g}] for this Ohmic bath"
        )


class _OhmicTables:
    """Gauss-Legendre node tables for one (spectral density, bath) context.

    Tables are keyed by (w_max, tau bucket); tau buckets are powers of two so
    a handful of tables covers any horizon.  Each table stores the weighted
    thermal factors so a correlator evaluation is two complex dot products.
    """

    def __init__(self, sd: OhmicExpCutoff, bp: BathParams):
        self.sd = sd
        self.bp = bp
        self._tables = {}
        self._lock = threading.Lock()
        self.achieved_error = 0.0
        x, w = np.polynomial.legendre.leggauss(_GAUSS_ORDER)
        self._gauss_x = 0.5 * (x + 1.0)  # nodes on [0, 1]
        self._gauss_w = 0.5 * w

    def omega_max(self, eta: float) -> float:
        cut = self.sd.cutoff
        return cut * max(40.0, 10.0 + abs(eta - self.bp.beta) * cut * 40.0)

    @staticmethod
    def _bucket(tau: float) -> float:
        mag = max(abs(tau), 1.0)
        return float(2.0 ** math.ceil(math.log2(mag)))

    def _build(self, omega_max: float, tau_hi: float, oversample: int = 1):
        smooth = min(self.sd.cutoff, 1.0 / self.bp.beta)
        panels = max(
            int(math.ceil(omega_max / (0.5 * smooth))),
            int(math.ceil(omega_max * tau_hi / _PHASE_PER_PANEL)),
            8,
        ) * oversample
        edges = np.linspace(0.0, omega_max, panels + 1)
        widths = np.diff(edges)
        nodes = edges[:-1, None] + widths[:, None] * self._gauss_x[None, :]
        weights = widths[:, None] * self._gauss_w[None, :]
        nodes = nodes.ravel()
        weights = weights.ravel()
        jn, jp = thermal_spectral_parts(self.sd, self.bp, nodes)
        return nodes, weights * jn, weights * jp

    @staticmethod
    def _eval(table, eta: float, tau: float, moment: int):
        nodes, wjn, wjp = table
        up = np.exp((eta + 1j * tau) * nodes)
        down = np.exp(-(eta + 1j * tau) * nodes)
        if moment == 0:
            return complex(wjn @ up + wjp @ down)
        return complex(wjn @ (nodes * up) - wjp @ (nodes * down))

    def table_for(self, eta: float, tau: float):
        key = (self.omega_max(eta), self._bucket(tau))
        table = self._tables.get(key)
        if table is not None:
            return table
        with self._lock:
            table = self._tables.get(key)
            if table is not None:
                return table
            omega_max, tau_hi = key
            table = self._build(omega_max, tau_hi)
            check = self._build(omega_max, tau_hi, oversample=2)
            scale = abs(self._eval(check, 0.0, 0.0, 0)) or 1.0  # 0 only when decoupled
            err = 0.0
            for eta_p in (0.0, self.bp.beta):
                for tau_p in (0.0, tau_hi / 3.0, tau_hi):
                    for moment in (0, 1):
                        a = self._eval(table, eta_p, tau_p, moment)
                        b = self._eval(check, eta_p, tau_p, moment)
                        err = max(err, abs(a - b) / scale)
            self.achieved_error = max(self.achieved_error, err)
            if err > _TABLE_RTOL:
                raise QuadratureError(
                    f"correlator quadrature did not converge on "
                    f"[0, {omega_max:.3g}] for tau up to {tau_hi:.3g}",
                    err,
                )
            self._tables[key] = table
            return table

    def correlator(self, eta: float, tau: float) -> complex:
        return self._eval(self.table_for(eta, tau), eta, tau, 0)

    def eta_derivative(self, eta: float, tau: float) -> complex:
        return self._eval(self.table_for(eta, tau), eta, tau, 1)


class _DiscreteSums:
    """Closed-form mode sums for a DiscreteModes spectral density."""

    def __init__(self, sd: DiscreteModes, bp: BathParams):
        self.omega = np.asarray(sd.frequencies, dtype=float)
        self.g2 = np.asarray(sd.couplings_sq, dtype=float)
        with np.errstate(over="ignore"):
            self.occ = 1.0 / np.expm1(bp.beta * self.omega)

    def correlator(self, eta: float, tau: float) -> complex:
        up = np.exp((eta + 1j * tau) * self.omega)
        down = np.exp(-(eta + 1j * tau) * self.omega)
        return complex(np.sum(self.g2 * (self.occ * up + (self.occ + 1.0) * down)))

    def eta_derivative(self, eta: float, tau: float) -> complex:
        up = np.exp((eta + 1j * tau) * self.omega)
        down = np.exp(-(eta + 1j * tau) * self.omega)
        return complex(
            np.sum(self.g2 * self.omega * (self.occ * up - (self.occ + 1.0) * down))
        )


@lru_cache(maxsize=64)
def _engine(sd: SpectralDensity, bp: BathParams):
    if isinstance(sd, DiscreteModes):
        return _DiscreteSums(sd, bp)
    if isinstance(sd, OhmicExpCutoff):
        return _OhmicTables(sd, bp)
    raise TypeError(f"unsupported spectral density {type(sd).__name__}")


@lru_cache(maxsize=262144)
def _opposite_sign_cached(sd, bp, eta, tau):
    return _engine(sd, bp).correlator(eta, tau)


@lru_cache(maxsize=262144)
def _eta_derivative_cached(sd, bp, eta, tau):
    return _engine(sd, bp).eta_derivative(eta, tau)


def correlation_same_sign(sd: SpectralDensity, bp: BathParams, tau: float) -> complex:
    """Same-sign autocorrelation C(tau); eta-independent (see module notes).

    Satisfies C(-tau) = conj(C(tau)) and C(0) real and nonnegative.
    """
    return _opposite_sign_cached(sd, bp, 0.0, float(tau))


def correlation_opposite_sign(
    sd: SpectralDensity, bp: BathParams, eta: float, tau: float
) -> complex:
    """Opposite-sign correlator <B^(-eta) B^(eta)(-tau)>.

    Reduces to correlation_same_sign at eta = 0 and to its complex conjugate
    at eta = beta.  For the Ohmic continuum, eta is restricted to the window
    where the tilted integrand still decays; outside it BathDomainError is
    raised.
    """
    eta = float(eta)
    _check_eta(sd, bp, eta)
    return _opposite_sign_cached(sd, bp, eta, float(tau))


def correlation_eta_derivative(
    sd: SpectralDensity, bp: BathParams, eta: float, tau: float
) -> complex:
    """Analytic d/d(eta) of the opposite-sign correlator."""
    eta = float(eta)
    _check_eta(sd, bp, eta)
    return _eta_derivative_cached(sd, bp, eta, float(tau))


def h_pm(sd: SpectralDensity, bp: BathParams, eta: float, tau: float):
    """Counting-field combinations h+ = C + <B^(-eta)B^(eta)(-tau)>, h- = C - ...

    h- vanishes identically at eta = 0; at eta = beta, h- = 2i Im C(tau).
    """
    same = correlation_same_sign(sd, bp, tau)
    opp = correlation_opposite_sign(sd, bp, eta, tau)
    return same + opp, same - opp


def discretize_ohmic(sd: OhmicExpCutoff, n_modes: int, omega_max: float) -> DiscreteModes:
    """Midpoint discretization of the Ohmic continuum into n_modes modes.

    Useful for consistency checks against the continuum correlator at times
    shorter than the recurrence time 2*pi/(mode spacing).
    """
    if n_modes < 1:
        raise BathDomainError("n_modes must be >= 1")
    edges = np.linspace(0.0, omega_max, n_modes + 1)
    centers = 0.5 * (edges[:-1] + edges[1:])
    weights = np.diff(edges) * sd.j(centers)
    return DiscreteModes(tuple(centers), tuple(weights))
