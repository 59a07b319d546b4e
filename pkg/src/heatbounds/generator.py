"""Time-dependent generator of the counting-field Bloch equation.

The modified Bloch vector v = (v_x, v_y, v_z, v_0) obeys dv/dt = G(t) v with

    G(t) = [[a-,       -w0 + b-,  0,   0 ],
            [w0 - b+,   a+,       0,   0 ],
            [0,         0,        a+,  c+],
            [0,         0,        c-,  a-]]

where the six coefficients are time integrals, from zero initial values, of
bath-correlator combinations:

    da+-/dt = -[h+- + conj(h+-)] cos(w0 t)
    db+-/dt = -[h+- + conj(h+-)] sin(w0 t)
    dc+-/dt = -i [h+- - conj(h+-)] sin(w0 t)

with h+- = h_pm(sd, bp, eta, t).  Pairing each h with its own complex
conjugate is what the second-order trace over a thermal environment
produces; it keeps G(t) real for every real counting field (the tilted
density operator is Hermitian), makes the fourth row vanish identically at
eta = 0 (trace preservation), and is confirmed to fourth order in the
coupling against exact reference dynamics in the test suite.

The block-diagonal shape holds for any transversal coupling operator (zero
overlap with sigma_z); none of the assembly routines ever look at the system
state.

Coefficients are carried as ODE state next to the Bloch vector: the rates
above are local in t, so this avoids nested quadrature and puts the
coefficients under the integrator's error control.  The derivative of G
with respect to the counting field at eta = 0, needed for heat via the
sensitivity system, is built from six additional coefficient states whose
rates are the eta-derivatives of the expressions above.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bath import BathParams, SpectralDensity, correlation_eta_derivative, h_pm

__all__ = [
    "GeneratorCoefficients",
    "COEFFICIENT_ORDER",
    "coefficient_rates",
    "sensitivity_coefficient_rates",
    "assemble_G",
    "assemble_dG_deta",
]

#: storage order used by every array of six coefficients in this package.
COEFFICIENT_ORDER = ("a_plus", "a_minus", "b_plus", "b_minus", "c_plus", "c_minus")


@dataclass
class GeneratorCoefficients:
    """The six generator coefficients at one (eta, t)."""

    a_plus: complex
    a_minus: complex
    b_plus: complex
    b_minus: complex
    c_plus: complex
    c_minus: complex
    t: float = 0.0

    @classmethod
    def zero(cls, t: float = 0.0) -> "GeneratorCoefficients":
        return cls(0j, 0j, 0j, 0j, 0j, 0j, t)

    @classmethod
    def from_array(cls, values, t: float = 0.0) -> "GeneratorCoefficients":
        values = np.asarray(values, dtype=complex)
        if values.shape != (6,):
            raise ValueError(f"expected 6 coefficients, got shape {values.shape}")
        return cls(*(complex(v) for v in values), t=t)

    def to_array(self) -> np.ndarray:
        return np.array(
            [self.a_plus, self.a_minus, self.b_plus, self.b_minus,
             self.c_plus, self.c_minus],
            dtype=complex,
        )


def coefficient_rates(
    sd: SpectralDensity, bp: BathParams, eta: float, t: float, omega0: float = 1.0
) -> np.ndarray:
    """Time derivatives of the six coefficients, in COEFFICIENT_ORDER.

    Integrating these from zero initial values yields the coefficients
    entering G(t).  At eta = 0 the rates of a- and c- vanish identically.
    """
    h_plus, h_minus = h_pm(sd, bp, eta, t)
    sum_p = h_plus + np.conj(h_plus)
    sum_m = h_minus + np.conj(h_minus)
    diff_p = h_plus - np.conj(h_plus)
    diff_m = h_minus - np.conj(h_minus)
    ct = np.cos(omega0 * t)
    st = np.sin(omega0 * t)
    return np.array(
        [-sum_p * ct, -sum_m * ct,
         -sum_p * st, -sum_m * st,
         -1j * diff_p * st, -1j * diff_m * st],
        dtype=complex,
    )


def sensitivity_coefficient_rates(
    sd: SpectralDensity, bp: BathParams, eta: float, t: float, omega0: float = 1.0
) -> np.ndarray:
    """d/d(eta) of coefficient_rates, analytic (no finite differencing).

    Only the opposite-sign correlator depends on eta, so d(h+-)/d(eta) =
    +-dD with dD = correlation_eta_derivative.
    """
    dd = correlation_eta_derivative(sd, bp, eta, t)
    sum_d = dd + np.conj(dd)
    diff_d = dd - np.conj(dd)
    ct = np.cos(omega0 * t)
    st = np.sin(omega0 * t)
    return np.array(
        [-sum_d * ct, +sum_d * ct,
         -sum_d * st, +sum_d * st,
         -1j * diff_d * st, +1j * diff_d * st],
        dtype=complex,
    )


def _block_matrix(coeffs: np.ndarray, omega0: float) -> np.ndarray:
    a_p, a_m, b_p, b_m, c_p, c_m = coeffs
    return np.array(
        [[a_m, -omega0 + b_m, 0.0, 0.0],
         [omega0 - b_p, a_p, 0.0, 0.0],
         [0.0, 0.0, a_p, c_p],
         [0.0, 0.0, c_m, a_m]],
        dtype=complex,
    )


def assemble_G(coeffs, omega0: float, eta: float | None = None) -> np.ndarray:
    """Assemble the 4x4 generator from coefficients computed at (eta, t).

    Accepts a GeneratorCoefficients or a length-6 array in COEFFICIENT_ORDER.
    The (x,y) and (z,v0) blocks never couple; with all coefficients zero the
    result is the bare precession matrix.  The eta argument is informational
    only (the caller guarantees the coefficients belong to it).
    """
    if isinstance(coeffs, GeneratorCoefficients):
        coeffs = coeffs.to_array()
    else:
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.shape != (6,):
            raise ValueError(f"expected 6 coefficients, got shape {coeffs.shape}")
    return _block_matrix(coeffs, omega0)


def assemble_dG_deta(sensitivity_coeffs) -> np.ndarray:
    """Assemble dG/d(eta) from the six sensitivity coefficient states.

    Same block layout as assemble_G with the precession entries zeroed
    (omega0 carries no counting-field dependence).
    """
    if isinstance(sensitivity_coeffs, GeneratorCoefficients):
        sensitivity_coeffs = sensitivity_coeffs.to_array()
    else:
        sensitivity_coeffs = np.asarray(sensitivity_coeffs, dtype=complex)
        if sensitivity_coeffs.shape != (6,):
            raise ValueError(
                f"expected 6 coefficients, got shape {sensitivity_coeffs.shape}"
            )
    return _block_matrix(sensitivity_coeffs, 0.0)
