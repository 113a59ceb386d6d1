"""
Pneumatic transport plant

    dw1/dt = alpha dw2/dz,   dw2/dt = beta dw1/dz,   dw3/dt = gamma w2(0)
    w3 = w1(0),   u = w2(1),   y = w1(1)

together with the boundary-feedback-modified dynamics ``w2(1) = rho w1(1)``.

All eigenfunctions come from the flat parameterization with flat output
``w3``: substituting ``chi(t) = exp(lambda t)`` gives closed-form exponential
sums normalized to ``w3 = 1``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .roots import Rect, find_zeros
from .spectral import (DEFAULT_QUADRATURE, EigenPair, ExpSum, GaussLegendre,
                       Spectrum, SpectrumLabel, StateFunction, Window,
                       biorthonormalize, snap_real)

__all__ = ["PlantParameters", "BoundaryDynamics", "InconsistencyError",
           "characteristic_value", "characteristic_derivative", "find_spectrum",
           "eigenfunction", "eigenfunction_dlam", "adjoint_eigenfunction",
           "modal_input_coefficient", "apply_generator", "apply_adjoint_generator",
           "eigenpairs", "output_coefficient", "PAPER_PLANT"]


class InconsistencyError(ValueError):
    """A value claimed to be an eigenvalue fails its characteristic equation."""


@dataclass(frozen=True)
class PlantParameters:
    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError("alpha and beta must be positive (hyperbolicity)")
        if self.gamma == 0:
            raise ValueError("gamma must be nonzero")

    @property
    def v(self) -> float:
        """Propagation speed."""
        return float(np.sqrt(self.alpha * self.beta))

    @property
    def tau(self) -> float:
        """Transport delay ``1 / v``."""
        return 1.0 / self.v


PAPER_PLANT = PlantParameters(11.0, 21.0, 31.0)


@dataclass(frozen=True)
class BoundaryDynamics:
    """Boundary condition ``w2(1) = rho * w1(1)``; ``rho = 0`` is the open loop."""
    rho: complex = 0.0

    def __post_init__(self):
        if not np.isfinite(complex(self.rho)):
            raise ValueError("rho must be finite")

    def adjoint(self) -> "BoundaryDynamics":
        return BoundaryDynamics(np.conj(complex(self.rho)))


def _exp_pair(p: PlantParameters, lam):
    lam = np.asarray(lam, dtype=complex)
    e = np.exp(lam * p.tau)
    return lam, e, 1.0 / e


def characteristic_value(p: PlantParameters, bd: BoundaryDynamics, lam):
    r"""
    :math:`\Delta(\lambda) = w_2(1) - \rho w_1(1)` of the flat eigenfunction.

    Zeros are exactly the eigenvalues of the dynamics with boundary
    condition ``w2(1) = rho w1(1)``.
    """
    lam, ep, em = _exp_pair(p, lam)
    ch, sh = 0.5 * (ep + em), 0.5 * (ep - em)
    bgt = p.beta * p.gamma * p.tau
    rho = complex(bd.rho)
    return (p.beta * p.tau * sh + lam / p.gamma * ch) - rho * (ch + lam / bgt * sh)


def characteristic_derivative(p: PlantParameters, bd: BoundaryDynamics, lam):
    lam, ep, em = _exp_pair(p, lam)
    ch, sh = 0.5 * (ep + em), 0.5 * (ep - em)
    t = p.tau
    bgt = p.beta * p.gamma * t
    rho = complex(bd.rho)
    d_w2 = p.beta * t * t * ch + ch / p.gamma + lam / p.gamma * t * sh
    d_w1 = t * sh + sh / bgt + lam / bgt * t * ch
    return d_w2 - rho * d_w1


def _flat_coefficients(p: PlantParameters, lam: complex):
    """Exponential-sum coefficients of the flat eigenfunction."""
    lam = complex(lam)
    bgt = p.beta * p.gamma * p.tau
    s = lam * p.tau
    w1 = ExpSum([0.5 + 0.5 * lam / bgt, 0.5 - 0.5 * lam / bgt], [s, -s])
    w2 = ExpSum([0.5 * p.beta * p.tau + 0.5 * lam / p.gamma,
                 -0.5 * p.beta * p.tau + 0.5 * lam / p.gamma], [s, -s])
    return w1, w2


def eigenfunction(p: PlantParameters, lam: complex) -> StateFunction:
    """
    Flat-normalized solution of ``A phi = lam phi`` without the z = 1 condition.

    ``w1 = cosh(lam tau z) + lam/(beta gamma tau) sinh(lam tau z)``,
    ``w2 = beta tau sinh(lam tau z) + lam/gamma cosh(lam tau z)``, ``w3 = 1``.
    """
    w1, w2 = _flat_coefficients(p, lam)
    return StateFunction(w1, w2, 1.0)


def eigenfunction_values(p: PlantParameters, lam, z):
    """``(w1, w2)`` of the flat eigenfunction for arrays ``lam`` (rows) and ``z``."""
    lam = np.asarray(lam, dtype=complex)[..., None]
    s = lam * p.tau * np.asarray(z)
    ch, sh = np.cosh(s), np.sinh(s)
    bgt = p.beta * p.gamma * p.tau
    return ch + lam / bgt * sh, p.beta * p.tau * sh + lam / p.gamma * ch


def eigenfunction_dlam_values(p: PlantParameters, lam, z):
    """Derivative of :func:`eigenfunction_values` with respect to ``lam``."""
    lam = np.asarray(lam, dtype=complex)[..., None]
    z = np.asarray(z)
    tz = p.tau * z
    s = lam * tz
    ch, sh = np.cosh(s), np.sinh(s)
    bgt = p.beta * p.gamma * p.tau
    d1 = tz * sh + sh / bgt + lam / bgt * tz * ch
    d2 = p.beta * p.tau * tz * ch + ch / p.gamma + lam / p.gamma * tz * sh
    return d1, d2


def eigenfunction_dlam(p: PlantParameters, lam: complex) -> StateFunction:
    lam = complex(lam)
    return StateFunction(lambda z: eigenfunction_dlam_values(p, lam, z)[0],
                         lambda z: eigenfunction_dlam_values(p, lam, z)[1], 0.0)


def apply_generator(p: PlantParameters, f: StateFunction) -> StateFunction:
    """Formal generator ``(alpha w2', beta w1', gamma w2(0))`` on closed-form states."""
    d1, d2 = f.w1.derivative(), f.w2.derivative()
    return StateFunction(d2 * p.alpha, d1 * p.beta, p.gamma * complex(f.w2(0.0)))


def apply_adjoint_generator(p: PlantParameters, g: StateFunction) -> StateFunction:
    """Formal adjoint ``(-beta w2', -alpha w1', -beta w2(0))``."""
    d1, d2 = g.w1.derivative(), g.w2.derivative()
    return StateFunction(d2 * -p.beta, d1 * -p.alpha, -p.beta * complex(g.w2(0.0)))


def _residual_scale(p, bd, lam):
    lam = np.asarray(lam, dtype=complex)
    grow = np.exp(np.abs(lam.real) * p.tau)
    return grow * (p.beta * p.tau + np.abs(lam) / abs(p.gamma)) * (1.0 + abs(complex(bd.rho)))


def adjoint_eigenfunction(p: PlantParameters, bd: BoundaryDynamics, lambda_star: complex,
                          rtol: float = 1e-8) -> StateFunction:
    """
    Unnormalized eigenfunction of the adjoint for eigenvalue ``lambda_star``.

    The substitution ``(alpha w1*, -beta w2*, gamma w3*)`` maps the adjoint
    dynamics onto the primal form with boundary condition
    ``w2(1) = conj(rho) w1(1)``, so the primal closed form is reused.  The
    result satisfies ``gamma w3* = alpha w1*(0)`` and
    ``alpha conj(rho) w1*(1) + beta w2*(1) = 0``.

    Raises:
        InconsistencyError: ``lambda_star`` is not an eigenvalue of the adjoint.
    """
    lambda_star = complex(lambda_star)
    adj = bd.adjoint()
    res = abs(characteristic_value(p, adj, lambda_star))
    if res > rtol * _residual_scale(p, adj, lambda_star):
        raise InconsistencyError(
            f"{lambda_star:.10g} is not an adjoint eigenvalue (residual {res:.2e})")
    w1, w2 = _flat_coefficients(p, lambda_star)
    return StateFunction(w1 * (1.0 / p.alpha), w2 * (-1.0 / p.beta), 1.0 / p.gamma)


def modal_input_coefficient(pair: EigenPair, p: PlantParameters) -> complex:
    """``b_i = alpha * conj(psi_i,1(1))``: pairing of the boundary input with ``psi_i``."""
    return complex(p.alpha * np.conj(pair.adjoint_eigenfunction.w1(1.0)))


def output_coefficient(pair: EigenPair) -> complex:
    """``c_i = phi_i,1(1)``: boundary measurement of the eigenfunction."""
    return complex(pair.eigenfunction.w1(1.0))


def find_spectrum(p: PlantParameters, bd: BoundaryDynamics, w: Window,
                  label: SpectrumLabel | None = None) -> Spectrum:
    """
    All eigenvalues of the ``(p, bd)`` dynamics inside the window.

    Raises:
        IncompleteSearchError, EdgeZeroError, SimplicityError: see
            :func:`latelump.roots.find_zeros`.
    """
    if label is None:
        label = SpectrumLabel.OpenLoop if complex(bd.rho) == 0 else SpectrumLabel.Intermediate
    rect = Rect(w.re_min, w.re_max, -w.im_max, w.im_max)
    zeros, count = find_zeros(
        lambda lam: characteristic_value(p, bd, lam),
        lambda lam: characteristic_derivative(p, bd, lam),
        rect, step=0.25 / p.tau,
        residual_scale=lambda lam: np.maximum(1.0, 1e-3 * _residual_scale(p, bd, lam)))
    spec = Spectrum(label, snap_real(zeros), w, meta={"argument_principle_count": count})
    spec.assert_simple(rtol=1e-6)
    return spec


def eigenpairs(p: PlantParameters, bd: BoundaryDynamics, spectrum: Spectrum, n: int,
               quad: GaussLegendre | None = None) -> list[EigenPair]:
    """First ``n`` (mode order) normalized eigenpairs of the ``(p, bd)`` dynamics."""
    if n > len(spectrum):
        raise ValueError(f"window holds {len(spectrum)} eigenvalues, {n} requested")
    raw = [EigenPair(lam, eigenfunction(p, lam), adjoint_eigenfunction(p, bd, np.conj(lam)))
           for lam in spectrum.eigenvalues[:n]]
    return biorthonormalize(raw, quad or DEFAULT_QUADRATURE)
