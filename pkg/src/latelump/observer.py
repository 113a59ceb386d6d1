"""
Dual observer design.

The output injection splits into the boundary term ``w2(1) = rho_o (w1(1) - y)``
and a bounded part ``L^n y = sum_i l_i phi_i^o y`` over the eigenfunctions of
the observer intermediate system.  The gains come from the adjoint
eigenvectors in the hyperbolic observer canonical form (HOCF), scaled so that
their flat output matches the one of the plant's adjoint eigenvectors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .feedback import BasisChoice, basis_eigenpairs
from .plant import (BoundaryDynamics, PlantParameters, characteristic_derivative,
                    characteristic_value, find_spectrum, output_coefficient, _residual_scale)
from .roots import Rect, find_zeros
from .spectral import (DEFAULT_QUADRATURE, EigenPair, GaussLegendre, Spectrum, SpectrumLabel,
                       Window, snap_real)
from .target import TargetDynamics, desired_boundary_unbounded_coefficient

__all__ = ["HocfAdjointEigenvector", "ObserverApproximation", "hccf_flat_output",
           "adjoint_flat_scaling", "observer_modal_gain", "design_observer",
           "observer_closed_loop_spectrum", "observer_characteristic", "dual_feedback"]


@dataclass(frozen=True)
class HocfAdjointEigenvector:
    """
    Adjoint eigenvector ``r (1, lb, ..., lb^(N-1), theta -> lb^N exp(lb (theta - theta_-)))``
    on ``theta in [theta_-, theta_+] = [-tau, tau]``, ``lb = conj(lambda)``.

    The exponential is anchored at ``theta_-``; this is the reading under
    which the gains below reproduce the dual of the state feedback exactly.
    """
    r: complex
    lambda_bar: complex
    tau: float
    N: int = 1

    @property
    def theta_minus(self) -> float:
        return -self.tau

    @property
    def theta_plus(self) -> float:
        return self.tau

    def lumped(self) -> np.ndarray:
        return self.r * self.lambda_bar ** np.arange(self.N)

    def distributed(self, theta):
        theta = np.asarray(theta, dtype=float)
        lb = self.lambda_bar
        return self.r * lb ** self.N * np.exp(lb * (theta - self.theta_minus))


def _gl(a, b, nodes=64):
    x, w = np.polynomial.legendre.leggauss(nodes)
    return 0.5 * (b - a) * (x + 1) + a, 0.5 * (b - a) * w


def hccf_flat_output(h, theta_minus: float | None = None, N: int | None = None) -> complex:
    """
    Flat output ``sum_{i<N} (-theta_-)^i / i! h_(i+1) + int_{theta_-}^0 (-theta)^(N-1)/(N-1)! h_(N+1)``.

    ``h`` is a :class:`HocfAdjointEigenvector` or a pair ``(lumped, func)``
    with ``lumped`` of length ``N``.  For ``N = 0`` the result is ``func(0)``.
    """
    if isinstance(h, HocfAdjointEigenvector):
        lumped, func = h.lumped(), h.distributed
        theta_minus, N = h.theta_minus, h.N
    else:
        lumped, func = h
        lumped = np.atleast_1d(np.asarray(lumped, dtype=complex))
        N = lumped.size if N is None else N
        if theta_minus is None:
            raise ValueError("theta_minus required for coordinate vectors")
    if N == 0:
        return complex(np.asarray(func(np.array([0.0])))[0])
    val = sum((-theta_minus) ** i / math.factorial(i) * lumped[i] for i in range(N))
    th, wt = _gl(theta_minus, 0.0)
    kern = (-th) ** (N - 1) / math.factorial(N - 1)
    return complex(val + wt @ (kern * func(th)))


def _flat_prefactor(p: PlantParameters, rho: float) -> float:
    """``(beta tau - rho) / (2 beta tau)``, i.e. ``1 / (mu + 1)``."""
    bt = p.beta * p.tau
    return (bt - rho) / (2 * bt)


def adjoint_flat_scaling(p: PlantParameters, t_o: TargetDynamics, pair: EigenPair,
                         tiny: float = 1e-300) -> complex:
    """
    Scaling ``r_i`` matching the HOCF flat output with the plant's adjoint flat output.

    ``Psi_xi (r (1, theta -> lb e^{lb (theta + tau)})) = r e^{lb tau}`` must
    equal ``(beta tau - rho)/(2 beta tau) psi_i,3``.
    """
    if t_o.N != 1:
        raise NotImplementedError("observer scaling is available for N = 1 only")
    rho = desired_boundary_unbounded_coefficient(t_o, p)
    target = _flat_prefactor(p, rho) * pair.adjoint_eigenfunction.w3
    lb = np.conj(complex(pair.lam))
    den = np.exp(lb * t_o.tau)
    if abs(den) < tiny:
        raise ZeroDivisionError("vanishing flat-output denominator")
    return complex(target / den)


def observer_modal_gain(p: PlantParameters, t_o: TargetDynamics, hv: HocfAdjointEigenvector) -> complex:
    """
    ``l_i = -conj(h_2(theta_+)) - <a^do, h>``.

    ``a^do = (kappa (1 + mu), kappa + mu delta_{theta_-})``; the pairing
    conjugates ``h``, the Dirac part is a point evaluation at ``theta_-`` and
    the regular part is ``kappa int h_2``.
    """
    kappa = t_o.kappa[0] / t_o.kappa[1]
    mu = t_o.mu
    h1 = hv.lumped()[0]
    th, wt = _gl(hv.theta_minus, hv.theta_plus)
    integral = wt @ hv.distributed(th)
    pairing = (kappa * (1 + mu) * np.conj(h1) + kappa * np.conj(integral)
               + mu * np.conj(hv.distributed(hv.theta_minus)))
    return complex(-np.conj(hv.distributed(hv.theta_plus)) - pairing)


@dataclass
class ObserverApproximation:
    rho_o: float
    n: int
    r: np.ndarray
    l: np.ndarray
    pairs: list
    plant: PlantParameters
    target: TargetDynamics
    quad: GaussLegendre = DEFAULT_QUADRATURE
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=complex).ravel()
        self.l = np.asarray(self.l, dtype=complex).ravel()
        if not (self.r.size == self.l.size == len(self.pairs) == self.n):
            raise ValueError("r, l, pairs and n disagree")

    @property
    def c(self) -> np.ndarray:
        """Output coefficients ``phi_i,1(1)``."""
        return np.array([output_coefficient(q) for q in self.pairs], dtype=complex)

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.array([q.lam for q in self.pairs], dtype=complex)


def design_observer(p: PlantParameters, t_o: TargetDynamics, n: int, w: Window | None = None,
                    quad: GaussLegendre | None = None, zero_gain: bool = False) -> ObserverApproximation:
    """Order-``n`` modal observer gains over the observer intermediate eigenbasis."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    quad = quad or DEFAULT_QUADRATURE
    w = w or Window(-30.0, 200.0)
    rho = desired_boundary_unbounded_coefficient(t_o, p)
    if n == 0:
        return ObserverApproximation(rho, 0, [], [], [], p, t_o, quad)
    pairs, _ = basis_eigenpairs(p, t_o, BasisChoice.Intermediate, n, w, quad=quad)
    r = np.array([adjoint_flat_scaling(p, t_o, q) for q in pairs])
    hv = [HocfAdjointEigenvector(ri, np.conj(q.lam), p.tau) for ri, q in zip(r, pairs)]
    l = np.zeros(n, complex) if zero_gain else np.array([observer_modal_gain(p, t_o, h) for h in hv])
    return ObserverApproximation(rho, n, r, l, pairs, p, t_o, quad)


def observer_characteristic(obs: ObserverApproximation, lam, derivative=False):
    """
    ``Delta(lam; rho_o) (1 - sum_i l_i c_i / (lam - lam_i))`` (entire).

    The quotients ``Delta / (lam - lam_i)`` are continued by ``Delta'(lam_i)``
    at the removable points.
    """
    p = obs.plant
    bd = BoundaryDynamics(obs.rho_o)
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    D = characteristic_value(p, bd, lam)
    Dp = characteristic_derivative(p, bd, lam)
    lc = obs.l * obs.c
    lams = obs.eigenvalues
    diff = lam[:, None] - lams[None, :]
    near = np.abs(diff) < 1e-10 * np.maximum(1.0, np.abs(lams))[None, :]
    safe = np.where(near, 1.0, diff)
    q = np.where(near, characteristic_derivative(p, bd, lams)[None, :], D[:, None] / safe)
    val = D - q @ lc
    if not derivative:
        return val
    # d/dlam [D/(lam-l)] = (D' (lam-l) - D)/(lam-l)^2; near lam_i use D''/2 ~ neglected (Newton only)
    dq = np.where(near, 0.0, (Dp[:, None] * safe - D[:, None]) / safe ** 2)
    return val, Dp - dq @ lc


def observer_closed_loop_spectrum(obs: ObserverApproximation, w: Window,
                                  intermediate: Spectrum | None = None,
                                  method: str = "matrix") -> Spectrum:
    """
    Spectrum of the observer error dynamics ``A^o + L^n C`` in ``w``.

    ``"matrix"`` diagonalizes ``diag(lam_i) + l c^T`` and unites the
    observer intermediate eigenvalues beyond ``n``; ``"char"`` searches zeros
    of :func:`observer_characteristic`.
    """
    p = obs.plant
    if intermediate is None:
        intermediate = find_spectrum(p, BoundaryDynamics(obs.rho_o), w,
                                     label=SpectrumLabel.ObserverIntermediate)
    label = SpectrumLabel.ObserverClosedLoop
    if obs.n == 0 or not np.any(obs.l * obs.c):
        return intermediate.relabeled(label)
    if method == "matrix":
        lams = intermediate.eigenvalues
        m = min(obs.n, lams.size)
        if not np.allclose(obs.eigenvalues[:m], lams[:m], rtol=1e-12, atol=0):
            raise ValueError("observer basis and intermediate spectrum are not aligned")
        head = snap_real(np.linalg.eigvals(np.diag(obs.eigenvalues) + np.outer(obs.l, obs.c)))
        vals = np.concatenate([head[w.contains(head)], lams[obs.n:]])
        return Spectrum(label, vals, w, meta={"n": obs.n, "path": "matrix"})
    if method != "char":
        raise ValueError(f"unknown method {method!r}")
    bd = BoundaryDynamics(obs.rho_o)
    scale = 1.0 + float(np.abs(obs.l * obs.c).sum())
    zeros, count = find_zeros(
        lambda z: observer_characteristic(obs, z),
        lambda z: observer_characteristic(obs, z, derivative=True)[1],
        Rect(w.re_min, w.re_max, -w.im_max, w.im_max), step=0.25 / p.tau,
        residual_scale=lambda z: np.maximum(1.0, 1e-2 * scale * _residual_scale(p, bd, z)))
    return Spectrum(label, snap_real(zeros), w, meta={"n": obs.n, "path": "characteristic",
                                                      "argument_principle_count": count})


def dual_feedback(obs: ObserverApproximation, w: Window | None = None):
    """
    State feedback designed on the adjoint data of ``obs``.

    Its basis holds the intermediate eigenpairs at ``conj(lam_i^o)``; the
    conjugate of its closed-loop spectrum equals the observer spectrum.
    """
    from .feedback import FeedbackApproximation, build_bounded_kernel, modal_gain
    from .plant import adjoint_eigenfunction, eigenfunction
    from .spectral import biorthonormalize
    p, t = obs.plant, obs.target
    bd = BoundaryDynamics(obs.rho_o)
    kern = build_bounded_kernel(p, t)
    raw = [EigenPair(np.conj(q.lam), eigenfunction(p, np.conj(q.lam)),
                     adjoint_eigenfunction(p, bd, q.lam)) for q in obs.pairs]
    pairs = biorthonormalize(raw, obs.quad)
    gains = [modal_gain(q, kern, p.tau) for q in pairs]
    return FeedbackApproximation(obs.rho_o, obs.n, BasisChoice.Intermediate, pairs, gains,
                                 p, kern, t, obs.quad)
