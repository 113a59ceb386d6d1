"""
Late-lumping state feedback for the pneumatic plant.

The control law splits into an unbounded part, realized exactly as the
boundary reflection ``u = rho w1(1)``, and a bounded part ``K x`` acting on
the flat output as ``c_+ chi(t + tau) + c_- chi(t - tau)``.  Only the bounded
part is approximated, by ``K^n x = sum_i <x, psi_i> k_i`` over one of three
eigenbases.

Closed-loop spectra are computed two ways.  The matrix path diagonalizes
``diag(lambda_i) + b k^T`` in the intermediate eigenbasis.  The
characteristic path searches zeros of the entire function

    Delta_cl(lam) = Delta(lam; rho) - sum_i k_i <phi(lam), psi_i>,

which is exact for any basis.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from .plant import (BoundaryDynamics, PlantParameters, adjoint_eigenfunction,
                    characteristic_derivative, characteristic_value, eigenfunction,
                    eigenfunction_dlam_values, eigenfunction_values, find_spectrum,
                    modal_input_coefficient, _residual_scale)
from .roots import Rect, find_zeros
from .spectral import (DEFAULT_QUADRATURE, EigenPair, ExpSum, GaussLegendre, Spectrum,
                       SpectrumLabel, StateFunction, Window, biorthonormalize, gram_matrix,
                       inner_product, snap_real)
from .target import TargetDynamics, desired_boundary_unbounded_coefficient, desired_spectrum

__all__ = ["BoundedKernel", "BasisChoice", "FeedbackApproximation", "ReducedModel",
           "PoleProximityError", "build_bounded_kernel", "kernel_representer", "modal_gain",
           "desired_adjoint_eigenfunction", "basis_eigenpairs", "design_feedback",
           "assemble_reduced", "closed_loop_spectrum_matrix", "closed_loop_characteristic",
           "characteristic_g", "closed_loop_spectrum_char", "kernel_defect",
           "match_spectra", "hausdorff", "closed_loop_spectrum"]

logger = logging.getLogger(__name__)


class PoleProximityError(ArithmeticError):
    """``g`` evaluated too close to a pole (a reference eigenvalue)."""


@dataclass(frozen=True)
class BoundedKernel:
    """Bounded feedback ``K x = c_plus chi(t + tau) + c_minus chi(t - tau)``."""
    c_plus: complex
    c_minus: complex

    def __post_init__(self):
        if not (np.isfinite(complex(self.c_plus)) and np.isfinite(complex(self.c_minus))):
            raise ValueError("kernel coefficients must be finite")

    def on_exponential(self, lam, tau):
        """Value of the kernel on the flat trajectory ``chi(t) = exp(lam t)`` at ``t = 0``."""
        lam = np.asarray(lam, dtype=complex)
        return self.c_plus * np.exp(lam * tau) + self.c_minus * np.exp(-lam * tau)

    @property
    def is_zero(self) -> bool:
        return self.c_plus == 0 and self.c_minus == 0


def build_bounded_kernel(p: PlantParameters, t: TargetDynamics) -> BoundedKernel:
    """
    Bounded part of the flatness-based control law for a first-order target.

    ``c_+ = (beta gamma tau - kappa) / (gamma (mu + 1))`` and
    ``c_- = -mu (beta gamma tau + kappa) / (gamma (mu + 1))`` with
    ``kappa = kappa_0 / kappa_1``.  This sign of ``c_-`` makes the closed
    loop characteristic function equal to
    ``(lam + kappa)(e^{lam tau} + mu e^{-lam tau}) / (gamma (mu + 1))``.
    """
    if t.N != 1:
        raise NotImplementedError("explicit control law is available for N = 1 only")
    kappa = t.kappa[0] / t.kappa[1]
    mu = t.mu
    bgt = p.beta * p.gamma * p.tau
    den = p.gamma * (mu + 1.0)
    return BoundedKernel((bgt - kappa) / den, -mu * (bgt + kappa) / den)


def kernel_representer(p: PlantParameters, kern: BoundedKernel) -> StateFunction:
    """
    State ``k`` with ``K x = <x, k>``.

    The flat output obeys ``a + (alpha/gamma) a' = w1 + w2/(beta tau)`` on
    ``[0, 1]`` with ``a(0) = w3`` and ``chi(t + tau) = a(1)`` (likewise with
    the minus sign for ``chi(t - tau)``); solving by variation of constants
    gives an exponential kernel.
    """
    g, a = p.gamma, p.alpha
    rate = g / a
    cs, cd = np.conj(complex(kern.c_plus) + kern.c_minus), np.conj(complex(kern.c_plus) - kern.c_minus)
    e = np.exp(-rate)
    k1 = ExpSum([cs * rate * e], [rate])
    k2 = ExpSum([cd * rate / (p.beta * p.tau) * e], [rate])
    return StateFunction(k1, k2, cs * e)


def modal_gain(pair: EigenPair, kern: BoundedKernel, t: TargetDynamics | float) -> complex:
    """``k_i = phi_i,3 (c_+ e^{lam_i tau} + c_- e^{-lam_i tau})`` for flat-normalized ``phi_i``."""
    tau = t.tau if isinstance(t, TargetDynamics) else float(t)
    return complex(pair.eigenfunction.w3 * kern.on_exponential(pair.lam, tau))


class BasisChoice(str, enum.Enum):
    OpenLoop = "OpenLoop"
    Intermediate = "Intermediate"
    Desired = "Desired"


def _resolvent_adjoint(p: PlantParameters, rho: complex, k: StateFunction, mu: complex) -> StateFunction:
    r"""
    Solve :math:`(\mu - A^*) g = k` for the adjoint generator with boundary
    coefficient ``rho``; ``k`` must have exponential-sum components.
    """
    a, b, tau = p.alpha, p.beta, p.tau
    rc = np.conj(complex(rho))
    rates = np.unique(np.concatenate([k.w1.rates, k.w2.rates]))
    p1c, p2c = [], []
    for c in rates:
        K1 = k.w1.coefs[k.w1.rates == c].sum()
        K2 = k.w2.coefs[k.w2.rates == c].sum()
        m = np.array([[mu, b * c], [a * c, mu]], dtype=complex)
        if abs(np.linalg.det(m)) < 1e-12 * max(1.0, abs(mu)) ** 2:
            raise ArithmeticError(f"resolvent forcing resonates at {mu}")
        P1, P2 = np.linalg.solve(m, [K1, K2])
        p1c.append(P1)
        p2c.append(P2)
    P1 = ExpSum(p1c, rates)
    P2 = ExpSum(p2c, rates)
    s = mu * tau
    ch, sh = np.cosh(s), np.sinh(s)
    sys = np.array([[-a, 0.0, p.gamma],
                    [0.0, -a * b * tau, mu],
                    [a * rc * ch - a * b * tau * sh, a * rc * sh - a * b * tau * ch, 0.0]],
                   dtype=complex)
    rhs = np.array([a * P1(0.0), k.w3 - b * P2(0.0), -a * rc * P1(1.0) - b * P2(1.0)], dtype=complex)
    A, B, g3 = np.linalg.solve(sys, rhs)
    hom1 = ExpSum([0.5 * (A + B), 0.5 * (A - B)], [s, -s])
    hom2 = ExpSum([-0.5 * a * tau * (A + B), 0.5 * a * tau * (A - B)], [s, -s])
    return StateFunction(hom1 + P1, hom2 + P2, g3)


def desired_adjoint_eigenfunction(p: PlantParameters, rho: complex, kern: BoundedKernel,
                                  lam: complex) -> StateFunction:
    """
    Unnormalized adjoint eigenfunction of the desired dynamics at ``conj(lam)``.

    The adjoint of ``A^c + B K`` acts as ``A^c* g + alpha g1(1) k``, so its
    eigenfunctions are multiples of ``R(conj(lam), A^c*) k``.
    """
    return _resolvent_adjoint(p, rho, kernel_representer(p, kern), np.conj(complex(lam)))


def _collect_spectrum(finder, n: int, w: Window, im_step: float):
    """Grow the window height until at least ``n + 1`` eigenvalues are enclosed."""
    im_max = w.im_max
    for _ in range(40):
        spec = finder(Window(w.re_min, im_max, w.re_max))
        if len(spec) > n:
            return spec
        im_max += im_step * max(1, (n + 1 - len(spec)) // 2 + 1)
    raise RuntimeError(f"could not enclose {n} eigenvalues")


def basis_eigenpairs(p: PlantParameters, t: TargetDynamics, basis: BasisChoice, n: int,
                     w: Window, kern: BoundedKernel | None = None,
                     quad: GaussLegendre | None = None) -> tuple[list[EigenPair], Spectrum]:
    """
    First ``n`` normalized eigenpairs (mode order) of the chosen basis.

    The search window is enlarged vertically when ``w`` holds fewer than
    ``n`` eigenvalues, so the pairs never depend on where ``w`` cuts.
    """
    quad = quad or DEFAULT_QUADRATURE
    basis = BasisChoice(basis)
    rho = desired_boundary_unbounded_coefficient(t, p)
    step = np.pi / p.tau
    if basis is BasisChoice.Desired:
        kern = kern or build_bounded_kernel(p, t)
        spec = _collect_spectrum(lambda ww: desired_spectrum(t, ww), n, w, step)
        raw = [EigenPair(lam, eigenfunction(p, lam), desired_adjoint_eigenfunction(p, rho, kern, lam))
               for lam in spec.eigenvalues[:n]]
        return biorthonormalize(raw, quad), spec
    bd = BoundaryDynamics(0.0 if basis is BasisChoice.OpenLoop else rho)
    spec = _collect_spectrum(lambda ww: find_spectrum(p, bd, ww), n, w, step)
    raw = [EigenPair(lam, eigenfunction(p, lam), adjoint_eigenfunction(p, bd, np.conj(lam)))
           for lam in spec.eigenvalues[:n]]
    return biorthonormalize(raw, quad), spec


@dataclass
class FeedbackApproximation:
    """
    Feedback ``u = rho w1(1) + sum_i <x, psi_i> k_i`` of order ``n``.

    ``plant``, ``kernel``, ``tau`` and ``quad`` are carried so the closed loop
    can be evaluated without re-deriving the design.
    """
    rho: complex
    n: int
    basis: BasisChoice
    pairs: list
    gains: np.ndarray
    plant: PlantParameters
    kernel: BoundedKernel
    target: TargetDynamics
    quad: GaussLegendre = DEFAULT_QUADRATURE
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.gains = np.asarray(self.gains, dtype=complex).ravel()
        if not (self.gains.size == len(self.pairs) == self.n):
            raise ValueError("gains, pairs and n disagree")

    def control(self, x: StateFunction) -> complex:
        """Control value for the state ``x``."""
        y = x.w1[-1] if x.sampled else x.w1(1.0)
        u = self.rho * complex(y)
        for pair, k in zip(self.pairs, self.gains):
            u += inner_product(x, pair.adjoint_eigenfunction, self.quad) * k
        return complex(u)


def design_feedback(p: PlantParameters, t: TargetDynamics, n: int, basis="Intermediate",
                    w: Window | None = None, kern: BoundedKernel | None = None,
                    quad: GaussLegendre | None = None) -> FeedbackApproximation:
    """
    Order-``n`` modal approximation of the bounded feedback part.

    ``kern`` overrides the kernel derived from the target (for instance a zero
    kernel, which leaves the intermediate dynamics in place).
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    quad = quad or DEFAULT_QUADRATURE
    w = w or Window(-30.0, 200.0)
    kern = kern if kern is not None else build_bounded_kernel(p, t)
    rho = desired_boundary_unbounded_coefficient(t, p)
    basis = BasisChoice(basis)
    if n == 0:
        return FeedbackApproximation(rho, 0, basis, [], np.zeros(0), p, kern, t, quad)
    pairs, spec = basis_eigenpairs(p, t, basis, n, w, kern=build_bounded_kernel(p, t), quad=quad)
    gains = np.array([modal_gain(q, kern, p.tau) for q in pairs])
    return FeedbackApproximation(rho, n, basis, pairs, gains, p, kern, t, quad,
                                 meta={"basis_window_im_max": spec.window.im_max})


@dataclass(frozen=True)
class ReducedModel:
    """Reduced matrices in the intermediate eigenbasis."""
    A_n: np.ndarray
    B_n: np.ndarray
    K_n: np.ndarray
    eigenvalues: np.ndarray
    truncation: int = 0


def _adjoint_values(pairs, z):
    if not pairs:
        return np.zeros((0, z.size), complex), np.zeros((0, z.size), complex), np.zeros(0, complex)
    v1, v2 = zip(*(q.adjoint_eigenfunction.evaluate(z) for q in pairs))
    v3 = np.array([q.adjoint_eigenfunction.w3 for q in pairs])
    return np.array(v1), np.array(v2), v3


def assemble_reduced(fb: FeedbackApproximation, intermediate_pairs: list[EigenPair] | None = None,
                     n: int | None = None) -> ReducedModel:
    """
    ``A_n = (<A^c phi_i, psi_j>)``, ``B_n = (b_i)``, ``K_n = (K^n phi_i^c)``.

    For a non-intermediate basis ``K_n`` holds the approximated feedback on the
    first ``n`` intermediate eigenfunctions (a Gram-matrix basis change);
    intermediate modes beyond ``n`` are truncated and ``truncation`` records
    ``n``.
    """
    p = fb.plant
    n = fb.n if n is None else n
    if n == 0:
        e = np.zeros(0, dtype=complex)
        return ReducedModel(np.zeros((0, 0), complex), e, e, e)
    if intermediate_pairs is None:
        if fb.basis is BasisChoice.Intermediate:
            intermediate_pairs = fb.pairs
        else:
            intermediate_pairs, _ = basis_eigenpairs(p, fb.target, BasisChoice.Intermediate, n,
                                                     Window(-30.0, 200.0), quad=fb.quad)
    ip = intermediate_pairs[:n]
    if any(not q.normalized for q in ip):
        raise ValueError("reduced model needs normalized eigenpairs")
    gen = [StateFunction(q.eigenfunction.w2.derivative() * p.alpha,
                         q.eigenfunction.w1.derivative() * p.beta,
                         p.gamma * complex(q.eigenfunction.w2(0.0))) for q in ip]
    A = gram_matrix(gen, [q.adjoint_eigenfunction for q in ip], fb.quad).T
    B = np.array([modal_input_coefficient(q, p) for q in ip])
    if fb.basis is BasisChoice.Intermediate:
        K = fb.gains[:n].copy()
        trunc = 0
    else:
        G = gram_matrix([q.eigenfunction for q in ip], [q.adjoint_eigenfunction for q in fb.pairs], fb.quad)
        K = G @ fb.gains
        trunc = n
    return ReducedModel(A, B, K, np.array([q.lam for q in ip]), trunc)


def closed_loop_spectrum_matrix(rm: ReducedModel, intermediate: Spectrum, n: int | None = None,
                                basis: BasisChoice = BasisChoice.Intermediate) -> Spectrum:
    """
    ``sigma(A_n + B_n K_n^T)`` united with the intermediate eigenvalues beyond ``n``.

    Raises
    ------
    ValueError
        For a basis other than the intermediate one (the union formula needs
        the intermediate eigenbasis).
    """
    if BasisChoice(basis) is not BasisChoice.Intermediate or rm.truncation:
        raise ValueError("matrix path requires the intermediate eigenbasis")
    n = rm.B_n.size if n is None else n
    lams = intermediate.eigenvalues
    m = min(n, lams.size)
    if not np.allclose(rm.eigenvalues[:m], lams[:m], rtol=1e-12, atol=0):
        raise ValueError("reduced model and intermediate spectrum are not aligned")
    if n == 0 or not np.any(rm.K_n * rm.B_n):
        head = rm.eigenvalues[:n]
    else:
        A = np.diag(rm.eigenvalues) if np.allclose(rm.A_n, np.diag(np.diag(rm.A_n)), atol=1e-8 * max(1, np.abs(rm.A_n).max())) else rm.A_n
        head = snap_real(np.linalg.eigvals(A + np.outer(rm.B_n, rm.K_n)))
    w = intermediate.window
    vals = np.concatenate([head[w.contains(head)], lams[n:]])
    return Spectrum(SpectrumLabel.ClosedLoop, vals, w, meta={"n": n, "path": "matrix"})


def _pairing_values(fb: FeedbackApproximation, lam, derivative=False):
    """``<phi(lam), psi_i>`` (and the lam-derivative) for all basis pairs."""
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    z, wq = fb.quad.points, fb.quad.weights
    key = id(fb)
    cache = fb.meta.get("_psi_cache")
    if cache is None or cache[0] != key:
        cache = (key, _adjoint_values(fb.pairs, z))
        fb.meta["_psi_cache"] = cache
    P1, P2, P3 = cache[1]
    f1, f2 = eigenfunction_values(fb.plant, lam, z)
    val = (f1 * wq) @ P1.conj().T + (f2 * wq) @ P2.conj().T + np.conj(P3)[None, :]
    if not derivative:
        return val
    d1, d2 = eigenfunction_dlam_values(fb.plant, lam, z)
    dval = (d1 * wq) @ P1.conj().T + (d2 * wq) @ P2.conj().T
    return val, dval


def closed_loop_characteristic(fb: FeedbackApproximation, lam, derivative=False):
    """``Delta_cl(lam) = Delta(lam; rho) - sum_i k_i <phi(lam), psi_i>`` (entire)."""
    lam = np.asarray(lam, dtype=complex)
    shape = lam.shape
    lam = lam.ravel()
    bd = BoundaryDynamics(fb.rho)
    base = characteristic_value(fb.plant, bd, lam)
    if fb.n == 0:
        out = base
        dout = characteristic_derivative(fb.plant, bd, lam) if derivative else None
    else:
        val, dval = _pairing_values(fb, lam, derivative=True)
        out = base - val @ fb.gains
        dout = characteristic_derivative(fb.plant, bd, lam) - dval @ fb.gains if derivative else None
    if derivative:
        return out.reshape(shape), dout.reshape(shape)
    return out.reshape(shape)


def kernel_defect(fb: FeedbackApproximation, desired_pairs: list[EigenPair]) -> np.ndarray:
    """``(K - K^n) phi_i^d`` for each desired eigenfunction."""
    full = np.array([fb.kernel.on_exponential(q.lam, fb.plant.tau) * q.eigenfunction.w3
                     for q in desired_pairs], dtype=complex)
    if fb.n == 0:
        return full
    G = gram_matrix([q.eigenfunction for q in desired_pairs],
                    [q.adjoint_eigenfunction for q in fb.pairs], fb.quad)
    return full - G @ fb.gains


def characteristic_g(lam, fb: FeedbackApproximation, reference: str = "intermediate",
                     method: str = "exact", reference_pairs: list[EigenPair] | None = None,
                     pole_tol: float = 1e-9):
    """
    ``g(lam, n)``: closed-loop characteristic function relative to a reference.

    Parameters
    ----------
    reference : {"intermediate", "desired"}
        ``g = Delta_cl / Delta_c`` or ``g = Delta_cl / Delta_d``.
    method : {"exact", "series"}
        ``"exact"`` evaluates the ratio of entire functions. ``"series"`` uses
        the modal expansion ``1 - sum_i m_i b_i / (lam - lam_i)`` over
        ``reference_pairs`` (required), with ``m_i = K^n phi_i^c`` for the
        intermediate reference and ``m_i = -(K - K^n) phi_i^d`` for the
        desired one.

    Raises
    ------
    PoleProximityError
        ``lam`` within ``pole_tol`` (relative) of a reference eigenvalue.
    """
    lam = np.asarray(lam, dtype=complex)
    p = fb.plant
    if method == "exact":
        if reference == "intermediate":
            den = characteristic_value(p, BoundaryDynamics(fb.rho), lam)
        elif reference == "desired":
            den = fb.target.characteristic(lam) / (fb.target.kappa[-1] * p.gamma * (fb.target.mu + 1.0))
        else:
            raise ValueError(f"unknown reference {reference!r}")
        mag = np.abs(den) / np.maximum(1.0, 1e-3 * _residual_scale(p, BoundaryDynamics(fb.rho), lam))
        if np.any(mag < pole_tol):
            raise PoleProximityError("evaluation point at a reference eigenvalue")
        return closed_loop_characteristic(fb, lam) / den
    if method != "series":
        raise ValueError(f"unknown method {method!r}")
    if reference_pairs is None:
        raise ValueError("series evaluation needs the reference eigenpairs")
    lams = np.array([q.lam for q in reference_pairs])
    b = np.array([modal_input_coefficient(q, p) for q in reference_pairs])
    if reference == "intermediate":
        if fb.n == 0:
            m = np.zeros(lams.size, complex)
        else:
            G = gram_matrix([q.eigenfunction for q in reference_pairs],
                            [q.adjoint_eigenfunction for q in fb.pairs], fb.quad)
            m = G @ fb.gains
    elif reference == "desired":
        m = -kernel_defect(fb, reference_pairs)
    else:
        raise ValueError(f"unknown reference {reference!r}")
    diff = lam[..., None] - lams
    if np.any(np.abs(diff) < pole_tol * np.maximum(1.0, np.abs(lams))):
        raise PoleProximityError("evaluation point at a reference eigenvalue")
    return 1.0 - np.sum(m * b / diff, axis=-1)


def closed_loop_spectrum_char(fb: FeedbackApproximation, w: Window,
                              intermediate: Spectrum | None = None) -> Spectrum:
    """
    Closed-loop eigenvalues in ``w`` as zeros of ``Delta_cl``.

    With a zero kernel or ``n = 0`` the intermediate spectrum is returned
    unchanged.
    """
    p = fb.plant
    if fb.n == 0 or not np.any(fb.gains):
        inter = intermediate if intermediate is not None else find_spectrum(p, BoundaryDynamics(fb.rho), w)
        return inter.relabeled(SpectrumLabel.ClosedLoop)
    scale_k = 1.0 + float(np.sum(np.abs(fb.gains) * [
        np.sqrt(abs(inner_product(q.adjoint_eigenfunction, q.adjoint_eigenfunction, fb.quad)))
        for q in fb.pairs]))
    bd = BoundaryDynamics(fb.rho)

    def f(lam):
        return closed_loop_characteristic(fb, lam)

    def df(lam):
        return closed_loop_characteristic(fb, lam, derivative=True)[1]

    zeros, count = find_zeros(
        f, df, Rect(w.re_min, w.re_max, -w.im_max, w.im_max), step=0.25 / p.tau,
        residual_tol=1e-10,
        residual_scale=lambda lam: np.maximum(1.0, 1e-2 * scale_k * _residual_scale(p, bd, lam)))
    spec = Spectrum(SpectrumLabel.ClosedLoop, snap_real(zeros), w,
                    meta={"n": fb.n, "path": "characteristic", "argument_principle_count": count})
    spec.assert_simple(rtol=1e-6)
    return spec


def match_spectra(a, b):
    """
    Greedy nearest-neighbour pairing of two eigenvalue sets.

    Returns ``(pairs, unmatched_a, unmatched_b)`` with ``pairs`` a list of
    index tuples; each index is used at most once.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.size == 0 or b.size == 0:
        return [], list(range(a.size)), list(range(b.size))
    d = np.abs(a[:, None] - b[None, :])
    order = np.dstack(np.unravel_index(np.argsort(d, axis=None), d.shape))[0]
    used_a, used_b, pairs = set(), set(), []
    for i, j in order:
        if i in used_a or j in used_b:
            continue
        pairs.append((int(i), int(j)))
        used_a.add(i)
        used_b.add(j)
    return (pairs, [i for i in range(a.size) if i not in used_a],
            [j for j in range(b.size) if j not in used_b])


def hausdorff(a, b) -> float:
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.size == 0 and b.size == 0:
        return 0.0
    if a.size == 0 or b.size == 0:
        return float("inf")
    d = np.abs(a[:, None] - b[None, :])
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def closed_loop_spectrum(fb: FeedbackApproximation, w: Window,
                         intermediate: Spectrum | None = None) -> Spectrum:
    """Closed-loop spectrum in ``w``; matrix path for the intermediate basis, characteristic path otherwise."""
    if intermediate is None:
        intermediate = find_spectrum(fb.plant, BoundaryDynamics(fb.rho), w)
    if fb.basis is BasisChoice.Intermediate:
        return closed_loop_spectrum_matrix(assemble_reduced(fb), intermediate, fb.n)
    return closed_loop_spectrum_char(fb, w, intermediate)
