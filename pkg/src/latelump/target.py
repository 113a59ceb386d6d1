"""
Delay-differential target dynamics

    sum_i kappa_i (chi^(i)(t + tau) + mu chi^(i)(t - tau)) = 0

and the checks that make a target usable for late-lumping designs: simple
spectrum, gaps, and the summability bound on the modal input coefficients.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import polygamma

from .plant import PlantParameters
from .spectral import SimplicityError, Spectrum, SpectrumLabel, Window

__all__ = ["TargetDynamics", "AssumptionReport", "desired_spectrum", "branch_points",
           "desired_boundary_unbounded_coefficient", "check_assumption_A2",
           "check_simplicity_and_gaps", "inverse_square_tail", "GAP_RTOL"]

GAP_RTOL = 1e-6


@dataclass(frozen=True)
class TargetDynamics:
    """
    Target ``sum_i kappa_i (chi^(i)(t+tau) + mu chi^(i)(t-tau)) = 0``.

    Attributes
    ----------
    kappa : tuple of float
        Polynomial coefficients ``kappa_0 .. kappa_N`` (ascending powers).
    mu : float
        Neutral coefficient, ``0 < |mu| < 1``.
    tau : float
        Half the delay spread; ``theta_- = -tau`` and ``theta_+ = tau``.
    """
    kappa: tuple
    mu: float
    tau: float

    def __post_init__(self):
        kappa = tuple(float(k) for k in np.atleast_1d(self.kappa))
        if not kappa or kappa[-1] == 0:
            raise ValueError("leading coefficient kappa_N must be nonzero")
        if not all(math.isfinite(k) for k in kappa):
            raise ValueError("kappa must be finite")
        if not (-1.0 < self.mu < 1.0) or self.mu == 0:
            raise ValueError("mu must lie in (-1, 1) without 0")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        object.__setattr__(self, "kappa", kappa)

    @classmethod
    def from_rate(cls, kappa, rate: float, tau: float) -> "TargetDynamics":
        """Target with ``mu = exp(rate * tau)``, e.g. ``rate = -20``."""
        return cls(kappa, float(np.exp(rate * tau)), tau)

    @property
    def N(self) -> int:
        return len(self.kappa) - 1

    @property
    def theta_minus(self) -> float:
        return -self.tau

    @property
    def theta_plus(self) -> float:
        return self.tau

    @property
    def delta_theta(self) -> float:
        return 2.0 * self.tau

    @property
    def branch_re(self) -> float:
        """Common real part ``ln|mu| / (2 tau)`` of the neutral branch."""
        return math.log(abs(self.mu)) / self.delta_theta

    @property
    def branch_spacing(self) -> float:
        return 2.0 * math.pi / self.delta_theta

    @property
    def branch_offset(self) -> float:
        """Imaginary part of the branch point with smallest nonnegative index."""
        return 0.0 if self.mu < 0 else -0.5 * self.branch_spacing

    def polynomial_roots(self) -> np.ndarray:
        if self.N == 0:
            return np.zeros(0, dtype=complex)
        return np.roots(self.kappa[::-1]).astype(complex)

    def hurwitz(self) -> bool:
        return bool(np.all(self.polynomial_roots().real < 0))

    def characteristic(self, lam):
        """``kappa(lam) (exp(lam tau) + mu exp(-lam tau))``."""
        lam = np.asarray(lam, dtype=complex)
        return (np.polyval(self.kappa[::-1], lam)
                * (np.exp(lam * self.tau) + self.mu * np.exp(-lam * self.tau)))


def branch_points(t: TargetDynamics, im_lo: float, im_hi: float) -> np.ndarray:
    """Neutral-branch eigenvalues with ``im_lo <= Im <= im_hi``."""
    d, off = t.branch_spacing, t.branch_offset
    k0 = math.ceil((im_lo - off) / d - 1e-12)
    k1 = math.floor((im_hi - off) / d + 1e-12)
    ims = off + d * np.arange(k0, k1 + 1)
    return t.branch_re + 1j * ims


def desired_spectrum(t: TargetDynamics, w: Window,
                     label: SpectrumLabel = SpectrumLabel.Desired) -> Spectrum:
    """
    Polynomial roots united with the neutral branch, intersected with ``w``.

    Raises
    ------
    SimplicityError
        A polynomial root (nearly) coincides with a branch point or with
        another polynomial root.
    """
    poly = t.polynomial_roots()
    branch = branch_points(t, -w.im_max, w.im_max)
    lams = np.concatenate([poly, branch])
    scale = np.maximum(1.0, np.abs(lams))
    dist = np.abs(lams[:, None] - lams[None, :])
    np.fill_diagonal(dist, np.inf)
    if lams.size > 1 and np.any(dist.min(axis=1) < GAP_RTOL * scale):
        raise SimplicityError("polynomial root coincides with a branch point")
    lams = lams[w.contains(lams)]
    return Spectrum(label, lams, w, meta={"n_polynomial": int(np.sum(w.contains(poly)))})


def desired_boundary_unbounded_coefficient(t: TargetDynamics, p: PlantParameters) -> float:
    """Reflection coefficient ``rho = beta tau (mu - 1) / (mu + 1)`` of the neutral part."""
    if t.mu == -1:
        raise ZeroDivisionError("mu = -1")
    return p.beta * p.tau * (t.mu - 1.0) / (t.mu + 1.0)


@dataclass
class AssumptionReport:
    riesz_ok: bool = True
    discrete_ok: bool = True
    simple_ok: bool = True
    a2_bound_M: float = float("nan")
    a2_samples_max: float = float("nan")
    min_gap: float = float("nan")
    details: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def a2_ok(self) -> bool:
        return bool(self.a2_samples_max <= self.a2_bound_M)

    @property
    def ok(self) -> bool:
        return self.riesz_ok and self.discrete_ok and self.simple_ok and self.a2_ok

    def to_dict(self) -> dict:
        return {"riesz_ok": self.riesz_ok, "discrete_ok": self.discrete_ok,
                "simple_ok": self.simple_ok, "a2_ok": self.a2_ok,
                "a2_bound_M": self.a2_bound_M, "a2_samples_max": self.a2_samples_max,
                "min_gap": self.min_gap, "details": self.details, **self.extra}


def check_simplicity_and_gaps(s: Spectrum) -> AssumptionReport:
    """Pairwise distinctness of a windowed spectrum and its smallest gap."""
    lams = s.eigenvalues
    if lams.size < 2:
        return AssumptionReport(min_gap=s.window.diameter,
                                details="fewer than two eigenvalues; gap set to window diameter")
    d = np.abs(lams[:, None] - lams[None, :])
    np.fill_diagonal(d, np.inf)
    scale = max(1.0, float(np.abs(lams).max()))
    gap = float(d.min())
    ok = gap >= GAP_RTOL * scale
    return AssumptionReport(simple_ok=ok, min_gap=gap,
                            details="simple" if ok else f"gap {gap:.3e} below {GAP_RTOL:g}*scale")


def inverse_square_tail(a, d):
    r"""
    :math:`\sum_{k \ge 0} (a + k d)^{-2} = \psi_1(a/d)/d^2` for ``a > 0``.
    """
    a = np.asarray(a, dtype=float)
    return polygamma(1, a / d) / d ** 2


def _tail_sum(t: TargetDynamics, w: Window, lam, b_sup):
    """Bound on the off-window branch contribution at the points ``lam``."""
    lam = np.asarray(lam, dtype=complex)
    d, off = t.branch_spacing, t.branch_offset
    k_hi = math.floor((w.im_max - off) / d + 1e-12) + 1
    k_lo = math.ceil((-w.im_max - off) / d - 1e-12) - 1
    above = off + k_hi * d - lam.imag
    below = lam.imag - (off + k_lo * d)
    return b_sup ** 2 * (inverse_square_tail(np.maximum(above, 1e-300), d)
                         + inverse_square_tail(np.maximum(below, 1e-300), d))


def gap_distances_with_branch(t: TargetDynamics, s: Spectrum) -> np.ndarray:
    """Gaps of a desired spectrum, counting the first off-window branch neighbours."""
    lams = s.eigenvalues
    w = s.window
    pad = 2 * t.branch_spacing
    ext = np.concatenate([t.polynomial_roots(), branch_points(t, -w.im_max - pad, w.im_max + pad)])
    ext = ext[np.abs(ext.imag) > w.im_max]
    pool = np.concatenate([lams, ext])
    d = np.abs(lams[:, None] - pool[None, :])
    d[np.arange(lams.size), np.arange(lams.size)] = np.inf
    return d.min(axis=1)


def constructive_bound(t: TargetDynamics, desired: Spectrum, b, gaps=None) -> tuple[float, float]:
    """
    ``(M_kappa, M_mu)`` of the constructive summability bound.

    Points outside the disks ``|lam - lam_i| < d_i / 3`` keep distance
    ``d_i / 3`` to each polynomial root, giving ``M_kappa = sum 9 b_sup^2 / d_i^2``.
    The k-th branch point above or below such a point is at least
    ``k d / 4`` away, giving ``M_mu = 2 b_sup^2 (4/d)^2 pi^2/6``.
    """
    b = np.asarray(b, dtype=complex)
    b_sup = float(np.abs(b).max()) if b.size else 0.0
    if gaps is None:
        gaps = gap_distances_with_branch(t, desired)
    poly = t.polynomial_roots()
    is_poly = np.array([np.any(np.abs(poly - lam) <= 1e-9 * max(1.0, abs(lam)))
                        for lam in desired.eigenvalues], dtype=bool)
    m_kappa = float(np.sum(9.0 * b_sup ** 2 / np.asarray(gaps)[is_poly] ** 2))
    d = t.branch_spacing
    m_mu = 2.0 * b_sup ** 2 * (4.0 / d) ** 2 * math.pi ** 2 / 6.0
    return m_kappa, m_mu


def summability_sum(desired: Spectrum, b, lam, t: TargetDynamics | None = None):
    r"""
    :math:`\sum_i |b_i / (\lambda - \lambda_i)|^2` at the points ``lam``.

    With a target given, the off-window part of the neutral branch is added
    in closed form using ``b_sup``.
    """
    b = np.asarray(b, dtype=complex)
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    lams = desired.eigenvalues[:b.size]
    val = np.sum(np.abs(b[None, :] / (lam[:, None] - lams[None, :])) ** 2, axis=1)
    if t is not None and b.size:
        val = val + _tail_sum(t, desired.window, lam, float(np.abs(b).max()))
    return val


def sample_points(w: Window, centers, radii, grid: int = 40, per_disk: int = 64):
    """Disk-boundary points and a ``grid x grid`` lattice of the window outside the disks."""
    centers = np.asarray(centers, dtype=complex)
    radii = np.asarray(radii, dtype=float)
    theta = 2 * np.pi * np.arange(per_disk) / per_disk
    ring = (centers[:, None] + radii[:, None] * np.exp(1j * theta)[None, :]).ravel()
    x = np.linspace(w.re_min, min(w.re_max, 0.0), grid)
    y = np.linspace(-w.im_max, w.im_max, grid)
    lattice = (x[None, :] + 1j * y[:, None]).ravel()
    pts = np.concatenate([ring, lattice])
    inside = np.zeros(pts.size, dtype=bool)
    for c, r in zip(centers, radii):
        # ring points sit on the boundary; keep them, drop strict interior points
        inside |= np.abs(pts - c) < r * (1 - 1e-12)
    return pts[~inside]


def check_assumption_A2(desired: Spectrum, b, w: Window, sample_count: int = 40,
                        t: TargetDynamics | None = None, per_disk: int = 64) -> AssumptionReport:
    """
    Sampled check of ``sum_i |b_i / (lam - lam_i)|^2 <= M`` outside the disks ``D``.

    Parameters
    ----------
    desired : Spectrum
        Desired eigenvalues, ``b`` aligned with their mode order.
    b : array_like
        Modal input coefficients.
    w : Window
        Sampling window.
    sample_count : int
        Grid resolution per axis of the window lattice.
    t : TargetDynamics, optional
        Enables the constructive bound and the analytic branch tail. Without
        it, gaps use the windowed spectrum only and ``M`` is the sampled max.
    """
    b = np.asarray(b, dtype=complex)
    rep = check_simplicity_and_gaps(desired)
    if not rep.simple_ok:
        rep.details = "gap collapse: " + rep.details
        return rep
    if b.size == 0 or not np.any(b):
        rep.a2_bound_M, rep.a2_samples_max = 0.0, 0.0
        rep.details = "zero input coefficients"
        return rep
    lams = desired.eigenvalues[:b.size]
    if t is not None:
        gaps = gap_distances_with_branch(t, desired)[:b.size]
    else:
        d = np.abs(lams[:, None] - lams[None, :])
        np.fill_diagonal(d, np.inf)
        gaps = d.min(axis=1)
    pts = sample_points(w, lams, gaps / 3.0, grid=sample_count, per_disk=per_disk)
    vals = summability_sum(desired, b, pts, t)
    rep.a2_samples_max = float(vals.max()) if vals.size else 0.0
    if t is not None:
        m_kappa, m_mu = constructive_bound(t, desired, b, gaps=gap_distances_with_branch(t, desired))
        rep.a2_bound_M = m_kappa + m_mu
        rep.extra.update({"M_kappa": m_kappa, "M_mu": m_mu})
    else:
        rep.a2_bound_M = rep.a2_samples_max
    rep.extra.update({"samples": int(pts.size), "grid": sample_count, "per_disk": per_disk})
    rep.details = "A2 bound holds at all samples" if rep.a2_ok else "A2 bound violated"
    return rep
