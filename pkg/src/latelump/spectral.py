"""
State representation on the unit interval, quadrature inner products and
biorthonormal eigenpairs.

States live in ``L2(0, 1; C^2) x C``.  The distributed components are either
closed-form exponential sums (used for every eigenfunction, so no
interpolation error enters the spectral computations) or samples on a uniform
grid (used by the time-domain simulator only).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Sequence, Union

import numpy as np

__all__ = [
    "ExpSum", "StateFunction", "EigenPair", "Spectrum", "SpectrumLabel",
    "Window", "GaussLegendre", "RepresentationError", "DegeneracyError",
    "SimplicityError", "inner_product", "biorthonormalize", "modal_weight",
    "gram_matrix", "mode_order", "snap_real", "DEFAULT_QUADRATURE",
]

NORMALIZATION_TOL = 1e-8
DISTINCT_RTOL = 1e-9


class RepresentationError(ValueError):
    """Two sampled states cannot be paired (absent or mismatched grids)."""


class DegeneracyError(ArithmeticError):
    """An eigenpair cannot be normalized, ``<phi, psi>`` vanishes."""


class SimplicityError(ArithmeticError):
    """Two eigenvalues coincide (or nearly so)."""


class ExpSum:
    r"""
    Closed-form function :math:`f(z) = \sum_m c_m e^{s_m z}`.

    Args:
        coefs: coefficients :math:`c_m`.
        rates: exponents :math:`s_m`.
    """
    __slots__ = ("coefs", "rates")

    def __init__(self, coefs, rates):
        self.coefs = np.atleast_1d(np.asarray(coefs, dtype=complex))
        self.rates = np.atleast_1d(np.asarray(rates, dtype=complex))
        if self.coefs.shape != self.rates.shape:
            raise ValueError("coefs and rates must have equal length")

    @classmethod
    def zero(cls):
        return cls([0.0], [0.0])

    @classmethod
    def constant(cls, c):
        return cls([c], [0.0])

    def __call__(self, z):
        z = np.asarray(z)
        return np.exp(np.multiply.outer(z, self.rates)) @ self.coefs

    def derivative(self):
        return ExpSum(self.coefs * self.rates, self.rates)

    def __mul__(self, c):
        return ExpSum(self.coefs * complex(c), self.rates)

    __rmul__ = __mul__

    def __add__(self, other):
        if not isinstance(other, ExpSum):
            return NotImplemented
        return ExpSum(np.concatenate([self.coefs, other.coefs]),
                      np.concatenate([self.rates, other.rates]))

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)

    def __repr__(self):
        return f"ExpSum(coefs={self.coefs!r}, rates={self.rates!r})"


Component = Union[Callable, np.ndarray]


@dataclass(frozen=True)
class StateFunction:
    """
    Element ``(w1, w2, w3)`` of the state space.

    ``w1`` and ``w2`` are either vectorized callables on ``[0, 1]`` or arrays
    sampled on ``grid`` (uniform, at least two points).
    """
    w1: Component
    w2: Component
    w3: complex
    grid: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "w3", complex(self.w3))
        if self.grid is not None:
            grid = np.asarray(self.grid, dtype=float)
            if grid.ndim != 1 or grid.size < 2:
                raise RepresentationError("sampling grid needs at least two points")
            w1 = np.asarray(self.w1, dtype=complex)
            w2 = np.asarray(self.w2, dtype=complex)
            if w1.shape != grid.shape or w2.shape != grid.shape:
                raise RepresentationError("samples do not match their grid")
            object.__setattr__(self, "grid", grid)
            object.__setattr__(self, "w1", w1)
            object.__setattr__(self, "w2", w2)

    @property
    def sampled(self) -> bool:
        return self.grid is not None

    def evaluate(self, z):
        """Return ``(w1(z), w2(z))``; sampled states only on their own grid."""
        z = np.asarray(z, dtype=float)
        if self.sampled:
            if z.shape != self.grid.shape or not np.allclose(z, self.grid, rtol=0, atol=1e-14):
                raise RepresentationError("sampled state evaluated off its grid")
            return self.w1, self.w2
        return (np.asarray(self.w1(z), dtype=complex) * np.ones_like(z),
                np.asarray(self.w2(z), dtype=complex) * np.ones_like(z))

    def scaled(self, c: complex) -> "StateFunction":
        c = complex(c)
        if self.sampled:
            return replace(self, w1=self.w1 * c, w2=self.w2 * c, w3=self.w3 * c)
        if isinstance(self.w1, ExpSum) and isinstance(self.w2, ExpSum):
            return StateFunction(self.w1 * c, self.w2 * c, self.w3 * c)
        f1, f2 = self.w1, self.w2
        return StateFunction(lambda z: c * f1(z), lambda z: c * f2(z), self.w3 * c)

    def on_grid(self, grid) -> "StateFunction":
        w1, w2 = self.evaluate(grid)
        return StateFunction(w1, w2, self.w3, grid=np.asarray(grid, dtype=float))

    def __add__(self, other):
        if not isinstance(other, StateFunction):
            return NotImplemented
        if self.sampled or other.sampled:
            grid = self.grid if self.sampled else other.grid
            a, b = self.on_grid(grid), other.on_grid(grid)
            return StateFunction(a.w1 + b.w1, a.w2 + b.w2, a.w3 + b.w3, grid=grid)
        if all(isinstance(f, ExpSum) for f in (self.w1, self.w2, other.w1, other.w2)):
            return StateFunction(self.w1 + other.w1, self.w2 + other.w2, self.w3 + other.w3)
        f1, f2, g1, g2 = self.w1, self.w2, other.w1, other.w2
        return StateFunction(lambda z: f1(z) + g1(z), lambda z: f2(z) + g2(z),
                             self.w3 + other.w3)

    def __rmul__(self, c):
        return self.scaled(c)


@dataclass(frozen=True)
class GaussLegendre:
    """Composite Gauss-Legendre rule on ``[0, 1]``."""
    nodes: int = 64
    panels: int = 1

    def __post_init__(self):
        if self.nodes < 1 or self.panels < 1:
            raise ValueError("nodes and panels must be positive")

    @property
    def points(self):
        return _gl_rule(self.nodes, self.panels)[0]

    @property
    def weights(self):
        return _gl_rule(self.nodes, self.panels)[1]


@lru_cache(maxsize=32)
def _gl_rule(nodes, panels):
    x, w = np.polynomial.legendre.leggauss(nodes)
    edges = np.linspace(0.0, 1.0, panels + 1)
    h = np.diff(edges)
    z = (edges[:-1, None] + 0.5 * h[:, None] * (x[None, :] + 1.0)).ravel()
    wt = (0.5 * h[:, None] * w[None, :]).ravel()
    z.setflags(write=False)
    wt.setflags(write=False)
    return z, wt


DEFAULT_QUADRATURE = GaussLegendre()


def _trapezoid_weights(grid):
    dz = np.diff(grid)
    w = np.zeros_like(grid)
    w[:-1] += 0.5 * dz
    w[1:] += 0.5 * dz
    return w


def _rule_for(f: StateFunction, g: StateFunction, quad: GaussLegendre):
    grids = [s.grid for s in (f, g) if s.sampled]
    if not grids:
        return quad.points, quad.weights
    if len(grids) == 2 and (grids[0].shape != grids[1].shape
                            or not np.allclose(grids[0], grids[1], rtol=0, atol=1e-14)):
        raise RepresentationError("sampled states live on different grids")
    return grids[0], _trapezoid_weights(grids[0])


def inner_product(f: StateFunction, g: StateFunction, quad: GaussLegendre | None = None) -> complex:
    r"""
    Unweighted product :math:`\int_0^1 f_1\bar g_1 + f_2\bar g_2\,dz + f_3\bar g_3`.

    Closed-form states are integrated with Gauss-Legendre, sampled states with
    the trapezoidal rule on their common grid.
    """
    z, w = _rule_for(f, g, quad or DEFAULT_QUADRATURE)
    f1, f2 = f.evaluate(z)
    g1, g2 = g.evaluate(z)
    return complex(w @ (f1 * np.conj(g1) + f2 * np.conj(g2)) + f.w3 * np.conj(g.w3))


def gram_matrix(fs: Sequence[StateFunction], gs: Sequence[StateFunction],
                quad: GaussLegendre | None = None) -> np.ndarray:
    """Matrix ``G[i, j] = <fs[i], gs[j]>`` evaluated in one pass."""
    if not len(fs) or not len(gs):
        return np.zeros((len(fs), len(gs)), dtype=complex)
    quad = quad or DEFAULT_QUADRATURE
    z, w = _rule_for(fs[0], gs[0], quad)
    F1, F2 = map(np.array, zip(*(f.evaluate(z) for f in fs)))
    G1, G2 = map(np.array, zip(*(g.evaluate(z) for g in gs)))
    f3 = np.array([f.w3 for f in fs])
    g3 = np.array([g.w3 for g in gs])
    return (F1 * w) @ G1.conj().T + (F2 * w) @ G2.conj().T + np.outer(f3, g3.conj())


@dataclass(frozen=True)
class EigenPair:
    """Eigenvalue with its eigenfunction and the matching adjoint eigenfunction."""
    lam: complex
    eigenfunction: StateFunction
    adjoint_eigenfunction: StateFunction
    normalized: bool = False


def biorthonormalize(pairs: Sequence[EigenPair], quad: GaussLegendre | None = None,
                     tol: float = NORMALIZATION_TOL) -> list[EigenPair]:
    """
    Rescale each adjoint eigenfunction so that ``<phi_i, psi_i> = 1``.

    Eigenfunctions keep their (flat-output) scaling.

    Raises:
        DegeneracyError: if ``|<phi_i, psi_i>|`` is negligible relative to
            the norms of both functions.
    """
    out = []
    for p in pairs:
        s = inner_product(p.eigenfunction, p.adjoint_eigenfunction, quad)
        nf = np.sqrt(abs(inner_product(p.eigenfunction, p.eigenfunction, quad)))
        ng = np.sqrt(abs(inner_product(p.adjoint_eigenfunction, p.adjoint_eigenfunction, quad)))
        if abs(s) <= tol * nf * ng:
            raise DegeneracyError(f"<phi, psi> = {s:.3e} vanishes at lambda = {p.lam:.6g}")
        psi = p.adjoint_eigenfunction.scaled(1.0 / np.conj(s))
        out.append(EigenPair(p.lam, p.eigenfunction, psi, normalized=True))
    return out


def modal_weight(x: StateFunction, pair: EigenPair, quad: GaussLegendre | None = None) -> complex:
    """Coordinate ``<x, psi_i>`` of ``x`` along the eigenvector ``phi_i``."""
    if not pair.normalized:
        raise ValueError("modal weights need a normalized eigenpair")
    return inner_product(x, pair.adjoint_eigenfunction, quad)


@dataclass(frozen=True)
class Window:
    """
    Region ``{re_min <= Re <= re_max, |Im| <= im_max}`` of the complex plane.

    ``re_max`` closes the half plane for the root search.
    """
    re_min: float
    im_max: float
    re_max: float = 50.0

    def __post_init__(self):
        if not (self.im_max > 0):
            raise ValueError("window needs im_max > 0")
        if not (self.re_min < self.re_max):
            raise ValueError("window needs re_min < re_max")

    def contains(self, lam, atol=0.0):
        lam = np.asarray(lam)
        return ((lam.real >= self.re_min - atol) & (lam.real <= self.re_max + atol)
                & (np.abs(lam.imag) <= self.im_max + atol))

    def enlarged(self, d_im=0.0, d_re=0.0) -> "Window":
        return Window(self.re_min - d_re, self.im_max + d_im, self.re_max + d_re)

    @property
    def diameter(self) -> float:
        return float(np.hypot(self.re_max - self.re_min, 2 * self.im_max))


class SpectrumLabel(str, enum.Enum):
    OpenLoop = "OpenLoop"
    Intermediate = "Intermediate"
    Desired = "Desired"
    ClosedLoop = "ClosedLoop"
    ObserverIntermediate = "ObserverIntermediate"
    ObserverDesired = "ObserverDesired"
    ObserverClosedLoop = "ObserverClosedLoop"


def mode_order(lams) -> np.ndarray:
    """
    Indices sorting eigenvalues into mode order.

    Slowest oscillation first (``|Im|`` ascending); conjugates are adjacent
    with negative imaginary part first; ties in ``|Im|`` by ``Re`` descending.
    """
    lams = np.asarray(lams, dtype=complex)
    key_im = np.round(np.abs(lams.imag), 8)
    return np.lexsort((np.round(lams.imag, 8), np.round(-lams.real, 8), key_im))


def snap_real(lams, rtol: float = 1e-12) -> np.ndarray:
    """Zero imaginary parts that are rounding noise."""
    lams = np.array(lams, dtype=complex)
    tiny = np.abs(lams.imag) <= rtol * np.maximum(1.0, np.abs(lams))
    lams[tiny] = lams[tiny].real
    return lams


@dataclass(frozen=True)
class Spectrum:
    """Windowed eigenvalues of one dynamics, stored in mode order."""
    label: SpectrumLabel
    eigenvalues: np.ndarray
    window: Window
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        lams = np.asarray(self.eigenvalues, dtype=complex).ravel()
        scale = max(1.0, self.window.diameter)
        if lams.size and not np.all(self.window.contains(lams, atol=1e-9 * scale)):
            raise ValueError("spectrum contains eigenvalues outside its window")
        lams = lams[mode_order(lams)]
        lams.setflags(write=False)
        object.__setattr__(self, "label", SpectrumLabel(self.label))
        object.__setattr__(self, "eigenvalues", lams)

    def __len__(self):
        return self.eigenvalues.size

    def relabeled(self, label) -> "Spectrum":
        return Spectrum(label, self.eigenvalues, self.window, dict(self.meta))

    def sorted_re_im(self) -> np.ndarray:
        lams = self.eigenvalues
        return lams[np.lexsort((lams.imag, lams.real))]

    def assert_simple(self, rtol=DISTINCT_RTOL):
        lams = self.eigenvalues
        if lams.size < 2:
            return
        d = np.abs(lams[:, None] - lams[None, :])
        np.fill_diagonal(d, np.inf)
        scale = np.maximum(1.0, np.abs(lams))
        if np.any(d.min(axis=1) <= rtol * scale):
            raise SimplicityError(f"{self.label.value} spectrum has a repeated eigenvalue")
