"""
Zeros of analytic functions inside rectangles.

Rectangles are bisected until the winding number of ``f`` along the boundary
(computed by adaptive phase tracking) is zero or one; single zeros are then
polished by Newton's method.  Since every zero is accounted for by a winding
count, none can be skipped silently.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .spectral import SimplicityError

__all__ = ["Rect", "RootFindingError", "IncompleteSearchError", "EdgeZeroError",
           "winding_number", "find_zeros"]

logger = logging.getLogger(__name__)

_MAX_PHASE_STEP = np.pi / 4
_MAX_EDGE_POINTS = 200_000


class RootFindingError(ArithmeticError):
    pass


class IncompleteSearchError(RootFindingError):
    """The winding count and the number of polished roots disagree."""


class EdgeZeroError(RootFindingError):
    """``f`` (nearly) vanishes on a contour."""


@dataclass(frozen=True)
class Rect:
    x0: float
    x1: float
    y0: float
    y1: float

    @property
    def width(self):
        return self.x1 - self.x0

    @property
    def height(self):
        return self.y1 - self.y0

    @property
    def center(self):
        return complex(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))

    def contains(self, z, margin=0.0):
        return (self.x0 - margin <= z.real <= self.x1 + margin
                and self.y0 - margin <= z.imag <= self.y1 + margin)

    def corners(self):
        return (complex(self.x0, self.y0), complex(self.x1, self.y0),
                complex(self.x1, self.y1), complex(self.x0, self.y1))

    def split(self, frac=0.5):
        if self.width >= self.height:
            xm = self.x0 + frac * self.width
            return Rect(self.x0, xm, self.y0, self.y1), Rect(xm, self.x1, self.y0, self.y1)
        ym = self.y0 + frac * self.height
        return Rect(self.x0, self.x1, self.y0, ym), Rect(self.x0, self.x1, ym, self.y1)


class _EdgeCache:
    """Phase increments per directed edge, reused by neighbouring rectangles."""

    def __init__(self, f, step):
        self.f = f
        self.step = step
        self._cache = {}

    def arg_change(self, a: complex, b: complex) -> float:
        key = (a, b)
        if key in self._cache:
            return self._cache[key]
        if (b, a) in self._cache:
            return -self._cache[(b, a)]
        val = self._compute(a, b)
        self._cache[key] = val
        return val

    def _compute(self, a, b):
        length = abs(b - a)
        n0 = 17 + int(np.ceil(length / self.step))
        t = np.linspace(0.0, 1.0, n0)
        v = self._eval(a + t * (b - a))
        while True:
            d = np.angle(v[1:] / v[:-1])
            bad = np.abs(d) > _MAX_PHASE_STEP
            if not bad.any():
                return float(d.sum())
            tiny = (t[1:] - t[:-1])[bad].min() * length
            if t.size > _MAX_EDGE_POINTS or tiny < 1e-12 * max(1.0, abs(a), abs(b)):
                raise EdgeZeroError(f"zero on or next to contour segment {a} -> {b}")
            tm = 0.5 * (t[:-1][bad] + t[1:][bad])
            vm = self._eval(a + tm * (b - a))
            idx = np.searchsorted(t, tm)
            t = np.insert(t, idx, tm)
            v = np.insert(v, idx, vm)

    def _eval(self, z):
        v = np.asarray(self.f(z), dtype=complex)
        if not np.all(np.isfinite(v)) or np.any(v == 0):
            raise EdgeZeroError("f vanishes or overflows on a contour")
        return v


def _winding(edges: _EdgeCache, rect: Rect) -> int:
    c = rect.corners()
    total = sum(edges.arg_change(c[k], c[(k + 1) % 4]) for k in range(4))
    w = total / (2 * np.pi)
    n = int(round(w))
    if abs(w - n) > 1e-3:
        raise EdgeZeroError(f"non-integer winding {w:.6f}")
    return n


def winding_number(f, rect: Rect, step: float = 1.0) -> int:
    """Number of zeros (minus poles) of ``f`` inside ``rect``."""
    return _winding(_EdgeCache(f, step), rect)


def _newton(f, df, z0, maxiter=60):
    z = complex(z0)
    for _ in range(maxiter):
        fz = complex(np.asarray(f(np.array([z])))[0])
        dz = complex(np.asarray(df(np.array([z])))[0])
        if dz == 0 or not np.isfinite(dz):
            return None
        step = fz / dz
        z -= step
        if not np.isfinite(z):
            return None
        if abs(step) <= 1e-14 * max(1.0, abs(z)):
            return z
    return None


def _fractions(rng):
    # split off-center so symmetric root configurations do not sit on cuts
    while True:
        yield 0.5 + 0.03 * (rng.random() - 0.5) + 0.0113


def find_zeros(f, df, rect: Rect, *, residual_tol: float = 1e-10,
               cluster_rtol: float = 1e-6, step: float = 1.0,
               max_retries: int = 5, seed: int = 0, residual_scale=None):
    """
    All zeros of the analytic function ``f`` inside ``rect``.

    Args:
        f, df: vectorized function and derivative.
        rect: search rectangle.
        residual_tol: required ``|f|`` at every polished zero (relative to
            ``residual_scale(z)`` when given).
        cluster_rtol: zeros closer than ``cluster_rtol * max(1, |z|)`` are
            reported as a multiplicity violation.
        step: maximal initial sample spacing along contours.

    Returns:
        Tuple ``(zeros, count)`` where ``count`` is the winding number of the
        outer contour.

    Raises:
        EdgeZeroError: a zero keeps sitting on a contour after jittering.
        SimplicityError: a cluster of zeros cannot be separated.
        IncompleteSearchError: polished zeros and winding count disagree.
    """
    rng = np.random.default_rng(seed)
    last = None
    for attempt in range(max_retries + 1):
        outer = rect
        if attempt:
            # jitter the cover; the outer contour moves outward only slightly
            pad = 1e-7 * attempt * max(rect.width, rect.height) * rng.random()
            outer = Rect(rect.x0 - pad, rect.x1 + pad, rect.y0 - pad, rect.y1 + pad)
        try:
            zeros, count = _search(f, df, outer, rng, step, cluster_rtol)
        except EdgeZeroError as exc:
            logger.debug("edge zero, retrying with jittered cover (%s)", exc)
            last = exc
            continue
        break
    else:
        raise EdgeZeroError(f"zero on contour after {max_retries} retries") from last

    zeros = np.array(sorted(zeros, key=lambda z: (z.real, z.imag)), dtype=complex)
    if zeros.size != count:
        raise IncompleteSearchError(f"winding count {count} but {zeros.size} zeros polished")
    if zeros.size:
        res = np.abs(np.asarray(f(zeros), dtype=complex))
        scale = np.ones(zeros.size) if residual_scale is None else np.asarray(residual_scale(zeros))
        if np.any(res > residual_tol * scale):
            raise RootFindingError(f"residual {res.max():.2e} above tolerance")
    # zeros found in a slightly enlarged rectangle are clipped back
    keep = np.array([rect.contains(z) for z in zeros], dtype=bool) if zeros.size else np.zeros(0, bool)
    return zeros[keep], int(keep.sum()) if zeros.size else 0


def _search(f, df, rect, rng, step, cluster_rtol):
    edges = _EdgeCache(f, step)
    fracs = _fractions(rng)
    count = _winding(edges, rect)
    if count < 0:
        raise RootFindingError("negative winding number for an entire function")
    zeros = []
    stack = [(rect, count)]
    while stack:
        r, n = stack.pop()
        if n == 0:
            continue
        size = max(r.width, r.height)
        if n == 1:
            z = _newton(f, df, r.center)
            if z is not None and r.contains(z, margin=1e-12 * max(1.0, abs(z))):
                zeros.append(z)
                continue
            if size < 1e-10 * max(1.0, abs(r.center)):
                raise RootFindingError(f"Newton failed near {r.center}")
        elif size < cluster_rtol * max(1.0, abs(r.center)):
            raise SimplicityError(f"{n} zeros clustered near {r.center:.10g}")
        a, b = r.split(next(fracs))
        na = _winding(edges, a)
        nb = _winding(edges, b)
        if na + nb != n or na < 0 or nb < 0:
            raise EdgeZeroError("winding counts of halves do not add up")
        stack.append((a, na))
        stack.append((b, nb))
    return zeros, count
