"""
Disk families around desired eigenvalues and checks of the spectral
convergence guarantees: containment of the closed-loop spectrum in the disks
and exactly one eigenvalue per disk.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .feedback import hausdorff
from .spectral import SimplicityError, Spectrum, Window
from .target import (TargetDynamics, _tail_sum, desired_spectrum,
                     gap_distances_with_branch, sample_points)

__all__ = ["DiskFamily", "ConvergenceReport", "MinimalOrderResult", "GapError",
           "gap_distances", "disk_family", "verify_pairwise_bound", "verify_eps_bound",
           "verify_theorem_conv", "minimal_order", "theorem_criterion", "margin_criterion"]


class GapError(ValueError):
    """Gap distance undefined (single eigenvalue and no analytic continuation)."""


def gap_distances(s: Spectrum, t: TargetDynamics | None = None) -> np.ndarray:
    """
    Distance of every eigenvalue to the rest of the spectrum.

    With ``t`` the neutral branch is continued beyond the window, so
    eigenvalues at the window edge see their true neighbours.

    Raises
    ------
    SimplicityError
        Two eigenvalues coincide.
    GapError
        Fewer than two eigenvalues and no continuation.
    """
    lams = s.eigenvalues
    if t is not None:
        d = gap_distances_with_branch(t, s)
    else:
        if lams.size < 2:
            raise GapError("gap of a single eigenvalue needs analytic continuation")
        dist = np.abs(lams[:, None] - lams[None, :])
        np.fill_diagonal(dist, np.inf)
        d = dist.min(axis=1)
    if d.size and np.any(d <= 1e-9 * np.maximum(1.0, np.abs(lams))):
        raise SimplicityError("coincident eigenvalues")
    return d


@dataclass(frozen=True)
class DiskFamily:
    """Disks ``|z - centers[i]| < epsilon * gaps[i] / 3``."""
    centers: np.ndarray
    gaps: np.ndarray
    epsilon: float

    def __post_init__(self):
        if not 0 < self.epsilon <= 1:
            raise ValueError("epsilon must lie in (0, 1]")
        c = np.asarray(self.centers, dtype=complex)
        g = np.asarray(self.gaps, dtype=float)
        if c.shape != g.shape:
            raise ValueError("centers and gaps must align")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "gaps", g)

    @property
    def radii(self) -> np.ndarray:
        return self.epsilon * self.gaps / 3.0

    def inside_window(self, w: Window) -> np.ndarray:
        """Disks whose closure lies in ``w``."""
        c, r = self.centers, self.radii
        return ((c.real - r >= w.re_min) & (c.real + r <= w.re_max)
                & (np.abs(c.imag) + r <= w.im_max))

    def membership(self, z) -> np.ndarray:
        """Boolean matrix ``[point, disk]``."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        return np.abs(z[:, None] - self.centers[None, :]) < self.radii[None, :]

    def pairwise_disjoint(self) -> bool:
        c, r = self.centers, self.radii
        d = np.abs(c[:, None] - c[None, :])
        np.fill_diagonal(d, np.inf)
        return bool(np.all(d > r[:, None] + r[None, :]))


def disk_family(t: TargetDynamics, w: Window, epsilon: float, pad: float | None = None) -> DiskFamily:
    """
    Disks around the desired eigenvalues in ``w`` enlarged by ``pad``
    vertically (two branch spacings by default), so eigenvalues near the
    window edge can be attributed to their disk.
    """
    pad = 2 * t.branch_spacing if pad is None else pad
    s = desired_spectrum(t, w.enlarged(d_im=pad))
    return DiskFamily(s.eigenvalues, gap_distances(s, t), epsilon)


def _pair_sums(b, lams):
    b = np.asarray(b, dtype=complex)
    lams = np.asarray(lams, dtype=complex)
    diff = lams[:, None] - lams[None, :]
    np.fill_diagonal(diff, np.inf)
    return np.sum(np.abs(b[None, :] / diff) ** 2, axis=1)


def verify_pairwise_bound(b, s: Spectrum, t: TargetDynamics | None = None) -> float:
    """``max_j sum_{i != j} |b_i / (lam_j - lam_i)|^2``, plus the branch tail when ``t`` is given."""
    b = np.asarray(b, dtype=complex)
    if b.size == 0 or not np.any(b):
        return 0.0
    lams = s.eigenvalues[:b.size]
    vals = _pair_sums(b, lams)
    if t is not None:
        vals = vals + _tail_sum(t, s.window, lams, float(np.abs(b).max()))
    return float(vals.max())


def verify_eps_bound(b, s: Spectrum, eps: float, sample_count: int = 40,
                     t: TargetDynamics | None = None, per_disk: int = 64) -> float:
    """
    Largest sampled ``sum_i |b_i / (lam - lam_i)|^2`` outside the disks ``D^eps``.

    Samples are ``per_disk`` points on every disk boundary and a
    ``sample_count`` square lattice of the window.
    """
    b = np.asarray(b, dtype=complex)
    if b.size == 0 or not np.any(b):
        return 0.0
    lams = s.eigenvalues[:b.size]
    gaps = gap_distances(s, t)[:b.size]
    pts = sample_points(s.window, lams, eps * gaps / 3.0, grid=sample_count, per_disk=per_disk)
    val = np.sum(np.abs(b[None, :] / (pts[:, None] - lams[None, :])) ** 2, axis=1)
    if t is not None:
        val = val + _tail_sum(t, s.window, pts, float(np.abs(b).max()))
    return float(val.max()) if val.size else 0.0


@dataclass
class ConvergenceReport:
    n: int
    contained: bool
    one_per_disk: bool
    unmatched_eigenvalues: list
    max_re_closed_loop: float
    hausdorff: float
    excluded_disks: int = 0
    disk_counts: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.contained and self.one_per_disk

    def to_dict(self) -> dict:
        return {"n": self.n, "contained": self.contained, "one_per_disk": self.one_per_disk,
                "passed": self.passed,
                "unmatched_eigenvalues": [[float(z.real), float(z.imag)] for z in self.unmatched_eigenvalues],
                "max_re_closed_loop": self.max_re_closed_loop, "hausdorff": self.hausdorff,
                "excluded_disks": self.excluded_disks}


def verify_theorem_conv(closed: Spectrum, disks: DiskFamily, w: Window | None = None,
                        n: int = -1) -> ConvergenceReport:
    """
    Containment of ``closed`` in the disks and one eigenvalue per disk.

    Disks whose closure leaves ``w`` are excluded from the one-per-disk count
    but still accept eigenvalues for containment.
    """
    w = w or closed.window
    lams = closed.eigenvalues[w.contains(closed.eigenvalues)]
    member = disks.membership(lams)
    in_any = member.any(axis=1)
    unmatched = [complex(z) for z in lams[~in_any]]
    counted = disks.inside_window(w)
    counts = member.sum(axis=0)
    one = bool(np.all(counts[counted] == 1)) and bool(np.all(member.sum(axis=1) <= 1))
    des = disks.centers[w.contains(disks.centers)]
    return ConvergenceReport(
        n=n, contained=not unmatched, one_per_disk=one, unmatched_eigenvalues=unmatched,
        max_re_closed_loop=float(lams.real.max()) if lams.size else float("-inf"),
        hausdorff=hausdorff(lams, des), excluded_disks=int((~counted).sum()),
        disk_counts=[int(c) for c in counts[counted]])


def theorem_criterion(rep: ConvergenceReport) -> bool:
    return rep.passed


def margin_criterion(max_re: float) -> Callable[[ConvergenceReport], bool]:
    """Stability-margin variant: every windowed closed-loop eigenvalue has ``Re <= max_re``."""
    def crit(rep: ConvergenceReport) -> bool:
        return rep.max_re_closed_loop <= max_re
    return crit


@dataclass
class MinimalOrderResult:
    n_eps: int | None
    first_pass: int | None
    trail: list
    non_monotone: list

    def to_dict(self) -> dict:
        return {"n_eps": self.n_eps, "first_pass": self.first_pass,
                "non_monotone": self.non_monotone, "trail": [r.to_dict() for r in self.trail]}


def minimal_order(evaluate: Callable[[int], ConvergenceReport], n_range: Iterable[int],
                  criterion: Callable[[ConvergenceReport], bool] = theorem_criterion) -> MinimalOrderResult:
    """
    Smallest ``n`` from which the criterion holds up to the end of ``n_range``.

    ``first_pass`` is the first ``n`` that passes at all.  ``non_monotone``
    lists orders that fail although a smaller order already passed.
    """
    ns = sorted(n_range)
    if not ns:
        raise ValueError("empty order range")
    trail = [evaluate(n) for n in ns]
    ok = [bool(criterion(r)) for r in trail]
    first = next((n for n, o in zip(ns, ok) if o), None)
    n_eps = None
    for k in range(len(ns) - 1, -1, -1):
        if not ok[k]:
            break
        n_eps = ns[k]
    non_mono = [n for n, o in zip(ns, ok) if first is not None and n > first and not o]
    return MinimalOrderResult(n_eps, first, trail, non_mono)
