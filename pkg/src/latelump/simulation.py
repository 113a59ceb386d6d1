"""
Method-of-characteristics simulation of the pneumatic plant.

With the characteristic variables ``xi_pm = sqrt(beta) w1 +- sqrt(alpha) w2``
the PDE is pure transport at speed ``v``: ``xi_+`` moves towards ``z = 0``
and ``xi_-`` towards ``z = 1``.  With ``dt = dz / v`` one step is an exact
shift by one cell; only the boundary closures introduce discretization
error.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .plant import PlantParameters
from .spectral import EigenPair, StateFunction

__all__ = ["GridState", "SimulationTrace", "Transport", "step", "simulate",
           "simulate_observer", "decay_rate", "default_x0", "energy", "physical_energy"]


@dataclass(frozen=True)
class GridState:
    """Characteristic variables on the uniform grid ``z_k = k / m``."""
    xi_plus: np.ndarray
    xi_minus: np.ndarray
    w3: complex
    t: float = 0.0

    @property
    def m(self) -> int:
        return self.xi_plus.size - 1

    @property
    def z(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.m + 1)

    def w1(self, p: PlantParameters):
        return (self.xi_plus + self.xi_minus) / (2 * np.sqrt(p.beta))

    def w2(self, p: PlantParameters):
        return (self.xi_plus - self.xi_minus) / (2 * np.sqrt(p.alpha))

    def state(self, p: PlantParameters) -> StateFunction:
        return StateFunction(self.w1(p), self.w2(p), self.w3, grid=self.z)

    @classmethod
    def from_state(cls, p: PlantParameters, x: StateFunction, m: int, t: float = 0.0) -> "GridState":
        z = np.linspace(0.0, 1.0, m + 1)
        w1, w2 = x.evaluate(z)
        sb, sa = np.sqrt(p.beta), np.sqrt(p.alpha)
        return cls(sb * w1 + sa * w2, sb * w1 - sa * w2, x.w3, t)


def default_x0() -> StateFunction:
    """``w1 = sin(pi z)``, ``w2 = 0``, ``w3 = 0``; compatible with ``w1(0) = w3``."""
    return StateFunction(lambda z: np.sin(np.pi * np.asarray(z)), lambda z: 0.0 * np.asarray(z), 0.0)


def _trap_weights(m):
    w = np.full(m + 1, 1.0 / m)
    w[[0, -1]] *= 0.5
    return w


def energy(gs: GridState, p: PlantParameters) -> float:
    """``||x||^2`` with the trapezoidal rule."""
    wt = _trap_weights(gs.m)
    return float(wt @ (np.abs(gs.w1(p)) ** 2 + np.abs(gs.w2(p)) ** 2) + abs(gs.w3) ** 2)


def physical_energy(gs: GridState, p: PlantParameters) -> float:
    """
    ``int beta |w1|^2 + alpha |w2|^2 dz + (alpha beta / gamma) |w3|^2``.

    Conserved by the open loop (``w2(1) = 0``) when ``gamma > 0``.
    """
    wt = _trap_weights(gs.m)
    return float(wt @ (p.beta * np.abs(gs.w1(p)) ** 2 + p.alpha * np.abs(gs.w2(p)) ** 2)
                 + p.alpha * p.beta / p.gamma * abs(gs.w3) ** 2)


def step(gs: GridState, p: PlantParameters, feedback: Callable[[float, GridState], complex] | None = None,
         rho: complex = 0.0, dt: float | None = None) -> GridState:
    """
    Advance one step of length ``dz / v``.

    The boundary condition at ``z = 1`` is ``w2(1) = rho w1(1) + feedback(t, gs)``;
    ``rho`` is applied at the new time level and ``feedback`` on the old
    state.  ``w3`` follows ``w3' = gamma w2(0)`` by the trapezoidal rule.

    Raises
    ------
    ValueError
        ``dt`` given and different from ``dz / v``.
    """
    m = gs.m
    h = 1.0 / (m * p.v)
    if dt is not None and not np.isclose(dt, h, rtol=1e-12, atol=0):
        raise ValueError("only unit CFL steps dt = dz / v are supported")
    sa, sb = np.sqrt(p.alpha), np.sqrt(p.beta)
    u = 0.0 if feedback is None else feedback(gs.t, gs)
    xp = np.empty_like(gs.xi_plus)
    xm = np.empty_like(gs.xi_minus)
    xp[:-1] = gs.xi_plus[1:]
    xm[1:] = gs.xi_minus[:-1]
    # z = 1: solve (xp - xm)/(2 sa) = rho (xp + xm)/(2 sb) + u for xp
    den = 1.0 / sa - rho / sb
    xp[-1] = (xm[-1] * (1.0 / sa + rho / sb) + 2.0 * u) / den
    # z = 0: w2(0) = (xp(0) - sb w3)/sa, xm(0) = 2 sb w3 - xp(0)
    a = h * p.gamma * sb / (2 * sa)
    w3 = (gs.w3 * (1 - a) + h * p.gamma / (2 * sa) * (gs.xi_plus[0] + xp[0])) / (1 + a)
    xm[0] = 2 * sb * w3 - xp[0]
    return GridState(xp, xm, w3, gs.t + h)


@dataclass
class SimulationTrace:
    times: np.ndarray
    energy: np.ndarray
    control: np.ndarray
    modal_weights: np.ndarray | None = None
    physical_energy: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.times)
        if len(self.energy) != n or len(self.control) != n:
            raise ValueError("trace columns differ in length")


class Transport:
    """
    Plant copy driven by ``w2(1) = rho w1(1) + u``.

    ``weights(gs)`` returns ``<x, psi_i>`` for the sampled adjoint
    eigenfunctions (trapezoidal rule on the transport grid).
    """

    def __init__(self, p: PlantParameters, m: int, pairs: Sequence[EigenPair] = ()):
        self.p = p
        self.m = m
        self.z = np.linspace(0.0, 1.0, m + 1)
        self.wt = _trap_weights(m)
        if pairs:
            ps = [q.adjoint_eigenfunction.evaluate(self.z) for q in pairs]
            self.psi1 = np.conj(np.array([a for a, _ in ps]))
            self.psi2 = np.conj(np.array([b for _, b in ps]))
            self.psi3 = np.conj(np.array([q.adjoint_eigenfunction.w3 for q in pairs]))
        else:
            self.psi1 = self.psi2 = np.zeros((0, m + 1))
            self.psi3 = np.zeros(0)

    def weights(self, gs: GridState) -> np.ndarray:
        w1, w2 = gs.w1(self.p), gs.w2(self.p)
        return self.psi1 @ (self.wt * w1) + self.psi2 @ (self.wt * w2) + self.psi3 * gs.w3


def simulate(p: PlantParameters, x0: StateFunction, T: float, m: int = 400, rho: complex = 0.0,
             gains=None, pairs: Sequence[EigenPair] = (), record_weights: bool = False) -> SimulationTrace:
    """
    Closed loop with ``u = rho w1(1) + sum_i <x, psi_i> k_i``.

    Returns the energy ``||x||^2`` and the applied boundary value ``w2(1)``
    at every step (``T = 0`` gives a single row).
    """
    if T < 0:
        raise ValueError("T must be nonnegative")
    gains = np.zeros(0) if gains is None else np.asarray(gains, dtype=complex)
    if gains.size != len(pairs):
        raise ValueError("gains and pairs differ in length")
    tr = Transport(p, m, pairs)
    gs = GridState.from_state(p, x0, m)
    h = 1.0 / (m * p.v)
    steps = int(round(T / h))
    times, en, ctrl, wts, phys = [], [], [], [], []

    def fb(t, s):
        return complex(tr.weights(s) @ gains) if gains.size else 0.0

    for k in range(steps + 1):
        times.append(gs.t)
        en.append(energy(gs, p))
        phys.append(physical_energy(gs, p))
        ctrl.append(complex(gs.w2(p)[-1]))
        if record_weights:
            wts.append(tr.weights(gs))
        if k < steps:
            gs = step(gs, p, fb, rho)
    return SimulationTrace(np.array(times), np.array(en), np.array(ctrl),
                           np.array(wts) if record_weights else None, np.array(phys),
                           meta={"cells": m, "dt": h, "steps": steps})


def simulate_observer(p: PlantParameters, obs, x0: StateFunction, xhat0: StateFunction,
                      T: float, m: int = 400) -> SimulationTrace:
    """
    Plant (``u = 0``) and observer side by side.

    The observer copy uses ``w2(1) = rho_o (w1(1) - y)`` and the source
    ``sum_i l_i phi_i^o (yhat - y)``; the trace records the error energy.
    """
    if T < 0:
        raise ValueError("T must be nonnegative")
    h = 1.0 / (m * p.v)
    z = np.linspace(0.0, 1.0, m + 1)
    sa, sb = np.sqrt(p.alpha), np.sqrt(p.beta)
    src1 = np.zeros(m + 1, complex)
    src2 = np.zeros(m + 1, complex)
    src3 = 0j
    for q, l in zip(obs.pairs, obs.l):
        f1, f2 = q.eigenfunction.evaluate(z)
        src1 += l * f1
        src2 += l * f2
        src3 += l * q.eigenfunction.w3
    sp, sm = sb * src1 + sa * src2, sb * src1 - sa * src2
    plant = GridState.from_state(p, x0, m)
    est = GridState.from_state(p, xhat0, m)
    steps = int(round(T / h))
    times, en, innov = [], [], []
    rho = obs.rho_o
    for k in range(steps + 1):
        err = GridState(plant.xi_plus - est.xi_plus, plant.xi_minus - est.xi_minus,
                        plant.w3 - est.w3, plant.t)
        times.append(plant.t)
        en.append(energy(err, p))
        y = plant.w1(p)[-1]
        e_y = est.w1(p)[-1] - y
        innov.append(complex(e_y))
        if k == steps:
            break
        plant = step(plant, p)
        # output injection at z = 1: w2(1) = rho (w1(1) - y) with y at the new time level
        y_new = plant.w1(p)[-1]
        est = step(est, p, lambda t, s: -rho * y_new, rho)
        est = GridState(est.xi_plus + h * sp * e_y, est.xi_minus + h * sm * e_y,
                        est.w3 + h * src3 * e_y, est.t)
    return SimulationTrace(np.array(times), np.array(en), np.array(innov),
                           meta={"cells": m, "dt": h, "steps": steps})


def decay_rate(trace: SimulationTrace, t_start: float = 0.0, floor: float = 1e-14) -> float:
    """
    Least-squares slope of ``log(energy) / 2`` on ``t >= t_start``.

    Samples below ``floor`` times the initial energy of the fit window are
    dropped (underflow).
    """
    t = np.asarray(trace.times)
    e = np.asarray(trace.energy)
    sel = t >= t_start
    t, e = t[sel], e[sel]
    if e.size < 2:
        raise ValueError("fit window holds fewer than two samples")
    keep = e > floor * e[0] if e[0] > 0 else e > 0
    if keep.sum() < 2:
        return 0.0 if np.all(e == e[0]) else float("-inf")
    slope = np.polyfit(t[keep], 0.5 * np.log(e[keep]), 1)[0]
    return float(slope)
