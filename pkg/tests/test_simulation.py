import math

import numpy as np
import pytest

from latelump.feedback import closed_loop_spectrum, design_feedback
from latelump.observer import design_observer, observer_closed_loop_spectrum
from latelump.plant import BoundaryDynamics, eigenfunction, eigenpairs
from latelump.simulation import (GridState, SimulationTrace, decay_rate, default_x0, energy,
                                 physical_energy, simulate, simulate_observer, step)
from latelump.spectral import ExpSum, StateFunction

from oracles import first_open_loop_frequency


def _zero():
    return StateFunction(ExpSum.zero(), ExpSum.zero(), 0.0)


def test_zero_state_stays_zero(plant, rho):
    tr = simulate(plant, _zero(), 0.2, m=100, rho=rho)
    assert not np.any(tr.energy) and not np.any(tr.control)


def test_stationary_state(plant):
    gs0 = GridState.from_state(plant, eigenfunction(plant, 0.0), 200)
    gs = gs0
    for _ in range(1000):
        gs = step(gs, plant)
    drift = max(np.abs(gs.w1(plant) - 1).max(), np.abs(gs.w2(plant)).max(), abs(gs.w3 - 1))
    assert drift < 1e-10


def test_imaginary_axis_mode_keeps_norm(plant):
    w = first_open_loop_frequency()
    tr = simulate(plant, eigenfunction(plant, 1j * w), 2 * math.pi / w, m=400)
    assert np.ptp(tr.energy) < 1e-3 * tr.energy[0]
    assert np.ptp(tr.physical_energy) < 1e-3 * tr.physical_energy[0]


def test_cfl_step_enforced(plant):
    gs = GridState.from_state(plant, default_x0(), 50)
    with pytest.raises(ValueError):
        step(gs, plant, dt=0.5 / (50 * plant.v))
    ok = step(gs, plant, dt=1 / (50 * plant.v))
    assert ok.t == pytest.approx(1 / (50 * plant.v))


def test_reflection_free_boundary_dissipates(plant):
    tr = simulate(plant, default_x0(), 0.3, m=200, rho=-math.sqrt(plant.beta / plant.alpha))
    assert np.all(np.diff(tr.physical_energy) <= 1e-12 * tr.physical_energy[0])
    assert tr.physical_energy[-1] < tr.physical_energy[0]


def test_intermediate_decay_matches_spectrum(plant, rho, intermediate):
    tr = simulate(plant, default_x0(), 1.0, m=400, rho=rho)
    rate = decay_rate(tr, 0.2)
    expected = intermediate.eigenvalues.real.max()
    assert rate == pytest.approx(expected, rel=0.1)


def test_single_intermediate_mode(plant, rho, intermediate):
    """Real part of the eigenvector initial state (a conjugate pair) decays at Re lambda."""
    lam = intermediate.eigenvalues[1]
    phi = eigenfunction(plant, lam)
    x0 = phi + StateFunction(lambda z: np.conj(phi.w1(z)), lambda z: np.conj(phi.w2(z)), np.conj(phi.w3))
    tr = simulate(plant, x0, 0.6, m=400, rho=rho)
    assert decay_rate(tr, 0.05) == pytest.approx(lam.real, rel=0.1)


def test_modal_weights_follow_eigenvalue(plant, rho, intermediate):
    pairs = eigenpairs(plant, BoundaryDynamics(rho), intermediate, 2)
    q = pairs[1]
    tr = simulate(plant, q.eigenfunction, 0.1, m=800, rho=rho, gains=np.zeros(2), pairs=pairs,
                  record_weights=True)
    expected = np.exp(q.lam * tr.times)
    assert np.abs(tr.modal_weights[:, 1] - expected).max() < 0.02
    assert np.abs(tr.modal_weights[:, 0]).max() < 0.02


def test_closed_loop_decay_n10(plant, target, window, intermediate):
    fb = design_feedback(plant, target, 10, "Intermediate", window)
    tr = simulate(plant, default_x0(), 1.0, m=400, rho=fb.rho, gains=fb.gains, pairs=fb.pairs)
    expected = closed_loop_spectrum(fb, window, intermediate).eigenvalues.real.max()
    assert decay_rate(tr, 0.2) == pytest.approx(expected, rel=0.1)


def test_grid_refinement(plant, target, window):
    fb = design_feedback(plant, target, 3, "Intermediate", window)
    rates = [decay_rate(simulate(plant, default_x0(), 1.0, m=m, rho=fb.rho, gains=fb.gains,
                                 pairs=fb.pairs), 0.2) for m in (400, 800)]
    assert abs(rates[0] - rates[1]) < 0.02 * abs(rates[1])


def test_observer_error_decay(plant, target, window, intermediate):
    obs = design_observer(plant, target, 10, window)
    tr = simulate_observer(plant, obs, default_x0(), _zero(), 1.0, m=400)
    expected = observer_closed_loop_spectrum(obs, window, intermediate).eigenvalues.real.max()
    assert decay_rate(tr, 0.2) == pytest.approx(expected, rel=0.1)


def test_decay_rate_synthetic():
    t = np.linspace(0, 1, 101)
    tr = SimulationTrace(t, np.exp(-20 * t), np.zeros(101))
    assert decay_rate(tr) == pytest.approx(-10.0)
    assert decay_rate(SimulationTrace(t, np.ones(101), np.zeros(101))) == pytest.approx(0.0, abs=1e-12)
    # underflowed tail is dropped
    e = np.exp(-20 * t)
    e[60:] = 0.0
    assert decay_rate(SimulationTrace(t, e, np.zeros(101))) == pytest.approx(-10.0)
    with pytest.raises(ValueError):
        decay_rate(SimulationTrace(t, e, np.zeros(101)), t_start=2.0)


def test_argument_checks(plant, target, window):
    fb = design_feedback(plant, target, 3, "Intermediate", window)
    with pytest.raises(ValueError):
        simulate(plant, default_x0(), 0.1, gains=fb.gains[:2], pairs=fb.pairs)
    with pytest.raises(ValueError):
        simulate(plant, default_x0(), -1.0)
    tr = simulate(plant, default_x0(), 0.0, m=50)
    assert tr.times.size == 1 and tr.energy[0] == pytest.approx(0.5, rel=1e-3)
    with pytest.raises(ValueError):
        SimulationTrace(np.zeros(2), np.zeros(3), np.zeros(2))


def test_energy_helpers(plant):
    gs = GridState.from_state(plant, eigenfunction(plant, 0.0), 10)
    assert energy(gs, plant) == pytest.approx(2.0)
    assert physical_energy(gs, plant) == pytest.approx(plant.beta + plant.alpha * plant.beta / plant.gamma)
    back = gs.state(plant)
    assert np.allclose(back.evaluate(gs.z)[0], 1.0)
