import math

import numpy as np
import pytest

from latelump.feedback import (BasisChoice, BoundedKernel, PoleProximityError, assemble_reduced,
                               basis_eigenpairs, build_bounded_kernel, characteristic_g,
                               closed_loop_spectrum, closed_loop_spectrum_char,
                               closed_loop_spectrum_matrix, design_feedback, hausdorff,
                               kernel_defect, kernel_representer, match_spectra, modal_gain)
from latelump.plant import PAPER_PLANT, eigenfunction
from latelump.spectral import EigenPair, SpectrumLabel, StateFunction, Window, inner_product
from latelump.target import TargetDynamics, desired_spectrum

from oracles import flat_eigenfunction, kernel_formula

TAU = PAPER_PLANT.tau


@pytest.fixture(scope="module")
def designs(plant, target, window):
    return {n: design_feedback(plant, target, n, "Intermediate", window) for n in (0, 1, 3, 5, 10, 20)}


def test_kernel_paper_values(plant, target):
    k = build_bounded_kernel(plant, target)
    cp, cm = kernel_formula(12.0, target.mu)
    assert k.c_plus == pytest.approx(cp, rel=1e-14)
    assert k.c_plus == pytest.approx(0.7842, abs=1e-4)
    # the printed minus coefficient has the opposite sign of the one that assigns the target
    assert k.c_minus == pytest.approx(-cm, rel=1e-14)
    assert abs(k.c_minus) == pytest.approx(0.3741, abs=1e-4)


def test_kernel_sign_assigns_desired_spectrum(plant, rho, target, window):
    """Exact boundary law w2(1) = rho w1(1) + c+ chi(t+tau) + c- chi(t-tau) on chi = e^{lam t}."""
    k = build_bounded_kernel(plant, target)
    for lam in desired_spectrum(target, window).eigenvalues:
        w1, w2, _ = flat_eigenfunction(lam)
        resid = w2(1.0) - rho * w1(1.0)
        ok = resid - (k.c_plus * np.exp(lam * TAU) + k.c_minus * np.exp(-lam * TAU))
        printed = resid - (k.c_plus * np.exp(lam * TAU) - k.c_minus * np.exp(-lam * TAU))
        assert abs(ok) < 1e-12 * max(1, abs(resid))
        assert abs(printed) > 1e-3


def test_kernel_limits(plant):
    bgt = plant.beta * plant.gamma * plant.tau
    k = build_bounded_kernel(plant, TargetDynamics((bgt, 1.0), 0.3, TAU))
    assert abs(k.c_plus) < 1e-14
    k = build_bounded_kernel(plant, TargetDynamics((12.0, 1.0), 1e-12, TAU))
    assert abs(k.c_minus) < 1e-11


def test_modal_gain_trivial_cases(plant, kernel):
    pair = EigenPair(0.0, eigenfunction(plant, 0.0), eigenfunction(plant, 0.0))
    assert modal_gain(pair, BoundedKernel(0.0, 0.0), TAU) == 0
    assert modal_gain(pair, kernel, TAU) == pytest.approx(kernel.c_plus + kernel.c_minus)


def test_modal_gain_equals_representer_pairing(plant, kernel, designs):
    k = kernel_representer(plant, kernel)
    for q, g in zip(designs[5].pairs, designs[5].gains):
        assert abs(inner_product(q.eigenfunction, k) - g) < 1e-10 * max(1, abs(g))


def test_control_law_on_eigen_solution(plant, kernel, designs):
    """Feedback value on x = phi_i equals the bounded law on the flat trajectory chi = e^{lam t}."""
    fb = designs[3]
    for i, q in enumerate(fb.pairs):
        u = fb.control(q.eigenfunction)
        expected = fb.rho * q.eigenfunction.w1(1.0) + kernel.on_exponential(q.lam, TAU)
        assert abs(u - expected) < 1e-9 * max(1, abs(expected))


def test_reduced_model_is_diagonal(designs):
    rm = assemble_reduced(designs[3])
    off = rm.A_n - np.diag(np.diag(rm.A_n))
    assert np.abs(off).max() < 1e-8 * np.abs(rm.A_n).max()
    assert np.allclose(np.diag(rm.A_n), rm.eigenvalues, rtol=1e-10)
    empty = assemble_reduced(designs[0])
    assert empty.A_n.shape == (0, 0) and empty.B_n.size == 0


def test_zero_kernel_fixed_point(plant, target, window, intermediate):
    fb = design_feedback(plant, target, 5, "Intermediate", window, kern=BoundedKernel(0.0, 0.0))
    rm = assemble_reduced(fb)
    assert not np.any(rm.K_n)
    s = closed_loop_spectrum_matrix(rm, intermediate, 5)
    assert np.array_equal(s.eigenvalues, intermediate.eigenvalues)
    c = closed_loop_spectrum_char(fb, window, intermediate)
    assert np.array_equal(c.eigenvalues, intermediate.eigenvalues)
    assert s.label is SpectrumLabel.ClosedLoop


def test_n1_scalar_shift(designs, intermediate):
    fb = designs[1]
    rm = assemble_reduced(fb)
    s = closed_loop_spectrum_matrix(rm, intermediate, 1)
    shifted = rm.eigenvalues[0] + rm.B_n[0] * rm.K_n[0]
    assert np.min(np.abs(s.eigenvalues - shifted)) < 1e-12
    assert len(s) == len(intermediate)


def test_matrix_path_requires_intermediate(plant, target, window, intermediate):
    fb = design_feedback(plant, target, 3, "OpenLoop", window)
    rm = assemble_reduced(fb)
    with pytest.raises(ValueError):
        closed_loop_spectrum_matrix(rm, intermediate, 3)


@pytest.mark.parametrize("n", [1, 3, 5])
def test_matrix_and_characteristic_agree(designs, window, intermediate, n):
    fb = designs[n]
    a = closed_loop_spectrum_matrix(assemble_reduced(fb), intermediate, n)
    b = closed_loop_spectrum_char(fb, window, intermediate)
    pairs, ua, ub = match_spectra(a.eigenvalues, b.eigenvalues)
    assert not ua and not ub
    assert max(abs(a.eigenvalues[i] - b.eigenvalues[j]) for i, j in pairs) < 1e-6


def test_g_vanishes_at_closed_loop(designs, window, intermediate):
    fb = designs[3]
    cl = closed_loop_spectrum(fb, window, intermediate)
    g = characteristic_g(cl.eigenvalues, fb, reference="desired")
    assert np.abs(g).max() < 1e-8


def test_g_identity_without_feedback(designs):
    z = np.array([1.0 + 3j, -4 + 50j])
    assert np.allclose(characteristic_g(z, designs[0], reference="intermediate"), 1.0)


def test_g_series_converges_to_exact(plant, target, window, designs):
    fb = designs[3]
    z = np.array([-5.0 + 10j, -20 + 60j])
    exact = characteristic_g(z, fb, reference="desired")
    err = []
    for m in (21, 81):
        dpairs, _ = basis_eigenpairs(plant, target, BasisChoice.Desired, m, window)
        series = characteristic_g(z, fb, reference="desired", method="series", reference_pairs=dpairs)
        err.append(np.abs(exact - series).max())
    # symmetric partial sums of the modal expansion converge like 1/m
    assert err[1] < 0.3 * err[0]
    assert err[1] < 0.02


def test_g_pole_proximity(designs, target, window):
    lam = desired_spectrum(target, window).eigenvalues[0]
    with pytest.raises(PoleProximityError):
        characteristic_g(lam, designs[3], reference="desired")


def test_defect_vanishes_for_full_desired_basis(plant, target, window):
    """A desired-basis design of order n reproduces K exactly on its own eigenfunctions."""
    fb = design_feedback(plant, target, 5, "Desired", window)
    d = kernel_defect(fb, fb.pairs)
    assert np.abs(d).max() < 1e-10


def test_open_loop_basis_n13_margin_comparable(plant, target, window, designs, intermediate):
    fb13 = design_feedback(plant, target, 13, "OpenLoop", window)
    m13 = closed_loop_spectrum(fb13, window, intermediate).eigenvalues.real.max()
    m3 = closed_loop_spectrum(designs[3], window, intermediate).eigenvalues.real.max()
    assert abs(m13 - m3) < 0.1 * abs(m3)


def test_hausdorff_trend(plant, target, window, designs, intermediate):
    des = desired_spectrum(target, window).eigenvalues
    h = [hausdorff(closed_loop_spectrum(designs[n], window, intermediate).eigenvalues, des)
         for n in (1, 20)]
    assert h[1] < h[0]


def test_match_and_hausdorff_helpers():
    pairs, ua, ub = match_spectra([0, 1, 5], [1.1, 0.1])
    assert sorted(pairs) == [(0, 1), (1, 0)] and ua == [2] and ub == []
    assert hausdorff([], []) == 0 and math.isinf(hausdorff([1], []))
    assert hausdorff([0, 1], [0, 3]) == pytest.approx(2.0)
