import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose

from latelump.plant import BoundaryDynamics, adjoint_eigenfunction, eigenfunction, eigenpairs
from latelump.spectral import (DegeneracyError, EigenPair, ExpSum, GaussLegendre,
                               RepresentationError, SimplicityError, Spectrum, SpectrumLabel,
                               StateFunction, Window, biorthonormalize, gram_matrix,
                               inner_product, modal_weight, mode_order, snap_real)

from oracles import flat_eigenfunction, quad_inner

cplx = st.complex_numbers(max_magnitude=5.0, allow_nan=False, allow_infinity=False)


def _expstate(c, s, w3):
    return StateFunction(ExpSum(c[:2], s[:2]), ExpSum(c[2:], s[2:]), w3)


@st.composite
def exp_states(draw):
    c = draw(st.lists(cplx, min_size=4, max_size=4))
    s = draw(st.lists(cplx, min_size=4, max_size=4))
    return _expstate(c, s, draw(cplx))


def test_inner_product_against_adaptive_quadrature(plant):
    lam, mu = 0.3 + 36.9j, -8.3 - 79.1j
    f = eigenfunction(plant, lam)
    g = eigenfunction(plant, mu)
    ref = quad_inner(*flat_eigenfunction(lam), *flat_eigenfunction(mu))
    assert abs(inner_product(f, g) - ref) < 1e-10 * max(1.0, abs(ref))


def test_inner_product_constant_states():
    one = StateFunction(ExpSum.constant(1.0), ExpSum.constant(2.0), 3.0)
    assert inner_product(one, one) == pytest.approx(1 + 4 + 9)


@given(exp_states(), exp_states())
def test_conjugate_symmetry(f, g):
    a, b = inner_product(f, g), inner_product(g, f)
    assert abs(a - np.conj(b)) <= 1e-9 * max(1.0, abs(a))


@given(exp_states(), exp_states(), cplx)
def test_sesquilinearity(f, g, c):
    assert abs(inner_product(f.scaled(c), g) - c * inner_product(f, g)) <= 1e-8 * max(1, abs(inner_product(f, g)))
    assert abs(inner_product(f, g.scaled(c)) - np.conj(c) * inner_product(f, g)) <= 1e-8 * max(1, abs(inner_product(f, g)))


def test_quadrature_doubling_converges(plant, rho, intermediate):
    lams = intermediate.eigenvalues
    coarse, fine = GaussLegendre(64), GaussLegendre(128)
    for lam in lams:
        f = eigenfunction(plant, lam)
        g = adjoint_eigenfunction(plant, BoundaryDynamics(rho), np.conj(lam))
        a, b = inner_product(f, g, coarse), inner_product(f, g, fine)
        assert abs(a - b) < 1e-10 * max(1.0, abs(b))


def test_gram_matrix_matches_inner_products(plant):
    fs = [eigenfunction(plant, z) for z in (0, 36.9j, -36.9j)]
    G = gram_matrix(fs, fs)
    for i, f in enumerate(fs):
        for j, g in enumerate(fs):
            assert abs(G[i, j] - inner_product(f, g)) < 1e-12 * max(1, abs(G[i, j]))
    assert gram_matrix([], fs).shape == (0, 3)


def test_sampled_states_use_trapezoid():
    z = np.linspace(0, 1, 1001)
    f = StateFunction(z, 0 * z, 0.0, grid=z)
    # int z^2 = 1/3 with trapezoid error h^2/6
    assert inner_product(f, f) == pytest.approx(1 / 3 + 1e-6 / 6, rel=1e-9)
    g = StateFunction(lambda x: x, lambda x: 0 * x, 0.0)
    assert inner_product(f, g) == pytest.approx(inner_product(f, f))


def test_sampled_state_errors():
    with pytest.raises(RepresentationError):
        StateFunction(np.ones(1), np.ones(1), 0.0, grid=np.zeros(1))
    with pytest.raises(RepresentationError):
        StateFunction(np.ones(3), np.ones(2), 0.0, grid=np.linspace(0, 1, 3))
    z = np.linspace(0, 1, 5)
    f = StateFunction(z, z, 0.0, grid=z)
    with pytest.raises(RepresentationError):
        f.evaluate(np.linspace(0, 1, 6))
    g = StateFunction(np.linspace(0, 1, 6), np.zeros(6), 0.0, grid=np.linspace(0, 1, 6))
    with pytest.raises(RepresentationError):
        inner_product(f, g)


def test_biorthonormalize_scales_raw_product_two():
    f = StateFunction(ExpSum.constant(1.0), ExpSum.zero(), 1.0)
    g = StateFunction(ExpSum.constant(1.0), ExpSum.zero(), 1.0)  # <f, g> = 2
    (pair,) = biorthonormalize([EigenPair(0.0, f, g)])
    assert pair.normalized
    assert inner_product(pair.eigenfunction, pair.adjoint_eigenfunction) == pytest.approx(1.0)
    assert pair.eigenfunction is f


def test_biorthonormalize_empty_and_degenerate():
    assert biorthonormalize([]) == []
    f = StateFunction(ExpSum.constant(1.0), ExpSum.zero(), 0.0)
    g = StateFunction(ExpSum.zero(), ExpSum.constant(1.0), 0.0)
    with pytest.raises(DegeneracyError):
        biorthonormalize([EigenPair(0.0, f, g)])


def test_open_loop_cross_products(plant, open_loop):
    pairs = eigenpairs(plant, BoundaryDynamics(0.0), open_loop, 6)
    G = gram_matrix([q.eigenfunction for q in pairs], [q.adjoint_eigenfunction for q in pairs])
    assert np.max(np.abs(G - np.eye(6))) < 1e-8


def test_modal_weight(plant, open_loop):
    pairs = eigenpairs(plant, BoundaryDynamics(0.0), open_loop, 3)
    pi, pj = pairs[1], pairs[2]
    assert modal_weight(pi.eigenfunction, pi) == pytest.approx(1.0, abs=1e-10)
    assert abs(modal_weight(pj.eigenfunction, pi)) < 1e-8
    x = pi.eigenfunction.scaled(2.0) + pj.eigenfunction.scaled(3.0)
    assert modal_weight(x, pi) == pytest.approx(2.0, abs=1e-9)
    raw = EigenPair(pi.lam, pi.eigenfunction, pi.adjoint_eigenfunction)
    with pytest.raises(ValueError):
        modal_weight(x, raw)


def test_window_invariants():
    w = Window(-30.0, 200.0)
    assert w.contains(-30 + 200j) and not w.contains(-31.0) and not w.contains(1j * 201)
    with pytest.raises(ValueError):
        Window(-1.0, 0.0)
    with pytest.raises(ValueError):
        Window(10.0, 1.0, re_max=5.0)
    assert w.enlarged(d_im=5).im_max == 205


@given(st.lists(st.tuples(st.integers(-200, 0), st.integers(0, 1000)), min_size=1, max_size=8, unique=True))
def test_mode_order_is_permutation_invariant(parts):
    # simple spectra only: points on a 0.1 lattice
    parts = [(a / 10, b / 10) for a, b in parts]
    lams = np.array([complex(a, b) for a, b in parts] + [complex(a, -b) for a, b in parts if b > 0])
    a = lams[mode_order(lams)]
    perm = np.random.default_rng(0).permutation(lams.size)
    b = lams[perm][mode_order(lams[perm])]
    assert_allclose(a, b)
    assert np.all(np.diff(np.round(np.abs(a.imag), 8)) >= 0)


def test_spectrum_rejects_outside_and_repeated():
    w = Window(-5.0, 10.0)
    with pytest.raises(ValueError):
        Spectrum(SpectrumLabel.Desired, [-6.0], w)
    s = Spectrum(SpectrumLabel.Desired, [-1.0, -1.0 + 1e-14], w)
    with pytest.raises(SimplicityError):
        s.assert_simple()
    assert s.relabeled("ClosedLoop").label is SpectrumLabel.ClosedLoop


def test_snap_real():
    out = snap_real([1 + 1e-15j, 1 + 1e-3j])
    assert out[0].imag == 0 and out[1].imag == 1e-3
