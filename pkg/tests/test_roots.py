import numpy as np
import pytest
from hypothesis import given, strategies as st

from latelump.roots import Rect, find_zeros, winding_number
from latelump.spectral import SimplicityError


def _poly(roots):
    roots = np.asarray(roots, dtype=complex)
    c = np.poly(roots)
    dc = np.polyder(c)
    return (lambda z: np.polyval(c, z)), (lambda z: np.polyval(dc, z))


def test_polynomial_roots_found_and_counted():
    roots = [1 + 2j, -3 + 0.5j, 2 - 4j, -0.25j]
    f, df = _poly(roots)
    zeros, count = find_zeros(f, df, Rect(-5, 5, -5, 5))
    assert count == 4
    for r in roots:
        assert np.min(np.abs(zeros - r)) < 1e-10


def test_roots_outside_rect_excluded():
    f, df = _poly([1.0, 10.0])
    zeros, count = find_zeros(f, df, Rect(-2, 2, -2, 2))
    assert count == 1 and zeros.size == 1


def test_sine_zeros_on_real_axis():
    zeros, count = find_zeros(np.sin, np.cos, Rect(-10, 10, -1, 1.3), step=0.5)
    ref = np.pi * np.arange(-3, 4)
    assert count == 7
    assert np.max(np.abs(np.sort(zeros.real) - ref)) < 1e-12


def test_zero_on_edge_is_retried():
    f, df = _poly([2.0 + 0.5j])
    zeros, count = find_zeros(f, df, Rect(-2, 2, -2, 2))  # zero sits on x = 2
    assert count == 1 and abs(zeros[0] - (2 + 0.5j)) < 1e-10


def test_double_root_reported():
    f, df = _poly([1.0, 1.0])
    with pytest.raises(SimplicityError):
        find_zeros(f, df, Rect(-2, 3, -2, 2))


def test_winding_number_of_identity():
    assert winding_number(lambda z: z, Rect(-1, 1, -1, 1)) == 1
    assert winding_number(lambda z: z - 5, Rect(-1, 1, -1, 1)) == 0


@given(st.lists(st.tuples(st.integers(-40, 40), st.integers(-40, 40)), min_size=1, max_size=5, unique=True))
def test_random_simple_polynomials(pts):
    roots = np.array([complex(a, b) / 10 for a, b in pts]) + 0.0123 + 0.0071j
    f, df = _poly(roots)
    zeros, count = find_zeros(f, df, Rect(-5, 5, -5, 5))
    assert count == roots.size == zeros.size
    for r in roots:
        assert np.min(np.abs(zeros - r)) < 1e-8
