import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from talbotlau.errors import DomainError
from talbotlau.gratings import (
    GratingSpec,
    coefficient_table,
    fourier_coefficient,
    intensity_coefficient,
    intensity_table,
    sinc,
    transmission,
)

fractions = st.floats(0.01, 0.99)

# (1/d) int_0^{fd} exp(+2 pi i n x / d) dx by adaptive quadrature, f = 0.3
FROZEN_F03 = {
    1: 0.1513653457281314 + 0.20833652524606866j,
    2: -0.04677446418943194 + 0.14395699839600817j,
    3: -0.03118297612628797 + 0.01013196313059146j,
}


def _numeric_coefficient(n, f):
    re = integrate.quad(lambda x: np.cos(2 * np.pi * n * x), 0, f, epsabs=1e-14)[0]
    im = integrate.quad(lambda x: np.sin(2 * np.pi * n * x), 0, f, epsabs=1e-14)[0]
    return re + 1j * im


@pytest.mark.parametrize("n", sorted(FROZEN_F03))
def test_frozen_coefficients_f03(n):
    b = fourier_coefficient(n, GratingSpec(1e-6, 0.3))
    assert b == pytest.approx(FROZEN_F03[n], abs=1e-15)


def test_half_open_grating():
    g = GratingSpec(2.0, 0.5)
    assert fourier_coefficient(0, g) == pytest.approx(0.5)
    assert fourier_coefficient(1, g) == pytest.approx(1j / np.pi, abs=1e-16)
    assert fourier_coefficient(2, g) == pytest.approx(0.0, abs=1e-16)
    assert fourier_coefficient(3, g) == pytest.approx(1j / (3 * np.pi), abs=1e-16)


@given(f=fractions, n=st.integers(-6, 6))
def test_coefficients_match_direct_integration(f, n):
    assert fourier_coefficient(n, GratingSpec(1.0, f)) == pytest.approx(_numeric_coefficient(n, f), abs=1e-12)


@given(f=fractions, w=st.floats(0, 1), z=st.floats(0, 1), n=st.integers(0, 30))
def test_conjugate_pairing_for_real_amplitudes(f, w, z, n):
    g = GratingSpec(1.0, f, w, z)
    assert fourier_coefficient(-n, g) == pytest.approx(np.conj(fourier_coefficient(n, g)), abs=1e-15)


@given(f=fractions, w=st.floats(0, 1), z=st.floats(0, 1))
def test_zeroth_coefficient_is_mean_transmission(f, w, z):
    g = GratingSpec(1.0, f, w, z)
    assert fourier_coefficient(0, g) == pytest.approx(f * w + (1 - f) * z, abs=1e-15)


@pytest.mark.parametrize("f", [0.2, 0.3, 0.5, 0.7])
def test_parseval(f):
    g = GratingSpec(1.0, f)
    total = np.sum(np.abs(coefficient_table(g, 20000)) ** 2)
    # tail of sum |b_n|^2 beyond N is below 1/(pi^2 N)
    assert total == pytest.approx(f, abs=1.0 / (np.pi**2 * 20000))


def test_reconstruction_away_from_edges():
    d, f = 3.0, 0.3
    g = GratingSpec(d, f)
    n_max = 4000
    b = coefficient_table(g, n_max)
    n = np.arange(-n_max, n_max + 1)
    xs = np.array([0.1, 0.45, 0.8, 1.5, 2.5, 2.9]) * d / 3.0
    series = (np.exp(-2j * np.pi * np.multiply.outer(xs, n) / d) @ b).real
    assert np.allclose(series, transmission(xs, g).real, atol=2e-3)


def test_transmission_layout():
    g = GratingSpec(1.0, 0.25, 0.8, 0.1)
    assert transmission(0.0, g) == 0.8
    assert transmission(0.2499, g) == 0.8
    assert transmission(0.25, g) == 0.1
    assert transmission(1.1, g) == 0.8
    assert transmission(-0.5, g) == 0.1


def test_intensity_grating_coefficients():
    g = GratingSpec(1.0, 0.4, 0.5, 0.2)
    ig = g.intensity_grating()
    assert ig.amp_open == pytest.approx(0.25) and ig.amp_closed == pytest.approx(0.04)
    assert intensity_coefficient(0, g) == pytest.approx(0.4 * 0.25 + 0.6 * 0.04)
    plain = GratingSpec(1.0, 0.4)
    assert np.allclose(intensity_table(plain, 5), coefficient_table(plain, 5))


def test_table_is_cached_and_read_only():
    g = GratingSpec(1.0, 0.3)
    t = coefficient_table(g, 7)
    assert t is coefficient_table(GratingSpec(5.0, 0.3), 7)
    assert t.shape == (15,)
    with pytest.raises(ValueError):
        t[0] = 0


@pytest.mark.parametrize("kwargs", [dict(period=0, open_fraction=0.3), dict(period=1, open_fraction=0),
                                    dict(period=1, open_fraction=1), dict(period=1, open_fraction=0.3, amp_open=1.5),
                                    dict(period=1, open_fraction=0.3, amp_closed=-2)])
def test_grating_validation(kwargs):
    with pytest.raises(DomainError):
        GratingSpec(**kwargs)


def test_negative_table_size():
    with pytest.raises(DomainError):
        coefficient_table(GratingSpec(1.0, 0.3), -1)


def test_sinc():
    assert sinc(0.0) == 1.0
    assert sinc(np.pi / 2) == pytest.approx(2 / np.pi)
    assert np.allclose(sinc(np.array([0.0, np.pi])), [1.0, 0.0], atol=1e-16)


@given(f=fractions, w=st.complex_numbers(max_magnitude=1), z=st.complex_numbers(max_magnitude=1),
       n=st.integers(-5, 5))
def test_complex_amplitudes_match_direct_integration(f, w, z, n):
    g = GratingSpec(1.0, f, w, z)
    part_open = _numeric_coefficient(n, f)
    part_closed = _numeric_coefficient(n, 1.0) - part_open
    assert fourier_coefficient(n, g) == pytest.approx(w * part_open + z * part_closed, abs=1e-12)


@pytest.mark.parametrize("f", [0.25, 0.3, 0.33, 0.5])
def test_parseval_at_moderate_truncation(f):
    assert abs(np.sum(np.abs(coefficient_table(GratingSpec(1.0, f), 200)) ** 2) - f) < 1e-3
