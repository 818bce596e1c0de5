import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from talbotlau.constants import ELECTRON_MASS, POSITRONIUM_MASS
from talbotlau.errors import DomainError, NonResonantError, TalbotLauError
from talbotlau.geometry import SetupGeometry, de_broglie, fringe_displacement, speed_for_wavelength
from talbotlau.gratings import GratingSpec, coefficient_table, intensity_coefficient
from talbotlau.talbot import (
    TalbotContext,
    carpet,
    dominant_period,
    evaluate_series,
    harmonic_weights,
    monochromatic_pattern,
    pattern_at_wavelength,
    period_grid,
    sinusoidal_visibility,
    talbot_argmax,
    talbot_coefficient,
    visibility,
)

from conftest import PS_WAVELENGTH, electron_carpet_setup, ps_asymmetric, ps_symmetric

fractions = st.floats(0.05, 0.95)
alphas = st.floats(-3.0, 3.0)


def _fft_near_field(f, alpha_prime, k, samples=1 << 15):
    """|Fourier coefficient k| of the intensity a plane wave makes behind a binary grating.

    Free propagation by FFT over one period, distance alpha' L_T; independent
    of the coefficient formula.
    """
    x = np.arange(samples) / samples
    t = (x < f).astype(complex)
    m = np.fft.fftfreq(samples, 1.0 / samples)
    u = np.fft.ifft(np.fft.fft(t) * np.exp(-1j * np.pi * alpha_prime * m**2))
    return abs(np.fft.fft(np.abs(u) ** 2)[k] / samples)


@pytest.mark.parametrize("f,alpha,k", [(0.33, 0.3, 1), (0.5, 0.25, 2), (0.3, 0.7, 1), (0.25, 1.0, 3)])
def test_talbot_coefficient_matches_plane_wave_propagation(f, alpha, k):
    # the k-th harmonic after distance alpha' L_T equals |B_k(k alpha')|
    b = talbot_coefficient(k, k * alpha, GratingSpec(1.0, f), n_max=400)
    assert abs(b) == pytest.approx(_fft_near_field(f, alpha, k), abs=1e-3)


@pytest.mark.parametrize("f,value", [(0.25, 0.22150568114074912), (0.33, 0.27148663793218575),
                                     (0.5, 0.3183098861837907)])
def test_frozen_b1_at_one(f, value):
    assert abs(talbot_coefficient(1, 1.0, GratingSpec(1.0, f), n_max=20)) == pytest.approx(value, rel=1e-13)


def test_frozen_b1_converged():
    # |B_1(1)| -> sin(pi f)/pi as n_max grows
    g = GratingSpec(1.0, 0.25)
    assert abs(talbot_coefficient(1, 1.0, g, n_max=4000)) == pytest.approx(np.sin(np.pi / 4) / np.pi, abs=1e-4)


def test_half_open_b2():
    g = GratingSpec(1.0, 0.5)
    assert abs(talbot_coefficient(2, 1.25, g, n_max=400)) == pytest.approx(1 / (2 * np.pi), rel=1e-3)
    assert talbot_argmax(2, g, 1.0, 2.0) == pytest.approx(1.25, abs=1e-3)
    assert abs(talbot_coefficient(2, 1.0, g, n_max=200)) < 1e-3


def test_b_at_zero_is_intensity_coefficient():
    for f in (0.3, 0.5):
        g = GratingSpec(1.0, f)
        for k in (1, 2, 3):
            assert talbot_coefficient(k, 0.0, g, n_max=400) == pytest.approx(intensity_coefficient(k, g), abs=1e-3)


@given(f=fractions, k=st.integers(-4, 4), alpha=alphas)
def test_periodicity(f, k, alpha):
    g = GratingSpec(1.0, f)
    b = talbot_coefficient(k, alpha, g)
    assert talbot_coefficient(k, alpha + 2.0, g) == pytest.approx(b, abs=1e-12)
    assert abs(talbot_coefficient(k, alpha + 1.0, g)) == pytest.approx(abs(b), abs=1e-12)


@given(f=fractions, k=st.integers(-4, 4), delta=st.floats(0, 1))
def test_modulus_symmetric_about_one(f, k, delta):
    g = GratingSpec(1.0, f)
    assert abs(talbot_coefficient(k, 1 + delta, g)) == pytest.approx(abs(talbot_coefficient(k, 1 - delta, g)), abs=1e-12)


@given(f=fractions, k=st.integers(0, 5), alpha=alphas)
def test_negative_order_is_conjugate_mirror(f, k, alpha):
    g = GratingSpec(1.0, f)
    assert talbot_coefficient(-k, alpha, g) == pytest.approx(np.conj(talbot_coefficient(k, -alpha, g)), abs=1e-13)


def test_talbot_coefficient_array_and_validation():
    g = GratingSpec(1.0, 0.3)
    alphas = np.linspace(0, 2, 7)
    arr = talbot_coefficient(1, alphas, g)
    assert arr.shape == (7,)
    assert arr[3] == pytest.approx(talbot_coefficient(1, alphas[3], g))
    assert isinstance(talbot_coefficient(1, 0.5, g), complex)
    assert talbot_coefficient(50, 0.5, g, n_max=20) == 0
    with pytest.raises(DomainError):
        talbot_coefficient(1, 0.5, g, n_max=0)


def test_b1_argmax():
    assert talbot_argmax(1, GratingSpec(1.0, 0.3), 0.5, 1.5) == pytest.approx(1.0, abs=1e-6)


def _ctx(setup, f=0.3, mass=POSITRONIUM_MASS, **kw):
    return TalbotContext.build(setup, f, mass, **kw)


@given(q=st.sampled_from([1, 2]), f=fractions, lam_scale=st.floats(0.3, 3.0), l_max=st.integers(1, 12))
def test_harmonic_weights_conjugate_paired(q, f, lam_scale, l_max):
    s = ps_asymmetric() if q == 1 else ps_symmetric()
    ctx = _ctx(s, f, l_max=l_max)
    c = harmonic_weights(ctx, [PS_WAVELENGTH * lam_scale])[0]
    assert np.allclose(c[::-1], np.conj(c), atol=1e-15)


def test_l_max_zero_gives_constant():
    s = ps_symmetric()
    ctx = _ctx(s, 0.3, l_max=0)
    xs = period_grid(s.d3, 1, 256)
    p = pattern_at_wavelength(ctx, PS_WAVELENGTH, xs)
    b = coefficient_table(ctx.grating2, ctx.n_max)
    assert np.allclose(p.intensities, 0.3 * np.sum(np.abs(b) ** 2), rtol=1e-13)


def test_pattern_is_periodic():
    s = ps_asymmetric()
    ctx = _ctx(s)
    xs = np.linspace(0, 3 * s.d3, 97)
    p = monochromatic_pattern(ctx, 0.0, 800.0, np.concatenate([xs, xs + s.d3 + 4 * s.d3]))
    n = xs.size
    assert np.allclose(p.intensities[:n], p.intensities[n:], rtol=1e-10, atol=1e-12)


@given(dx_rel=st.floats(-2, 2), q=st.sampled_from([1, 2]))
def test_translation_covariance(dx_rel, q):
    s = ps_asymmetric() if q == 1 else ps_symmetric()
    ctx = _ctx(s)
    xs = period_grid(s.d3, 1, 256)
    dx = dx_rel * s.d3
    shifted = pattern_at_wavelength(ctx, PS_WAVELENGTH, xs, dx).intensities
    moved = pattern_at_wavelength(ctx, PS_WAVELENGTH, xs - dx).intensities
    scale = np.max(np.abs(moved))
    assert np.max(np.abs(shifted - moved)) < 1e-10 * scale


def test_monochromatic_pattern_shift_matches_closed_form():
    s = ps_asymmetric()
    ctx = _ctx(s)
    p = monochromatic_pattern(ctx, 9.81, 800.0, period_grid(s.d3))
    assert p.displacement == fringe_displacement(9.81, s.t1(800.0), 2.0)
    with pytest.raises(DomainError):
        monochromatic_pattern(ctx, 9.81, 0.0, period_grid(s.d3))


def test_asymmetric_peak_at_half_period():
    s = ps_asymmetric()
    xs = period_grid(s.d3, 1, 4096)
    p = monochromatic_pattern(_ctx(s), 0.0, 800.0, xs)
    assert xs[np.argmax(p.intensities)] == pytest.approx(0.5 * s.d3, abs=s.d3 / 4096)


def test_evaluate_series_rejects_unpaired():
    with pytest.raises(TalbotLauError):
        evaluate_series(np.array([0.0, 1.0, 1.0j]), 1.0, np.linspace(0, 1, 16))
    vals = evaluate_series(np.array([0.5, 1.0, 0.5]), 1.0, np.array([0.0, 0.5]))
    assert np.allclose(vals, [2.0, 0.0])


def test_pattern_evaluate_roundtrip():
    s = ps_symmetric()
    xs = period_grid(s.d3, 1, 256)
    p = monochromatic_pattern(_ctx(s), 9.81, 800.0, xs)
    assert np.allclose(p.evaluate(xs), p.intensities)


def test_visibility_grid_checks():
    s = ps_symmetric()
    ctx = _ctx(s)
    p = monochromatic_pattern(ctx, 0.0, 800.0, period_grid(s.d3, 1, 128))
    with pytest.raises(DomainError):
        visibility(p)
    p = monochromatic_pattern(ctx, 0.0, 800.0, period_grid(s.d3, 1, 1024)[:500])
    with pytest.raises(DomainError):
        visibility(p)


def test_grid_validation():
    s = ps_symmetric()
    ctx = _ctx(s)
    for bad in ([], [[0.0, 1.0]], [1.0, 0.5], [0.0, np.nan]):
        with pytest.raises(DomainError):
            monochromatic_pattern(ctx, 0.0, 800.0, bad)


def test_visibility_values():
    # f = 0.3 symmetric resonance at 800 m/s: pattern reaches zero, sinusoidal estimate 2|B_2|/|A_0|
    s = ps_symmetric()
    ctx = _ctx(s)
    p = monochromatic_pattern(ctx, 0.0, 800.0, period_grid(s.d3))
    assert visibility(p) == pytest.approx(1.0, abs=1e-9)
    expected = 2 * abs(talbot_coefficient(2, 1.0, GratingSpec(1.0, 0.3))) / 0.3
    assert sinusoidal_visibility(ctx, 800.0) == pytest.approx(expected, rel=1e-12)
    with pytest.raises(DomainError):
        sinusoidal_visibility(ctx, -1.0)


def test_context_validation():
    s = ps_symmetric()
    with pytest.raises(NonResonantError):
        _ctx(SetupGeometry(1e-6, 1e-6, 1.0, 2.0))
    with pytest.raises(DomainError):
        TalbotContext(s, GratingSpec(2 * s.d1, 0.3), GratingSpec(s.d2, 0.3), POSITRONIUM_MASS)
    with pytest.raises(DomainError):
        _ctx(s, l_max=-1)
    with pytest.raises(DomainError):
        _ctx(s, mass=0.0)
    assert _ctx(s).replace(l_max=3).l_max == 3


def test_electron_carpet_peak_and_period():
    s = electron_carpet_setup()
    ctx = TalbotContext.build(s, 0.3, ELECTRON_MASS, l_max=40, n_max=80)
    xs = period_grid(s.d3, 2, 256)
    ratios = np.round(np.arange(1.2, 1.46, 0.005), 6)
    c = carpet(ctx, ratios, xs, threads=2)
    assert c.intensities.shape == (ratios.size, xs.size)
    assert c.peak_ratio() == pytest.approx(4 / 3, abs=0.01)
    assert c.dominant_period() == pytest.approx(s.d3, rel=1e-12)


def test_carpet_validation():
    s = electron_carpet_setup()
    ctx = TalbotContext.build(s, 0.3, ELECTRON_MASS)
    with pytest.raises(DomainError):
        carpet(ctx, [], period_grid(s.d3, 1, 256))
    with pytest.raises(DomainError):
        carpet(ctx, [0.5, -1.0], period_grid(s.d3, 1, 256))


def test_dominant_period():
    xs = np.arange(300) / 100.0
    assert dominant_period(xs, np.cos(2 * np.pi * xs) + 0.2 * np.cos(6 * np.pi * xs)) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        dominant_period(xs[:3], xs[:3])


def test_carpet_scan_uses_wavelength():
    s = electron_carpet_setup()
    ctx = TalbotContext.build(s, 0.3, ELECTRON_MASS)
    xs = period_grid(s.d3, 1, 256)
    c = carpet(ctx, [1.0], xs)
    lam = s.d2**2 / s.L
    direct = monochromatic_pattern(ctx, 0.0, speed_for_wavelength(ELECTRON_MASS, lam), xs)
    assert np.allclose(c.intensities[0], direct.intensities, rtol=1e-12)
    assert de_broglie(ELECTRON_MASS, speed_for_wavelength(ELECTRON_MASS, lam)) == pytest.approx(lam, rel=1e-14)


def test_b0_at_zero_is_parseval_sum():
    assert talbot_coefficient(0, 0.0, GratingSpec(1.0, 0.3), n_max=200) == pytest.approx(0.3, abs=1e-3)
