"""Near-field fringe engine: Talbot coefficients, intensity series, visibility, carpets.

The detector intensity for a monochromatic beam is the Fourier series

    I(x) = sum_l conj(A_l) B_{lq}(alpha_l) exp(-2 pi i l (x - dx) / d3)

with d3 = eta d1, alpha_l = (L/L_T)(d2/d1) l and L_T = d2^2/lambda. The minus
sign matches the grating convention in ``gratings`` (slits open on [0, f d)),
so patterns live in the same frame as the moire and Fresnel models. Because
the terms are conjugate-paired, the series is evaluated internally as
sum_l c_l exp(+2 pi i l x / d3) with c_l = A_l conj(B_{lq}(alpha_l)) e^{-2 pi i l dx / d3}.
The normalisation constant is fixed to 1, so intensities are in arbitrary units.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError, TalbotLauError
from .geometry import (
    SetupGeometry,
    de_broglie,
    fringe_displacement,
    integer_order,
    speed_for_wavelength,
)
from .gratings import GratingSpec, coefficient_table, intensity_table

DEFAULT_L_MAX = 10
DEFAULT_N_MAX = 20
SAMPLES_PER_PERIOD = 1024
MIN_SAMPLES_PER_PERIOD = 256
IMAG_TOL = 1e-12
PLATEAU_TOL = 1e-9


def talbot_coefficient(k: int, alpha, g: GratingSpec, n_max: int = DEFAULT_N_MAX):
    """B_k(alpha) = sum_n b_n conj(b_{n-k}) exp(i pi alpha (k - 2n)).

    The grating series is truncated to |n| <= n_max, so terms whose partner
    index n-k falls outside the window vanish. ``alpha`` may be an array.
    """
    if n_max < 1:
        raise DomainError("n_max must be >= 1")
    b = coefficient_table(g, n_max)
    return _talbot_from_table(int(k), np.asarray(alpha, dtype=float), b, n_max)


def _talbot_from_table(k: int, alpha: np.ndarray, b: np.ndarray, n_max: int):
    n = np.arange(-n_max, n_max + 1)
    keep = np.abs(n - k) <= n_max
    n = n[keep]
    if n.size == 0:
        out = np.zeros(alpha.shape, dtype=complex)
        return out if out.ndim else complex(out)
    prod = b[n + n_max] * np.conj(b[n - k + n_max])
    phase = np.exp(1j * np.pi * np.multiply.outer(alpha, k - 2 * n))
    out = phase @ prod
    return out if np.ndim(out) else complex(out)


@dataclass(frozen=True)
class TalbotContext:
    """Everything needed to evaluate fringe patterns of one interferometer.

    ``mass`` converts speeds to de Broglie wavelengths. ``wavelength`` is the
    optional design wavelength; operations that take a speed ignore it.
    """

    setup: SetupGeometry
    grating1: GratingSpec
    grating2: GratingSpec
    mass: float
    wavelength: Optional[float] = None
    l_max: int = DEFAULT_L_MAX
    n_max: int = DEFAULT_N_MAX
    q: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "q", integer_order(self.setup))
        if self.l_max < 0:
            raise DomainError("l_max must be >= 0")
        if self.n_max < 1:
            raise DomainError("n_max must be >= 1")
        if not self.mass > 0:
            raise DomainError("mass must be positive")
        for g, d in ((self.grating1, self.setup.d1), (self.grating2, self.setup.d2)):
            if not np.isclose(g.period, d, rtol=1e-12, atol=0):
                raise DomainError(f"grating period {g.period} does not match setup period {d}")

    @classmethod
    def build(cls, setup, open_fraction, mass, **kwargs) -> "TalbotContext":
        """Context with identical material gratings (w=1, z=0) of the given open fraction."""
        return cls(
            setup,
            GratingSpec(setup.d1, open_fraction),
            GratingSpec(setup.d2, open_fraction),
            mass,
            **kwargs,
        )

    @property
    def period(self) -> float:
        return self.setup.d3

    def replace(self, **changes) -> "TalbotContext":
        fields = dict(
            setup=self.setup,
            grating1=self.grating1,
            grating2=self.grating2,
            mass=self.mass,
            wavelength=self.wavelength,
            l_max=self.l_max,
            n_max=self.n_max,
        )
        fields.update(changes)
        return TalbotContext(**fields)

    def alpha1(self, wavelength: float) -> float:
        s = self.setup
        return s.talbot_ratio(wavelength) * s.d2 / s.d1


@dataclass(frozen=True)
class FringePattern:
    xs: np.ndarray
    intensities: np.ndarray
    period: float
    displacement: float
    normalization: float
    coefficients: Optional[np.ndarray] = None  # c_l, l = -l_max..l_max

    def clamped(self) -> np.ndarray:
        """Intensities with tiny negative truncation artefacts set to zero."""
        return np.clip(self.intensities, 0.0, None)

    def evaluate(self, x) -> np.ndarray:
        """Evaluate the underlying Fourier series at arbitrary positions."""
        if self.coefficients is None:
            raise TalbotLauError("pattern carries no Fourier coefficients")
        return evaluate_series(self.coefficients, self.period, x)


def period_grid(period: float, periods: int = 1, samples_per_period: int = SAMPLES_PER_PERIOD):
    """Uniform grid over ``periods`` whole periods, right end excluded."""
    if periods < 1 or samples_per_period < 1:
        raise DomainError("periods and samples_per_period must be >= 1")
    n = periods * samples_per_period
    return np.arange(n) * (period / samples_per_period)


def check_grid(xs) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 1 or xs.size == 0:
        raise DomainError("xs must be a non-empty 1-d array")
    if xs.size > 1 and not np.all(np.diff(xs) > 0):
        raise DomainError("xs must be strictly increasing")
    if not np.all(np.isfinite(xs)):
        raise DomainError("xs must be finite")
    return xs


def harmonic_weights(ctx: TalbotContext, wavelengths) -> np.ndarray:
    """Lab-frame harmonic weights A_l conj(B_{lq}(alpha_l)); shape (n_lambda, 2 l_max + 1)."""
    wavelengths = np.atleast_1d(np.asarray(wavelengths, dtype=float))
    if np.any(wavelengths <= 0):
        raise DomainError("wavelengths must be positive")
    s = ctx.setup
    alpha1 = s.L * wavelengths / s.d2**2 * (s.d2 / s.d1)
    A = intensity_table(ctx.grating1, ctx.l_max)
    b = coefficient_table(ctx.grating2, ctx.n_max)
    out = np.empty((wavelengths.size, 2 * ctx.l_max + 1), dtype=complex)
    for i, l in enumerate(range(-ctx.l_max, ctx.l_max + 1)):
        B = _talbot_from_table(l * ctx.q, alpha1 * l, b, ctx.n_max)
        out[:, i] = A[i] * np.conj(B)
    return out


def shift_phases(l_max: int, period: float, displacements) -> np.ndarray:
    """exp(-2 pi i l dx / period); shape (n_dx, 2 l_max + 1)."""
    l = np.arange(-l_max, l_max + 1)
    dx = np.atleast_1d(np.asarray(displacements, dtype=float))
    return np.exp(-2j * np.pi * np.multiply.outer(dx, l) / period)


def evaluate_series(coefficients, period: float, xs, check: bool = True) -> np.ndarray:
    """Real intensity from symmetric Fourier coefficients c_{-L..L}.

    With ``check`` the imaginary residue must stay below 1e-12 of the peak
    modulus; a larger residue means the coefficients are not conjugate-paired.
    """
    c = np.asarray(coefficients)
    l_max = (c.size - 1) // 2
    l = np.arange(-l_max, l_max + 1)
    xs = np.asarray(xs, dtype=float)
    values = np.exp(2j * np.pi * np.multiply.outer(xs, l) / period) @ c
    if check:
        scale = np.max(np.abs(values)) if values.size else 0.0
        if scale > 0 and np.max(np.abs(values.imag)) > IMAG_TOL * scale:
            raise TalbotLauError(
                "intensity series has a non-negligible imaginary part; "
                "coefficients are not conjugate-paired"
            )
    return values.real


def pattern_at_wavelength(
    ctx: TalbotContext, wavelength: float, xs, displacement: float = 0.0
) -> FringePattern:
    xs = check_grid(xs)
    c = harmonic_weights(ctx, [wavelength])[0] * shift_phases(ctx.l_max, ctx.period, [displacement])[0]
    intensities = evaluate_series(c, ctx.period, xs)
    return FringePattern(
        xs=xs,
        intensities=intensities,
        period=ctx.period,
        displacement=displacement,
        normalization=float(c[ctx.l_max].real),
        coefficients=c,
    )


def monochromatic_pattern(ctx: TalbotContext, a: float, speed: float, xs) -> FringePattern:
    if not speed > 0:
        raise DomainError("speed must be positive")
    wavelength = de_broglie(ctx.mass, speed)
    dx = fringe_displacement(a, ctx.setup.t1(speed), ctx.setup.eta)
    return pattern_at_wavelength(ctx, wavelength, xs, dx)


def visibility(p: FringePattern) -> float:
    """(I_max - I_min) / (I_max + I_min) over the sampled grid."""
    xs = np.asarray(p.xs)
    if xs.size >= 2:
        span = xs[-1] - xs[0] + (xs[1] - xs[0])
        if span < p.period * (1 - 1e-9):
            raise DomainError("pattern must span at least one full period")
        if xs.size / (span / p.period) < MIN_SAMPLES_PER_PERIOD * (1 - 1e-9):
            raise DomainError(f"need at least {MIN_SAMPLES_PER_PERIOD} samples per period")
    else:
        raise DomainError("pattern must span at least one full period")
    I = p.clamped()
    hi, lo = float(I.max()), float(I.min())
    if hi + lo <= 0:
        raise DomainError("contrast is undefined for an all-zero pattern")
    return (hi - lo) / (hi + lo)


def sinusoidal_visibility(ctx: TalbotContext, speed: float) -> float:
    """2 |B_q(alpha_1)| / |A_0|."""
    if not speed > 0:
        raise DomainError("speed must be positive")
    A0 = intensity_table(ctx.grating1, 0)[0]
    if A0 == 0:
        raise DomainError("A_0 vanishes; sinusoidal visibility undefined")
    alpha = ctx.alpha1(de_broglie(ctx.mass, speed))
    return 2.0 * abs(talbot_coefficient(ctx.q, alpha, ctx.grating2, ctx.n_max)) / abs(A0)


def talbot_argmax(k: int, g: GratingSpec, lo: float, hi: float, n_max: int = DEFAULT_N_MAX,
                  step: float = 1e-3) -> float:
    """Location of the largest |B_k(alpha)| on [lo, hi], grid then parabolic refinement."""
    alphas = np.arange(lo, hi + 0.5 * step, step)
    mags = np.abs(talbot_coefficient(k, alphas, g, n_max))
    i = int(np.argmax(mags))
    if 0 < i < alphas.size - 1:
        y0, y1, y2 = mags[i - 1 : i + 2]
        denom = y0 - 2 * y1 + y2
        if denom != 0:
            return float(alphas[i] + 0.5 * step * (y0 - y2) / denom)
    return float(alphas[i])


@dataclass(frozen=True)
class Carpet:
    ratios: np.ndarray
    xs: np.ndarray
    intensities: np.ndarray  # (n_ratios, n_x)
    visibilities: np.ndarray

    def peak_ratio(self, tol: float = PLATEAU_TOL) -> float:
        """L/L_T of the visibility maximum.

        Min/max visibility saturates at 1 wherever the pattern touches zero,
        so the maximum can be a flat run of scan points; its midpoint is used.
        """
        v = self.visibilities
        i = int(np.argmax(v))
        lo = hi = i
        while lo > 0 and v[lo - 1] >= v[i] - tol:
            lo -= 1
        while hi < v.size - 1 and v[hi + 1] >= v[i] - tol:
            hi += 1
        return float(0.5 * (self.ratios[lo] + self.ratios[hi]))

    def dominant_period(self, row: Optional[int] = None) -> float:
        """Period of the strongest Fourier mode of one row (the peak row by default)."""
        if row is None:
            row = int(np.argmax(self.visibilities))
        return dominant_period(self.xs, self.intensities[row])


def dominant_period(xs, intensities) -> float:
    """Period of the largest non-constant DFT mode on a uniform grid of whole periods."""
    xs = check_grid(xs)
    if xs.size < 4:
        raise DomainError("need at least 4 samples")
    span = xs[-1] - xs[0] + (xs[1] - xs[0])
    spectrum = np.abs(np.fft.rfft(np.asarray(intensities, dtype=float)))
    spectrum[0] = 0.0
    return float(span / int(np.argmax(spectrum)))


def carpet(
    ctx: TalbotContext,
    ratios: Sequence[float],
    xs,
    a: float = 0.0,
    threads: int = 1,
) -> Carpet:
    """Rows of I(x) versus L/L_T, scanned by varying the wavelength at fixed geometry."""
    ratios = np.asarray(ratios, dtype=float)
    if ratios.ndim != 1 or ratios.size == 0 or np.any(ratios <= 0):
        raise DomainError("ratios must be a non-empty list of positive values")
    xs = check_grid(xs)
    s = ctx.setup

    def row(r):
        wavelength = r * s.d2**2 / s.L
        speed = speed_for_wavelength(ctx.mass, wavelength)
        dx = fringe_displacement(a, s.t1(speed), s.eta)
        p = pattern_at_wavelength(ctx, wavelength, xs, dx)
        return p.intensities, visibility(p)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            rows = list(pool.map(row, ratios))
    else:
        rows = [row(r) for r in ratios]
    intensities = np.array([r[0] for r in rows])
    vis = np.array([r[1] for r in rows])
    return Carpet(ratios, xs, intensities, vis)
