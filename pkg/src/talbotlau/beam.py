"""Polychromatic beams: speed distributions, speed-averaged patterns, displacement fit, sensitivity.

Speed averaging is done on the Fourier coefficients of the pattern, which is
exactly the weighted sum of monochromatic patterns evaluated on any grid.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from scipy import integrate

from .constants import PLANCK
from .errors import DomainError, FitDegenerateError, InfiniteUncertaintyError
from .geometry import ASYMMETRIC, fringe_displacement
from .talbot import (
    FringePattern,
    TalbotContext,
    check_grid,
    evaluate_series,
    harmonic_weights,
    monochromatic_pattern,
    period_grid,
    shift_phases,
    visibility,
)

MIN_NODES = 33
DEFAULT_NODES = 512
SUPPORT_SIGMAS = 4.0
CONVERGENCE_TOL = 1e-3
FIT_TOL = 1e-9  # golden-section bracket width, in units of d3
FIT_SCAN_POINTS = 64


@dataclass(frozen=True)
class SpeedDistribution:
    """Gaussian longitudinal speed distribution, optionally reweighted by decay in flight.

    ``sigma == 0`` is the monochromatic case. With ``lifetime`` set, the
    density is multiplied by exp(-flight_length / (lifetime v)) and renormalised.
    """

    mean: float
    sigma: float = 0.0
    lifetime: Optional[float] = None
    flight_length: Optional[float] = None

    def __post_init__(self):
        if not self.mean > 0:
            raise DomainError("mean speed must be positive")
        if self.sigma < 0:
            raise DomainError("sigma must be non-negative")
        if not self.mean - 3.0 * self.sigma > 0:
            raise DomainError(
                f"mean - 3 sigma must stay positive (mean={self.mean}, sigma={self.sigma})"
            )
        if self.lifetime is not None:
            if not self.lifetime > 0:
                raise DomainError("lifetime must be positive")
            if self.flight_length is None or not self.flight_length > 0:
                raise DomainError("decay weighting needs a positive flight_length")

    @property
    def kind(self) -> str:
        return "gaussian" if self.lifetime is None else "gaussian_with_decay"

    @property
    def monochromatic(self) -> bool:
        return self.sigma == 0

    def with_sigma(self, sigma: float) -> "SpeedDistribution":
        return replace(self, sigma=sigma)

    def _gaussian(self, v):
        z = (v - self.mean) / self.sigma
        return np.exp(-0.5 * z * z) / (math.sqrt(2 * math.pi) * self.sigma)

    def _decay_factor(self, v):
        v = np.asarray(v, dtype=float)
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(v > 0, np.exp(-self.flight_length / (self.lifetime * np.where(v > 0, v, 1.0))), 0.0)

    @property
    def decay_norm(self) -> float:
        """Integral of P(v) exp(-L/(tau v)) over v > 0."""
        lo = max(self.mean - 12 * self.sigma, 0.0)
        hi = self.mean + 12 * self.sigma
        value, _ = integrate.quad(
            lambda v: float(self._gaussian(v) * self._decay_factor(v)),
            lo,
            hi,
            points=[self.mean],
            epsabs=0,
            epsrel=1e-12,
            limit=200,
        )
        return value

    def pdf(self, v):
        if self.monochromatic:
            raise DomainError("monochromatic distribution has no density")
        v = np.asarray(v, dtype=float)
        p = self._gaussian(v)
        if self.lifetime is not None:
            p = p * self._decay_factor(v) / self.decay_norm
        return p if p.ndim else float(p)

    def mode(self) -> float:
        """Most probable speed."""
        if self.monochromatic or self.lifetime is None:
            return self.mean
        # d/dv log P_eff = -(v - mean)/sigma^2 + L/(tau v^2) = 0
        k = self.flight_length / self.lifetime * self.sigma**2
        roots = np.roots([1.0, -self.mean, 0.0, -k])
        real = roots[np.abs(roots.imag) < 1e-9 * abs(self.mean)].real
        return float(real[real > 0].max())

    def support(self) -> tuple[float, float]:
        lo = max(self.mean - SUPPORT_SIGMAS * self.sigma, 0.0)
        return lo, self.mean + SUPPORT_SIGMAS * self.sigma

    def quadrature(self, nodes: int = DEFAULT_NODES) -> tuple[np.ndarray, np.ndarray]:
        """Gauss-Legendre speeds and normalised weights (pdf folded in) on the support."""
        if self.monochromatic:
            return np.array([self.mean]), np.array([1.0])
        if nodes < MIN_NODES:
            raise DomainError(f"at least {MIN_NODES} quadrature nodes are required")
        x, w = np.polynomial.legendre.leggauss(nodes)
        lo, hi = self.support()
        v = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
        p = self._gaussian(v)
        if self.lifetime is not None:
            p = p * self._decay_factor(v)
        weights = w * p
        return v, weights / weights.sum()


def _coefficients(ctx: TalbotContext, dist: SpeedDistribution, a: float, nodes: int) -> np.ndarray:
    v, w = dist.quadrature(nodes)
    wavelengths = PLANCK / (ctx.mass * v)
    dx = 0.5 * a * (ctx.setup.L / v) ** 2 * ctx.setup.eta * (ctx.setup.eta + 1.0)
    H = harmonic_weights(ctx, wavelengths) * shift_phases(ctx.l_max, ctx.period, dx)
    return w @ H


def polychromatic_coefficients(
    ctx: TalbotContext,
    dist: SpeedDistribution,
    a: float,
    nodes: int = DEFAULT_NODES,
    check: bool = True,
) -> np.ndarray:
    """Speed-averaged Fourier coefficients of I_NM(x).

    With ``check`` the result is compared against twice the nodes; a relative
    change above 1e-3 of the dominant coefficient issues a RuntimeWarning.
    """
    c = _coefficients(ctx, dist, a, nodes)
    if check and not dist.monochromatic:
        c2 = _coefficients(ctx, dist, a, 2 * nodes)
        scale = np.max(np.abs(c2))
        if np.max(np.abs(c - c2)) > CONVERGENCE_TOL * scale:
            warnings.warn(
                f"speed quadrature with {nodes} nodes is under-resolved "
                f"(change {np.max(np.abs(c - c2)) / scale:.2e} on doubling)",
                RuntimeWarning,
                stacklevel=2,
            )
        c = c2
    return c


def reference_offset(ctx: TalbotContext, speed: float) -> float:
    """Position of the principal a=0 fringe peak at ``speed``.

    For the asymmetric family the peak sits at eta d1 / 2; otherwise it is
    located numerically (grid maximum then parabolic refinement).
    """
    if ctx.q == ASYMMETRIC:
        return 0.5 * ctx.setup.eta * ctx.setup.d1
    xs = period_grid(ctx.period, 1, 4096)
    p = monochromatic_pattern(ctx, 0.0, speed, xs)
    I = p.intensities
    i = int(np.argmax(I))
    y0, y1, y2 = I[i - 1], I[i], I[(i + 1) % I.size]
    denom = y0 - 2 * y1 + y2
    step = xs[1] - xs[0]
    offset = 0.0 if denom == 0 else 0.5 * (y0 - y2) / denom
    return float(xs[i] + offset * step)


def polychromatic_pattern(
    ctx: TalbotContext,
    dist: SpeedDistribution,
    a: float,
    xs,
    nodes: int = DEFAULT_NODES,
    origin: float = 0.0,
    check: bool = True,
) -> FringePattern:
    """I_NM(x) = sum_j w_j I(x | v_j), evaluated at ``xs + origin``."""
    xs = check_grid(xs)
    if dist.monochromatic:
        p = monochromatic_pattern(ctx, a, dist.mean, xs + origin)
        return replace(p, xs=xs)
    c = polychromatic_coefficients(ctx, dist, a, nodes, check=check)
    I = evaluate_series(c, ctx.period, xs + origin)
    return FringePattern(
        xs=xs,
        intensities=I,
        period=ctx.period,
        displacement=fringe_displacement(a, ctx.setup.t1(dist.mean), ctx.setup.eta),
        normalization=float(c[ctx.l_max].real),
        coefficients=c * np.exp(2j * np.pi * np.arange(-ctx.l_max, ctx.l_max + 1) * origin / ctx.period),
    )


def _golden(f, lo: float, hi: float, tol: float) -> float:
    invphi = (math.sqrt(5) - 1) / 2
    x1 = hi - invphi * (hi - lo)
    x2 = lo + invphi * (hi - lo)
    f1, f2 = f(x1), f(x2)
    while hi - lo > tol:
        if f1 < f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - invphi * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + invphi * (hi - lo)
            f2 = f(x2)
    return 0.5 * (lo + hi)


def fit_shift(target: np.ndarray, reference_coefficients: np.ndarray, period: float, xs) -> float:
    """Shift s minimising sum_j [target_j - I_ref(x_j - s)]^2 within [-period/2, period/2].

    A coarse scan picks the basin, golden-section narrows it and a three-point
    parabola gives the final value.
    """
    xs = np.asarray(xs, dtype=float)
    c = np.asarray(reference_coefficients)
    l_max = (c.size - 1) // 2
    l = np.arange(-l_max, l_max + 1)
    basis = np.exp(2j * np.pi * np.multiply.outer(xs, l) / period)

    def objective(s):
        shifted = basis @ (c * np.exp(-2j * np.pi * l * s / period))
        r = target - shifted.real
        return float(r @ r)

    grid = np.linspace(-0.5 * period, 0.5 * period, FIT_SCAN_POINTS + 1)
    values = np.array([objective(s) for s in grid])
    scale = float(target @ target)
    if scale == 0 or values.max() - values.min() <= 1e-12 * scale:
        raise FitDegenerateError("least-squares objective is flat; no fringe contrast to fit")
    i = int(np.argmin(values))
    h = grid[1] - grid[0]
    s = _golden(objective, grid[i] - h, grid[i] + h, FIT_TOL * period)
    # parabolic refinement on a small symmetric stencil
    e = 1e-6 * period
    y0, y1, y2 = objective(s - e), objective(s), objective(s + e)
    denom = y0 - 2 * y1 + y2
    if denom > 0:
        step = 0.5 * e * (y0 - y2) / denom
        if abs(step) < e:
            s += step
    return float(s)


def effective_displacement_fit(
    ctx: TalbotContext,
    dist: SpeedDistribution,
    a: float,
    xs=None,
    nodes: int = DEFAULT_NODES,
) -> float:
    """Least-squares rigid shift between I_NM at acceleration ``a`` and at a = 0."""
    if xs is None:
        xs = period_grid(ctx.period)
    xs = check_grid(xs)
    target = polychromatic_pattern(ctx, dist, a, xs, nodes=nodes).intensities
    ref = polychromatic_coefficients(ctx, dist, 0.0, nodes)
    return fit_shift(target, ref, ctx.period, xs)


@dataclass(frozen=True)
class CurveRow:
    sigma_rel: float
    contrast: float
    dx_eff: float
    dx_rel: float


def visibility_curve(
    ctx: TalbotContext,
    template: SpeedDistribution,
    sigma_list: Sequence[float],
    a: float,
    xs=None,
    nodes: int = DEFAULT_NODES,
    threads: int = 1,
) -> list[CurveRow]:
    """Contrast and effective displacement for each relative speed spread in ``sigma_list``."""
    if xs is None:
        xs = period_grid(ctx.period)
    xs = check_grid(xs)
    dists = [template.with_sigma(s * template.mean) for s in sigma_list]

    def row(args):
        sigma_rel, dist = args
        pattern = polychromatic_pattern(ctx, dist, a, xs, nodes=nodes)
        ref = polychromatic_coefficients(ctx, dist, 0.0, nodes)
        dx = fit_shift(pattern.intensities, ref, ctx.period, xs)
        return CurveRow(float(sigma_rel), visibility(pattern), dx, dx / ctx.period)

    jobs = list(zip(sigma_list, dists))
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(row, jobs))
    return [row(j) for j in jobs]


@dataclass(frozen=True)
class SensitivityReport:
    contrast: float
    dx_eff: float
    d3: float
    n_counts: float
    sigma_a_over_a: float
    rescaled: Optional[float] = None


def _relative_uncertainty(c: float, dx_eff: float, d3: float, n_counts: float) -> float:
    return 1.0 / (math.sqrt(n_counts) * 2.0 * math.pi * c * abs(dx_eff) / d3)


def sensitivity(c: float, dx_eff: float, d3: float, n_counts: float) -> SensitivityReport:
    """sigma_a / a = 1 / (sqrt(N) 2 pi C dx_eff / d3)."""
    if c == 0 or dx_eff == 0:
        raise InfiniteUncertaintyError("zero contrast or zero displacement: acceleration not measurable")
    if not 0 < c <= 1:
        raise DomainError(f"contrast must lie in (0, 1], got {c}")
    if not (d3 > 0 and n_counts > 0):
        raise DomainError("d3 and n_counts must be positive")
    return SensitivityReport(c, dx_eff, d3, n_counts, _relative_uncertainty(c, dx_eff, d3, n_counts))


def rescaled_sensitivity(report: SensitivityReport, f: float, n0: float) -> float:
    """sqrt(N0) sigma_a/a evaluated with N = f^2 N0 counts."""
    if not 0 < f < 1:
        raise DomainError("open fraction must lie in (0, 1)")
    if not n0 > 0:
        raise DomainError("N0 must be positive")
    rel = _relative_uncertainty(report.contrast, report.dx_eff, report.d3, f * f * n0)
    return math.sqrt(n0) * rel
