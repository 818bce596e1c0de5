"""Brute-force check of the fringe series: incoherent sum of point-source Fresnel patterns.

A point source at x0 in the G1 plane illuminates a finite G2 of ``n_periods``
slits; each slit contributes the Fresnel integral

    int exp{i pi [(xi - x0)^2 / (lambda L) + (x - xi)^2 / (lambda eta L)]} dxi

to the amplitude at detector position x. Completing the square turns it into
a difference of complex Fresnel integrals, which is the default route. A
composite Gauss-Legendre route is kept as an independent cross-check.
Only a = 0 is supported.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import fresnel

from .errors import DomainError, UnsupportedRegimeError
from .geometry import SetupGeometry, integer_order
from .gratings import GratingSpec
from .talbot import FringePattern, check_grid

MIN_PERIODS = 100
MIN_SOURCES = 64
MIN_INTEGRATION_SAMPLES = 200
PANEL_ORDER = 8
METHODS = ("fresnel", "quadrature")


def default_sources(n_periods: int) -> int:
    """Sources per G1 period needed to resolve a point-source pattern through n_periods slits.

    Point-source fringes narrow as the illuminated aperture grows, so the
    source sampling has to grow with it; 5/8 per slit converged in tests.
    """
    return max(MIN_SOURCES, -(-5 * n_periods // 8))


@dataclass(frozen=True)
class OracleConfig:
    setup: SetupGeometry
    grating1: GratingSpec
    grating2: GratingSpec
    wavelength: float
    n_periods: int = 200
    n_sources: Optional[int] = None
    integration_samples: int = 256
    method: str = "fresnel"

    def __post_init__(self):
        if self.n_sources is None:
            object.__setattr__(self, "n_sources", default_sources(self.n_periods))
        if self.setup.a != 0:
            raise UnsupportedRegimeError("the Fresnel oracle supports a = 0 only")
        if not self.wavelength > 0:
            raise DomainError("wavelength must be positive")
        if self.n_periods < MIN_PERIODS:
            raise DomainError(f"n_periods must be >= {MIN_PERIODS}")
        if self.n_sources < MIN_SOURCES:
            raise DomainError(f"n_sources must be >= {MIN_SOURCES}")
        if self.integration_samples < MIN_INTEGRATION_SAMPLES:
            raise DomainError(f"integration_samples must be >= {MIN_INTEGRATION_SAMPLES}")
        if self.method not in METHODS:
            raise DomainError(f"method must be one of {METHODS}")
        for g, d in ((self.grating1, self.setup.d1), (self.grating2, self.setup.d2)):
            if not np.isclose(g.period, d, rtol=1e-12, atol=0):
                raise DomainError("grating periods must match the setup")

    @classmethod
    def build(cls, setup: SetupGeometry, open_fraction: float, wavelength: float, **kw) -> "OracleConfig":
        return cls(
            setup,
            GratingSpec(setup.d1, open_fraction),
            GratingSpec(setup.d2, open_fraction),
            wavelength,
            **kw,
        )

    @property
    def slit_edges(self) -> np.ndarray:
        """(n_periods, 2) open-slit intervals of G2, centred on the origin."""
        d, f = self.setup.d2, self.grating2.open_fraction
        m = np.arange(self.n_periods) - self.n_periods // 2
        return np.stack([m * d, (m + f) * d], axis=1)


def _quadratic_form(cfg: OracleConfig, x0: float, xs: np.ndarray):
    """Phase = pi A (xi - c)^2 + const; returns A and the centres c(x)."""
    s = cfg.setup
    lam_l = cfg.wavelength * s.L
    A = (1.0 + 1.0 / s.eta) / lam_l
    B = (x0 + xs / s.eta) / lam_l
    return A, B / A


def _amplitude_fresnel(cfg: OracleConfig, x0: float, xs: np.ndarray) -> np.ndarray:
    A, centres = _quadratic_form(cfg, x0, xs)
    scale = math.sqrt(2.0 * A)
    edges = cfg.slit_edges
    t = scale * (edges[None, :, :] - centres[:, None, None])
    S, C = fresnel(t)
    E = C + 1j * S
    # the constant phase exp(-i pi B^2 / A) drops out of |.|^2
    return (E[:, :, 1] - E[:, :, 0]).sum(axis=1) / scale


def _amplitude_quadrature(cfg: OracleConfig, x0: float, xs: np.ndarray) -> np.ndarray:
    A, centres = _quadratic_form(cfg, x0, xs)
    panels = max(1, cfg.integration_samples // PANEL_ORDER)
    nodes, weights = np.polynomial.legendre.leggauss(PANEL_ORDER)
    edges = cfg.slit_edges
    width = (edges[0, 1] - edges[0, 0]) / panels
    # composite rule on one slit, reused for every slit by translation
    local = (np.arange(panels)[:, None] + 0.5 * (nodes[None, :] + 1.0)) * width
    local = local.ravel()
    w = np.tile(weights * 0.5 * width, panels)
    xi = (edges[:, 0][:, None] + local[None, :]).ravel()
    ww = np.tile(w, edges.shape[0])
    out = np.empty(xs.size, dtype=complex)
    for j, c in enumerate(centres):
        out[j] = np.sum(ww * np.exp(1j * np.pi * A * (xi - c) ** 2))
    return out


def point_source_pattern(x0: float, cfg: OracleConfig, xs) -> np.ndarray:
    """|amplitude|^2 at the detector for a point source at x0 in the G1 plane."""
    xs = check_grid(xs)
    t2 = cfg.grating2
    if t2.amp_closed != 0 or t2.amp_open != 1:
        raise UnsupportedRegimeError("the oracle models opaque bars and fully open slits only")
    amp = _amplitude_fresnel(cfg, x0, xs) if cfg.method == "fresnel" else _amplitude_quadrature(cfg, x0, xs)
    return np.abs(amp) ** 2


def source_positions(cfg: OracleConfig) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre sources inside the G1 slits of one resonance cell (q periods)."""
    q = integer_order(cfg.setup)
    d1, f = cfg.setup.d1, cfg.grating1.open_fraction
    nodes, weights = np.polynomial.legendre.leggauss(cfg.n_sources)
    u = 0.5 * (nodes + 1.0) * f * d1
    w = 0.5 * weights * f * d1 * abs(cfg.grating1.amp_open) ** 2
    starts = (np.arange(q) - (q - 1) // 2) * d1
    return (starts[:, None] + u[None, :]).ravel(), np.tile(w, q)


def _pairwise_sum(rows: list[np.ndarray]) -> np.ndarray:
    while len(rows) > 1:
        rows = [rows[i] + rows[i + 1] if i + 1 < len(rows) else rows[i] for i in range(0, len(rows), 2)]
    return rows[0]


def incoherent_pattern(cfg: OracleConfig, xs, threads: int = 1) -> FringePattern:
    """Weighted sum of point-source patterns over G1's open area, scaled to unit mean."""
    xs = check_grid(xs)
    if cfg.grating1.amp_closed != 0:
        raise UnsupportedRegimeError("the oracle models opaque G1 bars only")
    positions, weights = source_positions(cfg)

    def one(k):
        return weights[k] * point_source_pattern(positions[k], cfg, xs)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            rows = list(pool.map(one, range(positions.size)))
    else:
        rows = [one(k) for k in range(positions.size)]
    total = _pairwise_sum(rows)
    mean = float(total.mean())
    return FringePattern(
        xs=xs,
        intensities=total / mean,
        period=cfg.setup.d3,
        displacement=0.0,
        normalization=mean,
    )


def unit_mean(p: FringePattern) -> np.ndarray:
    mean = float(np.mean(p.intensities))
    if mean <= 0:
        raise DomainError("pattern mean must be positive")
    return p.intensities / mean


def compare(oracle_pattern: FringePattern, series_pattern: FringePattern) -> float:
    """RMS of the pointwise difference over the standard deviation of the series pattern.

    Both patterns are rescaled to unit mean first.
    """
    xa, xb = np.asarray(oracle_pattern.xs), np.asarray(series_pattern.xs)
    if xa.shape != xb.shape or not np.allclose(xa, xb, rtol=0, atol=1e-12 * max(1.0, np.abs(xb).max())):
        raise DomainError("patterns must share the same grid")
    a, b = unit_mean(oracle_pattern), unit_mean(series_pattern)
    spread = float(np.std(b))
    if spread == 0:
        return 0.0 if np.array_equal(a, b) else math.inf
    return float(np.sqrt(np.mean((a - b) ** 2)) / spread)
