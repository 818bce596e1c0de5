"""Classical moire deflectometer by Monte Carlo ray tracing.

Particles leave a source plane a distance ``source_distance`` before G1 with a
uniform transverse position and speed, fly ballistically under a constant
transverse acceleration, and are kept only if they cross both gratings
through open slits. Arrival positions are histogrammed modulo d3 = eta d1.

Random numbers come from Philox4x64 (numpy ``Philox``) keyed by the seed.
Particles are drawn in fixed batches of ``BATCH`` and batch ``b`` starts at
counter word 1 = b, so every batch owns a disjoint stream and results do not
depend on how batches are spread over threads.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .beam import SpeedDistribution
from .errors import DomainError, StatisticsError
from .geometry import SetupGeometry, de_broglie, fringe_displacement, warn_if_not_classical

BATCH = 1 << 16
MIN_PARTICLES = 10_000
MIN_BINS = 64
MIN_ACCEPTED = 1_000
SOURCE_WIDTH_PERIODS = 100.0
SPREAD_FACTOR = 50.0


@dataclass(frozen=True)
class MCConfig:
    """Monte Carlo setup. ``None`` widths default to twice their lower bounds."""

    setup: SetupGeometry
    dist: SpeedDistribution
    a: float
    open_fraction: float
    n_particles: int = 1_000_000
    bins: int = 128
    seed: int = 0
    source_width: Optional[float] = None
    transverse_speed_halfwidth: Optional[float] = None
    source_distance: float = 0.1
    mass: Optional[float] = None  # only used for the classical-regime warning

    def __post_init__(self):
        s = self.setup
        if self.source_width is None:
            object.__setattr__(self, "source_width", 2 * SOURCE_WIDTH_PERIODS * s.d1)
        if self.transverse_speed_halfwidth is None:
            object.__setattr__(self, "transverse_speed_halfwidth", 2 * self.min_speed_halfwidth)
        if not 0 < self.open_fraction < 1:
            raise DomainError("open fraction must lie in (0, 1)")
        if self.n_particles < MIN_PARTICLES:
            raise DomainError(f"n_particles must be >= {MIN_PARTICLES}")
        if self.bins < MIN_BINS:
            raise DomainError(f"bins must be >= {MIN_BINS}")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be an unsigned 64-bit integer")
        if self.source_width < SOURCE_WIDTH_PERIODS * s.d1:
            raise DomainError("source_width must cover at least 100 G1 periods")
        if self.transverse_speed_halfwidth < self.min_speed_halfwidth:
            raise DomainError("transverse speed spread too small for incoherent illumination")
        if self.source_distance < 0:
            raise DomainError("source_distance must be non-negative")

    @property
    def min_speed_halfwidth(self) -> float:
        return SPREAD_FACTOR * self.dist.mean * self.setup.d1 / self.setup.L

    @property
    def d3(self) -> float:
        return self.setup.d3

    @property
    def pattern_center(self) -> float:
        """Centre of the a=0 shadow pattern: mean of (1+eta) x2 - eta x1 over open slits."""
        s = self.setup
        f = self.open_fraction
        return 0.5 * f * ((1.0 + s.eta) * s.d2 - s.eta * s.d1)

    def with_acceleration(self, a: float) -> "MCConfig":
        from dataclasses import replace

        return replace(self, a=a)


def propagate(x0, v0, v, cfg: MCConfig):
    """Positions at G1, G2 and the detector, plus the acceptance mask.

    Works on scalars or arrays. A particle is accepted when it crosses both
    gratings inside an open slit.
    """
    v = np.asarray(v, dtype=float)
    if np.any(v <= 0):
        raise DomainError("longitudinal speed must be positive")
    s = cfg.setup
    a = cfg.a
    ts = cfg.source_distance / v
    t1 = s.L / v
    t2 = s.eta * s.L / v
    x1 = x0 + v0 * ts + 0.5 * a * ts**2
    x2 = x0 + v0 * (ts + t1) + 0.5 * a * (ts + t1) ** 2
    x3 = x0 + v0 * (ts + t1 + t2) + 0.5 * a * (ts + t1 + t2) ** 2
    f = cfg.open_fraction
    ok = (np.mod(x1, s.d1) < f * s.d1) & (np.mod(x2, s.d2) < f * s.d2)
    return x1, x2, x3, ok


def _batch_rng(seed: int, batch: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed, counter=[0, batch, 0, 0]))


def _draw_speeds(rng: np.random.Generator, dist: SpeedDistribution, n: int) -> np.ndarray:
    if dist.monochromatic:
        return np.full(n, dist.mean)
    out = np.empty(0)
    while out.size < n:
        v = rng.normal(dist.mean, dist.sigma, n)
        keep = v > 0
        if dist.lifetime is not None:
            u = rng.random(n)
            with np.errstate(divide="ignore"):
                keep &= u < np.exp(-dist.flight_length / (dist.lifetime * np.where(v > 0, v, 1.0)))
        out = np.concatenate([out, v[keep]])
    return out[:n]


def _run_batch(cfg: MCConfig, batch: int, n: int, reference: float):
    rng = _batch_rng(cfg.seed, batch)
    x0 = (rng.random(n) - 0.5) * cfg.source_width
    v0 = (2.0 * rng.random(n) - 1.0) * cfg.transverse_speed_halfwidth
    v = _draw_speeds(rng, cfg.dist, n)
    _, _, x3, ok = propagate(x0, v0, v, cfg)
    u = np.mod(x3[ok] - reference, cfg.d3) / cfg.d3
    idx = np.minimum((u * cfg.bins).astype(np.int64), cfg.bins - 1)
    return np.bincount(idx, minlength=cfg.bins)


@dataclass(frozen=True)
class MCHistogram:
    bin_edges: np.ndarray
    counts: np.ndarray
    total_accepted: int
    n_simulated: int
    reference: float
    contrast_estimate: float
    minmax_contrast: float
    displacement_estimate: float
    contrast_error: float = field(default=float("nan"))

    @property
    def period(self) -> float:
        return float(self.bin_edges[-1] - self.bin_edges[0])

    @property
    def bin_centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])


def _harmonic(counts: np.ndarray, k: int) -> complex:
    n = counts.size
    centers = (np.arange(n) + 0.5) / n
    return complex(np.sum(counts * np.exp(-2j * np.pi * k * centers)))


def harmonic_contrast(h: MCHistogram | np.ndarray) -> float:
    """2 |c_1| / c_0 from the circular Fourier coefficients of the binned counts."""
    counts = np.asarray(h.counts if isinstance(h, MCHistogram) else h, dtype=float)
    if counts.size < MIN_BINS:
        raise DomainError(f"need at least {MIN_BINS} bins")
    c0 = counts.sum()
    if c0 == 0:
        raise DomainError("empty histogram")
    return 2.0 * abs(_harmonic(counts, 1)) / c0


def _minmax(counts: np.ndarray) -> float:
    hi, lo = counts.max(), counts.min()
    return float((hi - lo) / (hi + lo)) if hi + lo > 0 else 0.0


def simulate(cfg: MCConfig, threads: int = 1) -> MCHistogram:
    """Histogram of (x3 - pattern_center) mod d3 over accepted particles."""
    if cfg.mass is not None:
        warn_if_not_classical(cfg.setup, de_broglie(cfg.mass, cfg.dist.mean))
    sizes = [BATCH] * (cfg.n_particles // BATCH)
    if cfg.n_particles % BATCH:
        sizes.append(cfg.n_particles % BATCH)
    ref = cfg.pattern_center
    jobs = list(enumerate(sizes))
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(lambda j: _run_batch(cfg, j[0], j[1], ref), jobs))
    else:
        parts = [_run_batch(cfg, b, n, ref) for b, n in jobs]
    counts = np.sum(parts, axis=0).astype(np.int64)
    total = int(counts.sum())
    if total < MIN_ACCEPTED:
        raise StatisticsError(f"only {total} particles accepted; need at least {MIN_ACCEPTED}")
    c1 = _harmonic(counts.astype(float), 1)
    contrast = 2.0 * abs(c1) / total
    # pattern centre from the first-harmonic phase, wrapped to [-d3/2, d3/2)
    shift = -np.angle(c1) / (2 * np.pi) * cfg.d3
    shift = (shift + 0.5 * cfg.d3) % cfg.d3 - 0.5 * cfg.d3
    return MCHistogram(
        bin_edges=np.linspace(0.0, cfg.d3, cfg.bins + 1),
        counts=counts,
        total_accepted=total,
        n_simulated=cfg.n_particles,
        reference=ref,
        contrast_estimate=contrast,
        minmax_contrast=_minmax(counts),
        displacement_estimate=float(shift),
        contrast_error=float(np.sqrt(2.0 / total)),
    )


def cross_correlation_shift(counts_a, counts_0, period: float, max_harmonic=None, refine: int = 64) -> float:
    """Shift s maximising the circular cross-correlation of counts_a(x) with counts_0(x - s).

    The correlation is band-limited to harmonics 1..max_harmonic (all by
    default). The integer-lag peak is refined on the Fourier-interpolated
    correlation over +-1 bin, then by a three-point parabola.
    """
    a = np.asarray(counts_a, dtype=float)
    b = np.asarray(counts_0, dtype=float)
    if a.size != b.size:
        raise DomainError("histograms must have the same binning")
    n = a.size
    cross = np.fft.rfft(a) * np.conj(np.fft.rfft(b))
    cross[0] = 0.0
    if max_harmonic is not None:
        cross[max_harmonic + 1 :] = 0.0
    if not np.any(np.abs(cross) > 0):
        raise StatisticsError("flat histograms carry no displacement information")
    lag = int(np.argmax(np.fft.irfft(cross, n)))
    k = np.arange(cross.size)
    weight = np.where((n % 2 == 0) & (k == n // 2), 1.0, 2.0)

    def corr(u):  # u in bins
        return np.real(np.exp(2j * np.pi * np.multiply.outer(u, k) / n) @ (weight * cross))

    fine = lag + np.linspace(-1.0, 1.0, 2 * refine + 1)
    values = corr(fine)
    i = int(np.argmax(values))
    u = fine[i]
    if 0 < i < fine.size - 1:
        y0, y1, y2 = values[i - 1 : i + 2]
        denom = y0 - 2 * y1 + y2
        if denom < 0:
            u += 0.5 * (fine[1] - fine[0]) * (y0 - y2) / denom
    s = u / n * period
    return float((s + 0.5 * period) % period - 0.5 * period)


def signal_harmonics(*counts, threshold: float = 3.0) -> int:
    """Number of leading harmonics whose amplitude exceeds ``threshold`` shot-noise units in every histogram.

    With common random numbers the shot noise of the two runs is shared and
    shifted by the per-particle drop a T^2/2 rather than the fringe shift, so
    noise-dominated harmonics would pull the correlation peak toward it.
    """
    spectra = [np.abs(np.fft.rfft(np.asarray(c, dtype=float))) for c in counts]
    floor = [threshold * np.sqrt(np.sum(c)) for c in counts]
    k = 0
    while k + 1 < spectra[0].size and all(s[k + 1] > f for s, f in zip(spectra, floor)):
        k += 1
    return k


def mc_displacement(cfg_a: MCConfig, cfg_0: MCConfig, threads: int = 1) -> float:
    """Fringe shift between an accelerated run and its a=0 twin (same seed)."""
    if cfg_0.a != 0:
        raise DomainError("reference configuration must have a = 0")
    if cfg_a.bins != cfg_0.bins or cfg_a.d3 != cfg_0.d3:
        raise DomainError("both runs must share geometry and binning")
    ha = simulate(cfg_a, threads)
    h0 = simulate(cfg_0, threads)
    k = signal_harmonics(ha.counts, h0.counts)
    if k == 0:
        raise StatisticsError("histograms are flat within noise; displacement undefined")
    return cross_correlation_shift(ha.counts, h0.counts, cfg_a.d3, max_harmonic=k)


def expected_displacement(cfg: MCConfig) -> float:
    """Closed-form shift at the mean speed."""
    return fringe_displacement(cfg.a, cfg.setup.t1(cfg.dist.mean), cfg.setup.eta)
