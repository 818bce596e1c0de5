"""Binary transmission gratings and their Fourier coefficients.

Convention: T = w on [0, f d) and z on [f d, d), expanded as
T(x) = sum_n b_n exp(-2 pi i n x / d). Then

    b_0 = f w + (1 - f) z,   b_n = (w - z) f sinc(pi n f) exp(i pi n f)  (n != 0),

which reduces to f sinc(pi n f) exp(i pi n f) for material gratings (w=1, z=0).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError


def sinc(u):
    """sin(u)/u with the limit value 1 at u = 0 (unnormalised)."""
    u = np.asarray(u, dtype=float)
    out = np.ones_like(u)
    nz = u != 0
    out[nz] = np.sin(u[nz]) / u[nz]
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class GratingSpec:
    period: float
    open_fraction: float
    amp_open: complex = 1.0
    amp_closed: complex = 0.0

    def __post_init__(self):
        if not self.period > 0:
            raise DomainError("grating period must be positive")
        if not 0 < self.open_fraction < 1:
            raise DomainError(f"open fraction must lie in (0, 1), got {self.open_fraction}")
        if abs(self.amp_open) > 1 or abs(self.amp_closed) > 1:
            raise DomainError("transmission amplitudes must satisfy |w|, |z| <= 1")

    def intensity_grating(self) -> "GratingSpec":
        """Binary grating describing |T(x)|^2."""
        return GratingSpec(
            self.period,
            self.open_fraction,
            abs(self.amp_open) ** 2,
            abs(self.amp_closed) ** 2,
        )


def transmission(x, g: GratingSpec):
    """Complex amplitude transmission at position(s) ``x``."""
    frac = np.mod(np.asarray(x, dtype=float), g.period) / g.period
    out = np.where(frac < g.open_fraction, complex(g.amp_open), complex(g.amp_closed))
    return out if out.ndim else complex(out)


def _coefficients(n: np.ndarray, f: float, w: complex, z: complex) -> np.ndarray:
    phase = np.pi * n * f
    out = (w - z) * f * sinc(phase) * np.exp(1j * phase)
    # the substrate only adds to the mean
    return np.where(n == 0, f * w + (1.0 - f) * z, out)


def fourier_coefficient(n: int, g: GratingSpec) -> complex:
    return complex(_coefficients(np.array([n]), g.open_fraction, g.amp_open, g.amp_closed)[0])


def intensity_coefficient(l: int, g: GratingSpec) -> complex:
    """Fourier coefficient A_l of |T(x)|^2."""
    return fourier_coefficient(l, g.intensity_grating())


@lru_cache(maxsize=256)
def _table(f: float, w: complex, z: complex, n_max: int) -> np.ndarray:
    n = np.arange(-n_max, n_max + 1)
    table = _coefficients(n, f, w, z)
    table.setflags(write=False)
    return table


def coefficient_table(g: GratingSpec, n_max: int) -> np.ndarray:
    """b_n for n = -n_max..n_max (index n + n_max). Cached and read-only."""
    if n_max < 0:
        raise DomainError("n_max must be non-negative")
    return _table(g.open_fraction, complex(g.amp_open), complex(g.amp_closed), int(n_max))


def intensity_table(g: GratingSpec, l_max: int) -> np.ndarray:
    """A_l for l = -l_max..l_max."""
    return coefficient_table(g.intensity_grating(), l_max)
