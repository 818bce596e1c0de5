"""Interferometer geometry, resonance design and closed-form inertial quantities.

All lengths in metres, times in seconds, masses in kilograms.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Optional

from .constants import PLANCK
from .errors import DesignError, DomainError, NonResonantError

ASYMMETRIC = 1
SYMMETRIC = 2
DESIGN_FAMILIES = (ASYMMETRIC, SYMMETRIC)

INTEGER_TOL = 1e-9
CLASSICAL_THRESHOLD = 0.05


@dataclass(frozen=True)
class SetupGeometry:
    """Two-grating interferometer: G1 at y=0, G2 at y=L, detector at y=(1+eta)L.

    ``a`` is the transverse acceleration (signed).
    """

    d1: float
    d2: float
    L: float
    eta: float
    a: float = 0.0

    def __post_init__(self):
        for name in ("d1", "d2", "L", "eta"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise DomainError(f"{name} must be positive and finite, got {value!r}")
        if not math.isfinite(self.a):
            raise DomainError(f"acceleration must be finite, got {self.a!r}")

    @property
    def d3(self) -> float:
        """Fringe period at the detector, eta * d1."""
        return self.eta * self.d1

    @property
    def total_length(self) -> float:
        return self.L * (1.0 + self.eta)

    def t1(self, speed: float) -> float:
        return self.L / speed

    def t2(self, speed: float) -> float:
        return self.eta * self.L / speed

    def talbot_ratio(self, wavelength: float) -> float:
        """L / L_T with L_T = d2**2 / wavelength."""
        return self.L * wavelength / self.d2**2


@dataclass(frozen=True)
class BeamSpec:
    mass: float
    mean_speed: float
    sigma_v: float = 0.0
    lifetime: Optional[float] = None

    def __post_init__(self):
        if not self.mass > 0:
            raise DomainError("mass must be positive")
        if not self.mean_speed > 0:
            raise DomainError("mean_speed must be positive")
        if self.sigma_v < 0:
            raise DomainError("sigma_v must be non-negative")
        if not self.mean_speed - 3.0 * self.sigma_v > 0:
            raise DomainError(
                f"mean_speed - 3 sigma_v must be positive "
                f"(mean={self.mean_speed}, sigma={self.sigma_v})"
            )
        if self.lifetime is not None and not self.lifetime > 0:
            raise DomainError("lifetime must be positive when given")

    @property
    def wavelength(self) -> float:
        return de_broglie(self.mass, self.mean_speed)


def check_family(q) -> int:
    """Validate a resonance order and return it as int."""
    if isinstance(q, bool) or int(q) != q or q < 1:
        raise DomainError(f"resonance order must be a positive integer, got {q!r}")
    return int(q)


def de_broglie(mass: float, speed: float) -> float:
    if not (mass > 0 and speed > 0):
        raise DomainError(f"mass and speed must be positive (mass={mass}, speed={speed})")
    return PLANCK / (mass * speed)


def speed_for_wavelength(mass: float, wavelength: float) -> float:
    if not (mass > 0 and wavelength > 0):
        raise DomainError("mass and wavelength must be positive")
    return PLANCK / (mass * wavelength)


def resonance_order(setup: SetupGeometry) -> tuple[float, bool]:
    """Return ``(q, is_integer)`` with q = (d2/d1)(1+eta)/eta."""
    q = (setup.d2 / setup.d1) * (1.0 + setup.eta) / setup.eta
    return q, abs(q - round(q)) < INTEGER_TOL


def integer_order(setup: SetupGeometry) -> int:
    q, ok = resonance_order(setup)
    if not ok:
        raise NonResonantError(f"resonance order q={q:.12g} is not an integer")
    return int(round(q))


def design_from_family(
    q: int,
    eta: float,
    d2: float,
    wavelength: float,
    alpha1: float = 1.0,
    a: float = 0.0,
) -> SetupGeometry:
    """Resonant geometry for family ``q`` with G2 period ``d2``.

    ``alpha1`` is the Talbot-coefficient argument at the design wavelength;
    the usual resonance sits at 1, giving L = d1 d2 / wavelength.
    """
    if q not in DESIGN_FAMILIES:
        raise DesignError(f"design supports q in {DESIGN_FAMILIES}, got {q!r}")
    if not (eta > 0 and d2 > 0 and wavelength > 0 and alpha1 > 0):
        raise DesignError("eta, d2, wavelength and alpha1 must be positive")
    d1 = d2 * (1.0 + eta) / (q * eta)
    L = alpha1 * d1 * d2 / wavelength
    return SetupGeometry(d1=d1, d2=d2, L=L, eta=eta, a=a)


def design_for_total_length(
    q: int,
    eta: float,
    total_length: float,
    wavelength: float,
    alpha1: float = 1.0,
    a: float = 0.0,
) -> SetupGeometry:
    """Same as :func:`design_from_family` but with G2 period set by the total length."""
    if q not in DESIGN_FAMILIES:
        raise DesignError(f"design supports q in {DESIGN_FAMILIES}, got {q!r}")
    if not (eta > 0 and total_length > 0 and wavelength > 0 and alpha1 > 0):
        raise DesignError("eta, total_length, wavelength and alpha1 must be positive")
    # L_tot = (1+eta) alpha1 d1 d2 / lambda with d1 = d2 (1+eta)/(q eta)
    d2 = math.sqrt(total_length * wavelength * q * eta / ((1.0 + eta) ** 2 * alpha1))
    return design_from_family(q, eta, d2, wavelength, alpha1=alpha1, a=a)


def fringe_displacement(a: float, t1: float, eta: float) -> float:
    """Rigid fringe shift a T1^2/2 * eta (eta+1)."""
    if not t1 > 0:
        raise DomainError("T1 must be positive")
    return 0.5 * a * t1 * t1 * eta * (eta + 1.0)


class EqualLengthPair(NamedTuple):
    symmetric: SetupGeometry
    asymmetric: SetupGeometry
    period_ratio: float
    displacement_ratio: float


def equal_length_pair(d2_sym: float, eta: float, wavelength: float) -> EqualLengthPair:
    """Symmetric setup and the asymmetric (q=1) setup of the same total length.

    Ratios are evaluated from the two constructed setups, not from closed forms.
    """
    if eta < 1:
        raise DomainError("equal-length comparison requires eta >= 1")
    sym = design_from_family(SYMMETRIC, 1.0, d2_sym, wavelength)
    d2_asym = d2_sym * math.sqrt(2.0 * eta) / (eta + 1.0)
    asym = design_from_family(ASYMMETRIC, eta, d2_asym, wavelength)
    period_ratio = asym.d3 / sym.d3
    # common speed and acceleration cancel in the ratio
    displacement_ratio = fringe_displacement(1.0, asym.L, asym.eta) / fringe_displacement(
        1.0, sym.L, sym.eta
    )
    return EqualLengthPair(sym, asym, period_ratio, displacement_ratio)


def relative_displacement_closed_form(
    family: int, eta: float, mass: float, a: float, total_time: float
) -> float:
    """Delta x / d3 of a resonant setup as a function of total flight time."""
    if not total_time > 0:
        raise DomainError("total flight time must be positive")
    if not mass > 0:
        raise DomainError("mass must be positive")
    root = math.sqrt(mass / PLANCK) * total_time**1.5
    if family == ASYMMETRIC:
        return 0.5 * a * math.sqrt(eta) / (eta + 1.0) * root
    if family == SYMMETRIC:
        if eta != 1:
            raise DesignError("the symmetric closed form holds for eta = 1 only")
        return a / (2.0 * math.sqrt(2.0)) * root
    raise DesignError(f"no closed form for resonance family {family!r}")


def classicality_margin(setup: SetupGeometry, wavelength: float) -> float:
    """L / L_T; values well below 1 mean ballistic (moire) behaviour."""
    if wavelength < 0:
        raise DomainError("wavelength must be non-negative")
    return setup.talbot_ratio(wavelength)


def warn_if_not_classical(setup: SetupGeometry, wavelength: float) -> float:
    margin = classicality_margin(setup, wavelength)
    if margin >= CLASSICAL_THRESHOLD:
        warnings.warn(
            f"L/L_T = {margin:.3g} is not << 1; diffraction at G2 is not negligible",
            RuntimeWarning,
            stacklevel=2,
        )
    return margin
