import os

import pytest
from hypothesis import HealthCheck, settings

from talbotlau.constants import ELECTRON_MASS, POSITRONIUM_MASS
from talbotlau.geometry import (
    ASYMMETRIC,
    SYMMETRIC,
    SetupGeometry,
    de_broglie,
    design_for_total_length,
    design_from_family,
)

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

PS_SPEED = 800.0
PS_WAVELENGTH = de_broglie(POSITRONIUM_MASS, PS_SPEED)
GRAVITY = 9.81


def ps_symmetric(alpha1=1.0):
    return design_for_total_length(SYMMETRIC, 1.0, 1.0, PS_WAVELENGTH, alpha1=alpha1)


def ps_asymmetric(eta=2.0):
    return design_for_total_length(ASYMMETRIC, eta, 1.0, PS_WAVELENGTH)


def electron_carpet_setup():
    """eta = 3, d2 = 1 um, d1 = 4/3 um, L = 0.11 m."""
    return SetupGeometry(d1=4e-6 / 3, d2=1e-6, L=0.11, eta=3.0)


def pair_from_g2_periods():
    """Positronium setups built from the stated G2 periods (476 um symmetric, 317.3 um asymmetric)."""
    lam = PS_WAVELENGTH
    return design_from_family(SYMMETRIC, 1.0, 476e-6, lam), design_from_family(ASYMMETRIC, 2.0, 317.3e-6, lam)


@pytest.fixture
def ps_mass():
    return POSITRONIUM_MASS


@pytest.fixture
def electron_mass():
    return ELECTRON_MASS


# acceptance reporting: test_acceptance records one entry per sub-check and the
# terminal summary prints one PASS/FAIL line per criterion

ACCEPTANCE: dict[int, list[tuple[str, bool, str]]] = {}


def record(criterion: int, name: str, passed: bool, detail: str) -> None:
    ACCEPTANCE.setdefault(criterion, []).append((name, bool(passed), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        checks = ACCEPTANCE[n]
        ok = all(p for _, p, _ in checks)
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}")
        for name, p, detail in checks:
            terminalreporter.write_line(f"    [{'pass' if p else 'FAIL'}] {name}: {detail}")
