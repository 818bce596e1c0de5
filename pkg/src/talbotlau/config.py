"""Scenario files: TOML with one table per concern, validated on load.

Units are SI throughout (m, s, kg, m/s, m/s^2). Unknown keys are rejected so a
typo cannot silently fall back to a default. ``resolve`` returns a plain dict
with every default filled in, which is what the run manifest echoes.
"""

from __future__ import annotations

import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import talbot
from .beam import DEFAULT_NODES, SpeedDistribution
from .errors import ConfigError, TalbotLauError
from .geometry import (
    DESIGN_FAMILIES,
    SetupGeometry,
    de_broglie,
    design_for_total_length,
    design_from_family,
    integer_order,
)
from .gratings import GratingSpec
from .moire import MIN_BINS, MIN_PARTICLES
from .oracle import MIN_INTEGRATION_SAMPLES, MIN_PERIODS, MIN_SOURCES, default_sources
from .beam import MIN_NODES

ALPHA_SEARCH = (1.0, 2.0)


@dataclass(frozen=True)
class SetupSection:
    id: str
    open_fraction: float
    eta: float
    family: Optional[int] = None
    total_length: Optional[float] = None
    d2: Optional[float] = None
    d1: Optional[float] = None
    L: Optional[float] = None
    alpha1: Union[float, str] = 1.0
    acceleration: float = 0.0


@dataclass(frozen=True)
class BeamSection:
    mass: float
    mean_speed: float
    sigma_rel: tuple = (0.0,)
    lifetime: Optional[float] = None
    pattern_sigma_rel: float = 0.0


@dataclass(frozen=True)
class NumericsSection:
    l_max: int = talbot.DEFAULT_L_MAX
    n_max: int = talbot.DEFAULT_N_MAX
    periods: int = 1
    samples_per_period: int = talbot.SAMPLES_PER_PERIOD
    nodes: int = DEFAULT_NODES
    seed: int = 0
    n_particles: int = 1_000_000
    bins: int = 128


@dataclass(frozen=True)
class CarpetSection:
    ratio_min: float = 0.05
    ratio_max: float = 2.0
    ratio_step: float = 0.005
    samples_per_period: int = 256


@dataclass(frozen=True)
class MoireSection:
    d1: Optional[float] = None
    source_distance: float = 0.1
    source_width: Optional[float] = None
    transverse_speed_halfwidth: Optional[float] = None


@dataclass(frozen=True)
class OracleSection:
    n_periods: int = 200
    n_sources: Optional[int] = None
    integration_samples: int = 256
    method: str = "fresnel"
    periods: int = 2
    samples_per_period: int = 256


@dataclass(frozen=True)
class SensitivitySection:
    n0: float = 1e4


@dataclass(frozen=True)
class OutputSection:
    directory: str = "out"


@dataclass(frozen=True)
class Scenario:
    setups: tuple
    beam: BeamSection
    numerics: NumericsSection = field(default_factory=NumericsSection)
    carpet: CarpetSection = field(default_factory=CarpetSection)
    moire: MoireSection = field(default_factory=MoireSection)
    oracle: OracleSection = field(default_factory=OracleSection)
    sensitivity: SensitivitySection = field(default_factory=SensitivitySection)
    output: OutputSection = field(default_factory=OutputSection)
    source: Optional[str] = None

    @property
    def wavelength(self) -> float:
        return de_broglie(self.beam.mass, self.beam.mean_speed)

    def setup_by_id(self, setup_id: str) -> SetupSection:
        for s in self.setups:
            if s.id == setup_id:
                return s
        raise ConfigError(f"no setup with id {setup_id!r}")


_SECTIONS = {
    "beam": BeamSection,
    "numerics": NumericsSection,
    "carpet": CarpetSection,
    "moire": MoireSection,
    "oracle": OracleSection,
    "sensitivity": SensitivitySection,
    "output": OutputSection,
}


def _build(cls, table: dict, where: str):
    if not isinstance(table, dict):
        raise ConfigError(f"[{where}] must be a table")
    allowed = set(cls.__dataclass_fields__)
    unknown = sorted(set(table) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where}]: {', '.join(unknown)}")
    try:
        return cls(**table)
    except TypeError as exc:
        raise ConfigError(f"[{where}]: {exc}") from None


def _positive(value, name: str, integer: bool = False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    if not (value > 0 and math.isfinite(value)):
        raise ConfigError(f"{name} must be positive and finite, got {value!r}")


def _validate(sc: Scenario) -> None:
    b = sc.beam
    _positive(b.mass, "beam.mass")
    _positive(b.mean_speed, "beam.mean_speed")
    for s in b.sigma_rel:
        if isinstance(s, bool) or not isinstance(s, (int, float)) or not 0 <= s < 1 / 3:
            raise ConfigError(f"beam.sigma_rel entries must lie in [0, 1/3), got {s!r}")
    if not 0 <= b.pattern_sigma_rel < 1 / 3:
        raise ConfigError("beam.pattern_sigma_rel must lie in [0, 1/3)")
    if b.lifetime is not None:
        _positive(b.lifetime, "beam.lifetime")
    n = sc.numerics
    for name in ("l_max", "n_max", "periods", "samples_per_period", "nodes", "n_particles", "bins"):
        _positive(getattr(n, name), f"numerics.{name}", integer=True)
    for name, low in (("n_particles", MIN_PARTICLES), ("bins", MIN_BINS), ("nodes", MIN_NODES)):
        if getattr(n, name) < low:
            raise ConfigError(f"numerics.{name} must be >= {low}")
    if isinstance(n.seed, bool) or not isinstance(n.seed, int) or not 0 <= n.seed < 2**64:
        raise ConfigError("numerics.seed must be an unsigned 64-bit integer")
    c = sc.carpet
    _positive(c.ratio_min, "carpet.ratio_min")
    _positive(c.ratio_step, "carpet.ratio_step")
    if not c.ratio_max > c.ratio_min:
        raise ConfigError("carpet.ratio_max must exceed carpet.ratio_min")
    o = sc.oracle
    for name in ("n_periods", "integration_samples", "periods", "samples_per_period"):
        _positive(getattr(o, name), f"oracle.{name}", integer=True)
    if o.n_periods < MIN_PERIODS:
        raise ConfigError(f"oracle.n_periods must be >= {MIN_PERIODS}")
    if o.n_sources is not None:
        _positive(o.n_sources, "oracle.n_sources", integer=True)
        if o.n_sources < MIN_SOURCES:
            raise ConfigError(f"oracle.n_sources must be >= {MIN_SOURCES}")
    if o.integration_samples < MIN_INTEGRATION_SAMPLES:
        raise ConfigError(f"oracle.integration_samples must be >= {MIN_INTEGRATION_SAMPLES}")
    m = sc.moire
    for name in ("d1", "source_width", "transverse_speed_halfwidth"):
        if getattr(m, name) is not None:
            _positive(getattr(m, name), f"moire.{name}")
    if isinstance(m.source_distance, bool) or not isinstance(m.source_distance, (int, float)) or m.source_distance < 0:
        raise ConfigError("moire.source_distance must be a non-negative number")
    _positive(c.samples_per_period, "carpet.samples_per_period", integer=True)
    if sc.oracle.method not in ("fresnel", "quadrature"):
        raise ConfigError("oracle.method must be 'fresnel' or 'quadrature'")
    _positive(sc.sensitivity.n0, "sensitivity.n0")
    if not sc.setups:
        raise ConfigError("at least one [[setup]] table is required")
    ids = [s.id for s in sc.setups]
    if len(set(ids)) != len(ids):
        raise ConfigError("setup ids must be unique")
    for s in sc.setups:
        where = f"setup {s.id!r}"
        if not isinstance(s.id, str) or not s.id or not s.id.replace("_", "").replace("-", "").isalnum():
            raise ConfigError(f"{where}: id must be a non-empty alphanumeric string")
        _positive(s.eta, f"{where}: eta")
        if not 0 < s.open_fraction < 1:
            raise ConfigError(f"{where}: open_fraction must lie in (0, 1)")
        explicit = (s.d1, s.d2, s.L)
        if s.family is None:
            if any(v is None for v in explicit):
                raise ConfigError(f"{where}: give family, or all of d1, d2 and L")
        else:
            if s.family not in DESIGN_FAMILIES:
                raise ConfigError(f"{where}: family must be one of {DESIGN_FAMILIES}")
            if (s.total_length is None) == (s.d2 is None):
                raise ConfigError(f"{where}: give exactly one of total_length and d2")
            if s.d1 is not None or s.L is not None:
                raise ConfigError(f"{where}: d1 and L are derived when family is given")
        if isinstance(s.alpha1, str):
            if s.alpha1 != "auto":
                raise ConfigError(f"{where}: alpha1 must be a number or 'auto'")
        else:
            _positive(s.alpha1, f"{where}: alpha1")


def parse(data: dict, source: Optional[str] = None) -> Scenario:
    data = dict(data)
    setups = data.pop("setup", None)
    if setups is None:
        raise ConfigError("missing [[setup]] tables")
    if isinstance(setups, dict):
        setups = [setups]
    if "beam" not in data:
        raise ConfigError("missing [beam] table")
    unknown = sorted(set(data) - set(_SECTIONS))
    if unknown:
        raise ConfigError(f"unknown table(s): {', '.join(unknown)}")
    sections = {k: _build(cls, data[k], k) for k, cls in _SECTIONS.items() if k in data}
    beam = sections["beam"]
    if not isinstance(beam.sigma_rel, (list, tuple)):
        raise ConfigError("beam.sigma_rel must be a list")
    sections["beam"] = BeamSection(**{**asdict(beam), "sigma_rel": tuple(beam.sigma_rel)})
    parsed = tuple(_build(SetupSection, s, "setup") for s in setups)
    sc = Scenario(setups=parsed, source=source, **sections)
    _validate(sc)
    return sc


def load(path: Union[str, Path]) -> Scenario:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse(data, source=str(path))


def resolve_alpha1(s: SetupSection) -> float:
    """Numeric alpha1; 'auto' picks the largest |B_q| on [1, 2)."""
    if s.alpha1 != "auto":
        return float(s.alpha1)
    probe = GratingSpec(1.0, s.open_fraction)
    return talbot.talbot_argmax(s.family, probe, *ALPHA_SEARCH)


def build_setup(s: SetupSection, wavelength: float) -> SetupGeometry:
    try:
        if s.family is None:
            geom = SetupGeometry(s.d1, s.d2, s.L, s.eta, s.acceleration)
            integer_order(geom)
            return geom
        alpha1 = resolve_alpha1(s)
        if s.total_length is not None:
            return design_for_total_length(s.family, s.eta, s.total_length, wavelength, alpha1, s.acceleration)
        return design_from_family(s.family, s.eta, s.d2, wavelength, alpha1, s.acceleration)
    except TalbotLauError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"setup {s.id!r}: {exc}") from None


def distribution(sc: Scenario, geom: SetupGeometry, sigma_rel: float = 0.0) -> SpeedDistribution:
    """Beam speed distribution; decay weighting uses the setup's total flight length."""
    b = sc.beam
    length = geom.total_length if b.lifetime is not None else None
    return SpeedDistribution(b.mean_speed, sigma_rel * b.mean_speed, b.lifetime, length)


def resolve(sc: Scenario) -> dict[str, Any]:
    """Fully resolved scenario (defaults filled, derived geometry included)."""
    out: dict[str, Any] = {
        k: asdict(getattr(sc, k)) for k in _SECTIONS
    }
    out["beam"]["sigma_rel"] = list(sc.beam.sigma_rel)
    if out["oracle"]["n_sources"] is None:
        out["oracle"]["n_sources"] = default_sources(sc.oracle.n_periods)
    out["beam"]["wavelength"] = sc.wavelength
    setups = []
    for s in sc.setups:
        entry = asdict(s)
        geom = build_setup(s, sc.wavelength)
        entry["alpha1_resolved"] = resolve_alpha1(s) if s.family is not None else None
        entry["derived"] = {
            "d1": geom.d1,
            "d2": geom.d2,
            "L": geom.L,
            "d3": geom.d3,
            "total_length": geom.total_length,
            "q": integer_order(geom),
            "L_over_LT": geom.talbot_ratio(sc.wavelength),
        }
        setups.append(entry)
    out["setup"] = setups
    return out
