"""Physical constants (SI, CODATA 2018). Nothing else in the package defines them."""

PLANCK = 6.62607015e-34  # J s, exact
ELECTRON_MASS = 9.1093837015e-31  # kg
POSITRONIUM_MASS = 2.0 * ELECTRON_MASS
STANDARD_GRAVITY = 9.80665  # m s^-2

TABLE = {
    "planck_J_s": PLANCK,
    "electron_mass_kg": ELECTRON_MASS,
    "positronium_mass_kg": POSITRONIUM_MASS,
}
