"""Physical constants and shared defaults."""

PLANCK = 6.62607e-34  # J*s
LIGHT_SPEED = 2.99792e8  # m/s

NOMINAL_WAVELENGTH_NM = 1550.0

# Pulses at or above this mean photon number are treated as classical light
# (deterministic energy split) rather than photon-by-photon.
BRIGHT_MU = 1e3


def photon_energy(wavelength_nm: float) -> float:
    """Energy of one photon in joules."""
    return PLANCK * LIGHT_SPEED / (wavelength_nm * 1e-9)
