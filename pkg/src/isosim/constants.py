"""Physical constants (CODATA 2018 via scipy) and junction conversions."""

import math

from scipy import constants as _sc

E_CHARGE = _sc.e
HBAR = _sc.hbar
H_PLANCK = _sc.h
C_LIGHT = _sc.c

#: reduced flux quantum hbar / 2e (Wb)
PHI0_REDUCED = HBAR / (2 * E_CHARGE)
#: magnetic flux quantum 2 pi hbar / 2e (Wb)
PHI0 = 2 * math.pi * PHI0_REDUCED


class PhysicalConstants:
    """Namespace view of the constants, mirroring the attribute names used in the docs."""

    e = E_CHARGE
    hbar = HBAR
    h = H_PLANCK
    Phi0 = PHI0
    phi0 = PHI0_REDUCED
