"""Harmonic-balance and charge-basis simulation of qubit-based microwave isolators."""

from .constants import PHI0, PHI0_REDUCED, PhysicalConstants
from .hb import HarmonicBasis, HBOptions, HBSolution, Spectrum, solve_hb
from .linmap import ac_solve, small_signal_sparams, stamp
from .netlist import (
    Capacitor,
    Inductor,
    JosephsonJunction,
    Netlist,
    Port,
    Resistor,
    TransmissionLine,
    load_netlist,
    make_netlist,
    reference_fano,
    reference_lorentz,
    single_transmon,
    validate,
)
from .response import DriveSpec, TwoPortResponse, efficiency, nonreciprocal_pair, sweep, transmission

__version__ = "0.1.0"
