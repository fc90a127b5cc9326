"""Simulation of all-optical spin control in a charged quantum dot."""

from .experiments import (RabiScan, RamseyScan, SU2Scan, SweepResult, calibrate_pulse,
                          fringe_analysis, run_rabi, run_ramsey, run_su2_map)
from .model import DoubleLambdaParams, Geometry, PulseSpec, assemble, preset, readout

__version__ = "0.1.0"
