"""Simulator for a two-ion squeezed phonon laser: operators, master-equation
solvers, observables, closed-form statistics and a sweep/reproduction CLI."""

__version__ = "0.1.0"

from .fock import HilbertSpace, FockCutoff  # noqa: E402,F401
from .model import (  # noqa: E402,F401
    DecayRates,
    DriveParams,
    EffectiveParams,
    LaserModel,
    SidebandCouplings,
    effective_params,
)
from .engine import liouvillian, solve_adaptive, solve_steady, steady_state  # noqa: E402,F401
