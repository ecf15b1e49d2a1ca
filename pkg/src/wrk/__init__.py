"""Two-type birth-and-death dynamics with exclusion-type cross interaction.

Components:

* :mod:`wrk.potential` - finite-range pair potentials and periodized kernels.
* :mod:`wrk.gf_algebra` - finite-configuration calculus: correlation
  transforms, factorized exponentials, and generator identities at desk scale.
* :mod:`wrk.microsim` - exact event-driven simulation of the particle system
  and the mean-field scaling experiment.
* :mod:`wrk.kinetics` - mean-field kinetic equations: fixed-point and
  Runge-Kutta solvers, convolution backends, and the factorized-state check.
* :mod:`wrk.equilibria` - homogeneous equilibria: root structure, linear
  stability, phase portraits, and the bifurcation scan.
* :mod:`wrk.harness` / :mod:`wrk.cli` - config-driven run harness with
  manifested, reproducible outputs.
"""
from __future__ import annotations

__version__ = "0.1.0"

from .potential import PairPotential, PeriodicKernel, periodize

__all__ = [
    "__version__",
    "PairPotential",
    "PeriodicKernel",
    "periodize",
    "FiniteConfiguration2",
    "FunctionPair",
    "DensityField2",
    "KineticRun",
    "HomogeneousRun",
    "Configuration2State",
    "SimParams",
    "EventLog",
    "Snapshot",
    "EquilibriumReport",
    "StationaryRoot",
    "RunOutput",
]

from .gf_algebra import FiniteConfiguration2, FunctionPair
from .kinetics import DensityField2, HomogeneousRun, KineticRun
from .microsim import Configuration2State, EventLog, SimParams, Snapshot
from .equilibria import EquilibriumReport, StationaryRoot
from .harness import RunOutput
