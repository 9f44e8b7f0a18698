"""Simulation and verification toolkit for spiked generalized Wigner matrices."""

from .errors import (ConfigError, DegenerateSamples, DimensionMismatch, EigenSolverFailure,
                     IdenticalIndices, NegativeProfile, NonDecreasingAlphas, NonOrthonormalSignals,
                     OutlierSeparationError, SolveFailure, SpecError, SpikedWignerError)
from .model import (EnsembleSpec, EntryLaw, SignalFunction, SpikeSpec, VarianceProfile,
                    spec_from_dict, validate_spec)

__version__ = "0.1.0"
