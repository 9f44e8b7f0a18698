"""Exception types raised across the package."""


class SpikedWignerError(Exception):
    """Base class for all package errors."""


class SpecError(SpikedWignerError, ValueError):
    """An ensemble or experiment specification is invalid."""


class NonDecreasingAlphas(SpecError):
    pass


class NonOrthonormalSignals(SpecError):
    pass


class NegativeProfile(SpecError):
    pass


class ConfigError(SpecError):
    pass


class OutlierSeparationError(SpecError):
    """Spike strengths are too close for rank-order outlier matching."""


class DimensionMismatch(SpikedWignerError, ValueError):
    pass


class IdenticalIndices(SpikedWignerError, ValueError):
    pass


class DegenerateSamples(SpikedWignerError, ValueError):
    pass


class EigenSolverFailure(SpikedWignerError, RuntimeError):
    """Symmetric eigensolve failed or returned inaccurate pairs.

    ``seed`` carries the replicate seed when the failure happened inside
    a Monte Carlo run, so the realization can be regenerated.
    """

    def __init__(self, message, seed=None):
        super().__init__(message if seed is None else f"{message} (seed={seed})")
        self.seed = seed


class SolveFailure(SpikedWignerError, RuntimeError):
    pass
