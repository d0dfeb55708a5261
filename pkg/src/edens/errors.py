"""Exception types shared across the package."""


class EdensError(Exception):
    """Base class for all package-specific errors."""


class CoalescentConfiguration(EdensError):
    """Two particles (electron/electron or electron/nucleus) are too close.

    Raised by operations whose value or derivatives are singular on the
    coalescence set, instead of returning inf/NaN-contaminated output.
    """


class TooCloseToSingularity(EdensError):
    """A finite-difference stencil would straddle a Coulomb singularity."""


class TooFewElectrons(EdensError):
    """The requested quantity needs more electrons than the system has."""


class EmptyCluster(EdensError):
    """A cluster frame was requested for an empty electron subset."""


class CertificateViolated(EdensError):
    """A sampled point broke a declared bound; carries the witness.

    Attributes:
        witness: the offending configuration, shape (N, 3).
    """

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class SamplingExhausted(EdensError):
    """Rejection sampling ran out of proposal budget."""


class UnsupportedOrder(EdensError):
    """A derivative order beyond the analytic tables was requested."""


class SignalBelowNoise(EdensError):
    """Monte-Carlo noise swamps the quantity being fitted."""


class ConfigError(EdensError):
    """A run configuration file is malformed or has invalid values."""
