"""Numerical toolkit around the regularity of Coulomb electron densities.

The package evaluates molecular Coulomb potentials, the cusp-matching
factor pair whose exponential absorbs the wavefunction's coalescence
singularities, smooth pair-distance partitions of unity with their
cluster support certificates, block-orthogonal cluster frames, and
Monte-Carlo estimates of reduced densities together with smoothness and
exponential-decay diagnostics.  See :mod:`edens.system` for the unit
conventions (the kinetic term carries no factor 1/2).
"""

from .cluster import (
    CertificateReport,
    ClusterPartition,
    ClusterSelection,
    CutoffFamily,
    PairSet,
    connected_components,
    equivalence_class,
    in_separated_region,
    phi,
    support_certificate,
    support_margins,
)
from .density import (
    DecayFit,
    DensityEstimate,
    DerivativeTable,
    decay_fit,
    derivative_prefactor,
    estimate_clustered_density,
    estimate_density,
    estimate_density_derivative,
    estimate_norm_squared,
    estimate_on_top_density,
    estimate_pair_density,
    estimate_rdm1,
    fd_density_derivative,
    smoothness_probe,
)
from .errors import (
    CertificateViolated,
    CoalescentConfiguration,
    ConfigError,
    EdensError,
    EmptyCluster,
    SamplingExhausted,
    SignalBelowNoise,
    TooCloseToSingularity,
    TooFewElectrons,
    UnsupportedOrder,
)
from .mc import MCSettings
from .regularization import (
    OperatorCoefficients,
    RegularizingFactors,
    ansatz_defect,
    regularized_residual,
    regularized_value,
)
from .system import (
    MolecularSystem,
    coalescence_distance,
    potential,
    schrodinger_residual,
)
from .transform import ClusterFrame, build_frame
from .wavefunction import (
    CorrelatedToy,
    DecayCertificate,
    DecayCheckReport,
    HydrogenicProduct,
    WavefunctionModel,
    decay_check,
)

__version__ = "0.1.0"
