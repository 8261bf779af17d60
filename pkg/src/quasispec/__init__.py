"""Spectra, metric operators and similarity maps for the 1-D Laplacian with complex Robin conditions."""

__version__ = "0.1.0"

from .errors import (
    ContourError,
    DegeneracyWarning,
    DegeneratePairError,
    DegenerateSystemError,
    InvalidArgument,
    PreconditionViolation,
    QuasispecError,
    SpectralPointError,
)
from .metric import (
    MetricSpec,
    kernel_c_operator,
    kernel_cchoice,
    kernel_constant,
    kernel_general,
    metric_cchoice,
    metric_constant,
    metric_general,
    theta_prop41,
    theta_series,
    verify_pde_system,
    verify_quasi_hermiticity,
)
from .numerics import KernelOperator, QuadratureGrid, SampledFunction, hs_norm, make_grid
from .perturbation import (
    Coefficient,
    GalerkinSystem,
    LiouvilleData,
    asymptotic_gap,
    galerkin_matrix,
    liouville_transform,
    omega_v,
)
from .similarity import (
    SimilarityMaps,
    SimilarOperatorH,
    degeneracy_report,
    omega_kernels,
    omega_series,
    similar_operator,
    th_form_general,
)
from .spectrum import (
    BoundaryParams,
    EigenTriple,
    PTParams,
    biorthonormalize,
    char_fn,
    count_nonreal,
    find_eigenvalues,
    locate_spectrum,
)
