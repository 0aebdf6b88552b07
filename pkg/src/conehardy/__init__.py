"""Hardy-Choquard inequalities on cone-like domains: spectra, critical
exponents, explicit solutions and numerical certificates."""

from conehardy.errors import (
    ConeHardyError,
    DivergentTail,
    DomainError,
    NoFeasibleGamma,
    NoFeasiblePair,
    NonpositiveLHS,
    NumericalError,
    SupercriticalMu,
)
from conehardy.geometry import ConeDomain, ConePoint, OmegaSpec
from conehardy.spectral import GammaRoots, SpectralData, gamma_roots, hardy_constant, principal_eigenvalue
from conehardy.classifier import (
    ScalarParams,
    SystemParams,
    Verdict,
    classify_scalar,
    classify_system,
    critical_thresholds,
    region_scan,
)
from conehardy.quadrature import Profile, convolve, profile_pow
from conehardy.verifier import (
    construct_scalar_candidate,
    construct_system_candidate,
    lhs_hardy,
    scalar_margin,
    system_margin,
    apriori_check,
)

__version__ = "0.1.0"

__all__ = [
    "ConeHardyError",
    "DivergentTail",
    "DomainError",
    "NoFeasibleGamma",
    "NoFeasiblePair",
    "NonpositiveLHS",
    "NumericalError",
    "SupercriticalMu",
    "ConeDomain",
    "ConePoint",
    "OmegaSpec",
    "GammaRoots",
    "SpectralData",
    "gamma_roots",
    "hardy_constant",
    "principal_eigenvalue",
    "ScalarParams",
    "SystemParams",
    "Verdict",
    "classify_scalar",
    "classify_system",
    "critical_thresholds",
    "region_scan",
    "Profile",
    "convolve",
    "profile_pow",
    "construct_scalar_candidate",
    "construct_system_candidate",
    "lhs_hardy",
    "scalar_margin",
    "system_margin",
    "apriori_check",
]
