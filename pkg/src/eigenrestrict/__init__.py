"""Fourier coefficients of restricted Laplace eigenfunctions: joint-spectrum sums,
lattice oracles and numerical Tauberian checks on tori and the round sphere."""
from .geometry import GeometryPair, ResourceLimitError, enumerate_joint_spectrum
from .legendre import assoc_legendre_normalized
from .mollifier import Mollifier
from .sums import ConeRegion, StripRegion, SumReport, cone_sum, ladder_sum, local_weyl_sum

__all__ = [
    "GeometryPair", "ResourceLimitError", "enumerate_joint_spectrum", "assoc_legendre_normalized",
    "Mollifier", "ConeRegion", "StripRegion", "SumReport", "cone_sum", "ladder_sum", "local_weyl_sum",
]
__version__ = "0.1.0"
