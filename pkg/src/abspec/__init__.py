"""Aharonov-Bohm Neumann and Steklov spectra on radial and planar domains."""

__version__ = "0.1.0"

from .gauge import FluxData, canonicalize_flux, order_sequence  # noqa: E402
from .revolution import RevolutionProfile, euclidean, get_profile, hyperbolic, spherical  # noqa: E402

__all__ = [
    "__version__",
    "FluxData",
    "canonicalize_flux",
    "order_sequence",
    "RevolutionProfile",
    "euclidean",
    "spherical",
    "hyperbolic",
    "get_profile",
]
