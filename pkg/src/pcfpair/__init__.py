"""Desk-scale simulation of a photonic-crystal-fibre photon-pair source.

Modules cover fibre dispersion and phase matching, pair statistics, two-source
HOM interference, two-qubit state metrics and polarization tomography.
"""
from ._backend import backend_name
from .errors import (ConfigError, DomainError, NotInformationallyComplete, NumericalError,
                     PcfPairError)

__version__ = "0.1.0"

__all__ = ["backend_name", "ConfigError", "DomainError", "NotInformationallyComplete",
           "NumericalError", "PcfPairError", "__version__"]
