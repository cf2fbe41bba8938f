"""Exception types shared across the package."""


class PcfPairError(Exception):
    """Base class for all errors raised by pcfpair."""


class DomainError(PcfPairError, ValueError):
    """An input lies outside the domain where a model is defined."""


class ConfigError(PcfPairError, ValueError):
    """A configuration file or parameter set is malformed."""


class NumericalError(PcfPairError, ArithmeticError):
    """An iterative solver failed to converge or produced a non-finite value."""


class NotInformationallyComplete(PcfPairError, ValueError):
    """Tomography settings do not determine the density matrix."""

    def __init__(self, rank=None):
        msg = "settings not informationally complete"
        if rank is not None:
            msg += f" (design rank {rank} < 16)"
        super().__init__(msg)
