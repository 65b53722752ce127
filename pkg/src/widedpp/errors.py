"""Exception types raised across the package."""


class ConfigError(ValueError):
    """Base class for invalid configuration values."""


class AntennaLayoutError(ConfigError):
    """n_t does not equal m * n_ttd."""


class StreamCountError(ConfigError):
    """Stream / RF-chain / antenna counts are inconsistent."""


class GridRatioError(ConfigError):
    """Fine grid size is not an integer multiple of the coarse grid size."""


class SubcarrierRatioError(ConfigError):
    """Number of subcarriers is not an integer multiple of K'."""


class RankDeficientError(ValueError):
    """A matrix that must have full column rank does not."""

    def __init__(self, message, atoms=None):
        super().__init__(message)
        self.atoms = None if atoms is None else tuple(int(a) for a in atoms)


class NoUsableChannelError(ValueError):
    """All singular values are zero; there is nothing to allocate power to."""


class SelectionError(ValueError):
    """An atom selector could not produce the requested number of atoms."""
