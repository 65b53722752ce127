"""Delay-phase hybrid precoding for wideband THz massive MIMO via sparse recovery."""

__version__ = "0.1.0"

from .config import ClusterConfig, LceConfig, Seed, SystemConfig, preset  # noqa: E402
from .channel import ChannelSet, generate_channels  # noqa: E402
from .codebook import Codebook, build_codebook, make_grid  # noqa: E402
from .precoding import FullyDigital, PrecodingSolution, fully_digital, sum_rate  # noqa: E402
from .sparse import essp, lce_ssp, ssp_freq_independent  # noqa: E402

__all__ = [
    "ClusterConfig",
    "LceConfig",
    "Seed",
    "SystemConfig",
    "preset",
    "ChannelSet",
    "generate_channels",
    "Codebook",
    "build_codebook",
    "make_grid",
    "FullyDigital",
    "PrecodingSolution",
    "fully_digital",
    "sum_rate",
    "essp",
    "lce_ssp",
    "ssp_freq_independent",
]
