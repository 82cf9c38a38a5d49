"""Analysis toolkit for a discrete phytoplankton-zooplankton map with toxin release."""

__version__ = "0.1.0"

from .model import Matrix2, Params, State, map_step, psi  # noqa: E402

__all__ = ["Matrix2", "Params", "State", "map_step", "psi", "__version__"]
