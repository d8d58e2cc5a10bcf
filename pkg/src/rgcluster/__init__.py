"""Real-space renormalization of Ising-type lattice systems.

Two independent routes to the renormalized interaction and its Jacobian:
exhaustive enumeration on small windows (:mod:`rgcluster.exact`) and the
polymer/cluster expansion (:mod:`rgcluster.polymers`,
:mod:`rgcluster.cluster`), together with the closed-form bounds in
:mod:`rgcluster.bounds`.
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # pragma: no cover - running from a source tree
    __version__ = "0.0.0"

from .errors import (
    CapExceeded,
    ConfigError,
    CoverageError,
    DomainError,
    KernelValidationError,
    NumericError,
    RGError,
)
from .interaction import Direction, Interaction, generate_translation_invariant, norm_r
from .kernels import Kernel, decimation, majority, validate
from .lattice import Blocking, image_distance, site_set

__all__ = [
    "Blocking",
    "CapExceeded",
    "ConfigError",
    "CoverageError",
    "Direction",
    "DomainError",
    "Interaction",
    "Kernel",
    "KernelValidationError",
    "NumericError",
    "RGError",
    "__version__",
    "decimation",
    "generate_translation_invariant",
    "image_distance",
    "majority",
    "norm_r",
    "site_set",
    "validate",
]
