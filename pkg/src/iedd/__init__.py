"""Overlapping domain-decomposition preconditioners for the dense SPD
systems arising from the first-kind volume integral equation of Laplace's
equation, with a recursive-skeletonization fast direct solver as the
subdomain backend."""

__version__ = "0.1.0"

from .geometry import (  # noqa: F401
    build_decomposition,
    build_grid,
    build_partitioning,
    color_partitions,
    extend_partitions,
)
from .kernel import build_operator, diagonal_entry, kernel_value  # noqa: F401
from .pcg import make_rhs, solve  # noqa: F401
from .precond import from_decomposition, identity, rs_global  # noqa: F401
from .rskel import ProxyConfig, build_tree, factorize  # noqa: F401
from .spectrum import (  # noqa: F401
    jacobi_pairing_check,
    preconditioned_spectrum,
)
from .toeplitz import ToeplitzMatvec  # noqa: F401
