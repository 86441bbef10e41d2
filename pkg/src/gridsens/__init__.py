"""Gramian-based contingency sensitivity analysis for networks with
multiplicative link uncertainty."""

__version__ = "0.1.0"

from .matrix_core import (  # noqa: E402
    DimensionError,
    StabilityError,
    ValidationError,
    solve_discrete_lyapunov,
    spectral_radius,
)
from .network import (  # noqa: E402
    AssembledNetwork,
    CouplingLink,
    Subsystem,
    UncertainLink,
    assemble_network,
    check_assumptions,
    network_from_directions,
)
from .sensitivity import analyze, f_indices, interaction_index, s_indices  # noqa: E402
from .stability_region import (  # noqa: E402
    feasibility_boundary,
    monte_carlo_growth,
    mss_spectral_radius,
    propagate_second_moment,
)
from .matpower import load_case, parse_matpower  # noqa: E402
from .grid_model import DynamicsConfig, build_grid_network, load_config, reduce_case  # noqa: E402
from .builtin import demo_network  # noqa: E402
