"""Gossip averaging under agent mobility: simulation and convergence bounds."""

from ._kernels import NUMBA_ENABLED
from .topology import (
    Topology,
    build_cycle,
    build_rgg,
    build_torus,
    neighbors,
    subsquare_partition,
)
from .mobility import (
    MobilityAssignment,
    MobilityPattern,
    assign_bidirectional,
    assignment_from_name,
    plus_mobile,
    sample_positions,
)
from .engine import (
    AveTimeEstimate,
    GossipConfig,
    GossipState,
    estimate_ave_time,
    run_trace,
    step,
)
from .chain import (
    ContactMatrix,
    TransitionMatrix,
    UnsupportedModeError,
    contact_probabilities,
    dirichlet_form,
    expected_matrix,
    rayleigh_lower_bound,
    relaxation_time,
    second_eigenvalue,
)
from .bounds import (
    CertificationError,
    Flow,
    InvalidFlowError,
    MergeMap,
    bidirectional_flow,
    circulant_eigenvalues,
    column_wave_bound,
    direct_flow,
    hub_chain,
    hub_flow,
    induce_chain,
    l_shaped_flow,
    lower_bound_via_merge,
    mobility_merge_map,
    relay_flow,
    verify_flow,
)

__version__ = "0.1.0"
