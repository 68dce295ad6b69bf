"""Connected multipoint correlators of qubit states.

Three independent routes to the Ursell function (partition sum, lower-order
recursion, finite-difference generating function), exact references for GHZ
states and the XX chain, graph states by dense and stabilizer simulation,
and light-cone envelope checks on spatial geometries.
"""

from .closed_form import (
    ExactRational,
    XXChainMps,
    bernoulli,
    ghz_un_asymptotic,
    ghz_un_exact,
    ghz_un_exact_rational,
    xx_disconnected_z,
    xx_un_by_counting,
    xx_un_closed_form,
)
from .config import CalibrationError, ResourceLimitError
from .correlators import (
    CorrelatorRequest,
    reconstruct_disconnected,
    u2,
    un_generating_fd,
    un_partition_sum,
    un_recursive,
)
from .geometry import (
    BoundParams,
    Geometry,
    bound_envelope,
    calibrate_velocity,
    check_bound,
    critical_distance,
)
from .partitions import (
    Bipartition,
    SetPartition,
    bell_number,
    enumerate_bipartitions,
    enumerate_partitions,
    moebius_g,
    stirling2,
)
from .quantum import Hamiltonian, Observable, PauliString, StateVector, Term, evolve
from .states import (
    GraphSpec,
    StabilizerGroup,
    cluster_state,
    ghz,
    graph_stabilizer_group,
    paper_tripartite_state,
    preparation_time,
    stabilizer_ursell,
)

__version__ = "0.1.0"
