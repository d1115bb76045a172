"""Link spectral gaps and contracting barycenter iterations on weighted 2-complexes."""

__version__ = "0.1.0"

from .complex import (
    OCTAHEDRON_ANTIPODAL,
    TETRAHEDRON_ROTATION,
    GroupAction,
    LinkGraph,
    OrbitData,
    WeightedComplex,
    build_action,
    build_complex,
    check_orbit_identity,
    flat_torus,
    link_of,
    octahedron,
    orbit_data,
    rescale_weights,
    single_triangle,
    tetrahedron_boundary,
)
from .energy import barycenter, global_energy, link_edge_energy, local_energy, minimize_local_energy
from .fixedpoint import IterationTrace, apply_M, apply_M_avg, apply_Mprime, iterate, starting_map
from .gap import GapReport, global_gap, lambda_spectral, lambda_variational
from .gauge import PolynomialGauge, PowerGauge, gauge_from_dict
from .maps import EquivariantMap, Representation
from .spaces import AffineIsometry, Euclidean, LpSpace, MetricTree, sample_axioms, space_from_dict
