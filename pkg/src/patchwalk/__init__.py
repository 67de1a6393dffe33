"""patchwalk: sampling and volume estimation on sphere-simplex patches.

Geometry: map an iso-variance slice of the portfolio simplex to the unit
sphere intersected with a full-dimensional simplex.  Topology: find the
connected patches of that body and answer membership queries.  Walks: two
geodesic Markov chains (hit-and-run style for arbitrary targets, a
reflective billiard-style walk for the uniform law).  Volume: multiphase
annealing with von Mises-Fisher bridge densities.  Pipeline: the
volatility-anomaly backtest built on iso-volatility portfolio sampling.
"""
from ._kernels import backend_name
from .diagnostics import ChainSet, ess_batch_means, psrf, summarize
from .geometry import (
    CanonicalSimplex,
    PatchTransform,
    VolatilityEllipsoid,
    build_transform,
    from_patch,
    to_patch,
)
from .topology import (
    Component,
    ComponentGraph,
    PatchBody,
    SimplexH,
    build_component_graph,
    build_patch,
    inscribed_ball,
    membership,
    membership_batch,
    segment_sphere_intersects,
    starting_point,
    vertices_of,
)
from .volume import (
    AnnealingParams,
    AnnealingState,
    VmfFunction,
    VolumeEstimate,
    choose_mu,
    estimate_volume,
    first_alpha,
    next_alpha,
    ratio_estimate,
    relative_volumes,
    sphere_area,
    stop_check,
    vmf_exact_sample,
)
from .walks import (
    ArcInterval,
    Chain,
    WalkParams,
    WalkState,
    arc_in_simplex,
    estimate_tau,
    gcw_step,
    mh_arc_sample,
    random_tangent,
    reflect_direction,
    regcw_step,
    sample_component,
    sample_patch,
    uniform_arc_sample,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
