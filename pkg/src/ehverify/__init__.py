"""Pointwise verification of the first-order Lagrangian ``L^nabla`` that is
variationally equivalent to the Einstein-Hilbert Lagrangian, on truncated
Taylor jets of metrics, connections and diffeomorphisms."""

from .catalog import CatalogError, CatalogSpec, make_connection, make_diffeo, make_metric
from .covariance import (
    DiffeoJet,
    naturality_residual,
    palatini_variation,
    pullback_metric,
    transform_connection,
)
from .geometry import (
    ConnectionJet,
    MetricJet,
    christoffel,
    difference_tensor,
    inverse_metric,
    pair_scalar_curvature,
    scalar_curvature,
    volume_density,
)
from .hamiltonian import (
    HessianMatrix,
    MomentaTable,
    UnsupportedDimensionError,
    canonical_residuals,
    covariant_hamiltonian,
    hamiltonian_h,
    hessian_closed_form,
    hessian_directional,
    hessian_numeric,
    legendre_invert_adapted,
    legendre_invert_general,
    momenta,
    regularity_check,
)
from .jets import (
    JetError,
    JetPoly,
    OrderError,
    SingularityError,
    StructureError,
    arith,
    compose,
    partial,
    reciprocal,
    space,
    sqrt_jet,
)
from .lagrangians import (
    EinsteinHilbert,
    FirstOrderNabla,
    LagrangianValue,
    boundary_current,
    l_eh_christoffel,
    l_eh_jet_coordinates,
    l_nabla,
    l_prime,
    lemma2_residual,
)
from .variational import JetCoordinateView, euler_lagrange, lagrangian_partial

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
