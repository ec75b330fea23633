"""Strongly convergent anchored proximal point iterations on concrete
CAT(0) models, with exact evaluators for their metastability-rate bounds."""

from .geometry import (
    Euclidean,
    Geodesic,
    GeometryError,
    HalfPlane,
    Point,
    Semicircle,
    VectorPair,
    VerticalRay,
    combine,
    distance,
    project,
    quasi_linearization,
)
from .iterations import (
    IterationConfig,
    Reciprocal,
    Trajectory,
    anchored_point,
    halpern_run,
    tikhonov_run,
)
from .operators import (
    ProjectionFamily,
    ProxSquaredDistance,
    ResolventOfNonexpansive,
    SolverError,
    StepSizes,
)
from .rates import (
    BudgetExceeded,
    ConstantSeq,
    CounterFunction,
    ExplicitSeq,
    Moduli,
    RateParams,
    ReciprocalSeq,
    omega,
    phi_main,
    preset_moduli_reciprocal,
    psi,
    qmcp_bound,
    theta_tikhonov,
    xi,
)

__version__ = "0.1.0"
