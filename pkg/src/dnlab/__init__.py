"""Dirichlet-to-Neumann operators of Schrödinger forms on weighted graphs.

Trace (Schur complement) construction, signed perturbations, spectral
theory and h-transforms of the boundary operator, closed forms on the unit
disk, Monte Carlo cross-checks and a discrete Calderón solver.
"""

__version__ = "0.1.0"

from .exceptions import (  # noqa: E402
    DnError,
    InputError,
    MaxIterExceeded,
    NonDiagonalDifference,
    NonPositiveH,
    NotExcessive,
    NotGaugeable,
    NotMarkovian,
    NumericError,
    PositivityUnknown,
    SingularInterior,
)
from .forms import (  # noqa: E402
    Decomposition,
    FormSpec,
    decompose,
    energy,
    harmonic_extension,
    is_irreducible,
    is_markovian,
    is_sub_markovian,
    path_graph,
    random_form,
    star_graph,
)
from .trace import BeurlingDenyData, DnOperator, beurling_deny, dn_operator, verify_trace_generator  # noqa: E402
from .perturbation import (  # noqa: E402
    BoundCertificate,
    SignedPotential,
    calderon_boundary_recover,
    decomposition_threshold,
    form_bound,
    form_bound_on_trace,
    interior_positivity,
    perturbed_dn,
    perturbed_form,
    trace_positivity_preserving,
    verify_perturbed_trace_identity,
)
from .spectral import HTransform, SpectralResult, h_transform, is_alpha_excessive, spectrum, trichotomy  # noqa: E402
from .disk import (  # noqa: E402
    DiskModel,
    dn_eigenvalue,
    douglas_energy,
    first_dirichlet_eigenvalue,
    gauge,
    poisson_kernel,
    v_lambda,
)
from .simulate import McEstimate, simulate_chain, traced_boundary_generator, wos_harmonic_extension  # noqa: E402
from .calderon import (  # noqa: E402
    InverseProblem,
    RecoveryResult,
    forward_map,
    integral_identity_residual,
    recover_interior,
)
