"""Maslov index computation for linear symplectic systems on the line.

Two equivalent integration routes are provided: a matrix Riccati flow on the
symmetric-matrix chart of the Lagrangian Grassmannian (stepped through chart
singularities by the Moebius action of local fundamental solutions), and a
singularity-free flow pulled back to the unitary Lie algebra whose trace
accumulates the rotation angle.  Crossing counts over a spectral-parameter
sweep count the eigenvalues of self-adjoint problems such as bundled
seventh-order KdV solitary-wave stability model.
"""

from .errors import (
    ChartDomainError,
    ConfigError,
    HyperbolicityError,
    MaslovError,
    ModelError,
    NormalizationError,
    StepSizeError,
    StructureError,
)
from .maslov import (
    CrossingRecord,
    MaslovResult,
    RefineResult,
    SweepRow,
    SweepTable,
    TraceResult,
    crossings_from_chart,
    detect_crossings,
    end_intersection_dimension,
    maslov_index,
    refine_eigenvalue,
    run_trace,
    sweep_lambda,
)
from .matrixkit import EigenDecomposition, det_phase, mat_exp, sym_arctan, sym_eig
from .models import (
    Kdv7Params,
    ModelSpec,
    SturmLiouvilleParams,
    get_model,
    kdv7_coefficients,
    kdv7_field,
    kdv7_wave,
    poschl_teller_eigenvalues,
    poschl_teller_field,
    sturm_liouville_field,
)
from .riccati import (
    ChartPath,
    EigenTrace,
    SymmetricChart,
    integrate_chart,
    mobius_step,
    riccati_rhs,
    singular_eigenvalue_count,
    singular_threshold,
)
from .system import (
    CoefficientField,
    LagrangianFrame,
    ReferencePlane,
    SymplecticCoefficients,
    chart_from_frame,
    farfield_frame,
    normalize_reference,
    standard_reference,
    total_frame_rank_loss,
    validate_coefficients,
)
from .tolerances import DEFAULT_TOLERANCES, Tolerances
from .unitary import (
    RotatedCoefficients,
    SkewHermitian,
    ThetaTrace,
    UnitaryPath,
    UnitarySymmetric,
    cayley,
    dexpinv,
    emk_step,
    integrate_unitary,
    inverse_cayley,
    rotated_coefficients,
    theta_from_chart,
    unitary_from_frame,
    xi_field,
)

__version__ = "0.1.0"
