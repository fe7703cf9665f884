"""1D atomistic/continuum coupling lab: operators, spectra, stability, solvers."""

from .chain import (
    ChainParams,
    LaplacianFactor,
    forward_difference,
    inner_l2,
    laplacian_apply,
    laplacian_matrix,
    laplacian_solve,
    lp_norm,
    norm_u12,
    norm_u2p,
    norm_u_neg12,
    second_difference,
)
from .operators import (
    ModelKind,
    QcOperator,
    assemble,
    deformation_from_displacement,
    energy,
    force,
    ghost_force_vector,
    matrix_to_csv,
    rhs_cosine,
    uniform_deformation,
)
from .potentials import (
    HomogeneousState,
    PairPotential,
    RegimeError,
    critical_strain_atomistic,
    critical_strain_gfc,
    lennard_jones,
    moduli,
)
from .solvers import (
    GmresConfig,
    IterationTrace,
    SingularDirectionProbe,
    StationaryResult,
    direct_solve,
    gfc_stationary_solve,
    gmres_solve,
    modified_cg_probe,
    theoretical_envelope,
    trace_to_csv,
)
from .spectral import (
    DegeneracyError,
    EigenSolveError,
    SingularOperatorError,
    SpectralReport,
    SpectrumComparison,
    StabilityReport,
    coercivity_infimum,
    eig_dense,
    eigbasis_condition_preconditioned,
    eigbasis_condition_standard,
    generalized_spectrum,
    preconditioned_blocked_eigsystem,
    qcf_inverse_norm_0inf_2inf,
    qnl_eigenvalue_bounds,
    qnl_u12_spectrum_closed_form,
    spectrum_diff,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
