"""Spectra, stability infima, eigenbasis condition numbers, and operator norms."""

from __future__ import annotations

import tempfile
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .chain import ChainParams, LaplacianFactor, laplacian_matrix, norm_u12
from .operators import ModelKind, QcOperator, assemble, matrix_to_csv
from .potentials import HomogeneousState, RegimeError

RESIDUAL_RTOL = 1e-10
DEGENERACY_RTOL = 1e-8


class EigenSolveError(RuntimeError):
    pass


class DegeneracyError(RuntimeError):
    """Blocked eigenbasis computation found a degenerate eigenvalue whose
    off-block coupling does not vanish."""


class SingularOperatorError(RuntimeError):
    pass


@dataclass(frozen=True)
class SpectralReport:
    eigenvalues: np.ndarray       # complex, sorted by (real, imag)
    eigenvectors: np.ndarray      # columns match eigenvalue order, 2-norm one
    basis_condition: float        # sigma_max / sigma_min of the eigenvector matrix
    max_imag: float
    max_residual: float           # max_j ||A v_j - lambda_j v_j||_2


@dataclass(frozen=True)
class StabilityReport:
    kind: ModelKind
    infimum: float                # min of <A u, u> over ||u'|| = 1
    extracted_constant: float | None
    minimizer: np.ndarray


@dataclass(frozen=True)
class SpectrumComparison:
    kind_a: ModelKind
    kind_b: ModelKind
    params: ChainParams
    state: HomogeneousState
    generalized: bool
    linf_diff: float
    max_imag_a: float
    max_imag_b: float


def _dump_matrix(a: np.ndarray, label: str) -> str:
    path = tempfile.mktemp(prefix=f"qcchain-{label}-", suffix=".csv")
    matrix_to_csv(a, path)
    return path


def eig_dense(a) -> SpectralReport:
    """Full dense eigendecomposition with an explicit residual contract.

    Pairs must satisfy ||A v - lambda v|| <= 1e-10 ||A||; a violation (or a
    LAPACK convergence failure) raises EigenSolveError with the offending
    matrix dumped to a CSV file.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    try:
        evals, vecs = np.linalg.eig(a)
    except np.linalg.LinAlgError as exc:
        raise EigenSolveError(
            f"eigensolver failed ({exc}); matrix dumped to {_dump_matrix(a, 'eigfail')}"
        ) from exc
    order = np.lexsort((evals.imag, evals.real))
    evals = evals[order]
    vecs = vecs[:, order]
    scale = np.linalg.norm(a, np.inf)
    residuals = np.linalg.norm(a @ vecs - vecs * evals, axis=0)
    max_res = float(residuals.max()) if residuals.size else 0.0
    if scale > 0.0 and max_res > RESIDUAL_RTOL * scale:
        raise EigenSolveError(
            f"eigenpair residual {max_res:.3e} exceeds {RESIDUAL_RTOL:.0e} * ||A|| = "
            f"{RESIDUAL_RTOL * scale:.3e}; matrix dumped to {_dump_matrix(a, 'residual')}"
        )
    svals = np.linalg.svd(vecs, compute_uv=False)
    cond = float(svals[0] / svals[-1]) if svals[-1] > 0.0 else np.inf
    return SpectralReport(
        eigenvalues=evals,
        eigenvectors=vecs,
        basis_condition=cond,
        max_imag=float(np.abs(evals.imag).max()) if evals.size else 0.0,
        max_residual=max_res,
    )


def generalized_spectrum(op: QcOperator, factor: LaplacianFactor | None = None) -> SpectralReport:
    """Spectrum of L^{-1} A, formed explicitly by banded column solves."""
    if factor is None:
        factor = LaplacianFactor(op.params)
    return eig_dense(factor.solve(op.entries))


def qnl_u12_spectrum_closed_form(params: ChainParams, state: HomogeneousState) -> np.ndarray:
    """Generalized spectrum of the patch-test-consistent model, in closed form.

    2K+1 interface values A_F - 4 phi''_{2F} sin^2(j pi / (4K+4)), plus A_F
    with multiplicity 2N-2K-2; returned sorted ascending (2N-1 values).
    """
    params.require_coupling()
    if state.a_f <= 0.0:
        raise RegimeError(f"closed-form spectrum requires A_F > 0, got {state.a_f}")
    k = params.k
    j = np.arange(1, 2 * k + 2)
    interface = state.a_f - 4.0 * state.phi2_2f * np.sin(j * np.pi / (4.0 * k + 4.0)) ** 2
    bulk = np.full(2 * params.n - 2 * k - 2, state.a_f)
    return np.sort(np.concatenate((interface, bulk)))


def spectrum_diff(kind_a: ModelKind, kind_b: ModelKind, params: ChainParams,
                  state: HomogeneousState, generalized: bool = False) -> SpectrumComparison:
    """l^inf distance between the sorted (by real part) spectra of two models."""
    factor = LaplacianFactor(params) if generalized else None
    reports = []
    for kind in (kind_a, kind_b):
        op = assemble(kind, params, state)
        reports.append(generalized_spectrum(op, factor) if generalized else eig_dense(op.entries))
    ra, rb = reports
    diff = float(np.max(np.abs(ra.eigenvalues.real - rb.eigenvalues.real))) if ra.eigenvalues.size else 0.0
    return SpectrumComparison(
        kind_a=kind_a, kind_b=kind_b, params=params, state=state, generalized=generalized,
        linf_diff=diff, max_imag_a=ra.max_imag, max_imag_b=rb.max_imag,
    )


def coercivity_infimum(op: QcOperator) -> StabilityReport:
    """Infimum of <A u, u> over ||u'||_{l2_eps} = 1.

    Computed as the smallest eigenvalue of the pencil (sym(A), L) with
    sym(A) = (A + A^T)/2.  The model-specific stability constant is extracted
    where one is defined: nu_eps for the atomistic chain, lambda_K for the
    interface-energy model, the raw (possibly negative) infimum for the
    force-based model.
    """
    params, state = op.params, op.state
    sym = 0.5 * (op.entries + op.entries.T)
    lap = laplacian_matrix(params)
    w, v = scipy.linalg.eigh(sym, lap, subset_by_index=(0, 0))
    infimum = float(w[0])
    minimizer = v[:, 0] / norm_u12(v[:, 0], params)

    extracted: float | None = None
    if op.kind is ModelKind.ATOMISTIC:
        if state.phi2_2f != 0.0:
            extracted = (state.a_f - infimum) / (params.eps ** 2 * state.phi2_2f)
    elif op.kind is ModelKind.QCE:
        if state.phi2_2f != 0.0:
            extracted = (infimum - state.a_f) / state.phi2_2f
    elif op.kind is ModelKind.QNL:
        scale = max(1.0, abs(state.a_f))
        if abs(infimum - state.a_f) > 1e-8 * scale:
            raise AssertionError(
                f"QNL pencil infimum {infimum!r} deviates from A_F = {state.a_f!r}")
    elif op.kind is ModelKind.QCF:
        extracted = infimum
    return StabilityReport(kind=op.kind, infimum=infimum, extracted_constant=extracted,
                           minimizer=minimizer)


def eigbasis_condition_standard(params: ChainParams, state: HomogeneousState) -> float:
    """cond(V) for the eigenvector basis of the force-based operator."""
    if state.a_f <= 0.0:
        raise RegimeError(f"requires A_F > 0, got {state.a_f}")
    return eig_dense(assemble(ModelKind.QCF, params, state).entries).basis_condition


def preconditioned_blocked_eigsystem(params: ChainParams, state: HomogeneousState,
                                     degeneracy_rtol: float = DEGENERACY_RTOL):
    """Eigenpairs of L^{-1} A_qcf via its block structure.

    Columns j with |j| >= K+3 of L^{-1} A_qcf equal A_F e_j, so 2N-2K-6 unit
    vectors are exact eigenvectors of the high-multiplicity eigenvalue A_F.
    The central (2K+5)-dimensional block X2 is solved densely and its
    eigenvectors are extended by v_i = (lambda - A_F)^{-1} X_i v_2 (i = 1, 3).
    For eigenvalues within ``degeneracy_rtol * |A_F|`` of A_F the extension
    must vanish (|X_i v_2| below the same tolerance), else DegeneracyError.

    Returns (eigenvalues, eigenvectors) sorted by (real, imag), columns
    normalized to unit 2-norm.
    """
    params.require_coupling()
    if state.a_f <= 0.0:
        raise RegimeError(f"requires A_F > 0, got {state.a_f}")
    n_int = params.n_interior
    a_f = state.a_f
    factor = LaplacianFactor(params)
    m = factor.solve(assemble(ModelKind.QCF, params, state).entries)

    lo = params.offset(max(-params.n + 1, -params.k - 2))
    hi = params.offset(min(params.n - 1, params.k + 2))
    mid = slice(lo, hi + 1)
    x1 = m[:lo, mid]
    x2 = m[mid, mid]
    x3 = m[hi + 1:, mid]

    values = np.empty(n_int, dtype=complex)
    vectors = np.zeros((n_int, n_int), dtype=complex)
    col = 0
    for i in list(range(lo)) + list(range(hi + 1, n_int)):
        values[col] = a_f
        vectors[i, col] = 1.0
        col += 1

    evals2, v2 = np.linalg.eig(x2)
    tol = degeneracy_rtol * abs(a_f)
    if np.all(np.abs(evals2 - a_f) <= tol):
        # the whole middle block is A_F * I to tolerance, so every basis is an
        # eigenbasis; take the canonical one
        evals2 = np.full(x2.shape[0], a_f, dtype=complex)
        v2 = np.eye(x2.shape[0], dtype=complex)
    for lam, vec2 in zip(evals2, v2.T):
        if abs(lam - a_f) <= tol:
            r1 = x1 @ vec2
            r3 = x3 @ vec2
            worst = max((np.linalg.norm(r1) if r1.size else 0.0),
                        (np.linalg.norm(r3) if r3.size else 0.0))
            if worst > tol:
                raise DegeneracyError(
                    f"degenerate eigenvalue {lam!r} has off-block coupling {worst:.3e} > {tol:.3e}")
            v1 = np.zeros(lo, dtype=complex)
            v3 = np.zeros(n_int - hi - 1, dtype=complex)
        else:
            v1 = x1 @ vec2 / (lam - a_f)
            v3 = x3 @ vec2 / (lam - a_f)
        full = np.concatenate((v1, vec2, v3))
        values[col] = lam
        vectors[:, col] = full / np.linalg.norm(full)
        col += 1

    order = np.lexsort((values.imag, values.real))
    return values[order], vectors[:, order]


def eigbasis_condition_preconditioned(params: ChainParams, state: HomogeneousState,
                                      degeneracy_rtol: float = DEGENERACY_RTOL) -> tuple[float, float]:
    """(cond(V~), cond(W~)) for the preconditioned force-based operator.

    V~ comes from the blocked computation; cond(W~) is evaluated as
    cond(D V~) with D the forward-difference map, never via a matrix square
    root of the Laplacian.
    """
    _, vectors = preconditioned_blocked_eigsystem(params, state, degeneracy_rtol)
    svals = np.linalg.svd(vectors, compute_uv=False)
    cond_v = float(svals[0] / svals[-1])
    n = params.n
    d = np.zeros((2 * n, 2 * n - 1))
    idx = np.arange(2 * n - 1)
    d[idx, idx] = 1.0 / params.eps
    d[idx + 1, idx] = -1.0 / params.eps
    svals_w = np.linalg.svd(d @ vectors, compute_uv=False)
    cond_w = float(svals_w[0] / svals_w[-1])
    return cond_v, cond_w


def qnl_eigenvalue_bounds(params: ChainParams, state: HomogeneousState) -> tuple[float, float]:
    """(2 A_F, 4 phi''_F N^2): bounds enclosing the extreme QNL eigenvalues.

    Lower bound: A_F times the minimal Laplacian Rayleigh quotient
    4 N^2 sin^2(pi/(4N)) >= 2.  Upper bound: the quadratic form is at most
    phi''_F ||u'||^2 and sup ||u'||^2/||u||^2 = 4 N^2 sin^2((2N-1)pi/(4N))
    < 4 N^2 (already sharp in the vanishing-coupling limit, where the
    operator is exactly A_F times the Laplacian)."""
    state.require_sign_regime()
    if params.k >= params.n - 1:
        raise RegimeError(f"requires K < N-1, got K={params.k}, N={params.n}")
    return 2.0 * state.a_f, 4.0 * state.phi2_f * float(params.n) ** 2


def qcf_inverse_norm_0inf_2inf(params: ChainParams, state: HomogeneousState) -> float:
    """Exact operator norm of f -> u'' where A_qcf u = f, sup-norm to sup-norm.

    Equals the maximum absolute row sum of (second-difference map) A^{-1};
    bounded by 1/A_F in the stable regime.
    """
    state.require_sign_regime()
    if state.a_f <= 0.0:
        raise SingularOperatorError(
            f"force-based operator is singular at A_F = 0 (got A_F = {state.a_f})")
    op = assemble(ModelKind.QCF, params, state)
    n = params.n_interior
    try:
        lu = scipy.linalg.lu_factor(op.entries)
        inv = scipy.linalg.lu_solve(lu, np.eye(n))
    except np.linalg.LinAlgError as exc:
        raise SingularOperatorError(f"force-based operator numerically singular: {exc}") from exc
    # two refinement passes with extended-precision residuals: the bound is
    # attained, so the O(u * cond) forward error of a plain solve would sit
    # right on top of it
    a_ext = op.entries.astype(np.longdouble)
    for _ in range(2):
        residual = np.eye(n) - (a_ext @ inv.astype(np.longdouble)).astype(float)
        inv = inv + scipy.linalg.lu_solve(lu, residual)
    curv = -laplacian_matrix(params) @ inv   # second-difference map applied columnwise
    return float(np.max(np.abs(curv).sum(axis=1)))
