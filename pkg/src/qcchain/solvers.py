"""Full GMRES in three inner-product/preconditioner configurations, the
ghost-force-correction stationary iteration, a step-size instability probe for
the modified conjugate-gradient scheme, and a dense direct solve.

Each solve owns its workspace; independent solves can run concurrently.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .chain import ChainParams, LaplacianFactor, inner_l2, laplacian_apply, laplacian_matrix, norm_u12
from .operators import ModelKind, QcOperator, assemble
from .potentials import HomogeneousState
from .spectral import SingularOperatorError, eig_dense

VARIANTS = ("plain", "precond-l2", "precond-u12")
HAPPY_BREAKDOWN_RTOL = 1e-14
REORTH_DROP = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class GmresConfig:
    """Configuration of one GMRES run.

    variant
        "plain": operator A with the eps-weighted euclidean inner product;
        "precond-l2": operator L^{-1} A, same inner product;
        "precond-u12": operator L^{-1} A with the <L., .> inner product, i.e.
        residuals are minimized in the negative norm of the unpreconditioned
        residual.
    max_iter
        Defaults to the interior dimension 2N-1 (full, unrestarted method).
    record_error_against
        Optional reference solution; per-iteration errors are recorded in the
        variant's natural norm (l2_eps for plain/precond-l2, the gradient norm
        for precond-u12).
    """

    variant: str = "plain"
    max_iter: int | None = None
    rel_tol: float = 1e-12
    record_error_against: np.ndarray | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.max_iter is not None and self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if not self.rel_tol > 0.0:
            raise ValueError(f"rel_tol must be positive, got {self.rel_tol}")


@dataclass(frozen=True)
class IterationTrace:
    residual_norms: np.ndarray            # native norm, entry m = iteration m
    error_norms: np.ndarray | None
    converged: bool
    iterations: int


@dataclass(frozen=True)
class StationaryResult:
    spectral_radius: float                # of I - (A_qce)^{-1} A_qcf
    trace: IterationTrace
    converged: bool


@dataclass(frozen=True)
class SingularDirectionProbe:
    direction: np.ndarray                 # d with <A_qcf d, d> ~ 0
    rayleigh: float                       # the residual quadratic form value at d
    numerators: np.ndarray                # <r_i, d> for the probe residual family
    alpha_magnitudes: np.ndarray          # |<r_i, d> / <A_qcf d, d>|


def trace_to_csv(trace: IterationTrace, path) -> None:
    """(iteration, residual_norm, error_norm) rows; empty error cell if untracked."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("iteration,residual_norm,error_norm\n")
        for m, r in enumerate(trace.residual_norms):
            err = ""
            if trace.error_norms is not None and m < len(trace.error_norms):
                err = format(trace.error_norms[m], ".17g")
            fh.write(f"{m},{format(r, '.17g')},{err}\n")


def _unwrap(a, params: ChainParams | None):
    if isinstance(a, QcOperator):
        return a.entries, a.params
    if params is None:
        raise ValueError("params required when the operator is a raw matrix")
    return np.asarray(a, dtype=float), params


def _gmres_kernel(apply_op, b, dot, max_iter, rel_tol, x0, error_cb=None):
    """Arnoldi/Givens GMRES in an arbitrary inner product.

    Modified Gram-Schmidt with one reorthogonalization pass whenever the
    candidate norm drops below 1/sqrt(2) of its pre-orthogonalization value;
    a subdiagonal entry below 1e-14 times the Hessenberg scale is a happy
    breakdown and terminates with the exact subspace solution.
    """
    n = b.shape[0]
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float)
    r0 = b - apply_op(x0)
    beta = math.sqrt(max(dot(r0, r0), 0.0))
    residuals = [beta]
    errors = [] if error_cb is not None else None
    if error_cb is not None:
        errors.append(error_cb(x0))
    if beta == 0.0:
        return x0, np.array(residuals), np.array(errors) if errors is not None else None, True, 0

    basis = [r0 / beta]
    h = np.zeros((max_iter + 1, max_iter))
    cs = np.zeros(max_iter)
    sn = np.zeros(max_iter)
    gamma = np.zeros(max_iter + 1)
    gamma[0] = beta
    h_scale = 0.0
    converged = False
    m_done = 0

    def solution_at(m):
        if m == 0:
            return x0
        y = scipy.linalg.solve_triangular(h[:m, :m], gamma[:m])
        return x0 + np.column_stack(basis[:m]) @ y

    for m in range(max_iter):
        w = apply_op(basis[m])
        norm_before = math.sqrt(max(dot(w, w), 0.0))
        for i in range(m + 1):
            hij = dot(basis[i], w)
            w = w - hij * basis[i]
            h[i, m] += hij
        norm_after = math.sqrt(max(dot(w, w), 0.0))
        if norm_after < REORTH_DROP * norm_before:
            for i in range(m + 1):
                corr = dot(basis[i], w)
                w = w - corr * basis[i]
                h[i, m] += corr
            norm_after = math.sqrt(max(dot(w, w), 0.0))
        h[m + 1, m] = subdiag = norm_after
        h_scale = max(h_scale, float(np.abs(h[: m + 2, m]).max()))
        happy = subdiag <= HAPPY_BREAKDOWN_RTOL * h_scale

        # accumulated plane rotations, then the new one
        for i in range(m):
            t1 = cs[i] * h[i, m] + sn[i] * h[i + 1, m]
            t2 = -sn[i] * h[i, m] + cs[i] * h[i + 1, m]
            h[i, m], h[i + 1, m] = t1, t2
        denom = math.hypot(h[m, m], h[m + 1, m])
        if denom == 0.0:
            denom, h[m, m] = 1.0, 1.0  # fully degenerate column: identity rotation
        cs[m] = h[m, m] / denom
        sn[m] = h[m + 1, m] / denom
        h[m, m] = denom
        h[m + 1, m] = 0.0
        gamma[m + 1] = -sn[m] * gamma[m]
        gamma[m] = cs[m] * gamma[m]

        m_done = m + 1
        residuals.append(abs(gamma[m + 1]))
        if error_cb is not None:
            errors.append(error_cb(solution_at(m_done)))
        if residuals[-1] <= rel_tol * residuals[0] or happy:
            converged = True
            break
        basis.append(w / subdiag)

    x = solution_at(m_done)
    return x, np.array(residuals), np.array(errors) if errors is not None else None, converged, m_done


def gmres_solve(a, f, cfg: GmresConfig, u0=None,
                params: ChainParams | None = None) -> tuple[np.ndarray, IterationTrace]:
    """Full (unrestarted) GMRES for A u = f in the configured variant.

    Returns the final iterate and its trace; a stagnated run (max_iter hit
    before rel_tol) returns converged=False with the trace intact.
    """
    entries, params = _unwrap(a, params)
    f = np.asarray(f, dtype=float)
    eps = params.eps
    max_iter = cfg.max_iter if cfg.max_iter is not None else params.n_interior

    def dot_l2(v, w):
        return eps * float(v @ w)

    if cfg.variant == "plain":
        apply_op = lambda v: entries @ v
        b = f
        dot = dot_l2
        err_norm = lambda d: math.sqrt(max(dot_l2(d, d), 0.0))
    else:
        factor = LaplacianFactor(params)
        apply_op = lambda v: factor.solve(entries @ v)
        b = factor.solve(f)
        if cfg.variant == "precond-l2":
            dot = dot_l2
            err_norm = lambda d: math.sqrt(max(dot_l2(d, d), 0.0))
        else:
            dot = lambda v, w: eps * float(v @ laplacian_apply(w, params))
            err_norm = lambda d: norm_u12(d, params)

    error_cb = None
    if cfg.record_error_against is not None:
        ref = np.asarray(cfg.record_error_against, dtype=float)
        error_cb = lambda x: err_norm(x - ref)

    x, residuals, errors, converged, iters = _gmres_kernel(
        apply_op, b, dot, max_iter, cfg.rel_tol, u0, error_cb)
    trace = IterationTrace(residual_norms=residuals, error_norms=errors,
                           converged=converged, iterations=iters)
    return x, trace


def theoretical_envelope(variant: str, m: int, state: HomogeneousState,
                         params: ChainParams, cond_basis: float) -> float:
    """Residual-reduction envelope 2 * cond * q^m for the given variant.

    plain:       q = (1 - sqrt(2 A_F/phi''_F)/N) / (1 + sqrt(2 A_F/phi''_F)/N)
    precond-*:   q = (1 - sqrt(A_F/phi''_F)) / (1 + sqrt(A_F/phi''_F))
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
    ratio = state.a_f / state.phi2_f
    if variant == "plain":
        s = math.sqrt(2.0 * ratio) / params.n
    else:
        s = math.sqrt(ratio)
    q = (1.0 - s) / (1.0 + s)
    if m == 0:
        return 2.0 * cond_basis
    return 2.0 * cond_basis * q ** m


def gfc_stationary_solve(params: ChainParams, state: HomogeneousState, f, u0=None,
                         max_iter: int = 200, tol: float = 1e-10) -> StationaryResult:
    """Dead-load-corrected stationary iteration for the force-based system.

    Iterates u <- u + (A_qce)^{-1} (f - A_qcf u); at a fixed point the
    force-based equations hold exactly.  Divergence (spectral radius >= 1) is
    a finding, not an error: the iteration runs max_iter steps and reports.
    """
    f = np.asarray(f, dtype=float)
    qce = assemble(ModelKind.QCE, params, state)
    qcf = assemble(ModelKind.QCF, params, state)
    evals = scipy.linalg.eigvalsh(qce.entries)
    small = float(np.min(np.abs(evals)))
    if small <= 1e-12 * float(np.max(np.abs(evals))):
        raise SingularOperatorError(
            f"interface-energy operator numerically singular: smallest eigenvalue {small:.6e}")
    lu = scipy.linalg.lu_factor(qce.entries)
    iteration_matrix = np.eye(params.n_interior) - scipy.linalg.lu_solve(lu, qcf.entries)
    # eigenvalue-only QR pass: the iteration matrix is near-defective (zero
    # eigenvalue of high multiplicity), so eigenvector residuals are not
    # meaningful here and the spectral radius does not need them
    rho = float(np.max(np.abs(np.linalg.eigvals(iteration_matrix))))

    u = np.zeros(params.n_interior) if u0 is None else np.asarray(u0, dtype=float)
    fnorm = math.sqrt(max(inner_l2(f, f, params.eps), 0.0))
    residuals = []
    converged = False
    iterations = 0
    for _ in range(max_iter + 1):
        r = f - qcf.entries @ u
        rnorm = math.sqrt(max(inner_l2(r, r, params.eps), 0.0))
        residuals.append(rnorm)
        if rnorm <= tol * fnorm:
            converged = True
            break
        if iterations == max_iter:
            break
        u = u + scipy.linalg.lu_solve(lu, r)
        iterations += 1
    trace = IterationTrace(residual_norms=np.array(residuals), error_norms=None,
                           converged=converged, iterations=iterations)
    return StationaryResult(spectral_radius=rho, trace=trace, converged=converged)


def modified_cg_probe(params: ChainParams, state: HomogeneousState,
                      n_directions: int = 8, seed: int = 0,
                      tol: float = 1e-10) -> SingularDirectionProbe:
    """Exhibit the step-size blow-up of residual-orthogonality line search.

    Builds d(t) = (1-t) v_plus + t v_minus from the extreme eigenvectors of
    the pencil (sym(A_qcf), L) and bisects the quadratic form to a near-null
    direction d, then reports step sizes alpha = <r, d>/<A_qcf d, d> for a
    seeded family of unit residual directions r.
    """
    qcf = assemble(ModelKind.QCF, params, state)
    sym = 0.5 * (qcf.entries + qcf.entries.T)
    lap = laplacian_matrix(params)
    n = params.n_interior
    w_lo, v_lo = scipy.linalg.eigh(sym, lap, subset_by_index=(0, 0))
    if w_lo[0] >= 0.0:
        raise SingularOperatorError(
            "no singular direction: the force-based quadratic form is positive "
            f"definite here (pencil minimum {w_lo[0]:.6e})")
    w_hi, v_hi = scipy.linalg.eigh(sym, lap, subset_by_index=(n - 1, n - 1))
    # scipy normalizes v^T L v = 1; rescale to unit gradient norm under the
    # eps-weighted inner product
    v_minus = v_lo[:, 0] / math.sqrt(params.eps)
    v_plus = v_hi[:, 0] / math.sqrt(params.eps)

    def quad(d):
        return inner_l2(sym @ d, d, params.eps)

    t_lo, t_hi = 0.0, 1.0   # quad > 0 at t_lo, < 0 at t_hi
    d = v_plus
    q = quad(d)
    for _ in range(200):
        t = 0.5 * (t_lo + t_hi)
        d = (1.0 - t) * v_plus + t * v_minus
        q = quad(d)
        if abs(q) <= tol * norm_u12(d, params) ** 2:
            break
        if q > 0.0:
            t_lo = t
        else:
            t_hi = t
    else:
        raise RuntimeError(f"bisection failed to annihilate the quadratic form (|q| = {abs(q):.3e})")

    rng = np.random.default_rng(seed)
    numerators = np.empty(n_directions)
    for i in range(n_directions):
        r = rng.standard_normal(n)
        r /= math.sqrt(max(inner_l2(r, r, params.eps), 1e-300))
        numerators[i] = inner_l2(r, d, params.eps)
    alphas = np.abs(numerators / q)
    return SingularDirectionProbe(direction=d, rayleigh=q, numerators=numerators,
                                  alpha_magnitudes=alphas)


def direct_solve(a, f) -> np.ndarray:
    """Dense LU (partial pivoting) reference solve."""
    entries = a.entries if isinstance(a, QcOperator) else np.asarray(a, dtype=float)
    f = np.asarray(f, dtype=float)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            lu, piv = scipy.linalg.lu_factor(entries)
    except np.linalg.LinAlgError as exc:
        raise SingularOperatorError(f"direct solve failed: {exc}") from exc
    if np.abs(np.diag(lu)).min() == 0.0:
        raise SingularOperatorError("direct solve failed: exactly singular matrix")
    return scipy.linalg.lu_solve((lu, piv), f)
