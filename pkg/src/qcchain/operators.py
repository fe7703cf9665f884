"""The five linearized chain operators, their energies/forces, and ghost forces.

Model conventions
-----------------
* Atomistic deformations live on 2N+3 sites (indices -N-1..N+1) with the four
  outermost atoms pinned to the uniform state; the extra pair of atoms makes
  y^F an exact equilibrium.
* QCL/QCF/QCE/QNL deformations live on 2N+1 sites (indices -N..N) with the two
  boundary atoms pinned.
* The atomistic region is A = {-K..K}; rows outside it use the local
  (Cauchy-Born) model.
* Every energy is a weighted sum of pair terms eps * w * phi(s*(y_b - y_{b-d})/eps)
  with span d in {1, 2} and argument scale s in {1, 2}.  Energies, forces and
  assembled operators for the energy-based models all derive from one term
  list per model, so force = -eps^{-1} grad(energy) and operator = eps^{-1}
  hess(energy) hold by construction.  Site energy sums extend to the pinned
  boundary atoms with out-of-range bond terms dropped, which is the convention
  that keeps the continuum rows exact scaled-Laplacian rows all the way to
  j = +-(N-1).

All assembly is pure; assembled operators are immutable and safe to share
across threads.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .chain import ChainParams
from .potentials import HomogeneousState, PairPotential


class ModelKind(enum.Enum):
    ATOMISTIC = "atomistic"
    QCL = "qcl"
    QCF = "qcf"
    QCE = "qce"
    QNL = "qnl"


ENERGY_BASED = (ModelKind.ATOMISTIC, ModelKind.QCL, ModelKind.QCE, ModelKind.QNL)


@dataclass(frozen=True)
class QcOperator:
    """Dense realization of one linearized model on interior displacements."""

    kind: ModelKind
    params: ChainParams
    state: HomogeneousState
    entries: np.ndarray

    @property
    def bandwidth(self) -> int:
        n = self.entries.shape[0]
        bw = 0
        for d in range(1, min(n, 3)):
            if np.any(self.entries.diagonal(d) != 0.0) or np.any(self.entries.diagonal(-d) != 0.0):
                bw = d
        return bw

    @cached_property
    def _dia(self) -> sp.dia_matrix:
        return sp.dia_matrix(self.entries)

    def matvec(self, v) -> np.ndarray:
        """Banded matrix-vector product for solver hot paths."""
        return self._dia @ np.asarray(v, dtype=float)

    def to_csv(self, path) -> None:
        matrix_to_csv(self.entries, path)


def matrix_to_csv(matrix, path) -> None:
    """Dense dump, one row per line, 17 significant digits (float64 round trip)."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in matrix:
            fh.write(",".join(format(x, ".17g") for x in row) + "\n")


# ---------------------------------------------------------------------------
# term lists


@dataclass(frozen=True)
class _TermList:
    """Pair-energy terms eps * w * phi(scale * (y[right] - y[right-span]) / eps).

    Indices are storage offsets into the model's deformation array.
    ``interior`` addresses the unconstrained entries, ``constant`` is an
    additive energy constant (used by the local model), and ``n_pin`` entries
    at each end of the array are pinned to the uniform state.
    """

    weights: np.ndarray
    right: np.ndarray
    span: np.ndarray
    scale: np.ndarray
    n_sites: int
    n_pin: int
    constant: Callable[[PairPotential, float], float] | None = None

    @property
    def interior(self) -> slice:
        return slice(self.n_pin, self.n_sites - self.n_pin)


def _pack(terms: list[tuple[float, int, int, int]], n_sites: int, n_pin: int,
          constant=None) -> _TermList:
    w, b, d, s = (np.array(col) for col in zip(*terms))
    return _TermList(w.astype(float), b.astype(int), d.astype(int), s.astype(int),
                     n_sites, n_pin, constant)


def _terms_atomistic(params: ChainParams) -> _TermList:
    n = params.n
    off = lambda j: j + n + 1  # sites -N-1..N+1
    terms = []
    for m in range(-n, n + 2):          # nearest-neighbor bonds y'_m
        terms.append((1.0, off(m), 1, 1))
    for p in range(-n + 1, n + 2):      # next-nearest pairs y'_{p-1} + y'_p
        terms.append((1.0, off(p), 2, 1))
    return _pack(terms, 2 * n + 3, 2)


def _terms_qcl(params: ChainParams) -> _TermList:
    n = params.n
    off = lambda j: j + n  # sites -N..N
    terms = []
    for m in range(-n + 1, n + 1):
        terms.append((1.0, off(m), 1, 1))  # phi(y'_m)
        terms.append((1.0, off(m), 1, 2))  # phi(2 y'_m)
    const = lambda pot, f: 2.0 * pot.phi(f) + pot.phi(2.0 * f)
    return _pack(terms, 2 * n + 1, 1, const)


def _cb_weight(m: int, n: int, k: int) -> float:
    """Weight of the Cauchy-Born term phi(2 y'_m) shared by QCE and QNL."""
    if -n + 1 <= m <= -k - 1 or k + 2 <= m <= n:
        return 1.0
    if m == -k or m == k + 1:
        return 0.5
    return 0.0


def _terms_qce(params: ChainParams) -> _TermList:
    n, k = params.n, params.k
    off = lambda j: j + n
    terms = []
    for m in range(-n + 1, n + 1):
        terms.append((1.0, off(m), 1, 1))
    for p in range(-k, k + 3):          # atomistic pair terms, half weight on the fringe
        w = 0.5 * ((-k <= p <= k) + (-k + 2 <= p <= k + 2))
        terms.append((w, off(p), 2, 1))
    for m in range(-n + 1, n + 1):
        w = _cb_weight(m, n, k)
        if w:
            terms.append((w, off(m), 1, 2))
    return _pack(terms, 2 * n + 1, 1)


def _terms_qnl(params: ChainParams) -> _TermList:
    n, k = params.n, params.k
    off = lambda j: j + n
    terms = []
    for m in range(-n + 1, n + 1):
        terms.append((1.0, off(m), 1, 1))
    for p in range(-k + 1, k + 2):      # full-weight pair terms across A
        terms.append((1.0, off(p), 2, 1))
    for m in range(-n + 1, n + 1):
        w = _cb_weight(m, n, k)
        if w:
            terms.append((w, off(m), 1, 2))
    return _pack(terms, 2 * n + 1, 1)


_TERM_BUILDERS = {
    ModelKind.ATOMISTIC: _terms_atomistic,
    ModelKind.QCL: _terms_qcl,
    ModelKind.QCE: _terms_qce,
    ModelKind.QNL: _terms_qnl,
}


# ---------------------------------------------------------------------------
# assembly


def _hessian_from_terms(terms: _TermList, params: ChainParams,
                        state: HomogeneousState) -> np.ndarray:
    """Exact eps^{-1} * hess(energy) at y^F, restricted to interior sites.

    A term with argument scale s contributes w * phi''(s F) * s^2 * eps^{-2}
    times the +-1 outer-product pattern of its two atoms; phi''(F) and
    phi''(2F) come straight from the state, so synthetic states assemble too.
    """
    w2 = float(params.n) ** 2
    nfull = terms.n_sites
    full = np.zeros((nfull, nfull))
    for w, b, d, s in zip(terms.weights, terms.right, terms.span, terms.scale):
        # argument at the uniform state is (s * d) * F: nearest-neighbor terms
        # see phi''(F), both pair flavors see phi''(2F)
        curv = state.phi2_f if s * d == 1 else state.phi2_2f
        c = w * curv * s * s * w2
        a = b - d
        full[b, b] += c
        full[a, a] += c
        full[b, a] -= c
        full[a, b] -= c
    inner = terms.interior
    return full[inner, inner]


def _laplacian_block(params: ChainParams, span: int) -> np.ndarray:
    """Interior stencil eps^{-2}(-v_{j+span} + 2 v_j - v_{j-span}), zero-extended."""
    n = params.n_interior
    w2 = float(params.n) ** 2
    return w2 * (2.0 * np.eye(n) - np.eye(n, k=span) - np.eye(n, k=-span))


def assemble(kind: ModelKind, params: ChainParams, state: HomogeneousState) -> QcOperator:
    """Assemble the dense linearized operator of ``kind`` at the given state.

    Atomistic and QCL use their interior stencils directly; QCF splices the
    atomistic rows |j| <= K into the QCL matrix; QCE and QNL are the exact
    Hessians of their energies at y^F.
    """
    if kind in (ModelKind.QCF, ModelKind.QCE, ModelKind.QNL):
        params.require_coupling()
    elif params.n < 4:
        raise ValueError(f"operator assembly requires n >= 4, got n={params.n}")

    if kind is ModelKind.ATOMISTIC:
        entries = state.phi2_f * _laplacian_block(params, 1) + state.phi2_2f * _laplacian_block(params, 2)
    elif kind is ModelKind.QCL:
        entries = state.a_f * _laplacian_block(params, 1)
    elif kind is ModelKind.QCF:
        atom = state.phi2_f * _laplacian_block(params, 1) + state.phi2_2f * _laplacian_block(params, 2)
        entries = state.a_f * _laplacian_block(params, 1)
        rows = slice(params.offset(-params.k), params.offset(params.k) + 1)
        entries[rows] = atom[rows]
    else:
        entries = _hessian_from_terms(_TERM_BUILDERS[kind](params), params, state)

    entries.setflags(write=False)
    return QcOperator(kind=kind, params=params, state=state, entries=entries)


# ---------------------------------------------------------------------------
# nonlinear energies and forces


def uniform_deformation(params: ChainParams, strain: float, kind: ModelKind = ModelKind.QCL) -> np.ndarray:
    """y^F_j = F*j*eps on the site range of ``kind``."""
    n = params.n
    if kind is ModelKind.ATOMISTIC:
        sites = np.arange(-n - 1, n + 2)
    else:
        sites = np.arange(-n, n + 1)
    return strain * sites * params.eps


def deformation_from_displacement(params: ChainParams, strain: float, u,
                                  kind: ModelKind = ModelKind.QCL) -> np.ndarray:
    """y^F plus the interior displacement u, zero-padded onto the pinned sites."""
    u = np.asarray(u, dtype=float)
    if u.shape != (params.n_interior,):
        raise ValueError(f"expected interior displacement of length {params.n_interior}")
    y = uniform_deformation(params, strain, kind)
    pin = 2 if kind is ModelKind.ATOMISTIC else 1
    y[pin:-pin] += u
    return y


def _infer_strain(kind: ModelKind, params: ChainParams, y: np.ndarray) -> float:
    """Recover F from the pinned entries and validate the boundary constraint."""
    n = params.n
    expected_len = 2 * n + 3 if kind is ModelKind.ATOMISTIC else 2 * n + 1
    if y.shape != (expected_len,):
        raise ValueError(
            f"{kind.value} deformation must have length {expected_len}, got {y.shape}")
    if kind is ModelKind.ATOMISTIC:
        strain = y[-2]  # y_N = F
        pinned = {0: -strain * (n + 1) * params.eps, 1: -strain,
                  expected_len - 2: strain, expected_len - 1: strain * (n + 1) * params.eps}
    else:
        strain = y[-1]
        pinned = {0: -strain, expected_len - 1: strain}
    tol = 1e-10 * max(1.0, abs(strain))
    for idx, val in pinned.items():
        if abs(y[idx] - val) > tol:
            raise ValueError(
                f"boundary constraint violated at site offset {idx}: {y[idx]} != {val}")
    return float(strain)


def energy(kind: ModelKind, params: ChainParams, pot: PairPotential, y) -> float:
    """Total energy of deformation y under ``kind``; QCF has no energy."""
    if kind is ModelKind.QCF:
        raise ValueError("the force-based model is non-conservative: it has forces but no energy")
    y = np.asarray(y, dtype=float)
    strain = _infer_strain(kind, params, y)
    terms = _TERM_BUILDERS[kind](params)
    args = terms.scale * (y[terms.right] - y[terms.right - terms.span]) / params.eps
    phi = np.vectorize(pot.phi)
    total = params.eps * float(np.sum(terms.weights * phi(args)))
    if terms.constant is not None:
        total += params.eps * terms.constant(pot, strain)
    return total


def _force_from_terms(terms: _TermList, params: ChainParams, pot: PairPotential,
                      y: np.ndarray) -> np.ndarray:
    args = terms.scale * (y[terms.right] - y[terms.right - terms.span]) / params.eps
    dphi = np.vectorize(pot.phi_prime)
    coeff = terms.weights * dphi(args) * terms.scale
    grad = np.zeros(terms.n_sites)
    np.add.at(grad, terms.right, coeff)
    np.add.at(grad, terms.right - terms.span, -coeff)
    return -grad[terms.interior] / params.eps


def _force_qcf(params: ChainParams, pot: PairPotential, y: np.ndarray) -> np.ndarray:
    k = params.k
    eps = params.eps
    dphi = np.vectorize(pot.phi_prime)
    g = np.diff(y) / eps                      # y'_m at offset m + N - 1, m = -N+1..N
    dg = dphi(g)
    dgg = dphi(g[:-1] + g[1:])                # phi'(y'_m + y'_{m+1}) at offset m + N - 1
    dg2 = dphi(2.0 * g)
    # local (Cauchy-Born) rows everywhere ...
    out = (dg[1:] + 2.0 * dg2[1:] - dg[:-1] - 2.0 * dg2[:-1]) / eps
    # ... overwritten by the atomistic rows on |j| <= K
    i = np.arange(params.offset(-k), params.offset(k) + 1)
    out[i] = (dg[i + 1] + dgg[i + 1] - dg[i] - dgg[i - 1]) / eps
    return out


def force(kind: ModelKind, params: ChainParams, pot: PairPotential, y) -> np.ndarray:
    """Force (per lattice spacing) at the interior sites.

    Energy-based models return -eps^{-1} * grad(energy); the force-based model
    splices the atomistic formula on |j| <= K with the local formula outside.
    """
    y = np.asarray(y, dtype=float)
    _infer_strain(kind, params, y)
    if kind is ModelKind.QCF:
        params.require_coupling()
        return _force_qcf(params, pot, y)
    return _force_from_terms(_TERM_BUILDERS[kind](params), params, pot, y)


def ghost_force_vector(params: ChainParams, state: HomogeneousState) -> np.ndarray:
    """Interface force defect g = force_qcf(y^F) - force_qce(y^F).

    Since the force-based model passes the patch test, g = -force_qce(y^F).
    Supported on j in {+-(K-1), +-K, +-(K+1), +-(K+2)} and antisymmetric
    (g_{-j} = -g_j); the two mirrored bands cancel at j = 0 when K = 1.
    """
    params.require_coupling()
    n, k = params.n, params.k
    c = state.phi1_2f / (2.0 * params.eps)
    g = np.zeros(params.n_interior)
    for j, val in ((k - 1, c), (k, -c), (k + 1, -c), (k + 2, c)):
        if j <= n - 1:
            g[params.offset(j)] += val
        if -j >= -n + 1:
            g[params.offset(-j)] -= val
    return g


def rhs_cosine(params: ChainParams) -> np.ndarray:
    """Loading f_j = h(x_j) cos(3 pi x_j), h = 1 for x >= 0 and -1 otherwise.

    Smooth in the continuum region with a sign flip inside the atomistic
    region; f_0 = +1 by the h(0) = 1 branch.
    """
    x = params.interior_indices() * params.eps
    h = np.where(x >= 0.0, 1.0, -1.0)
    return h * np.cos(3.0 * np.pi * x)
