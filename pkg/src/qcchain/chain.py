"""Lattice indexing, difference operators, the discrete Laplacian, and norms.

The chain has 2N+1 atoms at reference positions x_j = j*eps, eps = 1/N,
with the boundary atoms pinned (u_{-N} = u_N = 0).  Interior displacement
vectors have length 2N-1 and logical indices j = -N+1, ..., N-1; the single
storage convention used by every module is offset = j + N - 1.

Everything here is pure and operates on immutable inputs, so it is safe to
call concurrently without synchronization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded


@dataclass(frozen=True)
class ChainParams:
    """Chain geometry: half lattice count ``n`` and atomistic half-width ``k``.

    The coupling regime n >= 4, 1 <= k <= n-2 is required by the five-model
    operator assembly and enforced there (``require_coupling``); the
    constructor accepts small n so the pure difference/norm operations remain
    usable down to n = 2.
    """

    n: int
    k: int = 1

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"need n >= 2, got n={self.n}")
        if self.k < 1:
            raise ValueError(f"need k >= 1, got k={self.k}")

    @property
    def eps(self) -> float:
        """Lattice spacing, exactly 1/n."""
        return 1.0 / self.n

    @property
    def n_interior(self) -> int:
        return 2 * self.n - 1

    def offset(self, j: int) -> int:
        """Storage offset of the logical interior index j in [-N+1, N-1]."""
        if not -self.n + 1 <= j <= self.n - 1:
            raise IndexError(f"interior index {j} out of range for n={self.n}")
        return j + self.n - 1

    def interior_indices(self) -> np.ndarray:
        """Logical indices j = -N+1, ..., N-1 in storage order."""
        return np.arange(-self.n + 1, self.n)

    def require_coupling(self) -> None:
        if self.n < 4 or self.k > self.n - 2:
            raise ValueError(
                "atomistic/continuum split requires n >= 4 and 1 <= k <= n-2, "
                f"got n={self.n}, k={self.k}"
            )


def _as_interior(u, params: ChainParams) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (params.n_interior,):
        raise ValueError(f"expected interior vector of length {params.n_interior}, got shape {u.shape}")
    if not np.all(np.isfinite(u)):
        raise ValueError("interior vector has non-finite entries")
    return u


def forward_difference(u, params: ChainParams) -> np.ndarray:
    """Gradient v'_l = eps^{-1}(v_l - v_{l-1}), l = -N+1..N, with v_{+-N} = 0.

    Returns a length-2N array (storage offset l + N - 1).  The entries sum to
    zero by telescoping with the zero boundary values.
    """
    u = _as_interior(u, params)
    padded = np.concatenate(([0.0], u, [0.0]))
    return np.diff(padded) / params.eps


def second_difference(u, params: ChainParams) -> np.ndarray:
    """Centered second difference v''_l = eps^{-2}(v_{l+1} - 2 v_l + v_{l-1}).

    Defined for l = -N+1..N-1 (length 2N-1) with zero-extension at the
    boundary; equals the first difference of ``forward_difference`` scaled by
    eps^{-1}.
    """
    return np.diff(forward_difference(u, params)) / params.eps


def lp_norm(v, p, eps: float) -> float:
    """Scaled norm (eps * sum |v_l|^p)^(1/p); plain max-abs for p = inf."""
    v = np.asarray(v, dtype=float)
    if np.isinf(p):
        return float(np.max(np.abs(v))) if v.size else 0.0
    if p < 1:
        raise ValueError(f"lp_norm needs p >= 1, got p={p}")
    if p == 1:
        return float(eps * np.sum(np.abs(v)))
    if p == 2:
        return float(np.sqrt(eps) * np.linalg.norm(v))
    return float((eps * np.sum(np.abs(v) ** p)) ** (1.0 / p))


def inner_l2(v, w, eps: float) -> float:
    """eps-weighted euclidean inner product eps * sum v_l w_l."""
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    if v.shape != w.shape:
        raise ValueError(f"length mismatch: {v.shape} vs {w.shape}")
    return float(eps * np.dot(v, w))


def laplacian_matrix(params: ChainParams) -> np.ndarray:
    """Dense SPD tridiagonal (L v)_j = eps^{-2}(-v_{j+1} + 2 v_j - v_{j-1})."""
    n = params.n_interior
    w = float(params.n) ** 2
    return w * (2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1))


def laplacian_apply(u, params: ChainParams) -> np.ndarray:
    """Banded matvec of the discrete Laplacian (no matrix formed)."""
    u = np.asarray(u, dtype=float)
    w = float(params.n) ** 2
    out = 2.0 * u.copy()
    out[:-1] -= u[1:]
    out[1:] -= u[:-1]
    return w * out


class LaplacianFactor:
    """Banded Cholesky factorization of the discrete Laplacian.

    The Laplacian is SPD, so the factorization needs no pivoting.  Instances
    are immutable after construction and reusable for many solves.
    """

    def __init__(self, params: ChainParams):
        self.params = params
        n = params.n_interior
        w = float(params.n) ** 2
        ab = np.zeros((2, n))
        ab[0, 1:] = -w
        ab[1, :] = 2.0 * w
        self._cb = cholesky_banded(ab, lower=False)

    def solve(self, f) -> np.ndarray:
        """Return u with L u = f; accepts a vector or a matrix of columns."""
        return cho_solve_banded((self._cb, False), np.asarray(f, dtype=float))


def laplacian_solve(f, params: ChainParams, factor: LaplacianFactor | None = None) -> np.ndarray:
    if factor is None:
        factor = LaplacianFactor(params)
    return factor.solve(_as_interior(f, params))


def norm_u12(u, params: ChainParams) -> float:
    """||u||_{U^{1,2}} = ||u'||_{l2_eps}."""
    return lp_norm(forward_difference(u, params), 2, params.eps)


def norm_u_neg12(f, params: ChainParams, factor: LaplacianFactor | None = None) -> float:
    """Negative norm ||f||_{U^{-1,2}}, computed via a banded solve as
    sqrt(<L^{-1} f, f>); no inverse or matrix square root is formed."""
    u = laplacian_solve(f, params, factor)
    val = inner_l2(u, f, params.eps)
    # the quadratic form is nonnegative; clip rounding noise
    return float(np.sqrt(max(val, 0.0)))


def norm_u2p(u, p, params: ChainParams) -> float:
    """||u||_{U^{2,p}} = ||u''||_{l^p_eps}."""
    return lp_norm(second_difference(u, params), p, params.eps)
