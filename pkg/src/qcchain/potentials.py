"""Pair potentials, homogeneous-state moduli, and critical-strain root finders."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable


class RegimeError(ValueError):
    """Raised when an operation requires the sign regime phi''_F > 0, phi''_{2F} <= 0."""


@dataclass(frozen=True)
class PairPotential:
    """Two-body potential with closed-form first and second derivatives."""

    phi: Callable[[float], float]
    phi_prime: Callable[[float], float]
    phi_double_prime: Callable[[float], float]


def _check_r(r: float) -> float:
    if r <= 0.0:
        raise ValueError(f"pair potential evaluated at nonpositive separation r={r}")
    return r


def lennard_jones() -> PairPotential:
    """Normalized Lennard-Jones: phi(r) = r^-12 - 2 r^-6.

    Ground state at r = 1 with phi(1) = -1, phi'(1) = 0, phi''(1) = 72.
    """

    def phi(r: float) -> float:
        r = _check_r(r)
        return r ** -12 - 2.0 * r ** -6

    def phi_prime(r: float) -> float:
        r = _check_r(r)
        return -12.0 * r ** -13 + 12.0 * r ** -7

    def phi_double_prime(r: float) -> float:
        r = _check_r(r)
        return 156.0 * r ** -14 - 84.0 * r ** -8

    return PairPotential(phi, phi_prime, phi_double_prime)


@dataclass(frozen=True)
class HomogeneousState:
    """Moduli of the linearization about the uniform deformation y^F.

    ``a_f`` is always the stored sum phi2_f + 4*phi2_2f (the continuum elastic
    modulus).  ``phi1_2f`` is the first derivative at the doubled strain and
    drives the ghost forces.  Synthetic states (no potential behind them) are
    supported via ``from_modulus_ratio``; their strain is NaN.
    """

    strain: float
    phi2_f: float
    phi2_2f: float
    phi1_2f: float = 0.0
    a_f: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "a_f", self.phi2_f + 4.0 * self.phi2_2f)

    @classmethod
    def from_modulus_ratio(cls, phi2_f: float, a_f: float, phi1_2f: float = 0.0) -> "HomogeneousState":
        """Build a synthetic state from (phi''_F, A_F): phi''_{2F} = (A_F - phi''_F)/4."""
        return cls(strain=math.nan, phi2_f=phi2_f, phi2_2f=(a_f - phi2_f) / 4.0, phi1_2f=phi1_2f)

    def require_sign_regime(self) -> None:
        if not (self.phi2_f > 0.0 and self.phi2_2f <= 0.0):
            raise RegimeError(
                f"requires phi''_F > 0 and phi''_{{2F}} <= 0, got {self.phi2_f}, {self.phi2_2f}"
            )


def moduli(pot: PairPotential, strain: float) -> HomogeneousState:
    """Evaluate the four moduli of ``pot`` at macroscopic strain F > 0."""
    if strain <= 0.0:
        raise ValueError(f"strain must be positive, got {strain}")
    return HomogeneousState(
        strain=strain,
        phi2_f=pot.phi_double_prime(strain),
        phi2_2f=pot.phi_double_prime(2.0 * strain),
        phi1_2f=pot.phi_prime(2.0 * strain),
    )


def _scan_and_bisect(g: Callable[[float], float], lo: float, hi: float,
                     step: float, tol: float) -> float:
    """Root of g on [lo, hi]: coarse scan for a sign change, then bisection.

    Terminates on |g| <= tol (tol is on the modulus value, not on the strain).
    """
    xs = lo
    gx = g(xs)
    bracket = None
    while xs < hi - 1e-15:
        xn = min(xs + step, hi)
        gn = g(xn)
        if gx == 0.0:
            return xs
        if math.copysign(1.0, gx) != math.copysign(1.0, gn):
            bracket = (xs, gx, xn, gn)
            break
        xs, gx = xn, gn
    if bracket is None:
        raise ValueError(f"no sign change of the modulus on [{lo}, {hi}] with step {step}")
    a, ga, b, gb = bracket
    best_x, best_g = (a, ga) if abs(ga) <= abs(gb) else (b, gb)
    for _ in range(200):
        mid = 0.5 * (a + b)
        gm = g(mid)
        if abs(gm) < abs(best_g):
            best_x, best_g = mid, gm
        if abs(gm) <= tol:
            return mid
        if math.copysign(1.0, gm) == math.copysign(1.0, ga):
            a, ga = mid, gm
        else:
            b, gb = mid, gm
        if b - a <= 4.0 * math.ulp(mid):
            break
    if abs(best_g) <= tol:
        return best_x
    raise RuntimeError(f"bisection stalled at |modulus| = {abs(best_g):.3e} > tol = {tol:.3e}")


def critical_strain_atomistic(pot: PairPotential, lo: float = 1.0, hi: float = 2.0,
                              step: float = 0.01, tol: float = 1e-12) -> float:
    """Strain F_* at which the elastic modulus A_F crosses zero."""
    return _scan_and_bisect(lambda f: moduli(pot, f).a_f, lo, hi, step, tol)


def critical_strain_gfc(pot: PairPotential, lambda_k: float, lo: float = 1.0, hi: float = 2.0,
                        step: float = 0.01, tol: float = 1e-12) -> float:
    """Strain at which A_F + lambda_K * phi''_{2F} crosses zero.

    This is where the energy-based interface operator loses positivity, below
    the atomistic critical strain whenever lambda_K > 0 and phi''_{2F} < 0.
    """
    if not 0.0 <= lambda_k <= 1.0:
        raise ValueError(f"lambda_k must lie in [0, 1], got {lambda_k}")

    def g(f: float) -> float:
        s = moduli(pot, f)
        return s.a_f + lambda_k * s.phi2_2f

    return _scan_and_bisect(g, lo, hi, step, tol)
