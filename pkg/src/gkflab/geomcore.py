"""Intrinsic-volume catalog for model spaces and the combinatorial special functions
(ball volumes, sphere surface measures, flag coefficients, Hermite polynomials)
that the curvature formulas are built from.

All gamma-function work happens in log space so that flag coefficients and
surface-measure ratios stay finite for dimensions in the thousands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.special import erfcx, gammaln

__all__ = [
    "LkVector",
    "SpaceKind",
    "SpaceDescriptor",
    "unit_ball_volume",
    "log_unit_ball_volume",
    "sphere_surface",
    "log_sphere_surface",
    "flag_coeff",
    "log_flag_coeff",
    "hermite",
    "lk_model_space",
    "to_kappa",
    "from_kappa",
    "tube_volume_euclid",
    "cap_tube_volume",
]


# ---------------------------------------------------------------------------
# special functions


def log_unit_ball_volume(n: int) -> float:
    """log of omega_n, the volume of the unit ball in R^n."""
    if n < 0:
        raise ValueError(f"ball dimension must be >= 0, got {n}")
    return 0.5 * n * math.log(math.pi) - gammaln(0.5 * n + 1.0)


def unit_ball_volume(n: int) -> float:
    """omega_n = pi^(n/2) / Gamma(n/2 + 1)."""
    return math.exp(log_unit_ball_volume(n))


def log_sphere_surface(n: int) -> float:
    """log of s_n, the surface measure of the unit sphere in R^n."""
    if n < 1:
        raise ValueError(f"sphere surface needs ambient dimension >= 1, got {n}")
    return math.log(2.0) + 0.5 * n * math.log(math.pi) - gammaln(0.5 * n)


def sphere_surface(n: int) -> float:
    """s_n = 2 pi^(n/2) / Gamma(n/2); satisfies s_n = n * omega_n."""
    return math.exp(log_sphere_surface(n))


def log_flag_coeff(n: int, k: int) -> float:
    if not 0 <= k <= n:
        raise ValueError(f"flag coefficient needs 0 <= k <= n, got n={n}, k={k}")
    lfact = gammaln(n + 1.0) - gammaln(k + 1.0) - gammaln(n - k + 1.0)
    return (
        lfact
        + log_unit_ball_volume(n)
        - log_unit_ball_volume(k)
        - log_unit_ball_volume(n - k)
    )


def flag_coeff(n: int, k: int) -> float:
    """Flag coefficient [n k] = [n]! / ([k]! [n-k]!) with [n]! = n! * omega_n.

    Symmetric in k <-> n-k, and equal to 1 at the endpoints k = 0, n.
    """
    return math.exp(log_flag_coeff(n, k))


def hermite(n: int, u):
    """Probabilists' Hermite polynomial H_n evaluated at u (scalar or array).

    H_0 = 1, H_1(u) = u, H_{n+1}(u) = u H_n(u) - n H_{n-1}(u).

    The index is extended to n = -1 by
        H_{-1}(u) = sqrt(2 pi) * exp(u^2/2) * Psi(u),
    with Psi the standard normal upper tail, so that the half-line
    Minkowski-functional formula remains valid at order zero.  Evaluated via
    the scaled complementary error function, stable for u >= -25 or so.
    """
    if n < -1:
        raise ValueError(f"Hermite index must be >= -1, got {n}")
    arr = np.asarray(u, dtype=float)
    if n == -1:
        out = math.sqrt(math.pi / 2.0) * erfcx(arr / math.sqrt(2.0))
    elif n == 0:
        out = np.ones_like(arr)
    else:
        h_prev = np.ones_like(arr)
        h = arr.copy()
        for m in range(1, n):
            h_prev, h = h, arr * h - m * h_prev
        out = h
    if np.isscalar(u) or (isinstance(u, np.ndarray) and u.ndim == 0):
        return float(out)
    return out


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class LkVector:
    """Intrinsic volumes L_0 .. L_dim of a set; values[j] has units length^j.

    Curvatures of order above `dim` are identically zero and not stored.
    """

    dim: int
    values: tuple[float, ...]

    def __post_init__(self):
        if self.dim < 0:
            raise ValueError(f"dimension must be >= 0, got {self.dim}")
        vals = tuple(float(v) for v in self.values)
        if len(vals) != self.dim + 1:
            raise ValueError(
                f"need dim+1 = {self.dim + 1} curvature values, got {len(vals)}"
            )
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("curvature values must be finite")
        object.__setattr__(self, "values", vals)

    def __getitem__(self, j: int) -> float:
        """L_j, with the convention L_j = 0 for j > dim."""
        if j < 0:
            raise IndexError(f"curvature order must be >= 0, got {j}")
        return self.values[j] if j <= self.dim else 0.0

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


class SpaceKind(Enum):
    RECTANGLE = "rectangle"
    BALL = "ball"
    SPHERE2 = "sphere2"
    CAP = "cap"


@dataclass(frozen=True)
class SpaceDescriptor:
    """A model parameter space together with a homothetic metric scale.

    `metric_scale` is the constant lambda2 such that the metric the field
    induces on the space is lambda2 times the standard (Euclidean or round)
    metric.  Intrinsic volumes then pick up a factor lambda2^(j/2) at order j.
    """

    kind: SpaceKind
    metric_scale: float = 1.0
    sides: tuple[float, ...] = ()
    n: int = 0
    radius: float = 0.0
    angular_radius: float = 0.0

    def __post_init__(self):
        if self.metric_scale <= 0:
            raise ValueError(f"metric_scale must be > 0, got {self.metric_scale}")
        if self.kind is SpaceKind.RECTANGLE:
            object.__setattr__(self, "sides", tuple(float(s) for s in self.sides))
            if any(s <= 0 for s in self.sides):
                raise ValueError(f"rectangle sides must be > 0, got {self.sides}")
        elif self.kind is SpaceKind.BALL:
            if self.n < 1:
                raise ValueError(f"ball dimension must be >= 1, got {self.n}")
            if self.radius <= 0:
                raise ValueError(f"ball radius must be > 0, got {self.radius}")
        elif self.kind is SpaceKind.SPHERE2:
            if self.radius <= 0:
                raise ValueError(f"sphere radius must be > 0, got {self.radius}")
        elif self.kind is SpaceKind.CAP:
            if not 0.0 < self.angular_radius <= math.pi / 2.0:
                raise ValueError(
                    "cap angular radius must lie in (0, pi/2], got "
                    f"{self.angular_radius}"
                )

    @classmethod
    def rectangle(cls, sides: Sequence[float], metric_scale: float = 1.0):
        """Axis-aligned box prod [0, T_i]; an empty side list is a single point."""
        return cls(SpaceKind.RECTANGLE, metric_scale, sides=tuple(sides))

    @classmethod
    def point(cls):
        return cls.rectangle(())

    @classmethod
    def ball(cls, n: int, radius: float, metric_scale: float = 1.0):
        return cls(SpaceKind.BALL, metric_scale, n=n, radius=radius)

    @classmethod
    def sphere2(cls, radius: float = 1.0, metric_scale: float = 1.0):
        return cls(SpaceKind.SPHERE2, metric_scale, radius=radius)

    @classmethod
    def cap(cls, angular_radius: float, metric_scale: float = 1.0):
        return cls(SpaceKind.CAP, metric_scale, angular_radius=angular_radius)

    @property
    def dim(self) -> int:
        if self.kind is SpaceKind.RECTANGLE:
            return len(self.sides)
        if self.kind is SpaceKind.BALL:
            return self.n
        return 2


# ---------------------------------------------------------------------------
# intrinsic-volume catalog


def _rectangle_lk(sides: tuple[float, ...]) -> np.ndarray:
    # prod_i (x + T_i) = sum_j e_j x^(N-j), so index j of the coefficient
    # array is the j-th elementary symmetric polynomial of the sides
    coeffs = np.array([1.0])
    for t in sides:
        coeffs = np.convolve(coeffs, np.array([1.0, t]))
    return coeffs


def _ball_lk(n: int, radius: float) -> np.ndarray:
    vals = np.empty(n + 1)
    for j in range(n + 1):
        lbinom = gammaln(n + 1.0) - gammaln(j + 1.0) - gammaln(n - j + 1.0)
        logval = (
            lbinom
            + j * math.log(radius)
            + log_unit_ball_volume(n)
            - log_unit_ball_volume(n - j)
        )
        vals[j] = math.exp(logval)
    return vals


def cap_tube_volume(alpha: float, rho: float, quad_order: int = 64) -> float:
    """Volume of the Euclidean rho-neighborhood in R^3 of a geodesic cap of
    angular radius alpha on the unit sphere.

    The tube is a solid of revolution; in the meridian half-plane the distance
    to the cap is the planar distance to the arc {angle <= alpha} of the unit
    circle, so the volume reduces to a 1-d integral over the polar angle.  The
    sector over the cap itself integrates in closed form; the rim wedge is
    handled by Gauss-Legendre quadrature after a substitution that removes the
    square-root endpoint singularity.
    """
    if not 0.0 < alpha <= math.pi / 2.0:
        raise ValueError(f"cap angular radius must lie in (0, pi/2], got {alpha}")
    if rho < 0:
        raise ValueError(f"tube radius must be >= 0, got {rho}")
    if rho == 0.0:
        return 0.0
    if rho >= min(1.0, math.sin(alpha)):
        raise ValueError(
            f"tube radius {rho} exceeds the validity range for cap alpha={alpha}"
        )
    # radial shell over the cap: R in [1-rho, 1+rho], polar angle in [0, alpha]
    shell = (
        2.0 * math.pi * (1.0 - math.cos(alpha)) * ((1 + rho) ** 3 - (1 - rho) ** 3) / 3.0
    )
    # rim wedge: polar angle alpha + delta with sin(delta) <= rho; substitute
    # sin(delta) = rho sin(t) so the integrand is smooth in t on [0, pi/2]
    nodes, weights = np.polynomial.legendre.leggauss(quad_order)
    t = 0.5 * math.pi / 2.0 * (nodes + 1.0)
    w = weights * 0.5 * math.pi / 2.0
    sin_t, cos_t = np.sin(t), np.cos(t)
    root = np.sqrt(1.0 - (rho * sin_t) ** 2)
    delta = np.arcsin(rho * sin_t)
    dbeta_dt = rho * cos_t / root
    r_hi = root + rho * cos_t
    r_lo = root - rho * cos_t
    integrand = np.sin(alpha + delta) * (r_hi**3 - r_lo**3) / 3.0 * dbeta_dt
    wedge = 2.0 * math.pi * float(np.dot(w, integrand))
    return shell + wedge


@lru_cache(maxsize=None)
def _calibrated_cap_lk(alpha: float) -> tuple[float, float, float]:
    """Fit the degree-3 tube polynomial to quadrature tube volumes of the cap.

    Solves V(rho) = omega_3 rho^3 L_0 + omega_2 rho^2 L_1 + omega_1 rho L_2
    at several small rho by least squares.  L_0 and L_2 have textbook values
    (Euler characteristic 1 and the cap area), which serves as a built-in
    consistency check on the calibration.
    """
    rho_max = min(0.15, math.sin(alpha) / 2.0)
    rhos = rho_max * np.arange(1, 7) / 6.0
    vols = np.array([cap_tube_volume(alpha, r) for r in rhos])
    design = np.column_stack(
        [
            unit_ball_volume(3) * rhos**3,
            unit_ball_volume(2) * rhos**2,
            unit_ball_volume(1) * rhos,
        ]
    )
    scale = np.abs(design).max(axis=0)
    coef, *_ = np.linalg.lstsq(design / scale, vols, rcond=None)
    l0, l1, l2 = coef / scale
    area = 2.0 * math.pi * (1.0 - math.cos(alpha))
    if abs(l0 - 1.0) > 1e-6 or abs(l2 - area) > 1e-6 * area:
        raise RuntimeError(
            f"cap tube calibration failed self-check: L0={l0}, L2={l2}, area={area}"
        )
    return float(l0), float(l1), float(l2)


def lk_model_space(space: SpaceDescriptor) -> LkVector:
    """Closed-form intrinsic volumes of a model space under metric_scale times
    the standard metric.

    Rectangle: L_j = elementary symmetric polynomial of the sides.
    Ball(n, R): L_j = C(n, j) R^j omega_n / omega_{n-j}.
    Sphere2(R): (2, 0, 4 pi R^2).
    Cap(alpha): L_0 = 1, L_2 = 2 pi (1 - cos alpha), L_1 from tube calibration.

    The metric scale enters as L_j -> metric_scale^(j/2) L_j.
    """
    if space.kind is SpaceKind.RECTANGLE:
        vals = _rectangle_lk(space.sides)
    elif space.kind is SpaceKind.BALL:
        vals = _ball_lk(space.n, space.radius)
    elif space.kind is SpaceKind.SPHERE2:
        vals = np.array([2.0, 0.0, 4.0 * math.pi * space.radius**2])
    elif space.kind is SpaceKind.CAP:
        vals = np.asarray(_calibrated_cap_lk(space.angular_radius))
    else:  # pragma: no cover
        raise ValueError(f"unknown space kind {space.kind}")
    dim = len(vals) - 1
    scaled = vals * space.metric_scale ** (0.5 * np.arange(dim + 1))
    return LkVector(dim=dim, values=tuple(scaled))


# ---------------------------------------------------------------------------
# kappa-extended curvatures


def _rising_even_factorial(i: int, n: int) -> float:
    # (i + 2n)! / i!
    out = 1.0
    for m in range(1, 2 * n + 1):
        out *= i + m
    return out


def _kappa_transform(lk: LkVector, kappa: float, sign: float) -> LkVector:
    vals = lk.as_array()
    dim = lk.dim
    out = np.zeros(dim + 1)
    for i in range(dim + 1):
        total = 0.0
        n = 0
        while i + 2 * n <= dim:
            coef = (sign * kappa) ** n * _rising_even_factorial(i, n)
            coef /= (4.0 * math.pi) ** n * math.factorial(n)
            total += coef * vals[i + 2 * n]
            n += 1
        out[i] = total
    return LkVector(dim=dim, values=tuple(out))


def to_kappa(lk: LkVector, kappa: float) -> LkVector:
    """Curvature-shifted intrinsic volumes:
    L_i^kappa = sum_n (-kappa)^n (i+2n)! / ((4 pi)^n n! i!) L_{i+2n}.

    The sum is finite because curvatures above the dimension vanish.
    """
    return _kappa_transform(lk, kappa, -1.0)


def from_kappa(lk_kappa: LkVector, kappa: float) -> LkVector:
    """Inverse of :func:`to_kappa`; identical sum with +kappa^n."""
    return _kappa_transform(lk_kappa, kappa, +1.0)


# ---------------------------------------------------------------------------
# Euclidean tube formula


def tube_volume_euclid(lk: LkVector, ambient_dim: int, rho: float) -> float:
    """Steiner/Weyl tube volume polynomial in R^l:

        H_l(Tube(M, rho)) = sum_i rho^(l-i) omega_(l-i) L_i(M).

    Exact for convex bodies at every rho and for positive-reach sets within
    the reach.
    """
    if ambient_dim < lk.dim:
        raise ValueError(
            f"ambient dimension {ambient_dim} is below the set dimension {lk.dim}"
        )
    if rho < 0:
        raise ValueError(f"tube radius must be >= 0, got {rho}")
    total = 0.0
    for i in range(lk.dim + 1):
        total += rho ** (ambient_dim - i) * unit_ball_volume(ambient_dim - i) * lk[i]
    return total
