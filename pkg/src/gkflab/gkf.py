"""Expected intrinsic volumes of excursion sets of unit-variance Gaussian
vector fields, assembled as the flag-coefficient pairing of the parameter
space's curvatures with the hitting set's Gaussian Minkowski functionals:

    E L_i(A) = sum_j [i+j, j] (2 pi)^(-j/2) L_{i+j}(M) M_j(D).

Also covers the sum-of-squares composite (chi-squared) field and the Euler
characteristic tail approximation for suprema.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from scipy.optimize import brentq

from .geomcore import LkVector, SpaceDescriptor, flag_coeff, lk_model_space
from .gmf import (
    DomainDescriptor,
    GmfVector,
    gmf_closed_form_vector,
)

__all__ = [
    "GaussianCovariance",
    "ExponentialCovariance",
    "CanonicalSphereCovariance",
    "induced_metric_scale",
    "GkfPrediction",
    "CompositeKind",
    "expected_lk",
    "expected_ec_curve",
    "expected_lk_composite",
    "ec_heuristic_tail",
    "threshold_for_ec_tail",
]


# ---------------------------------------------------------------------------
# covariance models and the induced metric


@dataclass(frozen=True)
class GaussianCovariance:
    """Stationary isotropic squared-exponential covariance
    C(h) = exp(-|h|^2 / (2 ell^2)), unit variance, C^2 at the origin."""

    ell: float

    def __post_init__(self):
        if self.ell <= 0:
            raise ValueError(f"correlation length must be > 0, got {self.ell}")


@dataclass(frozen=True)
class ExponentialCovariance:
    """C(h) = exp(-|h| / ell).  Not twice differentiable at 0: fields with
    this covariance have no derivative, so no induced metric exists."""

    ell: float


@dataclass(frozen=True)
class CanonicalSphereCovariance:
    """C(s, t) = <s, t> on the unit sphere; the induced metric is the round one."""


def induced_metric_scale(covariance) -> float:
    """Second spectral moment lambda2 = -C''(0) of a unit-variance stationary
    isotropic covariance; the induced metric is lambda2 times the standard one.
    """
    if isinstance(covariance, GaussianCovariance):
        return 1.0 / covariance.ell**2
    if isinstance(covariance, CanonicalSphereCovariance):
        # -d^2 cos(theta) / d theta^2 at 0
        return 1.0
    if isinstance(covariance, ExponentialCovariance):
        raise ValueError(
            "exponential covariance is not twice differentiable at 0; "
            "the field has no induced Riemannian metric"
        )
    raise TypeError(f"unsupported covariance model {type(covariance).__name__}")


# ---------------------------------------------------------------------------
# the main formula


@dataclass(frozen=True)
class GkfPrediction:
    """One expected curvature E L_i with its per-order summands for audit."""

    i: int
    value: float
    terms: tuple[float, ...]
    lk: LkVector
    gmf: GmfVector
    space: SpaceDescriptor | None = None
    domain: DomainDescriptor | None = None


def expected_lk(
    i: int,
    lk_m: LkVector,
    gmf_d: GmfVector,
    space: SpaceDescriptor | None = None,
    domain: DomainDescriptor | None = None,
) -> GkfPrediction:
    """E L_i of the excursion set, from the space's curvature vector (in the
    induced metric) and the hitting set's Minkowski functionals."""
    if not 0 <= i <= lk_m.dim:
        raise ValueError(f"curvature order {i} outside 0..{lk_m.dim}")
    needed = lk_m.dim - i
    if gmf_d.j_max < needed:
        raise ValueError(
            f"need Minkowski functionals up to order {needed}, got j_max={gmf_d.j_max}"
        )
    terms = []
    for j in range(needed + 1):
        term = (
            flag_coeff(i + j, j)
            * (2.0 * math.pi) ** (-0.5 * j)
            * lk_m[i + j]
            * gmf_d[j]
        )
        terms.append(term)
    return GkfPrediction(
        i=i,
        value=float(sum(terms)),
        terms=tuple(terms),
        lk=lk_m,
        gmf=gmf_d,
        space=space,
        domain=domain,
    )


def expected_ec_curve(
    space: SpaceDescriptor, u_grid: Sequence[float]
) -> list[tuple[float, float]]:
    """Expected Euler characteristic of {f >= u} for a scalar field, at each
    threshold in u_grid."""
    lk = lk_model_space(space)
    out = []
    for u in u_grid:
        domain = DomainDescriptor.half_line(float(u))
        gmf = gmf_closed_form_vector(domain, lk.dim)
        pred = expected_lk(0, lk, gmf, space=space, domain=domain)
        out.append((float(u), pred.value))
    return out


class CompositeKind(Enum):
    SUM_OF_SQUARES = "sum_of_squares"


def expected_lk_composite(
    i: int,
    space: SpaceDescriptor,
    k: int,
    composite: CompositeKind,
    u: float,
) -> GkfPrediction:
    """E L_i of {F(y) >= u} for a composite of k i.i.d. unit Gaussian fields.

    For F = sum of squares the hitting set is {|x| >= sqrt(u)}, so the
    chi-squared case reduces to ball-complement Minkowski functionals.
    """
    if composite is not CompositeKind.SUM_OF_SQUARES:
        raise ValueError(f"unsupported composite field {composite}")
    if u <= 0:
        raise ValueError(f"sum-of-squares threshold must be > 0, got {u}")
    lk = lk_model_space(space)
    domain = DomainDescriptor.ball_complement(math.sqrt(u), k=k)
    gmf = gmf_closed_form_vector(domain, lk.dim - i)
    return expected_lk(i, lk, gmf, space=space, domain=domain)


def ec_heuristic_tail(space: SpaceDescriptor, u: float) -> float:
    """Approximation P(sup f >= u) ~ E chi({f >= u}), accurate for large u.

    This is a large-threshold approximation, not an identity: the relative
    error decays like exp(-eta u^2 / 2) for some eta > 0.
    """
    return expected_ec_curve(space, [u])[0][1]


def threshold_for_ec_tail(
    space: SpaceDescriptor, target: float, bracket: tuple[float, float] = (0.5, 10.0)
) -> float:
    """Threshold u at which the expected-EC tail approximation equals target,
    found on the decreasing branch of the curve."""
    if target <= 0:
        raise ValueError(f"target tail must be > 0, got {target}")
    lo, hi = bracket
    f = lambda u: ec_heuristic_tail(space, u) - target
    if f(lo) < 0 or f(hi) > 0:
        raise ValueError(
            f"target {target} not bracketed by thresholds {bracket}; widen the bracket"
        )
    return float(brentq(f, lo, hi, xtol=1e-10))
