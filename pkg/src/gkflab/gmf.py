"""Gaussian Minkowski functionals of hitting sets D in R^k.

M_j is j! times the j-th Taylor coefficient in rho of the Gauss measure of the
rho-neighborhood of D.  Half-lines, intervals and ball complements have closed
forms; arbitrary sets with a known distance function and reach are handled by
a Monte Carlo tube-measure engine plus polynomial coefficient extraction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaincc, gammaln, ndtr

from .geomcore import hermite

__all__ = [
    "DomainKind",
    "DomainDescriptor",
    "GmfVector",
    "GmfNumericSettings",
    "IllConditionedFitError",
    "gauss_tail",
    "gmf_halfline",
    "gmf_interval",
    "gmf_ball_complement",
    "gmf_closed_form",
    "gmf_closed_form_vector",
    "gauss_tube_measure",
    "gmf_numeric",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def gauss_tail(u) -> float:
    """Standard normal upper tail Psi(u) = P(Z >= u)."""
    out = ndtr(np.negative(u))
    return float(out) if np.isscalar(u) else out


# ---------------------------------------------------------------------------
# hitting-set descriptors


class DomainKind(Enum):
    HALF_LINE = "halfline"
    INTERVAL = "interval"
    BALL_COMPLEMENT = "ballcomp"
    PRODUCT = "product"
    GENERIC = "generic"
    FULL_SPACE = "fullspace"


@dataclass(frozen=True)
class DomainDescriptor:
    """A closed hitting set D in R^k with membership and distance evaluation.

    `reach` bounds the tube radii for which the tube expansion is valid; it is
    analytic for the built-in families and caller-declared for generic sets.
    """

    kind: DomainKind
    k: int
    u: float = 0.0
    a: float = 0.0
    b: float = 0.0
    factors: tuple["DomainDescriptor", ...] = ()
    membership: Callable[[np.ndarray], np.ndarray] | None = None
    distance: Callable[[np.ndarray], np.ndarray] | None = None
    reach_bound: float = math.inf

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"ambient dimension must be >= 1, got {self.k}")
        if self.kind is DomainKind.INTERVAL and not self.a < self.b:
            raise ValueError(f"interval needs a < b, got a={self.a}, b={self.b}")
        if self.kind is DomainKind.BALL_COMPLEMENT and self.u <= 0:
            raise ValueError(f"ball complement needs u > 0, got {self.u}")
        if self.kind is DomainKind.GENERIC:
            if self.membership is None or self.distance is None:
                raise ValueError("generic domain needs membership and distance callables")
            if not self.reach_bound > 0:
                raise ValueError(f"generic domain needs reach > 0, got {self.reach_bound}")
        if self.kind is DomainKind.PRODUCT:
            if not self.factors:
                raise ValueError("product domain needs at least one factor")
            if any(f.k != 1 for f in self.factors):
                raise ValueError("product factors must be one-dimensional")

    # -- constructors -------------------------------------------------------

    @classmethod
    def half_line(cls, u: float):
        """[u, inf) in R."""
        return cls(DomainKind.HALF_LINE, k=1, u=float(u))

    @classmethod
    def interval(cls, a: float, b: float):
        """[a, b] in R."""
        return cls(DomainKind.INTERVAL, k=1, a=float(a), b=float(b))

    @classmethod
    def ball_complement(cls, u: float, k: int):
        """{x in R^k : |x| >= u}; the hitting set of a sum-of-squares threshold."""
        return cls(DomainKind.BALL_COMPLEMENT, k=k, u=float(u))

    @classmethod
    def product(cls, factors: Sequence["DomainDescriptor"]):
        return cls(DomainKind.PRODUCT, k=len(factors), factors=tuple(factors))

    @classmethod
    def generic(
        cls,
        k: int,
        membership: Callable[[np.ndarray], np.ndarray],
        distance: Callable[[np.ndarray], np.ndarray],
        reach: float,
    ):
        """Caller-supplied set: vectorized membership over (m, k) points, a
        1-Lipschitz distance-to-set function, and a declared reach bound."""
        return cls(
            DomainKind.GENERIC,
            k=k,
            membership=membership,
            distance=distance,
            reach_bound=float(reach),
        )

    @classmethod
    def full_space(cls, k: int = 1):
        return cls(DomainKind.FULL_SPACE, k=k)

    # -- evaluation ---------------------------------------------------------

    @property
    def reach(self) -> float:
        if self.kind is DomainKind.BALL_COMPLEMENT:
            return self.u
        if self.kind is DomainKind.GENERIC:
            return self.reach_bound
        if self.kind is DomainKind.PRODUCT:
            return min(f.reach for f in self.factors)
        return math.inf

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Membership of points with shape (..., k); returns booleans (...)."""
        pts = np.asarray(points, dtype=float)
        if pts.shape[-1] != self.k:
            raise ValueError(f"points have dimension {pts.shape[-1]}, domain has k={self.k}")
        if self.kind is DomainKind.HALF_LINE:
            return pts[..., 0] >= self.u
        if self.kind is DomainKind.INTERVAL:
            return (pts[..., 0] >= self.a) & (pts[..., 0] <= self.b)
        if self.kind is DomainKind.BALL_COMPLEMENT:
            return np.linalg.norm(pts, axis=-1) >= self.u
        if self.kind is DomainKind.FULL_SPACE:
            return np.ones(pts.shape[:-1], dtype=bool)
        if self.kind is DomainKind.PRODUCT:
            out = np.ones(pts.shape[:-1], dtype=bool)
            for i, f in enumerate(self.factors):
                out &= f.contains(pts[..., i : i + 1])
            return out
        return np.asarray(self.membership(pts), dtype=bool)

    def dist(self, points: np.ndarray) -> np.ndarray:
        """Euclidean distance from points (..., k) to the set."""
        pts = np.asarray(points, dtype=float)
        if pts.shape[-1] != self.k:
            raise ValueError(f"points have dimension {pts.shape[-1]}, domain has k={self.k}")
        if self.kind is DomainKind.HALF_LINE:
            return np.maximum(self.u - pts[..., 0], 0.0)
        if self.kind is DomainKind.INTERVAL:
            return np.maximum(np.maximum(self.a - pts[..., 0], pts[..., 0] - self.b), 0.0)
        if self.kind is DomainKind.BALL_COMPLEMENT:
            return np.maximum(self.u - np.linalg.norm(pts, axis=-1), 0.0)
        if self.kind is DomainKind.FULL_SPACE:
            return np.zeros(pts.shape[:-1])
        if self.kind is DomainKind.PRODUCT:
            sq = np.zeros(pts.shape[:-1])
            for i, f in enumerate(self.factors):
                sq += f.dist(pts[..., i : i + 1]) ** 2
            return np.sqrt(sq)
        return np.asarray(self.distance(pts), dtype=float)


@dataclass(frozen=True)
class GmfVector:
    """M_0 .. M_jmax of a hitting set, with standard errors when estimated."""

    k: int
    values: tuple[float, ...]
    j_max: int
    errors: tuple[float, ...] | None = None

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if len(vals) != self.j_max + 1:
            raise ValueError(f"need j_max+1 = {self.j_max + 1} values, got {len(vals)}")
        if self.errors is not None:
            errs = tuple(float(e) for e in self.errors)
            if len(errs) != self.j_max + 1:
                raise ValueError("errors must match values in length")
            object.__setattr__(self, "errors", errs)
        slack = 1e-9 if self.errors is None else max(1e-9, 6.0 * self.errors[0])
        if not -slack <= vals[0] <= 1.0 + slack:
            raise ValueError(f"M_0 is a Gauss measure and must lie in [0, 1], got {vals[0]}")

    def __getitem__(self, j: int) -> float:
        return self.values[j]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


# ---------------------------------------------------------------------------
# closed forms


def gmf_halfline(j: int, u):
    """M_j of [u, inf): (2 pi)^(-1/2) H_{j-1}(u) exp(-u^2/2) for j >= 1,
    and the Gauss tail Psi(u) for j = 0."""
    if j < 0:
        raise ValueError(f"functional order must be >= 0, got {j}")
    if j == 0:
        return gauss_tail(u)
    arr = np.asarray(u, dtype=float)
    out = hermite(j - 1, arr) * np.exp(-0.5 * arr**2) / _SQRT_2PI
    return float(out) if np.isscalar(u) else out


def gmf_interval(j: int, a: float, b: float):
    """M_j of [a, b]: tube measure is Phi(b+rho) - Phi(a-rho), so each order is
    the half-line value at a plus the reflected contribution at b."""
    if j < 0:
        raise ValueError(f"functional order must be >= 0, got {j}")
    return gmf_halfline(j, a) + (-1.0) ** (j + 1) * gmf_halfline(j, b)


def _chi_tail(k: int, u: float) -> float:
    # P(|Z_k| >= u) for Z_k standard normal in R^k
    return float(gammaincc(0.5 * k, 0.5 * u * u))


def _chi_density_derivative_poly(k: int, order: int) -> np.ndarray:
    """Coefficients (ascending) of p in f^(order)(s) = p(s) exp(-s^2/2), where
    f is the chi_k density.  d/ds maps p -> p' - s p, so every derivative stays
    a polynomial times the Gaussian factor, exactly, for every k."""
    # chi density: f(s) = s^(k-1) e^(-s^2/2) / (2^(k/2 - 1) Gamma(k/2))
    poly = np.zeros(k)
    poly[k - 1] = math.exp((1.0 - 0.5 * k) * math.log(2.0) - gammaln(0.5 * k))
    for _ in range(order):
        deriv = np.polynomial.polynomial.polyder(poly)
        shifted = np.concatenate([[0.0], poly])  # s * p
        n = max(len(deriv), len(shifted))
        nxt = np.zeros(n)
        nxt[: len(deriv)] += deriv
        nxt[: len(shifted)] -= shifted
        poly = nxt
    return poly


def gmf_ball_complement(k: int, u: float, j: int) -> float:
    """M_j of {|x| >= u} in R^k.

    The tube at radius rho < u is {|x| >= u - rho} with Gauss measure the
    chi_k upper tail at u - rho, so M_j = (-1)^(j-1) times the (j-1)-st
    derivative of the chi_k density at u (and the tail itself at j = 0).
    The density derivatives are polynomial-times-Gaussian and are expanded
    symbolically, which is exact for every k and j.
    """
    if k < 1:
        raise ValueError(f"ambient dimension must be >= 1, got {k}")
    if u <= 0:
        raise ValueError(f"threshold must be > 0, got {u}")
    if j < 0:
        raise ValueError(f"functional order must be >= 0, got {j}")
    if j == 0:
        return _chi_tail(k, u)
    poly = _chi_density_derivative_poly(k, j - 1)
    val = np.polynomial.polynomial.polyval(u, poly) * math.exp(-0.5 * u * u)
    return float((-1.0) ** (j - 1) * val)


def gmf_closed_form(d: DomainDescriptor, j: int) -> float:
    """Dispatch to the closed form for a supported descriptor."""
    if d.kind is DomainKind.HALF_LINE:
        return float(gmf_halfline(j, d.u))
    if d.kind is DomainKind.INTERVAL:
        return float(gmf_interval(j, d.a, d.b))
    if d.kind is DomainKind.BALL_COMPLEMENT:
        return gmf_ball_complement(d.k, d.u, j)
    if d.kind is DomainKind.FULL_SPACE:
        return 1.0 if j == 0 else 0.0
    raise ValueError(f"no closed-form Minkowski functionals for {d.kind.value} domains")


def has_closed_form(d: DomainDescriptor) -> bool:
    return d.kind in (
        DomainKind.HALF_LINE,
        DomainKind.INTERVAL,
        DomainKind.BALL_COMPLEMENT,
        DomainKind.FULL_SPACE,
    )


def gmf_closed_form_vector(d: DomainDescriptor, j_max: int) -> GmfVector:
    vals = tuple(gmf_closed_form(d, j) for j in range(j_max + 1))
    return GmfVector(k=d.k, values=vals, j_max=j_max)


# ---------------------------------------------------------------------------
# Monte Carlo tube engine


def gauss_tube_measure(
    d: DomainDescriptor, rho: float, samples: int = 200_000, seed: int | None = 0
) -> tuple[float, float]:
    """Monte Carlo estimate of gamma_k({x : dist(x, D) <= rho}) with binomial
    standard error.  Deterministic given (seed, samples)."""
    if rho < 0:
        raise ValueError(f"tube radius must be >= 0, got {rho}")
    if d.kind is DomainKind.GENERIC and rho >= d.reach:
        raise ValueError(f"tube radius {rho} is not below the declared reach {d.reach}")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((samples, d.k))
    hits = d.dist(x) <= rho
    p = float(hits.mean())
    stderr = math.sqrt(p * (1.0 - p) / samples)
    return p, stderr


class IllConditionedFitError(ValueError):
    """Raised when the tube-polynomial design matrix is numerically singular."""


@dataclass(frozen=True)
class GmfNumericSettings:
    rho_grid: tuple[float, ...] | None = None
    samples: int = 200_000
    seed: int = 0
    cond_threshold: float = 1e8

    def resolve_grid(self, d: DomainDescriptor) -> np.ndarray:
        if self.rho_grid is not None:
            grid = np.sort(np.asarray(self.rho_grid, dtype=float))
            if grid[0] <= 0:
                raise ValueError("rho grid must be strictly positive")
        else:
            rho_max = min(0.2, d.reach / 2.0)
            grid = rho_max * np.arange(1, 9) / 8.0
        if grid[-1] >= d.reach:
            raise ValueError(f"rho grid exceeds the reach bound {d.reach}")
        return grid


def gmf_numeric(
    d: DomainDescriptor, j_max: int, settings: GmfNumericSettings | None = None
) -> GmfVector:
    """Estimate M_0 .. M_jmax from Monte Carlo tube measures.

    A single batch of Gauss draws is shared across the rho grid (common random
    numbers: only the tube indicator changes), a polynomial of degree j_max+2
    in rho is fitted by least squares, and coefficient standard errors are
    propagated through the exact covariance of the nested tube indicators.
    """
    if j_max < 0:
        raise ValueError(f"j_max must be >= 0, got {j_max}")
    if j_max > 4:
        raise ValueError(
            f"j_max={j_max} refused: coefficient extraction from noisy tube "
            "measures is unstable above order 4"
        )
    settings = settings or GmfNumericSettings()
    grid = settings.resolve_grid(d)
    m = len(grid)
    degree = j_max + 2
    if m <= degree:
        raise ValueError(f"need more than {degree} grid points, got {m}")

    rng = np.random.default_rng(settings.seed)
    x = rng.standard_normal((settings.samples, d.k))
    dist = d.dist(x)
    p_hat = np.array([(dist <= r).mean() for r in grid])

    # nested indicators: Cov(1{d<=r_i}, 1{d<=r_j}) = p_min - p_i p_j
    idx = np.arange(m)
    p_min = p_hat[np.minimum.outer(idx, idx)]
    sigma = (p_min - np.outer(p_hat, p_hat)) / settings.samples

    # design: gamma(Tube(rho)) = sum_j beta_j rho^j / j!, beta_j = M_j
    design = np.column_stack([grid**j / math.factorial(j) for j in range(degree + 1)])
    scale = np.abs(design).max(axis=0)
    ds = design / scale
    cond = np.linalg.cond(ds)
    if cond > settings.cond_threshold:
        raise IllConditionedFitError(
            f"tube fit condition number {cond:.3g} exceeds {settings.cond_threshold:.3g}"
        )
    gram = ds.T @ ds
    proj = np.linalg.solve(gram, ds.T)  # maps measurements to scaled coefficients
    beta = (proj @ p_hat) / scale
    cov = proj @ sigma @ proj.T / np.outer(scale, scale)
    errors = np.sqrt(np.maximum(np.diag(cov), 0.0))

    return GmfVector(
        k=d.k,
        values=tuple(beta[: j_max + 1]),
        j_max=j_max,
        errors=tuple(errors[: j_max + 1]),
    )
