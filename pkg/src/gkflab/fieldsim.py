"""Simulation of the random fields under study: smooth stationary Gaussian
fields on grids (smoothed white noise), the canonical isotropic process on
triangulated spheres, Haar rotations, and the sphere-projection process that
approximates the canonical one at finite n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.ndimage import correlate1d

__all__ = [
    "GridSpec",
    "SphereMesh",
    "FieldSample",
    "icosphere",
    "simulate_field",
    "canonical_sphere_process",
    "sample_uniform_rotation",
    "poincare_process",
    "projected_coordinate_cdf",
    "derive_rng",
    "write_field_dump",
    "read_field_dump",
]


def derive_rng(master_seed: int, *key: int) -> np.random.Generator:
    """Counter-style generator derivation: the stream for (master_seed, key)
    is independent of scheduling and of how many workers are running."""
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), *map(int, key)]))


# ---------------------------------------------------------------------------
# supports


@dataclass(frozen=True)
class GridSpec:
    """Regular grid over an axis-aligned box: dims[i] cells (hence dims[i]+1
    nodes) of size `spacing` along axis i, starting at `origin`."""

    dims: tuple[int, ...]
    spacing: float
    origin: tuple[float, ...] = ()

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        if not 1 <= len(dims) <= 3:
            raise ValueError(f"grids must be 1-, 2- or 3-dimensional, got {len(dims)}")
        if any(d < 2 for d in dims):
            raise ValueError(f"need at least 2 cells per axis, got {dims}")
        if self.spacing <= 0:
            raise ValueError(f"spacing must be > 0, got {self.spacing}")
        origin = tuple(float(x) for x in self.origin) or (0.0,) * len(dims)
        if len(origin) != len(dims):
            raise ValueError("origin must match the number of axes")
        object.__setattr__(self, "origin", origin)

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def node_shape(self) -> tuple[int, ...]:
        return tuple(d + 1 for d in self.dims)

    @property
    def side_lengths(self) -> tuple[float, ...]:
        return tuple(d * self.spacing for d in self.dims)

    def axis_coords(self, axis: int) -> np.ndarray:
        return self.origin[axis] + self.spacing * np.arange(self.dims[axis] + 1)


@dataclass(frozen=True, eq=False)
class SphereMesh:
    """Triangulation of the unit sphere: unit vertices, a closed orientable
    triangle fan with V - E + F = 2."""

    vertices: np.ndarray
    triangles: np.ndarray
    level: int

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=float)
        tris = np.asarray(self.triangles, dtype=np.int64)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "triangles", tris)
        norms = np.linalg.norm(verts, axis=1)
        if np.abs(norms - 1.0).max() > 1e-12:
            raise ValueError("mesh vertices must be unit vectors to 1e-12")
        if self.num_vertices - self.num_edges + self.num_faces != 2:
            raise ValueError("triangulation is not a closed sphere: V - E + F != 2")

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_faces(self) -> int:
        return len(self.triangles)

    @cached_property
    def edges(self) -> np.ndarray:
        return _edges_from_triangles(self.triangles)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def max_edge_arc(self) -> float:
        e = self.edges
        dots = np.einsum("ij,ij->i", self.vertices[e[:, 0]], self.vertices[e[:, 1]])
        return float(np.arccos(np.clip(dots, -1.0, 1.0)).max())

    def antipode_index(self, vertex: int) -> int:
        """Index of the vertex opposite `vertex`; icosphere meshes are
        antipodally symmetric at every level."""
        target = -self.vertices[vertex]
        idx = int(np.argmin(np.linalg.norm(self.vertices - target, axis=1)))
        if np.linalg.norm(self.vertices[idx] - target) > 1e-9:
            raise ValueError(f"vertex {vertex} has no antipodal partner in the mesh")
        return idx


def _edges_from_triangles(tris: np.ndarray) -> np.ndarray:
    pairs = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    pairs = np.sort(pairs, axis=1)
    return np.unique(pairs, axis=0)


def icosphere(level: int) -> SphereMesh:
    """Icosahedron subdivided `level` times with vertices reprojected to the
    sphere: V = 10 * 4^level + 2."""
    if level < 0:
        raise ValueError(f"refinement level must be >= 0, got {level}")
    phi = (1.0 + math.sqrt(5.0)) / 2.0
    raw = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=float,
    )
    verts = [v / np.linalg.norm(v) for v in raw]
    tris = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    for _ in range(level):
        midpoint: dict[tuple[int, int], int] = {}

        def mid(i: int, j: int) -> int:
            key = (i, j) if i < j else (j, i)
            if key not in midpoint:
                v = verts[i] + verts[j]
                verts.append(v / np.linalg.norm(v))
                midpoint[key] = len(verts) - 1
            return midpoint[key]

        new_tris = []
        for a, b, c in tris:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_tris += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        tris = new_tris
    return SphereMesh(
        vertices=np.asarray(verts), triangles=np.asarray(tris, dtype=np.int64), level=level
    )


# ---------------------------------------------------------------------------
# samples


@dataclass(frozen=True, eq=False)
class FieldSample:
    """One realization of a k-component field: values[c] holds component c,
    one value per grid node or mesh vertex."""

    support: GridSpec | SphereMesh
    k: int
    values: np.ndarray
    seed: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.shape[0] != self.k:
            raise ValueError(f"expected {self.k} component layers, got {vals.shape[0]}")
        if isinstance(self.support, GridSpec):
            if vals.shape[1:] != self.support.node_shape:
                raise ValueError(
                    f"values shape {vals.shape[1:]} does not match the node grid "
                    f"{self.support.node_shape}"
                )
        else:
            if vals.shape[1:] != (self.support.num_vertices,):
                raise ValueError("values must hold one entry per mesh vertex")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")

    def component(self, c: int) -> np.ndarray:
        return self.values[c]

    def node_vectors(self) -> np.ndarray:
        """Values reshaped to (..., k): the k-vector observed at each node."""
        return np.moveaxis(self.values, 0, -1)


# ---------------------------------------------------------------------------
# simulators


def _gaussian_kernel(ell: float, spacing: float, radius: int) -> np.ndarray:
    # convolving white noise with exp(-x^2 / (2 sigma^2)), sigma = ell/sqrt(2),
    # produces covariance exp(-h^2 / (2 ell^2)); unit L2 norm gives variance 1
    offsets = np.arange(-radius, radius + 1) * spacing
    g = np.exp(-(offsets**2) / (2.0 * (ell / math.sqrt(2.0)) ** 2))
    return g / math.sqrt(float(np.dot(g, g)))


def simulate_field(grid: GridSpec, ell: float, k: int, seed: int) -> FieldSample:
    """Stationary centered Gaussian field with covariance exp(-|h|^2/(2 ell^2))
    and unit pointwise variance, k independent components.

    White noise on a lattice extended 5*ell beyond the grid on every side is
    convolved with a Gaussian kernel; the buffer is then cropped so the field
    is genuinely nonperiodic (the excursion topology is that of the box, not
    the torus).  Requires ell >= 3 * spacing so the field is resolved.
    """
    if k < 1:
        raise ValueError(f"component count must be >= 1, got {k}")
    if ell < 3.0 * grid.spacing:
        raise ValueError(
            f"correlation length {ell} is under-resolved: need ell >= 3 * spacing "
            f"= {3.0 * grid.spacing}"
        )
    pad = math.ceil(5.0 * ell / grid.spacing)
    kernel = _gaussian_kernel(ell, grid.spacing, pad)
    padded_shape = tuple(n + 2 * pad for n in grid.node_shape)
    rng = derive_rng(seed) if isinstance(seed, int) else np.random.default_rng(seed)
    crop = tuple(slice(pad, pad + n) for n in grid.node_shape)
    layers = []
    for _ in range(k):
        w = rng.standard_normal(padded_shape)
        for axis in range(grid.ndim):
            w = correlate1d(w, kernel, axis=axis, mode="constant", cval=0.0)
        layers.append(w[crop])
    return FieldSample(
        support=grid,
        k=k,
        values=np.stack(layers),
        seed=int(seed) if isinstance(seed, int) else -1,
        meta={"ell": float(ell), "kind": "gaussian"},
    )


def canonical_sphere_process(mesh: SphereMesh, k: int, seed: int) -> FieldSample:
    """The isotropic Gaussian field on the unit sphere with covariance
    <s, t>: component i is y_i(t) = <xi_i, t> for a standard normal 3-vector
    xi_i, so the covariance holds exactly at the mesh vertices."""
    if k < 1:
        raise ValueError(f"component count must be >= 1, got {k}")
    rng = derive_rng(seed) if isinstance(seed, int) else np.random.default_rng(seed)
    xi = rng.standard_normal((k, 3))
    values = xi @ mesh.vertices.T
    return FieldSample(
        support=mesh,
        k=k,
        values=values,
        seed=int(seed) if isinstance(seed, int) else -1,
        meta={"kind": "canonical"},
    )


def sample_uniform_rotation(n: int, seed) -> np.ndarray:
    """Haar-distributed orthogonal n x n matrix.

    QR factorization of a standard normal matrix with the sign convention that
    the triangular factor has positive diagonal; that convention makes the
    factorization unique and the orthogonal factor exactly Haar on O(n), with
    both determinant signs equally likely.
    """
    if n < 1:
        raise ValueError(f"rotation dimension must be >= 1, got {n}")
    rng = derive_rng(seed) if isinstance(seed, int) else np.random.default_rng(seed)
    a = rng.standard_normal((n, n))
    q, r = np.linalg.qr(a)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def poincare_process(mesh: SphereMesh, n: int, k: int, seed) -> FieldSample:
    """Projection process at sphere dimension n: each realization draws one
    Haar rotation of R^n and maps vertex t to the first k coordinates of
    sqrt(n) g t-hat, where t-hat zero-pads t into R^n.

    Only the first k rows of the rotation enter, so the draw is made directly
    on those rows (QR orthonormalization of an n x k normal matrix, which has
    exactly the marginal law of k rows of a Haar matrix).  Values are bounded
    by sqrt(n) pointwise.
    """
    if k < 1:
        raise ValueError(f"component count must be >= 1, got {k}")
    if n < max(3, k):
        raise ValueError(f"need n >= max(3, k) = {max(3, k)}, got n={n}")
    rng = derive_rng(seed) if isinstance(seed, int) else np.random.default_rng(seed)
    a = rng.standard_normal((n, k))
    q, r = np.linalg.qr(a)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    q = q * signs
    # t-hat is supported on the first 3 coordinates, so only q[:3] matters
    proj = math.sqrt(n) * q[:3, :].T
    values = proj @ mesh.vertices.T
    return FieldSample(
        support=mesh,
        k=k,
        values=values,
        seed=int(seed) if isinstance(seed, int) else -1,
        meta={"kind": "poincare", "n": int(n)},
    )


def projected_coordinate_cdf(n: int, x) -> np.ndarray:
    """Exact CDF of one coordinate of sqrt(n) times a uniform point on the
    unit sphere in R^n: (t+1)/2 is Beta((n-1)/2, (n-1)/2) for the raw
    coordinate t."""
    from scipy.special import betainc

    if n < 2:
        raise ValueError(f"need sphere dimension >= 2, got {n}")
    arr = np.asarray(x, dtype=float)
    t = np.clip(arr / math.sqrt(n), -1.0, 1.0)
    half = 0.5 * (n - 1.0)
    return betainc(half, half, 0.5 * (t + 1.0))


# ---------------------------------------------------------------------------
# field dumps


_FIELD_MAGIC = "GKFLAB-FIELD v1"


def _field_header(sample: FieldSample) -> str:
    grid = sample.support
    if not isinstance(grid, GridSpec):
        raise ValueError("field dumps are defined for grid-supported samples")
    dims = ",".join(str(d) for d in grid.dims)
    return f"{_FIELD_MAGIC} dims={dims} spacing={grid.spacing!r} k={sample.k} seed={sample.seed}"


def write_field_dump(sample: FieldSample, path, binary: bool = False) -> None:
    """Dump a grid field: header line, then node values in row-major order,
    one component block after another.  The binary variant stores the same
    header followed by little-endian float64."""
    header = _field_header(sample)
    flat = sample.values.reshape(sample.k, -1)
    if binary:
        with open(path, "wb") as fh:
            fh.write((header + "\n").encode("ascii"))
            fh.write(flat.astype("<f8").tobytes())
    else:
        with open(path, "w") as fh:
            fh.write(header + "\n")
            for comp in flat:
                for v in comp:
                    fh.write(f"{float(v)!r}\n")


def read_field_dump(path) -> FieldSample:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").rstrip("\n")
        rest = fh.read()
    if not header.startswith(_FIELD_MAGIC):
        raise ValueError(f"not a field dump: header {header!r}")
    fields = dict(tok.split("=", 1) for tok in header[len(_FIELD_MAGIC) :].split())
    dims = tuple(int(d) for d in fields["dims"].split(","))
    spacing = float(fields["spacing"])
    k = int(fields["k"])
    seed = int(fields["seed"])
    grid = GridSpec(dims=dims, spacing=spacing)
    count = k * int(np.prod(grid.node_shape))
    expected_bytes = 8 * count
    if len(rest) == expected_bytes:
        values = np.frombuffer(rest, dtype="<f8").copy()
    else:
        values = np.array([float(line) for line in rest.decode("ascii").split()])
        if len(values) != count:
            raise ValueError(f"expected {count} values, found {len(values)}")
    return FieldSample(
        support=grid,
        k=k,
        values=values.reshape((k,) + grid.node_shape),
        seed=seed,
    )
