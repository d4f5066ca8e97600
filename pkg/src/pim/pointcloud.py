"""Sampled manifolds with quadrature weights.

A :class:`PointCloud` is the tuple (P, S, V, A): sample points P in ambient
coordinates, a boundary subset S given by indices into P, volume weights V
(one per point, summing to the manifold volume) and area weights A (one per
boundary point, summing to the boundary measure; counting measure when the
intrinsic dimension is 1).

Built-in generators produce clouds whose weights are exact cell measures, so
weighted sums reproduce manifold and boundary integrals to first order in
the spacing without any Voronoi machinery:

* interval / rectangle: composite trapezoid weights (half cells at edges);
* unit disk: node-centered polar rings, each annulus area split exactly
  among its ring points;
* spherical cap (the portion z >= z0 of the unit sphere): latitude rings
  uniform in polar angle, band areas exact by the axial-projection rule
  dA = dz dtheta.

Externally supplied clouds must bring their own weights; this module never
estimates weights from raw coordinates.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

__all__ = [
    "PointCloud",
    "ManifoldSpec",
    "CloudFormatError",
    "generate",
    "fill_distance",
    "save",
    "load",
]

SHAPES = ("interval", "rectangle", "disk", "spherical_cap")


class CloudFormatError(ValueError):
    """Raised for malformed cloud files or invalid cloud data."""


@dataclass(frozen=True)
class ManifoldSpec:
    """Descriptor of a built-in manifold plus a target resolution.

    ``resolution`` is the total point count for the interval and a target
    point count for the other shapes (the realized count is the nearest
    value the structured generator can produce).
    """

    shape: str
    resolution: int
    a: float = 0.0
    b: float = 1.0
    widths: tuple[float, float] = (1.0, 1.0)
    z0: float = 0.0

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown shape {self.shape!r}; choose from {SHAPES}")
        if self.shape == "interval" and not self.a < self.b:
            raise ValueError(f"interval requires a < b, got [{self.a}, {self.b}]")
        if self.shape == "rectangle" and min(self.widths) <= 0.0:
            raise ValueError(f"rectangle widths must be positive, got {self.widths}")
        if self.shape == "spherical_cap" and not -1.0 < self.z0 < 1.0:
            raise ValueError(f"spherical cap requires -1 < z0 < 1, got {self.z0}")
        if self.resolution < 2:
            raise ValueError("resolution must be at least 2")

    @classmethod
    def interval(cls, a: float, b: float, n: int) -> "ManifoldSpec":
        return cls(shape="interval", resolution=n, a=a, b=b)

    @classmethod
    def rectangle(cls, wx: float, wy: float, n: int) -> "ManifoldSpec":
        return cls(shape="rectangle", resolution=n, widths=(wx, wy))

    @classmethod
    def disk(cls, n: int) -> "ManifoldSpec":
        return cls(shape="disk", resolution=n)

    @classmethod
    def spherical_cap(cls, z0: float, n: int) -> "ManifoldSpec":
        return cls(shape="spherical_cap", resolution=n, z0=z0)

    def with_resolution(self, n: int) -> "ManifoldSpec":
        return replace(self, resolution=n)


@dataclass(frozen=True)
class PointCloud:
    """Immutable sampled manifold with quadrature weights.

    Arrays are locked read-only on construction so instances can be shared
    freely across workers.
    """

    points: np.ndarray            # (n, d)
    intrinsic_dim: int            # k <= d
    boundary_indices: np.ndarray  # (m,) indices into points
    volume_weights: np.ndarray    # (n,) positive, units length^k
    area_weights: np.ndarray      # (m,) positive, units length^(k-1)
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        pts = np.ascontiguousarray(np.atleast_2d(self.points), dtype=float)
        bidx = np.asarray(self.boundary_indices, dtype=np.intp).ravel()
        vw = np.asarray(self.volume_weights, dtype=float).ravel()
        aw = np.asarray(self.area_weights, dtype=float).ravel()
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "boundary_indices", bidx)
        object.__setattr__(self, "volume_weights", vw)
        object.__setattr__(self, "area_weights", aw)

        n, d = pts.shape
        if not 1 <= self.intrinsic_dim <= d:
            raise CloudFormatError(
                f"intrinsic_dim must satisfy 1 <= k <= d, got k={self.intrinsic_dim}, d={d}"
            )
        if vw.shape != (n,):
            raise CloudFormatError("volume_weights length must match point count")
        if np.any(vw <= 0.0) or not np.all(np.isfinite(vw)):
            raise CloudFormatError("volume weights must be positive and finite")
        if aw.shape != bidx.shape:
            raise CloudFormatError("area_weights length must match boundary_indices")
        if bidx.size:
            if bidx.min() < 0 or bidx.max() >= n:
                raise CloudFormatError("boundary index out of range")
            if np.unique(bidx).size != bidx.size:
                raise CloudFormatError("boundary indices must be distinct")
            if np.any(aw <= 0.0) or not np.all(np.isfinite(aw)):
                raise CloudFormatError("area weights must be positive and finite")
        for arr in (pts, bidx, vw, aw):
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def ambient_dim(self) -> int:
        return self.points.shape[1]

    @property
    def boundary_points(self) -> np.ndarray:
        return self.points[self.boundary_indices]


def fill_distance(cloud: PointCloud) -> float:
    """Max over points of the distance to the nearest other point.

    Computable surrogate for the sampling density parameter of the
    integration-accuracy assumption, which has no direct geometric
    definition.
    """
    if cloud.n < 2:
        raise ValueError("fill_distance requires at least 2 points")
    tree = cKDTree(cloud.points)
    dists, _ = tree.query(cloud.points, k=2)
    return float(dists[:, 1].max())


def generate(spec: ManifoldSpec, seed: int = 0, jitter: float = 0.0) -> PointCloud:
    """Sample a built-in manifold with exact-cell quadrature weights.

    ``jitter`` displaces interior points by a uniform perturbation of up to
    ``jitter`` times the grid spacing (seeded, for robustness studies);
    boundary points never move.  Deterministic for fixed (spec, seed).
    """
    if spec.shape == "interval":
        cloud = _generate_interval(spec)
    elif spec.shape == "rectangle":
        cloud = _generate_rectangle(spec)
    elif spec.shape == "disk":
        cloud = _generate_disk(spec)
    else:
        cloud = _generate_cap(spec)

    if jitter > 0.0:
        cloud = _apply_jitter(cloud, spec, seed, jitter)

    h = fill_distance(cloud)
    cloud.metadata["h"] = h
    return cloud


def _too_coarse(msg: str):
    raise ValueError(f"resolution too small: {msg}")


def _generate_interval(spec: ManifoldSpec) -> PointCloud:
    n = spec.resolution
    if n < 3:
        _too_coarse("interval needs at least 3 points (one interior)")
    pts = np.linspace(spec.a, spec.b, n)
    step = (spec.b - spec.a) / (n - 1)
    vw = np.full(n, step)
    vw[0] = vw[-1] = 0.5 * step
    return PointCloud(
        points=pts[:, None],
        intrinsic_dim=1,
        boundary_indices=np.array([0, n - 1]),
        volume_weights=vw,
        area_weights=np.array([1.0, 1.0]),  # counting measure for k = 1
        metadata={"shape": "interval", "spec": spec},
    )


def _trapezoid_weights(width: float, n: int) -> np.ndarray:
    step = width / (n - 1)
    w = np.full(n, step)
    w[0] = w[-1] = 0.5 * step
    return w


def _generate_rectangle(spec: ManifoldSpec) -> PointCloud:
    wx, wy = spec.widths
    n_target = spec.resolution
    nx = max(3, int(round(math.sqrt(n_target * wx / wy))))
    ny = max(3, int(round(math.sqrt(n_target * wy / wx))))
    xs = np.linspace(0.0, wx, nx)
    ys = np.linspace(0.0, wy, ny)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    vw = np.outer(_trapezoid_weights(wx, nx), _trapezoid_weights(wy, ny)).ravel()

    dx = wx / (nx - 1)
    dy = wy / (ny - 1)
    bidx = []
    aw = []
    for i in range(nx):
        for j in range(ny):
            on_x = i == 0 or i == nx - 1
            on_y = j == 0 or j == ny - 1
            if not (on_x or on_y):
                continue
            bidx.append(i * ny + j)
            if on_x and on_y:
                a = 0.5 * (dx + dy)  # corner: half cell from each edge
            elif on_x:
                a = dy
            else:
                a = dx
            aw.append(a)
    return PointCloud(
        points=pts,
        intrinsic_dim=2,
        boundary_indices=np.array(bidx),
        volume_weights=vw,
        area_weights=np.array(aw),
        metadata={"shape": "rectangle", "spec": spec},
    )


def _generate_disk(spec: ManifoldSpec) -> PointCloud:
    # Node-centered rings: ring j sits at radius j*dr and owns the annulus
    # [(j-1/2) dr, (j+1/2) dr] (clamped), so ring areas partition the disk
    # exactly.  The outermost ring sits exactly on the unit circle.
    n_rho = max(2, int(round(math.sqrt(spec.resolution / math.pi))))
    dr = 1.0 / n_rho
    pts = [(0.0, 0.0)]
    vw = [math.pi * (0.5 * dr) ** 2]
    for j in range(1, n_rho):
        rho = j * dr
        m = max(6, int(round(2.0 * math.pi * j)))
        area = math.pi * ((rho + 0.5 * dr) ** 2 - (rho - 0.5 * dr) ** 2)
        offset = (j % 2) * math.pi / m  # stagger alternate rings
        ang = offset + 2.0 * math.pi * np.arange(m) / m
        for th in ang:
            pts.append((rho * math.cos(th), rho * math.sin(th)))
            vw.append(area / m)
    m_b = max(6, int(round(2.0 * math.pi * n_rho)))
    rim_area = math.pi * (1.0 - (1.0 - 0.5 * dr) ** 2)
    ang = (n_rho % 2) * math.pi / m_b + 2.0 * math.pi * np.arange(m_b) / m_b
    first_b = len(pts)
    for th in ang:
        pts.append((math.cos(th), math.sin(th)))
        vw.append(rim_area / m_b)
    bidx = np.arange(first_b, len(pts))
    aw = np.full(m_b, 2.0 * math.pi / m_b)
    return PointCloud(
        points=np.array(pts),
        intrinsic_dim=2,
        boundary_indices=bidx,
        volume_weights=np.array(vw),
        area_weights=aw,
        metadata={"shape": "disk", "spec": spec},
    )


def _generate_cap(spec: ManifoldSpec) -> PointCloud:
    # Latitude rings uniform in polar angle phi in [0, phi_max], one point at
    # the pole.  Band areas are exact: a band [z_lo, z_hi] of the unit sphere
    # has area 2 pi (z_hi - z_lo).
    z0 = spec.z0
    phi_max = math.acos(z0)
    area = 2.0 * math.pi * (1.0 - z0)
    dphi_target = math.sqrt(area / spec.resolution)
    n_phi = max(2, int(round(phi_max / dphi_target)))
    dphi = phi_max / n_phi

    pts = [(0.0, 0.0, 1.0)]
    vw = [2.0 * math.pi * (1.0 - math.cos(0.5 * dphi))]
    for j in range(1, n_phi):
        phi = j * dphi
        m = max(6, int(round(2.0 * math.pi * math.sin(phi) / dphi)))
        band = 2.0 * math.pi * (math.cos(phi - 0.5 * dphi) - math.cos(phi + 0.5 * dphi))
        r, z = math.sin(phi), math.cos(phi)
        ang = (j % 2) * math.pi / m + 2.0 * math.pi * np.arange(m) / m
        for th in ang:
            pts.append((r * math.cos(th), r * math.sin(th), z))
            vw.append(band / m)
    r_b = math.sin(phi_max)
    m_b = max(6, int(round(2.0 * math.pi * r_b / dphi)))
    band = 2.0 * math.pi * (math.cos(phi_max - 0.5 * dphi) - z0)
    ang = (n_phi % 2) * math.pi / m_b + 2.0 * math.pi * np.arange(m_b) / m_b
    first_b = len(pts)
    for th in ang:
        pts.append((r_b * math.cos(th), r_b * math.sin(th), z0))
        vw.append(band / m_b)
    bidx = np.arange(first_b, len(pts))
    aw = np.full(m_b, 2.0 * math.pi * r_b / m_b)
    return PointCloud(
        points=np.array(pts),
        intrinsic_dim=2,
        boundary_indices=bidx,
        volume_weights=np.array(vw),
        area_weights=aw,
        metadata={"shape": "spherical_cap", "spec": spec},
    )


def _apply_jitter(cloud: PointCloud, spec: ManifoldSpec, seed: int, jitter: float) -> PointCloud:
    rng = np.random.default_rng(seed)
    pts = cloud.points.copy()
    interior = np.ones(cloud.n, dtype=bool)
    interior[cloud.boundary_indices] = False
    # spacing estimate from the unjittered cloud
    h = fill_distance(cloud)
    disp = rng.uniform(-jitter * h, jitter * h, size=pts.shape)
    if spec.shape == "spherical_cap":
        # displace in the tangent plane, then renormalize onto the sphere
        nrm = pts / np.linalg.norm(pts, axis=1, keepdims=True)
        disp -= (disp * nrm).sum(axis=1, keepdims=True) * nrm
        pts[interior] += disp[interior]
        pts[interior] /= np.linalg.norm(pts[interior], axis=1, keepdims=True)
    else:
        pts[interior] += disp[interior]
    meta = dict(cloud.metadata)
    meta["jitter"] = jitter
    return PointCloud(
        points=pts,
        intrinsic_dim=cloud.intrinsic_dim,
        boundary_indices=cloud.boundary_indices,
        volume_weights=cloud.volume_weights,
        area_weights=cloud.area_weights,
        metadata=meta,
    )


# ---------------------------------------------------------------------------
# CSV schema: one comment line "# intrinsic_dim=k", then a header
# "x1,...,xd,volume_weight,boundary_flag,area_weight".  area_weight may be
# empty when boundary_flag is 0.  Reals carry 17 significant digits so a
# save/load round trip is bit exact.
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def save(cloud: PointCloud, path) -> None:
    d = cloud.ambient_dim
    pos_in_S = {int(i): l for l, i in enumerate(cloud.boundary_indices)}
    buf = io.StringIO()
    buf.write(f"# intrinsic_dim={cloud.intrinsic_dim}\n")
    cols = [f"x{i + 1}" for i in range(d)]
    buf.write(",".join(cols + ["volume_weight", "boundary_flag", "area_weight"]) + "\n")
    for i in range(cloud.n):
        row = [_fmt(c) for c in cloud.points[i]]
        row.append(_fmt(cloud.volume_weights[i]))
        l = pos_in_S.get(i)
        if l is None:
            row.extend(["0", ""])
        else:
            row.extend(["1", _fmt(cloud.area_weights[l])])
        buf.write(",".join(row) + "\n")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


def load(path) -> PointCloud:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    k = None
    header_at = None
    for idx, ln in enumerate(lines):
        stripped = ln.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            body = stripped[1:].strip()
            if body.startswith("intrinsic_dim"):
                try:
                    k = int(body.split("=", 1)[1])
                except (IndexError, ValueError):
                    raise CloudFormatError(f"bad intrinsic_dim comment: {ln!r}")
            continue
        header_at = idx
        break
    if k is None:
        raise CloudFormatError("missing '# intrinsic_dim=k' comment line")
    if header_at is None:
        raise CloudFormatError("missing header row")
    header = [c.strip() for c in lines[header_at].split(",")]
    expected_tail = ["volume_weight", "boundary_flag", "area_weight"]
    if len(header) < 4 or header[-3:] != expected_tail:
        raise CloudFormatError(f"bad header {header!r}")
    d = len(header) - 3
    if any(header[i] != f"x{i + 1}" for i in range(d)):
        raise CloudFormatError(f"bad coordinate columns in header {header!r}")
    if k > d:
        raise CloudFormatError(f"intrinsic_dim {k} exceeds ambient dimension {d}")

    points, vw, bidx, aw = [], [], [], []
    for lineno, ln in enumerate(lines[header_at + 1:], start=header_at + 2):
        if not ln.strip() or ln.strip().startswith("#"):
            continue
        parts = [c.strip() for c in ln.split(",")]
        if len(parts) != d + 3:
            raise CloudFormatError(f"line {lineno}: expected {d + 3} fields, got {len(parts)}")
        try:
            coords = [float(c) for c in parts[:d]]
            v = float(parts[d])
            flag = int(parts[d + 1])
        except ValueError as exc:
            raise CloudFormatError(f"line {lineno}: {exc}") from None
        if not all(math.isfinite(c) for c in coords) or not math.isfinite(v):
            raise CloudFormatError(f"line {lineno}: non-finite value")
        if v <= 0.0:
            raise CloudFormatError(f"line {lineno}: non-positive volume weight {v}")
        if flag not in (0, 1):
            raise CloudFormatError(f"line {lineno}: boundary_flag must be 0 or 1")
        if flag:
            if parts[d + 2] == "":
                raise CloudFormatError(f"line {lineno}: boundary point lacks area weight")
            try:
                a = float(parts[d + 2])
            except ValueError as exc:
                raise CloudFormatError(f"line {lineno}: {exc}") from None
            if not math.isfinite(a) or a <= 0.0:
                raise CloudFormatError(f"line {lineno}: non-positive area weight {a}")
            bidx.append(len(points))
            aw.append(a)
        points.append(coords)
        vw.append(v)
    if not points:
        raise CloudFormatError("no data rows")
    return PointCloud(
        points=np.array(points),
        intrinsic_dim=k,
        boundary_indices=np.array(bidx, dtype=np.intp),
        volume_weights=np.array(vw),
        area_weights=np.array(aw),
        metadata={"shape": None, "source": str(path)},
    )
