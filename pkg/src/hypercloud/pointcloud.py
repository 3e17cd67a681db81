"""Point-cloud data model, file I/O, synthetic shapes, noise, and error metrics."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .rng import make_rng

logger = logging.getLogger(__name__)

# Text emission format: 13 significant digits, enough for 1e-12 relative
# round trips and byte-stable across runs.
_FLOAT_FMT = "{:.12e}"


class PointCloudFormatError(ValueError):
    """Malformed point-cloud file; message carries the offending line number."""


@dataclass(frozen=True)
class PointCloud:
    """N x 3 matrix of point coordinates; rows are points.

    The coordinate array is validated and frozen at construction, so
    instances are safe to share across threads.
    """

    coords: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.coords, dtype=np.float64))
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise ValueError(f"coords must be N x 3, got shape {arr.shape}")
        if arr.shape[0] < 1:
            raise ValueError("point cloud must contain at least one point")
        if not np.all(np.isfinite(arr)):
            raise ValueError("coords contain non-finite values")
        arr.setflags(write=False)
        object.__setattr__(self, "coords", arr)

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    def column(self, i: int) -> np.ndarray:
        """The i-th coordinate column (x=0, y=1, z=2) as a copy."""
        return self.coords[:, i].copy()

    def with_coords(self, coords: np.ndarray) -> "PointCloud":
        return PointCloud(coords)


@dataclass(frozen=True)
class NoiseSpec:
    """Additive perturbation description.

    kind: "uniform" (lo, hi), "gaussian" (mean, variance), or "impulse"
    (probability p, spread).  Impulse picks each point independently with
    probability p and offsets it uniformly in [-spread, spread]^3.
    """

    kind: str
    seed: int
    lo: float = -0.01
    hi: float = 0.01
    mean: float = 0.0
    variance: float = 1e-4
    p: float = 0.05
    spread: float = 0.5

    def __post_init__(self):
        if self.kind not in ("uniform", "gaussian", "impulse"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.kind == "uniform" and not self.lo < self.hi:
            raise ValueError("uniform noise requires lo < hi")
        if self.kind == "gaussian" and self.variance < 0:
            raise ValueError("gaussian noise requires variance >= 0")
        if self.kind == "impulse":
            if not 0.0 <= self.p <= 1.0:
                raise ValueError("impulse probability must be in [0, 1]")
            if self.spread <= 0:
                raise ValueError("impulse spread must be positive")


@dataclass(frozen=True)
class ErrorReport:
    """Coordinate-wise discrepancy between an observed and a reference cloud."""

    l1_error: float
    mse: float
    per_axis: np.ndarray = field(repr=False)


def load(path, fmt: str = "auto") -> PointCloud:
    """Read a point cloud from an XYZ or ascii-PLY file.

    fmt "auto" picks PLY for a ``.ply`` suffix and XYZ otherwise.
    """
    path = str(path)
    if fmt == "auto":
        fmt = "ply-ascii" if path.lower().endswith(".ply") else "xyz"
    if fmt == "xyz":
        return _load_xyz(path)
    if fmt == "ply-ascii":
        return _load_ply(path)
    raise ValueError(f"unknown format {fmt!r}")


def _parse_triplet(fields, lineno, path):
    if len(fields) != 3:
        raise PointCloudFormatError(
            f"{path}:{lineno}: expected 3 coordinates, got {len(fields)}")
    try:
        vals = [float(f) for f in fields]
    except ValueError as exc:
        raise PointCloudFormatError(f"{path}:{lineno}: {exc}") from None
    if not all(math.isfinite(v) for v in vals):
        raise PointCloudFormatError(f"{path}:{lineno}: non-finite coordinate")
    return vals


def _load_xyz(path: str) -> PointCloud:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            rows.append(_parse_triplet(line.split(), lineno, path))
    if not rows:
        raise PointCloudFormatError(f"{path}: no points found")
    return PointCloud(np.array(rows, dtype=np.float64))


def _load_ply(path: str) -> PointCloud:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != "ply":
        raise PointCloudFormatError(f"{path}:1: missing 'ply' magic")
    n_vertex = None
    xyz_idx = {}
    prop_count = 0
    in_vertex_element = False
    body_start = None
    for lineno, raw in enumerate(lines[1:], start=2):
        tok = raw.strip().split()
        if not tok:
            continue
        if tok[0] == "format":
            if len(tok) < 2 or tok[1] != "ascii":
                raise PointCloudFormatError(f"{path}:{lineno}: only ascii PLY supported")
        elif tok[0] == "element":
            in_vertex_element = len(tok) >= 3 and tok[1] == "vertex"
            if in_vertex_element:
                try:
                    n_vertex = int(tok[2])
                except ValueError:
                    raise PointCloudFormatError(
                        f"{path}:{lineno}: bad vertex count {tok[2]!r}") from None
        elif tok[0] == "property" and in_vertex_element:
            if len(tok) >= 3 and tok[2] in ("x", "y", "z"):
                xyz_idx[tok[2]] = prop_count
            elif len(tok) >= 3:
                logger.warning("%s:%d: ignoring vertex property %r", path, lineno, tok[2])
            prop_count += 1
        elif tok[0] == "end_header":
            body_start = lineno  # lines[] is 0-based with offset 1 already consumed
            break
    if body_start is None:
        raise PointCloudFormatError(f"{path}: missing end_header")
    if n_vertex is None or n_vertex < 1:
        raise PointCloudFormatError(f"{path}: missing or empty 'element vertex'")
    if set(xyz_idx) != {"x", "y", "z"}:
        raise PointCloudFormatError(f"{path}: vertex element lacks x/y/z properties")
    body = lines[body_start:]
    if len(body) < n_vertex:
        raise PointCloudFormatError(
            f"{path}: declared {n_vertex} vertices but found {len(body)} data lines")
    rows = np.empty((n_vertex, 3), dtype=np.float64)
    for i in range(n_vertex):
        lineno = body_start + 1 + i
        fields = body[i].split()
        if len(fields) < prop_count:
            raise PointCloudFormatError(
                f"{path}:{lineno}: expected {prop_count} fields, got {len(fields)}")
        picked = [fields[xyz_idx[a]] for a in ("x", "y", "z")]
        rows[i] = _parse_triplet(picked, lineno, path)
    return PointCloud(rows)


def save(cloud: PointCloud, path, fmt: str = "xyz") -> None:
    """Write a point cloud; emits 13 significant digits per coordinate."""
    path = str(path)
    if fmt == "auto":
        fmt = "ply-ascii" if path.lower().endswith(".ply") else "xyz"
    if fmt not in ("xyz", "ply-ascii"):
        raise ValueError(f"unknown format {fmt!r}")
    lines = []
    if fmt == "ply-ascii":
        lines += [
            "ply",
            "format ascii 1.0",
            f"element vertex {cloud.n}",
            "property double x",
            "property double y",
            "property double z",
            "end_header",
        ]
    for row in cloud.coords:
        lines.append(" ".join(_FLOAT_FMT.format(v) for v in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def generate_shape(kind: str, n_points: int, seed: int, **params) -> PointCloud:
    """Sample points uniformly over the surface of a basic shape.

    kind:
      cube      -- axis-aligned, centered at origin; param side (default 2.0)
      cylinder  -- z-axis aligned with caps; params radius (1.0), height (2.0)
      planes    -- two unit squares sharing an edge; params side (1.0),
                   dihedral_deg (90.0)
      sphere    -- centered at origin; param radius (1.0)

    Every emitted point lies exactly on the surface (up to arithmetic
    rounding of the parameterization).
    """
    if n_points < 1:
        raise ValueError("n_points must be >= 1")
    rng = make_rng(seed)
    if kind == "cube":
        side = float(params.pop("side", 2.0))
        _no_extra(params)
        if side <= 0:
            raise ValueError("cube side must be positive")
        h = side / 2.0
        face = rng.integers(0, 6, size=n_points)
        u = rng.uniform(-h, h, size=n_points)
        v = rng.uniform(-h, h, size=n_points)
        pts = np.empty((n_points, 3))
        axis = (face // 2).astype(int)
        sign = np.where(face % 2 == 0, 1.0, -1.0)
        for a in range(3):
            o1, o2 = [j for j in range(3) if j != a]
            m = axis == a
            pts[m, a] = sign[m] * h
            pts[m, o1] = u[m]
            pts[m, o2] = v[m]
        return PointCloud(pts)
    if kind == "cylinder":
        radius = float(params.pop("radius", 1.0))
        height = float(params.pop("height", 2.0))
        _no_extra(params)
        if radius <= 0 or height <= 0:
            raise ValueError("cylinder radius and height must be positive")
        a_side = 2.0 * math.pi * radius * height
        a_cap = math.pi * radius * radius
        total = a_side + 2.0 * a_cap
        region = rng.uniform(0.0, total, size=n_points)
        theta = rng.uniform(0.0, 2.0 * math.pi, size=n_points)
        z_side = rng.uniform(-height / 2.0, height / 2.0, size=n_points)
        r_cap = radius * np.sqrt(rng.uniform(size=n_points))
        pts = np.empty((n_points, 3))
        on_side = region < a_side
        top = ~on_side & (region < a_side + a_cap)
        pts[on_side, 0] = radius * np.cos(theta[on_side])
        pts[on_side, 1] = radius * np.sin(theta[on_side])
        pts[on_side, 2] = z_side[on_side]
        for cap_mask, zval in ((top, height / 2.0), (~on_side & ~top, -height / 2.0)):
            pts[cap_mask, 0] = r_cap[cap_mask] * np.cos(theta[cap_mask])
            pts[cap_mask, 1] = r_cap[cap_mask] * np.sin(theta[cap_mask])
            pts[cap_mask, 2] = zval
        return PointCloud(pts)
    if kind == "planes":
        side = float(params.pop("side", 1.0))
        dihedral_deg = float(params.pop("dihedral_deg", 90.0))
        _no_extra(params)
        if side <= 0:
            raise ValueError("planes side must be positive")
        phi = math.radians(dihedral_deg)
        # square A spans +x and +y from the shared edge (the y-axis);
        # square B spans the rotated direction (cos phi, 0, sin phi) and +y.
        u = rng.uniform(0.0, side, size=n_points)
        v = rng.uniform(0.0, side, size=n_points)
        which = rng.integers(0, 2, size=n_points)
        pts = np.empty((n_points, 3))
        a_mask = which == 0
        pts[a_mask, 0] = u[a_mask]
        pts[a_mask, 1] = v[a_mask]
        pts[a_mask, 2] = 0.0
        b = ~a_mask
        pts[b, 0] = u[b] * math.cos(phi)
        pts[b, 1] = v[b]
        pts[b, 2] = u[b] * math.sin(phi)
        return PointCloud(pts)
    if kind == "sphere":
        radius = float(params.pop("radius", 1.0))
        _no_extra(params)
        if radius <= 0:
            raise ValueError("sphere radius must be positive")
        vecs = rng.normal(size=(n_points, 3))
        norms = np.linalg.norm(vecs, axis=1)
        # resample the (measure-zero) degenerate draws
        while np.any(norms == 0):
            bad = norms == 0
            vecs[bad] = rng.normal(size=(int(bad.sum()), 3))
            norms = np.linalg.norm(vecs, axis=1)
        return PointCloud(radius * vecs / norms[:, None])
    raise ValueError(f"unknown shape kind {kind!r}")


def _no_extra(params):
    if params:
        raise ValueError(f"unexpected shape parameters: {sorted(params)}")


def add_noise(cloud: PointCloud, spec: NoiseSpec) -> PointCloud:
    """Additively perturb a cloud according to spec; deterministic in the seed."""
    rng = make_rng(spec.seed)
    n = cloud.n
    if spec.kind == "uniform":
        delta = rng.uniform(spec.lo, spec.hi, size=(n, 3))
    elif spec.kind == "gaussian":
        delta = rng.normal(spec.mean, math.sqrt(spec.variance), size=(n, 3))
    else:  # impulse
        hit = rng.uniform(size=n) < spec.p
        offsets = rng.uniform(-spec.spread, spec.spread, size=(n, 3))
        delta = np.where(hit[:, None], offsets, 0.0)
    return PointCloud(cloud.coords + delta)


def error_metrics(observed: PointCloud, reference: PointCloud) -> ErrorReport:
    """Total absolute error and mean squared error between two clouds."""
    if observed.n != reference.n:
        raise ValueError(f"size mismatch: {observed.n} vs {reference.n}")
    diff = observed.coords - reference.coords
    per_axis = np.abs(diff).sum(axis=0)
    l1 = float(per_axis.sum())
    mse = float((diff * diff).sum() / (3.0 * observed.n))
    per_axis = per_axis.copy()
    per_axis.setflags(write=False)
    return ErrorReport(l1_error=l1, mse=mse, per_axis=per_axis)
