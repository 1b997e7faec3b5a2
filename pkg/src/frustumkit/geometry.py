"""Camera, point-cloud, frustum, and convex-clipping primitives.

Conventions used throughout the package:

* The world frame is gravity aligned with +z up; units are meters.
* The camera frame is +x right, +y down, +z forward, so depth is camera z.
* Pixel coordinates (u, v) are continuous, u along columns and v along rows.
* Point clouds are float64 numpy arrays of shape (N, 3) in the world frame.

Boundary handling is deterministic: frustum membership uses half-open tests
widened by ``BOUNDARY_TOL`` so points constructed exactly on a frustum face
(e.g. on an edge ray) classify as inside on every platform.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Iterable, Literal, Sequence

import numpy as np

from .errors import EmptyFrustumError, GeometryError

#: Absolute tolerance applied to frustum boundary planes.
BOUNDARY_TOL = 1e-9

#: Default near / far clipping depths in meters for indoor sensors.
NEAR_DEFAULT = 0.1
FAR_DEFAULT = 10.0

CenterMode = Literal["average", "median"]


# ---------------------------------------------------------------------------
# basic containers


def as_point_cloud(points: object) -> np.ndarray:
    """Coerce input to a float64 (N, 3) array, validating shape and finiteness."""
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim == 1 and arr.size == 3:
        arr = arr.reshape(1, 3)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise GeometryError(f"point cloud must have shape (N, 3), got {arr.shape}")
    if arr.size and not np.all(np.isfinite(arr)):
        raise GeometryError("point cloud contains non-finite coordinates")
    return arr


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics: focal lengths, principal point, image size in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self) -> None:
        if self.fx <= 0 or self.fy <= 0:
            raise GeometryError("focal lengths must be positive")
        if self.width <= 0 or self.height <= 0:
            raise GeometryError("image dimensions must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise GeometryError("principal point must lie inside the image")


@dataclass(frozen=True)
class Rect2:
    """Axis-aligned pixel-space rectangle with strictly positive area."""

    u_min: float
    v_min: float
    u_max: float
    v_max: float

    def __post_init__(self) -> None:
        if not (self.u_min < self.u_max and self.v_min < self.v_max):
            raise GeometryError(
                f"degenerate rect: ({self.u_min}, {self.v_min}, {self.u_max}, {self.v_max})"
            )

    @property
    def width(self) -> float:
        return self.u_max - self.u_min

    @property
    def height(self) -> float:
        return self.v_max - self.v_min

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.u_min + self.u_max), 0.5 * (self.v_min + self.v_max))

    def scaled_about_center(self, factor_u: float, factor_v: float) -> "Rect2":
        """Return a copy scaled about its own center by per-axis factors."""
        if factor_u <= 0 or factor_v <= 0:
            raise GeometryError("scale factors must be positive")
        cu, cv = self.center
        hw = 0.5 * self.width * factor_u
        hh = 0.5 * self.height * factor_v
        return Rect2(cu - hw, cv - hh, cu + hw, cv + hh)


@dataclass
class RigidTransform:
    """Rigid camera-to-world transform: p_world = rotation @ p_camera + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self) -> None:
        self.rotation = np.asarray(self.rotation, dtype=np.float64)
        self.translation = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if self.rotation.shape != (3, 3):
            raise GeometryError("rotation must be a 3x3 matrix")
        if not np.allclose(self.rotation @ self.rotation.T, np.eye(3), atol=1e-6):
            raise GeometryError("rotation must be orthonormal")
        if np.linalg.det(self.rotation) < 0:
            raise GeometryError("rotation must be proper (det +1)")

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim == 1:
            return self.rotation @ pts + self.translation
        return pts @ self.rotation.T + self.translation

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)


def normalize_yaw(yaw: float) -> float:
    """Wrap an angle to the canonical [-pi, pi) interval."""
    wrapped = (yaw + np.pi) % (2.0 * np.pi) - np.pi
    # The modulo can land exactly on +pi for inputs like -pi - eps.
    if wrapped >= np.pi:
        wrapped -= 2.0 * np.pi
    return float(wrapped)


@dataclass
class OrientedBox3:
    """Gravity-aligned 3D box: center, width/depth/height, yaw about world +z.

    Width spans the box's local x axis, depth its local y axis; yaw rotates
    local axes into the world. Dimensions must be strictly positive and yaw is
    normalized to [-pi, pi) at construction.
    """

    center: np.ndarray
    width: float
    depth: float
    height: float
    yaw: float

    def __post_init__(self) -> None:
        self.center = np.asarray(self.center, dtype=np.float64).reshape(3)
        if not np.all(np.isfinite(self.center)):
            raise GeometryError("box center must be finite")
        if min(self.width, self.depth, self.height) <= 0:
            raise GeometryError("box dimensions must be strictly positive")
        self.yaw = normalize_yaw(float(self.yaw))

    @property
    def volume(self) -> float:
        return self.width * self.depth * self.height

    @property
    def z_interval(self) -> tuple[float, float]:
        hz = 0.5 * self.height
        return (float(self.center[2]) - hz, float(self.center[2]) + hz)


@dataclass
class Aabb3:
    """Axis-aligned crop box with a square footprint: center, side, height."""

    center: np.ndarray
    side: float
    height: float

    def __post_init__(self) -> None:
        self.center = np.asarray(self.center, dtype=np.float64).reshape(3)
        if not np.all(np.isfinite(self.center)):
            raise GeometryError("crop center must be finite")
        if self.side <= 0 or self.height <= 0:
            raise GeometryError("crop dimensions must be strictly positive")

    @property
    def min_corner(self) -> np.ndarray:
        return self.center - np.array([0.5 * self.side, 0.5 * self.side, 0.5 * self.height])

    @property
    def max_corner(self) -> np.ndarray:
        return self.center + np.array([0.5 * self.side, 0.5 * self.side, 0.5 * self.height])

    @property
    def volume(self) -> float:
        return self.side * self.side * self.height

    @property
    def z_interval(self) -> tuple[float, float]:
        hz = 0.5 * self.height
        return (float(self.center[2]) - hz, float(self.center[2]) + hz)

    @property
    def footprint_bounds(self) -> tuple[float, float, float, float]:
        """(x_min, y_min, x_max, y_max) of the square footprint."""
        hs = 0.5 * self.side
        return (
            float(self.center[0]) - hs,
            float(self.center[1]) - hs,
            float(self.center[0]) + hs,
            float(self.center[1]) + hs,
        )


@dataclass
class Frustum:
    """Camera-space viewing volume behind a 2D rect, expressed in world frame."""

    apex: np.ndarray
    rect: Rect2
    intrinsics: CameraIntrinsics
    near: float
    far: float
    pose: RigidTransform = field(default_factory=RigidTransform.identity)

    def __post_init__(self) -> None:
        self.apex = np.asarray(self.apex, dtype=np.float64).reshape(3)
        if not (0 < self.near < self.far):
            raise GeometryError("need 0 < near < far")


# ---------------------------------------------------------------------------
# projection


def unproject(pixel: tuple[float, float], depth: float, k: CameraIntrinsics) -> np.ndarray:
    """Lift one pixel plus metric depth to a camera-frame 3D point.

    Raises GeometryError for non-positive depth or a pixel outside the image.
    """
    u, v = float(pixel[0]), float(pixel[1])
    if depth <= 0:
        raise GeometryError(f"depth must be positive, got {depth}")
    if not (0.0 <= u <= k.width and 0.0 <= v <= k.height):
        raise GeometryError(f"pixel ({u}, {v}) outside image {k.width}x{k.height}")
    x = (u - k.cx) * depth / k.fx
    y = (v - k.cy) * depth / k.fy
    return np.array([x, y, depth], dtype=np.float64)


def unproject_grid(us: np.ndarray, vs: np.ndarray, depth: np.ndarray, k: CameraIntrinsics) -> np.ndarray:
    """Vectorized unprojection; no bounds checks (callers own pixel validity)."""
    x = (us - k.cx) * depth / k.fx
    y = (vs - k.cy) * depth / k.fy
    return np.stack([x, y, depth], axis=-1)


def project_points(points_cam: np.ndarray, k: CameraIntrinsics) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Project camera-frame points; returns (u, v, depth) arrays.

    Points at or behind the camera plane yield non-finite pixel coordinates,
    which downstream containment tests treat as outside.
    """
    pts = as_point_cloud(points_cam)
    z = pts[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = k.fx * pts[:, 0] / z + k.cx
        v = k.fy * pts[:, 1] / z + k.cy
    return u, v, z


# ---------------------------------------------------------------------------
# frustums


def frustum_from_rect(
    rect: Rect2,
    k: CameraIntrinsics,
    pose: RigidTransform | None = None,
    near: float = NEAR_DEFAULT,
    far: float = FAR_DEFAULT,
) -> Frustum:
    """Build the world-frame frustum behind a pixel rect.

    The apex is the sensor origin (the pose translation); the four edge rays
    pass through the rect corners by construction of the containment test.
    """
    pose = pose if pose is not None else RigidTransform.identity()
    return Frustum(apex=pose.translation.copy(), rect=rect, intrinsics=k, near=near, far=far, pose=pose)


def frustum_contains_mask(cloud: np.ndarray, f: Frustum) -> np.ndarray:
    """Boolean mask of world-frame points inside the frustum.

    Membership: depth within (near, far) and projection within the rect, all
    four boundaries widened by BOUNDARY_TOL so exact boundary points land
    inside deterministically.
    """
    pts = as_point_cloud(cloud)
    cam = f.pose.inverse().apply(pts)
    u, v, z = project_points(cam, f.intrinsics)
    tol = BOUNDARY_TOL
    r = f.rect
    with np.errstate(invalid="ignore"):
        ok = (
            (z > f.near - tol)
            & (z < f.far + tol)
            & (u >= r.u_min - tol)
            & (u < r.u_max + tol)
            & (v >= r.v_min - tol)
            & (v < r.v_max + tol)
        )
    return np.asarray(ok, dtype=bool)


def points_in_frustum(cloud: np.ndarray, f: Frustum) -> np.ndarray:
    """Indices of cloud points inside the frustum, in input order."""
    return np.nonzero(frustum_contains_mask(cloud, f))[0]


def subdivide_rect(rect: Rect2, fr: int, fc: int) -> list[Rect2]:
    """Tile a rect into fr rows x fc columns, returned in row-major order.

    Edges are computed with an endpoint-exact interpolation so the union of
    tiles reproduces the input rect boundary bit-for-bit and adjacent tiles
    share identical edge coordinates.
    """
    if fr < 1 or fc < 1:
        raise GeometryError("subdivision counts must be >= 1")
    u_edges = [rect.u_min * (1.0 - j / fc) + rect.u_max * (j / fc) for j in range(fc + 1)]
    v_edges = [rect.v_min * (1.0 - i / fr) + rect.v_max * (i / fr) for i in range(fr + 1)]
    tiles = []
    for i in range(fr):
        for j in range(fc):
            tiles.append(Rect2(u_edges[j], v_edges[i], u_edges[j + 1], v_edges[i + 1]))
    return tiles


def frustum_center(cloud: np.ndarray, f: Frustum, mode: CenterMode) -> np.ndarray:
    """Average or median world-frame center of the points inside a frustum.

    The median is taken per coordinate and, for even counts, is the lower of
    the two middle values. Raises EmptyFrustumError when nothing is inside.
    """
    if mode not in ("average", "median"):
        raise GeometryError(f"unknown center mode: {mode!r}")
    pts = as_point_cloud(cloud)
    mask = frustum_contains_mask(pts, f)
    inside = pts[mask]
    if inside.shape[0] == 0:
        raise EmptyFrustumError("frustum contains no points")
    if mode == "average":
        return inside.mean(axis=0)
    lower_mid = (inside.shape[0] - 1) // 2
    return np.sort(inside, axis=0)[lower_mid]


# ---------------------------------------------------------------------------
# convex clipping


def oriented_box_footprint(box: OrientedBox3) -> list[tuple[float, float]]:
    """Counter-clockwise corners of the box footprint in the world xy plane."""
    c, s = np.cos(box.yaw), np.sin(box.yaw)
    hw, hd = 0.5 * box.width, 0.5 * box.depth
    cx, cy = float(box.center[0]), float(box.center[1])
    corners = []
    for lx, ly in ((hw, hd), (-hw, hd), (-hw, -hd), (hw, -hd)):
        corners.append((cx + c * lx - s * ly, cy + s * lx + c * ly))
    return corners


def polygon_area(polygon: Sequence[tuple[float, float]]) -> float:
    """Absolute shoelace area of a simple polygon (0.0 below 3 vertices)."""
    n = len(polygon)
    if n < 3:
        return 0.0
    acc = 0.0
    for i in range(n):
        x1, y1 = polygon[i]
        x2, y2 = polygon[(i + 1) % n]
        acc += x1 * y2 - x2 * y1
    return abs(acc) * 0.5


def _clip_halfplane_axis(
    poly: list[tuple[float, float]], axis: int, bound: float, keep_le: bool
) -> list[tuple[float, float]]:
    # One Sutherland-Hodgman pass against an axis-aligned half plane.
    out: list[tuple[float, float]] = []
    n = len(poly)
    for i in range(n):
        cur = poly[i]
        nxt = poly[(i + 1) % n]
        if keep_le:
            cur_in = cur[axis] <= bound
            nxt_in = nxt[axis] <= bound
        else:
            cur_in = cur[axis] >= bound
            nxt_in = nxt[axis] >= bound
        if cur_in:
            out.append(cur)
        if cur_in != nxt_in:
            t = (bound - cur[axis]) / (nxt[axis] - cur[axis])
            if axis == 0:
                out.append((bound, cur[1] + t * (nxt[1] - cur[1])))
            else:
                out.append((cur[0] + t * (nxt[0] - cur[0]), bound))
    return out


def clip_polygon_to_aabb(
    polygon: Sequence[tuple[float, float]],
    x_min: float,
    y_min: float,
    x_max: float,
    y_max: float,
) -> list[tuple[float, float]]:
    """Clip a convex polygon to an axis-aligned rectangle (may return [])."""
    poly = list(polygon)
    for axis, bound, keep_le in ((0, x_min, False), (0, x_max, True), (1, y_min, False), (1, y_max, True)):
        poly = _clip_halfplane_axis(poly, axis, bound, keep_le)
        if not poly:
            return []
    return poly


def clip_convex_polygons(
    subject: Sequence[tuple[float, float]], clip: Sequence[tuple[float, float]]
) -> list[tuple[float, float]]:
    """Sutherland-Hodgman clip of a convex subject by a CCW convex clip polygon."""
    poly = list(subject)
    m = len(clip)
    for i in range(m):
        ax, ay = clip[i]
        bx, by = clip[(i + 1) % m]
        ex, ey = bx - ax, by - ay
        out: list[tuple[float, float]] = []
        n = len(poly)
        for j in range(n):
            cur = poly[j]
            nxt = poly[(j + 1) % n]
            cur_side = ex * (cur[1] - ay) - ey * (cur[0] - ax)
            nxt_side = ex * (nxt[1] - ay) - ey * (nxt[0] - ax)
            if cur_side >= 0:
                out.append(cur)
            if (cur_side >= 0) != (nxt_side >= 0):
                t = cur_side / (cur_side - nxt_side)
                out.append((cur[0] + t * (nxt[0] - cur[0]), cur[1] + t * (nxt[1] - cur[1])))
        poly = out
        if not poly:
            return []
    return poly


def clip_footprint(box: OrientedBox3, crop: Aabb3) -> tuple[np.ndarray, float]:
    """Clip a box footprint to a crop footprint; returns (polygon, area).

    The polygon is an (n, 2) array (possibly empty) and the area is exact for
    inputs representable in binary floating point.
    """
    quad = oriented_box_footprint(box)
    x_min, y_min, x_max, y_max = crop.footprint_bounds
    clipped = clip_polygon_to_aabb(quad, x_min, y_min, x_max, y_max)
    if not clipped:
        return np.zeros((0, 2), dtype=np.float64), 0.0
    return np.asarray(clipped, dtype=np.float64), polygon_area(clipped)


# ---------------------------------------------------------------------------
# point-cloud file formats

_CLOUD_COUNT = struct.Struct("<Q")


def write_cloud_binary(cloud: np.ndarray, path: str) -> None:
    """Write a cloud as a 64-bit LE count followed by float32 LE xyz triples."""
    pts = as_point_cloud(cloud)
    with open(path, "wb") as fh:
        fh.write(_CLOUD_COUNT.pack(pts.shape[0]))
        fh.write(pts.astype("<f4").tobytes())


def read_cloud_binary(path: str) -> np.ndarray:
    """Read the binary cloud format written by :func:`write_cloud_binary`."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _CLOUD_COUNT.size:
        raise GeometryError(f"{path}: truncated cloud file")
    (count,) = _CLOUD_COUNT.unpack_from(raw, 0)
    body = raw[_CLOUD_COUNT.size :]
    expected = count * 3 * 4
    if len(body) != expected:
        raise GeometryError(f"{path}: expected {expected} payload bytes, found {len(body)}")
    pts = np.frombuffer(body, dtype="<f4").reshape(count, 3).astype(np.float64)
    return pts


def write_cloud_text(cloud: np.ndarray, path: str) -> None:
    """Write one 'x y z' line per point."""
    pts = as_point_cloud(cloud)
    with open(path, "w", encoding="ascii") as fh:
        for x, y, z in pts:
            fh.write(f"{x:.9g} {y:.9g} {z:.9g}\n")


def read_cloud_text(path: str) -> np.ndarray:
    """Read a whitespace-separated 'x y z' per-line cloud file."""
    rows: list[list[float]] = []
    with open(path, "r", encoding="ascii") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            parts = stripped.split()
            if len(parts) != 3:
                raise GeometryError(f"{path}:{line_no}: expected 3 values, got {len(parts)}")
            try:
                rows.append([float(p) for p in parts])
            except ValueError as exc:
                raise GeometryError(f"{path}:{line_no}: {exc}") from exc
    if not rows:
        return np.zeros((0, 3), dtype=np.float64)
    return np.asarray(rows, dtype=np.float64)
