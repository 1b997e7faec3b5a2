"""Crop-box sizing: scale classes, candidate centers, recall curves, size search.

Objects are binned by average physical size into four scale classes, each with
a fixed crop extent and voxel grid. Candidate crop centers come from point
statistics of subdivided frustums; recall curves sweep crop side and height
against per-axis intersection-over-itself thresholds to pick minimal sizes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .errors import (
    EmptyFrustumError,
    GeometryError,
    InfeasibleSizeError,
    NoCandidatesError,
    UnsupportedScaleError,
)
from .geometry import (
    Aabb3,
    CameraIntrinsics,
    CenterMode,
    FAR_DEFAULT,
    NEAR_DEFAULT,
    OrientedBox3,
    Rect2,
    RigidTransform,
    frustum_center,
    frustum_from_rect,
    oriented_box_footprint,
    subdivide_rect,
)
from .ioi import IoiBreakdown, ioi, ioi_z_for_crop, _footprint_ioi


@dataclass(frozen=True)
class ScaleSpec:
    """One scale class: crop extent in meters and its voxel grid dimensions."""

    name: str
    crop_side: float
    crop_height: float
    grid: tuple[int, int, int]

    @property
    def cell_size(self) -> tuple[float, float, float]:
        """Cell edge lengths in meters (x, y, z)."""
        return (
            self.crop_side / self.grid[0],
            self.crop_side / self.grid[1],
            self.crop_height / self.grid[2],
        )


#: The four supported scale classes. Grid dims keep cells near isotropic and
#: even-sized for strided convolutions; tall objects trade footprint for height.
SCALE_SPECS: dict[str, ScaleSpec] = {
    "small_short": ScaleSpec("small_short", crop_side=1.6, crop_height=1.5, grid=(198, 198, 102)),
    "medium_short": ScaleSpec("medium_short", crop_side=3.2, crop_height=1.7, grid=(198, 198, 102)),
    "large_short": ScaleSpec("large_short", crop_side=4.8, crop_height=2.2, grid=(198, 198, 102)),
    "medium_tall": ScaleSpec("medium_tall", crop_side=2.8, crop_height=3.0, grid=(134, 134, 134)),
}

#: Class boundaries in meters on (max of average width/depth, average height).
FOOTPRINT_SMALL_MAX = 0.3
FOOTPRINT_MEDIUM_MAX = 0.55
HEIGHT_SHORT_MAX = 0.55


def get_scale_spec(name: str) -> ScaleSpec:
    try:
        return SCALE_SPECS[name]
    except KeyError:
        raise UnsupportedScaleError(f"unknown scale class: {name!r}") from None


def assign_scale(avg_width: float, avg_depth: float, avg_height: float) -> str:
    """Map average object dimensions to a scale-class name.

    Footprint class comes from max(width, depth): small <= 0.3 m,
    medium <= 0.55 m, large above. Height class: short when height <= 0.55 m,
    tall otherwise. Small-tall and large-tall have no supported scale.
    """
    if min(avg_width, avg_depth, avg_height) <= 0:
        raise GeometryError("average dimensions must be positive")
    footprint = max(avg_width, avg_depth)
    tall = avg_height > HEIGHT_SHORT_MAX
    if footprint <= FOOTPRINT_SMALL_MAX:
        size = "small"
    elif footprint <= FOOTPRINT_MEDIUM_MAX:
        size = "medium"
    else:
        size = "large"
    if not tall:
        return f"{size}_short"
    if size == "medium":
        return "medium_tall"
    raise UnsupportedScaleError(
        f"no scale class for footprint {footprint:.3f} m ({size}) with height {avg_height:.3f} m (tall)"
    )


# ---------------------------------------------------------------------------
# candidate centers


def candidate_centers(
    cloud: np.ndarray,
    rect: Rect2,
    k: CameraIntrinsics,
    pose: RigidTransform | None = None,
    fr: int = 1,
    fc: int = 1,
    mode: CenterMode = "average",
    near: float = NEAR_DEFAULT,
    far: float = FAR_DEFAULT,
) -> list[np.ndarray]:
    """Crop-center candidates from the subfrustums of a 2D proposal.

    The rect is tiled fr x fc (row-major); each non-empty subfrustum
    contributes its point-statistic center. Empty subfrustums are dropped;
    if every one is empty there is nothing to anchor a crop to and
    NoCandidatesError is raised.
    """
    centers: list[np.ndarray] = []
    for tile in subdivide_rect(rect, fr, fc):
        f = frustum_from_rect(tile, k, pose=pose, near=near, far=far)
        try:
            centers.append(frustum_center(cloud, f, mode))
        except EmptyFrustumError:
            continue
    if not centers:
        raise NoCandidatesError(f"all {fr}x{fc} subfrustums of the rect are empty")
    return centers


def best_cropbox(
    gt: OrientedBox3, candidates: Sequence[np.ndarray], spec: ScaleSpec
) -> tuple[Aabb3, IoiBreakdown]:
    """Choose the candidate center whose crop maximizes volume IoI.

    Ties keep the earliest candidate so the choice is deterministic under
    candidate ordering. The crop z-center is the candidate's z (candidates are
    point statistics, already at object height).
    """
    if not candidates:
        raise NoCandidatesError("no candidate centers supplied")
    best: tuple[Aabb3, IoiBreakdown] | None = None
    for center in candidates:
        crop = Aabb3(center=np.asarray(center, dtype=float), side=spec.crop_side, height=spec.crop_height)
        breakdown = ioi(gt, crop)
        if best is None or breakdown.ioi_3d > best[1].ioi_3d:
            best = (crop, breakdown)
    assert best is not None
    return best


# ---------------------------------------------------------------------------
# recall curves


@dataclass
class ObjectSample:
    """One labelled object with the context needed to build its frustum."""

    category: str
    cloud: np.ndarray
    rect: Rect2
    gt_box: OrientedBox3
    intrinsics: CameraIntrinsics
    pose: RigidTransform = field(default_factory=RigidTransform.identity)


@dataclass
class SizeSearchConfig:
    """Sweep configuration for recall curves and minimal-size selection.

    Positivity thresholds (threshold_xy / threshold_z) decide when one crop
    counts as recalling its object; target recalls (target_xy / target_z)
    are the levels the selected sizes must reach. The defaults keep both
    per-axis positivity thresholds at 0.90 and ask the selected sizes to
    reach 0.90 recall in the footprint and 0.95 vertically.
    """

    side_candidates: list[float]
    height_candidates: list[float]
    threshold_xy: float = 0.90
    threshold_z: float = 0.90
    target_xy: float = 0.90
    target_z: float = 0.95
    fr_fc: list[tuple[int, int]] = field(default_factory=lambda: [(1, 1), (3, 3)])

    def __post_init__(self) -> None:
        if not self.side_candidates or not self.height_candidates:
            raise GeometryError("need at least one side and one height candidate")
        if any(s <= 0 for s in self.side_candidates) or any(h <= 0 for h in self.height_candidates):
            raise GeometryError("size candidates must be positive")
        for t in (self.threshold_xy, self.threshold_z, self.target_xy, self.target_z):
            if not (0.0 < t <= 1.0):
                raise GeometryError(f"thresholds and targets must lie in (0, 1], got {t}")
        allowed = {(1, 1), (3, 3), (5, 5)}
        for pair in self.fr_fc:
            if tuple(pair) not in allowed:
                raise GeometryError(f"subdivision {pair} not in {sorted(allowed)}")
        self.side_candidates = sorted(float(s) for s in self.side_candidates)
        self.height_candidates = sorted(float(h) for h in self.height_candidates)


@dataclass(frozen=True)
class CurvePoint:
    """One recall-curve sample at a (subdivision, center mode, crop size) point."""

    fr: int
    fc: int
    mode: str
    side_m: float
    height_m: float
    recall_xy: float
    recall_z: float
    recall_volume: float
    bound: float
    bound_satisfied: bool


CURVE_CSV_HEADER = "fr,fc,mode,side_m,height_m,recall_xy,recall_z,recall_volume,bound,bound_satisfied"


def curve_point_to_csv_row(p: CurvePoint) -> str:
    return ",".join(
        [
            str(p.fr),
            str(p.fc),
            p.mode,
            format(p.side_m, ".12g"),
            format(p.height_m, ".12g"),
            format(p.recall_xy, ".12g"),
            format(p.recall_z, ".12g"),
            format(p.recall_volume, ".12g"),
            format(p.bound, ".12g"),
            "1" if p.bound_satisfied else "0",
        ]
    )


def recall_curves(
    dataset: Sequence[ObjectSample],
    cfg: SizeSearchConfig,
    mode: CenterMode = "average",
) -> list[CurvePoint]:
    """Recall as a function of crop size, per subdivision configuration.

    For every object the candidate centers are fixed by (fr, fc, mode); each
    size point then scores the best candidate. Footprint recall takes the
    best footprint ratio over candidates (independent of height), vertical
    recall the best height ratio (independent of side), and volume recall the
    best product - the same candidate best_cropbox would pick. Curves are
    therefore non-decreasing in side at fixed height and vice versa.

    Objects whose subfrustums are all empty count as permanent misses.
    """
    if not dataset:
        raise GeometryError("dataset is empty")
    sides = cfg.side_candidates
    heights = cfg.height_candidates
    t3 = cfg.threshold_xy * cfg.threshold_z
    points: list[CurvePoint] = []
    for fr, fc in cfg.fr_fc:
        # xy_best[i, si], z_best[i, hi], vol_best[i, si, hi]
        n = len(dataset)
        xy_best = np.zeros((n, len(sides)))
        z_best = np.zeros((n, len(heights)))
        vol_best = np.zeros((n, len(sides), len(heights)))
        for i, item in enumerate(dataset):
            try:
                cands = candidate_centers(
                    item.cloud, item.rect, item.intrinsics, pose=item.pose, fr=fr, fc=fc, mode=mode
                )
            except NoCandidatesError:
                continue
            quad = oriented_box_footprint(item.gt_box)
            box_area = item.gt_box.width * item.gt_box.depth
            xy = np.zeros((len(cands), len(sides)))
            zz = np.zeros((len(cands), len(heights)))
            for ci, center in enumerate(cands):
                cx, cy, cz = float(center[0]), float(center[1]), float(center[2])
                for si, side in enumerate(sides):
                    xy[ci, si] = _footprint_ioi(quad, box_area, cx, cy, side)
                for hi, height in enumerate(heights):
                    zz[ci, hi] = ioi_z_for_crop(item.gt_box, cz, height)
            xy_best[i] = xy.max(axis=0)
            z_best[i] = zz.max(axis=0)
            vol_best[i] = np.einsum("cs,ch->csh", xy, zz).max(axis=0)
        for si, side in enumerate(sides):
            for hi, height in enumerate(heights):
                r_xy = float((xy_best[:, si] >= cfg.threshold_xy).mean())
                r_z = float((z_best[:, hi] >= cfg.threshold_z).mean())
                r_vol = float((vol_best[:, si, hi] >= t3).mean())
                bound = max(0.0, r_xy + r_z - 1.0)
                points.append(
                    CurvePoint(
                        fr=fr,
                        fc=fc,
                        mode=mode,
                        side_m=side,
                        height_m=height,
                        recall_xy=r_xy,
                        recall_z=r_z,
                        recall_volume=r_vol,
                        bound=bound,
                        bound_satisfied=r_vol >= bound - 1e-12,
                    )
                )
    return points


def select_min_size(
    curves: Sequence[CurvePoint], target_xy: float = 0.90, target_z: float = 0.95
) -> tuple[float, float]:
    """Smallest crop side and height whose recalls meet the targets.

    The two axes are searched independently: the side search looks at
    footprint recall only, the height search at vertical recall only. Raises
    InfeasibleSizeError when no swept size reaches a target.
    """
    if not curves:
        raise GeometryError("no curve points supplied")
    for t in (target_xy, target_z):
        if not (0.0 < t <= 1.0):
            raise GeometryError(f"targets must lie in (0, 1], got {t}")
    best_xy_per_side: dict[float, float] = {}
    best_z_per_height: dict[float, float] = {}
    for p in curves:
        best_xy_per_side[p.side_m] = max(best_xy_per_side.get(p.side_m, 0.0), p.recall_xy)
        best_z_per_height[p.height_m] = max(best_z_per_height.get(p.height_m, 0.0), p.recall_z)
    side = next((s for s in sorted(best_xy_per_side) if best_xy_per_side[s] >= target_xy), None)
    height = next((h for h in sorted(best_z_per_height) if best_z_per_height[h] >= target_z), None)
    if side is None or height is None:
        missing = []
        if side is None:
            missing.append(f"footprint recall never reaches {target_xy}")
        if height is None:
            missing.append(f"vertical recall never reaches {target_z}")
        raise InfeasibleSizeError("; ".join(missing))
    return side, height


# ---------------------------------------------------------------------------
# double frustum


#: Maximum random enlargement of the outer rect during training (per axis).
TRAIN_ENLARGE_MAX = 0.15
#: Maximum random shrink of the center rect during training (per axis).
TRAIN_SHRINK_MAX = 0.10
#: Fixed symmetric enlargement applied at inference time.
INFERENCE_ENLARGE = 0.05

Phase = Literal["train", "inference"]


def double_frustum(rect: Rect2, phase: Phase, rng_seed: int | None = None) -> tuple[Rect2, Rect2]:
    """Derive the (center_rect, large_rect) pair backing a two-frustum crop.

    The large rect widens the 2D proposal so the 3D crop keeps points a
    too-tight detection would lose; the center rect is what the crop center
    statistic is computed from. Training jitters both independently per axis
    (enlarge up to +15%, shrink down to -10%), deterministically per seed;
    inference enlarges by a fixed 5% and keeps the center rect as given.

    The nesting center_rect <= rect <= large_rect holds by construction.
    """
    if phase == "inference":
        large = rect.scaled_about_center(1.0 + INFERENCE_ENLARGE, 1.0 + INFERENCE_ENLARGE)
        return rect, large
    if phase != "train":
        raise GeometryError(f"unknown phase: {phase!r}")
    if rng_seed is None:
        raise GeometryError("training-phase jitter requires an explicit rng_seed")
    rng = np.random.default_rng(rng_seed)
    # draw order is part of the contract: large u, large v, small u, small v
    draws = rng.random(4)
    large = rect.scaled_about_center(1.0 + TRAIN_ENLARGE_MAX * draws[0], 1.0 + TRAIN_ENLARGE_MAX * draws[1])
    center = rect.scaled_about_center(1.0 - TRAIN_SHRINK_MAX * draws[2], 1.0 - TRAIN_SHRINK_MAX * draws[3])
    return center, large
