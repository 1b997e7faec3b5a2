"""Two-stage latency model and a stale-proposal robustness sweep.

The detector has a 2D stage and a 3D stage. Run sequentially, every frame
costs t_2d + t_3d. Run as a two-stage pipeline, the 3D stage of frame n
consumes the 2D output of frame n-1, so in steady state a frame completes
every max(t_2d, t_3d) milliseconds — at the price of the 3D stage seeing
proposals that are one frame old. `stale_frustum_experiment` quantifies
that price: it shifts every 2D rect sideways by a per-frame pixel drift
and measures how crop quality and recall degrade.

All schedule arithmetic is exact (no wall-clock measurement); the measured
stage times are inputs, the schedule is the artifact.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction
from typing import Literal, Sequence

import numpy as np

from .cropbox import ObjectSample, SCALE_SPECS, ScaleSpec, best_cropbox, candidate_centers
from .errors import EmptyFrustumError, GeometryError, NoCandidatesError
from .geometry import Rect2
from .ioi import RecallReport, ioi, recall_from_breakdowns

Mode = Literal["sequential", "pipelined"]


@dataclass(frozen=True)
class StageTiming:
    """Per-frame stage costs in milliseconds."""

    t_2d: float
    t_3d: float

    def __post_init__(self) -> None:
        if self.t_2d < 0 or self.t_3d < 0:
            raise GeometryError("stage times must be >= 0")


@dataclass(frozen=True)
class FrameRecord:
    index: int
    start_2d: float
    done_2d: float
    start_3d: float
    done_3d: float

    @property
    def latency(self) -> float:
        """Time from this frame's capture (2D start) to its 3D result."""
        return self.done_3d - self.start_2d


@dataclass(frozen=True)
class FrameTrace:
    mode: Mode
    timing: StageTiming
    frames: tuple[FrameRecord, ...]
    staleness_frames: int  # how old the 2D proposals feeding the 3D stage are

    @property
    def steady_period(self) -> float:
        """Steady-state time between consecutive 3D completions."""
        if self.mode == "sequential":
            return self.timing.t_2d + self.timing.t_3d
        return max(self.timing.t_2d, self.timing.t_3d)

    @property
    def throughput_fps(self) -> float:
        period = self.steady_period
        if period == 0:
            raise GeometryError("zero-cost stages have unbounded throughput")
        return 1000.0 / period

    @property
    def first_frame_latency(self) -> float:
        return self.frames[0].latency

    def summary(self) -> str:
        return (
            f"mode={self.mode} t2d={self.timing.t_2d:g} t3d={self.timing.t_3d:g} "
            f"period={self.steady_period:g} ms "
            f"throughput={self.throughput_fps:.2f} fps "
            f"first_frame_latency={self.first_frame_latency:g} ms "
            f"staleness={self.staleness_frames} frame(s)"
        )


def simulate(n_frames: int, timing: StageTiming, mode: Mode) -> FrameTrace:
    """Event-driven schedule of n frames through the two stages.

    Sequential: stages of one frame run back to back, frames never overlap.
    Pipelined: the 2D stage starts frame i at i * period; frame i's 3D stage
    consumes frame i-1's 2D output (frame 0 has no predecessor and uses its
    own), starting as soon as that input and the 3D stage are both free.
    """
    if n_frames < 1:
        raise GeometryError("n_frames must be >= 1")
    if mode not in ("sequential", "pipelined"):
        raise GeometryError(f"unknown mode {mode!r}")
    t2, t3 = timing.t_2d, timing.t_3d
    frames: list[FrameRecord] = []
    if mode == "sequential":
        clock = 0.0
        for i in range(n_frames):
            start_2d = clock
            done_2d = start_2d + t2
            done_3d = done_2d + t3
            frames.append(FrameRecord(i, start_2d, done_2d, done_2d, done_3d))
            clock = done_3d
        return FrameTrace("sequential", timing, tuple(frames), staleness_frames=0)

    period = max(t2, t3)
    prev_done_3d = 0.0
    for i in range(n_frames):
        start_2d = i * period
        done_2d = start_2d + t2
        # 3D input: own 2D output for the very first frame, else frame i-1's
        input_ready = done_2d if i == 0 else frames[i - 1].done_2d
        start_3d = max(input_ready, prev_done_3d)
        done_3d = start_3d + t3
        frames.append(FrameRecord(i, start_2d, done_2d, start_3d, done_3d))
        prev_done_3d = done_3d
    return FrameTrace("pipelined", timing, tuple(frames), staleness_frames=1)


TRACE_CSV_HEADER = "frame,start_2d,done_2d,start_3d,done_3d,latency"


def write_trace_csv(trace: FrameTrace, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_CSV_HEADER.split(","))
        for f in trace.frames:
            writer.writerow(
                [f.index]
                + [format(v, ".12g") for v in (f.start_2d, f.done_2d, f.start_3d, f.done_3d, f.latency)]
            )


def exact_throughput_fps(timing: StageTiming) -> Fraction:
    """Pipelined steady-state throughput as an exact rational (frames/s)."""
    period = Fraction(max(timing.t_2d, timing.t_3d)).limit_denominator(10**9)
    if period == 0:
        raise GeometryError("zero-cost stages have unbounded throughput")
    return Fraction(1000) / period


# --- stale-proposal robustness sweep ---------------------------------------


@dataclass(frozen=True)
class DriftRow:
    drift_px: float
    mean_ioi_3d: float
    recall_volume: float
    n_items: int
    n_lost: int  # frustums that no longer contain any points


DRIFT_CSV_HEADER = "drift_px,mean_ioi_3d,recall_volume,n_items,n_lost"


def drift_row_to_csv(row: DriftRow) -> str:
    return ",".join(
        [
            format(row.drift_px, ".12g"),
            format(row.mean_ioi_3d, ".12g"),
            format(row.recall_volume, ".12g"),
            str(row.n_items),
            str(row.n_lost),
        ]
    )


def stale_frustum_experiment(
    samples: Sequence[ObjectSample],
    drifts_px: Sequence[float],
    spec: ScaleSpec | str = "medium_short",
    threshold_xy: float = 0.90,
    threshold_z: float = 0.90,
) -> list[DriftRow]:
    """Recall/IoI degradation when 2D rects lag the scene by one frame.

    Each drift value shifts every rect by that many pixels along +u before
    the frustum, crop center, and crop box are recomputed, simulating
    proposals from a one-frame-old image of a laterally moving scene. A
    shifted frustum that captures no points scores zero IoI and counts as
    a lost item (it can never be recalled).
    """
    if not samples:
        raise GeometryError("stale_frustum_experiment needs at least one sample")
    if any(d < 0 for d in drifts_px):
        raise GeometryError("drift values must be >= 0")
    if isinstance(spec, str):
        spec = SCALE_SPECS[spec]

    rows: list[DriftRow] = []
    for drift in drifts_px:
        iois: list[float] = []
        n_pos = 0
        n_lost = 0
        for sample in samples:
            rect = sample.rect
            shifted = Rect2(rect.u_min + drift, rect.v_min, rect.u_max + drift, rect.v_max)
            try:
                centers = candidate_centers(
                    sample.cloud, shifted, sample.intrinsics, sample.pose, fr=1, fc=1, mode="average"
                )
                _, breakdown = best_cropbox(sample.gt_box, centers, spec)
            except (EmptyFrustumError, NoCandidatesError):
                n_lost += 1
                iois.append(0.0)
                continue
            iois.append(breakdown.ioi_3d)
            if breakdown.ioi_xy >= threshold_xy and breakdown.ioi_z >= threshold_z:
                n_pos += 1
        rows.append(
            DriftRow(
                drift_px=float(drift),
                mean_ioi_3d=float(np.mean(iois)),
                recall_volume=n_pos / len(samples),
                n_items=len(samples),
                n_lost=n_lost,
            )
        )
    return rows


def non_stale_report(
    samples: Sequence[ObjectSample],
    spec: ScaleSpec | str = "medium_short",
    threshold_xy: float = 0.90,
    threshold_z: float = 0.90,
) -> RecallReport:
    """The drift = 0 reference point as a full recall report."""
    if isinstance(spec, str):
        spec = SCALE_SPECS[spec]
    pairs = []
    for sample in samples:
        centers = candidate_centers(
            sample.cloud, sample.rect, sample.intrinsics, sample.pose, fr=1, fc=1, mode="average"
        )
        crop, _ = best_cropbox(sample.gt_box, centers, spec)
        pairs.append(ioi(sample.gt_box, crop))
    return recall_from_breakdowns(pairs, threshold_xy, threshold_z)
