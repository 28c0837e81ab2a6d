"""Shared domain types plus elementary geometric/temporal predicates.

Frames are 1-based integers.  Boxes are (x, y, w, h) with top-left origin
and y growing downward, matching the MOT file convention.  All types are
immutable value objects once constructed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

Box = tuple[float, float, float, float]


@dataclass(frozen=True)
class Detection:
    """One bounding-box observation in a single frame.

    ``feature`` is an optional appearance vector; ``id_hint`` is a
    ground-truth identity used only by synthesis and evaluation, never by
    the tracker itself.
    """

    frame: int
    box: Box
    score: float
    feature: np.ndarray | None = None
    id_hint: int | None = None

    def __post_init__(self):
        x, y, w, h = self.box
        if w <= 0 or h <= 0:
            raise ValueError(f"detection box must have positive size, got w={w}, h={h}")
        if self.frame < 1:
            raise ValueError(f"frame indices are 1-based, got {self.frame}")

    @property
    def center(self) -> tuple[float, float]:
        x, y, w, h = self.box
        return (x + w / 2.0, y + h / 2.0)

    @property
    def area(self) -> float:
        return self.box[2] * self.box[3]


@dataclass(frozen=True)
class Tracklet:
    """A gapless, frame-ordered run of detections with one presumed identity."""

    id: int
    detections: tuple[Detection, ...]

    def __post_init__(self):
        if not self.detections:
            raise ValueError("tracklet needs at least one detection")
        frames = [d.frame for d in self.detections]
        for a, b in zip(frames, frames[1:]):
            if b != a + 1:
                raise ValueError(
                    f"tracklet {self.id} frames must be consecutive, got {a} -> {b}"
                )

    @property
    def start(self) -> int:
        return self.detections[0].frame

    @property
    def end(self) -> int:
        return self.detections[-1].frame

    @property
    def length(self) -> int:
        return self.end - self.start + 1

    def centers(self) -> list[tuple[float, float]]:
        return [d.center for d in self.detections]

    def detection_at(self, frame: int) -> Detection:
        return self.detections[frame - self.start]


@dataclass(frozen=True)
class Trajectory:
    """Final output unit: an ordered chain of tracklets with gap frames
    filled by linear interpolation.  ``interpolated`` covers every frame
    from the first member's start to the last member's end."""

    id: int
    tracklet_ids: tuple[int, ...]
    interpolated: tuple[tuple[int, Box], ...]

    def __post_init__(self):
        frames = [f for f, _ in self.interpolated]
        for a, b in zip(frames, frames[1:]):
            if b != a + 1:
                raise ValueError(f"trajectory {self.id} has a frame gap at {a} -> {b}")

    @property
    def start(self) -> int:
        return self.interpolated[0][0]

    @property
    def end(self) -> int:
        return self.interpolated[-1][0]


@dataclass(frozen=True)
class RunConfig:
    """Run parameters shared by every pipeline stage.

    ``distance_threshold`` (the tracklet-split threshold) may be None, in
    which case it is derived per segment from the learned metrics'
    positive-pair distances.  ``frame_width``/``frame_height`` of 0 mean
    "infer the frame size from the data".
    """

    segment_len: int = 50
    probe_window: int = 8
    strongest_q: int = 4
    split_run: int = 5
    refine_iters: int = 2
    distance_threshold: float | None = None
    rank_tol: float = 0.01
    overlap_eta: float = 0.3
    gap_bound: int = 20
    lambda1: float = 0.5
    lambda2: float = 0.2
    exit_band_frac: float = 0.05
    entry_exit_prob: float = 0.1
    feature_dim: int = 32
    rng_seed: int = 0
    det_threshold: float = 0.6
    frame_width: float = 0.0
    frame_height: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.lambda1 <= 1.0 and 0.0 <= self.lambda2 <= 1.0):
            raise ValueError("lambda1/lambda2 must lie in [0, 1]")
        if self.segment_len < 2 * self.probe_window:
            raise ValueError("segment_len must be at least twice probe_window")
        if not (0.0 < self.overlap_eta < 1.0):
            raise ValueError("overlap_eta must lie strictly between 0 and 1")
        if self.rank_tol <= 0.0:
            raise ValueError("rank_tol must be positive")
        if self.distance_threshold is not None and self.distance_threshold <= 0.0:
            raise ValueError("distance_threshold must be positive when set")
        if not (0.0 < self.entry_exit_prob < 1.0):
            raise ValueError("entry_exit_prob must lie strictly between 0 and 1")
        if not (0.0 < self.det_threshold < 1.0):
            raise ValueError("det_threshold must lie strictly between 0 and 1")


def temporal_overlap(a: Tracklet, b: Tracklet) -> bool:
    """True iff the frame spans of the two tracklets intersect."""
    return a.start <= b.end and b.start <= a.end


def iou(box_a: Box, box_b: Box) -> float:
    """Intersection-over-union of two (x, y, w, h) boxes."""
    ax, ay, aw, ah = box_a
    bx, by, bw, bh = box_b
    ix = max(ax, bx)
    iy = max(ay, by)
    ix2 = min(ax + aw, bx + bw)
    iy2 = min(ay + ah, by + bh)
    iw = max(0.0, ix2 - ix)
    ih = max(0.0, iy2 - iy)
    inter = iw * ih
    if inter == 0.0:
        return 0.0
    return inter / (aw * ah + bw * bh - inter)


def intersection_area(box_a: Box, box_b: Box) -> float:
    """Raw overlap area in pixels between two (x, y, w, h) boxes."""
    ax, ay, aw, ah = box_a
    bx, by, bw, bh = box_b
    iw = max(0.0, min(ax + aw, bx + bw) - max(ax, bx))
    ih = max(0.0, min(ay + ah, by + bh) - max(ay, by))
    return iw * ih


def gap_frames(a: Tracklet, b: Tracklet) -> int:
    """Number of empty frames strictly between tracklet a and tracklet b.

    Requires b to start after a ends; adjacent tracklets have gap 0.
    """
    if b.start <= a.end:
        raise ValueError(
            f"gap_frames needs b to start after a ends (a.end={a.end}, b.start={b.start})"
        )
    return b.start - a.end - 1
