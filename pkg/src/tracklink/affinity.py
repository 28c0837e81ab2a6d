"""Pairwise tracklet affinities: appearance, limiting constraints,
difficult-situation flags, weighted fusion and transition costs.

All affinities are computed per local segment.  An AffinityTable keeps
every ingredient per ordered pair so fused scores can be rebuilt cheaply
under different motion weights (used by the weight-learning sweep).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from tracklink.dynamics import NEG_INF, motion_similarity
from tracklink.metric import ProbeSet, TargetMetric, metric_distance
from tracklink.model import RunConfig, Tracklet, gap_frames, intersection_area, temporal_overlap

SCORE_FLOOR = 1e-12


@dataclass(frozen=True)
class ExitMap:
    """Static border band where trajectories may legitimately terminate."""

    width: float
    height: float
    band: float

    @classmethod
    def from_config(cls, cfg: RunConfig, width: float, height: float) -> "ExitMap":
        band = max(1.0, cfg.exit_band_frac * min(width, height))
        return cls(width=width, height=height, band=band)

    def contains(self, point: tuple[float, float]) -> bool:
        x, y = point
        return (
            x < self.band
            or y < self.band
            or x > self.width - self.band
            or y > self.height - self.band
        )


@dataclass(frozen=True)
class AffinityRow:
    """All affinity ingredients for the ordered candidate link i -> j."""

    i: int
    j: int
    p_m: float
    p_a: float
    c_t: int
    c_e: int
    flagged: bool
    gap: int
    lam: float
    score: float
    cost: float


@dataclass(frozen=True)
class AffinityTable:
    segment_index: int
    rows: tuple[AffinityRow, ...]
    gamma: float


def limiting(a: Tracklet, b: Tracklet, exit_map: ExitMap | None) -> int:
    """Binary gate for the link b -> a (a is the later tracklet): 1 iff
    the spans do not overlap, a starts after b ends, and b did not end
    inside the exit band."""
    c_t = 0 if temporal_overlap(a, b) else 1
    c_e = 1
    if a.start <= b.end:
        c_e = 0
    elif exit_map is not None and exit_map.contains(b.detections[-1].center):
        c_e = 0
    return c_t * c_e


def appearance_affinity(
    a: Tracklet,
    b: Tracklet,
    metrics: dict[int, TargetMetric],
    probes: ProbeSet,
    gamma: float = 1.0,
) -> float:
    """gamma / (d_ab * d_ba) with the mean relative distances taken under
    each tracklet's own metric against the other's probe; a zero product
    (indistinguishable appearance) caps at 1."""
    product = appearance_distance_product(a, b, metrics, probes)
    if product <= 0.0:
        return 1.0
    return min(1.0, gamma / product)


def appearance_distance_product(
    a: Tracklet,
    b: Tracklet,
    metrics: dict[int, TargetMetric],
    probes: ProbeSet,
) -> float:
    if a.id not in metrics or b.id not in metrics:
        raise ValueError(f"missing metric for tracklet pair ({a.id}, {b.id})")
    if a.id not in probes or b.id not in probes:
        raise ValueError(f"missing probe for tracklet pair ({a.id}, {b.id})")
    d_ab = _mean_probe_distance(a, metrics[a.id], probes[b.id])
    d_ba = _mean_probe_distance(b, metrics[b.id], probes[a.id])
    return d_ab * d_ba


def _mean_probe_distance(t: Tracklet, metric: TargetMetric, probe) -> float:
    total = 0.0
    for det in t.detections:
        total += metric_distance(metric, det.feature, probe)
    return total / len(t.detections)


def assess_difficult(tracklets: list[Tracklet], cfg: RunConfig) -> set[int]:
    """Ids of tracklets in an occlusion-like configuration: a pair whose
    boxes overlap by at least eta times the smaller area at a shared
    starting frame or a shared ending frame."""
    flagged: set[int] = set()
    ordered = sorted(tracklets, key=lambda t: t.id)
    for idx, t_i in enumerate(ordered):
        for t_k in ordered[idx + 1 :]:
            if _difficult_pair(t_i, t_k, cfg.overlap_eta):
                flagged.add(t_i.id)
                flagged.add(t_k.id)
    return flagged


def _difficult_pair(t_i: Tracklet, t_k: Tracklet, eta: float) -> bool:
    for pick in ("start", "end"):
        f_i = t_i.start if pick == "start" else t_i.end
        f_k = t_k.start if pick == "start" else t_k.end
        if f_i != f_k:
            continue
        box_i = t_i.detection_at(f_i).box
        box_k = t_k.detection_at(f_k).box
        overlap = intersection_area(box_i, box_k)
        smaller = min(box_i[2] * box_i[3], box_k[2] * box_k[3])
        if overlap >= eta * smaller:
            return True
    return False


def motion_weight(flagged: bool, gap: int, cfg: RunConfig) -> float:
    """Exponent applied to the motion affinity: 1 for easy pairs, the
    level-1/level-2 weight for flagged pairs with a real gap."""
    if not flagged or gap < 1:
        return 1.0
    if gap <= cfg.gap_bound:
        return cfg.lambda1
    return cfg.lambda2


def fused_score(
    p_m: float,
    p_a: float,
    c: int,
    flagged: bool,
    gap: int,
    cfg: RunConfig,
) -> float:
    """Weighted affinity (P_m ** lambda) * P_a * C with 0^0 = 1; zero on
    temporal conflict or a closed limiting gate."""
    if c == 0 or p_m == NEG_INF:
        return 0.0
    lam = motion_weight(flagged, gap, cfg)
    if lam == 0.0:
        powered = 1.0
    else:
        powered = p_m**lam
    return powered * p_a


def transition_cost(score: float) -> float:
    """Negative log affinity; scores at or below the floor yield +inf,
    meaning the graph edge is omitted."""
    if score < 0.0:
        raise ValueError(f"affinity score must be nonnegative, got {score}")
    if score <= SCORE_FLOOR:
        return math.inf
    return -math.log(score)


def candidate_pairs(
    segment_tracklets: list[Tracklet],
    next_segment_tracklets: list[Tracklet],
    segment_window: tuple[int, int],
    next_window: tuple[int, int] | None,
    cfg: RunConfig,
) -> list[tuple[Tracklet, Tracklet]]:
    """Ordered linkable pairs scored within one segment table: in-segment
    pairs, plus boundary pairs into the next segment when the earlier
    tracklet ends within gap_bound frames of the boundary and the later
    one starts within gap_bound frames after it."""
    inside = sorted(segment_tracklets, key=lambda t: t.id)
    pairs = [
        (a, b)
        for a in inside
        for b in inside
        if a.id != b.id and b.start > a.end
    ]
    if next_window is not None:
        tail_lo = segment_window[1] - cfg.gap_bound + 1
        head_hi = next_window[0] + cfg.gap_bound - 1
        for a in inside:
            if a.end < tail_lo:
                continue
            for b in sorted(next_segment_tracklets, key=lambda t: t.id):
                if b.start > head_hi or b.start <= a.end:
                    continue
                pairs.append((a, b))
    return pairs


def build_affinity_table(
    segment_index: int,
    pairs: list[tuple[Tracklet, Tracklet]],
    metrics: dict[int, TargetMetric],
    probes: ProbeSet,
    flagged_ids: set[int],
    cfg: RunConfig,
    exit_map: ExitMap | None,
    use_appearance: bool = True,
) -> AffinityTable:
    """Score every candidate pair of a segment.

    gamma normalizes appearance per segment: the smallest admissible
    distance product, so the best pair's P_a is exactly 1 and every P_a
    lies in (0, 1].  Raw motion similarities below 0 are clamped to 0
    before fusion (incompatible dynamics).
    """
    staged = []
    products = []
    for a, b in pairs:
        c_t = 0 if temporal_overlap(a, b) else 1
        c_e = 1
        if b.start <= a.end:
            c_e = 0
        elif exit_map is not None and exit_map.contains(a.detections[-1].center):
            c_e = 0  # a exited the scene; it cannot continue as b
        p_m = motion_similarity(a, b, cfg.rank_tol)
        product = None
        if use_appearance and c_t * c_e == 1:
            product = appearance_distance_product(a, b, metrics, probes)
            if product > 0.0:
                products.append(product)
        staged.append((a, b, c_t, c_e, p_m, product))
    gamma = min(products) if products else 1.0
    rows = []
    for a, b, c_t, c_e, p_m, product in staged:
        if not use_appearance or product is None:
            p_a = 1.0
        elif product <= 0.0:
            p_a = 1.0
        else:
            p_a = min(1.0, gamma / product)
        gap = gap_frames(a, b) if b.start > a.end else 0
        flagged = a.id in flagged_ids or b.id in flagged_ids
        clamped_pm = p_m if p_m == NEG_INF else max(0.0, min(1.0, p_m))
        score = fused_score(clamped_pm, p_a, c_t * c_e, flagged, gap, cfg)
        rows.append(
            AffinityRow(
                i=a.id,
                j=b.id,
                p_m=p_m,
                p_a=p_a,
                c_t=c_t,
                c_e=c_e,
                flagged=flagged,
                gap=gap,
                lam=motion_weight(flagged, gap, cfg),
                score=score,
                cost=transition_cost(score),
            )
        )
    return AffinityTable(segment_index=segment_index, rows=tuple(rows), gamma=gamma)


def refit_lambdas(table: AffinityTable, cfg: RunConfig) -> AffinityTable:
    """Rebuild fused scores and costs of a table under new motion
    weights; every other ingredient is reused unchanged."""
    rows = []
    for row in table.rows:
        p_m = row.p_m if row.p_m == NEG_INF else max(0.0, min(1.0, row.p_m))
        score = fused_score(p_m, row.p_a, row.c_t * row.c_e, row.flagged, row.gap, cfg)
        rows.append(
            replace(
                row,
                lam=motion_weight(row.flagged, row.gap, cfg),
                score=score,
                cost=transition_cost(score),
            )
        )
    return AffinityTable(segment_index=table.segment_index, rows=tuple(rows), gamma=table.gamma)
