"""Online target-specific metric learning and tracklet refinement.

Each tracklet gets its own Mahalanobis metric M = W W^T learned from
absolute feature-difference vectors: positives from same-tracklet sample
pairs, negatives from other tracklets passing the spatio-temporal /
exit relevance constraints.  W is built one orthogonal column at a time
by gradient descent on a summed logistic relative-distance loss.  The
learned metrics then refine the tracklets: a run of ``split_run``
consecutive frames too far from the tracklet's probe splits it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from tracklink.model import Detection, RunConfig, Tracklet, temporal_overlap

_COLUMN_TOL = 1e-4  # relative improvement below this stops columns/steps
_ARMIJO_C = 1e-4
_MAX_INNER_STEPS = 100
_MAX_HALVINGS = 40
_PAIR_CAP = 2000


@dataclass(frozen=True)
class TargetMetric:
    """Learned projection for one tracklet; distance(x) = ||W^T x||^2.

    ``initial_loss`` is the training loss before any column exists;
    ``column_curves[k]`` holds column k's loss at its initialization and
    after each accepted gradient step.  Within a column the curve is
    non-increasing, and the per-column final losses are non-increasing
    across columns."""

    tracklet_id: int
    W: np.ndarray  # (feature_dim, r), columns pairwise orthogonal
    initial_loss: float = 0.0
    column_curves: tuple[tuple[float, ...], ...] = ()

    @property
    def rank(self) -> int:
        return self.W.shape[1]


@dataclass(frozen=True)
class PairSet:
    """Absolute difference vectors for one target tracklet."""

    target_id: int
    positives: np.ndarray  # (n_p, feature_dim)
    negatives: np.ndarray  # (n_n, feature_dim)


@dataclass(frozen=True)
class ProbeSet:
    """One appearance anchor (strongest detection's feature) per tracklet."""

    probes: dict[int, np.ndarray]

    def __getitem__(self, tracklet_id: int) -> np.ndarray:
        return self.probes[tracklet_id]

    def __contains__(self, tracklet_id: int) -> bool:
        return tracklet_id in self.probes


def _strongest_samples(t: Tracklet, phase: str, cfg: RunConfig) -> list[Detection]:
    """The q strongest detections; initial phase restricts candidates to
    the first probe_window frames."""
    if phase == "initial":
        pool = [d for d in t.detections if d.frame < t.start + cfg.probe_window]
    else:
        pool = list(t.detections)
    for d in pool:
        if d.feature is None:
            raise ValueError(f"tracklet {t.id} has a detection without features")
    pool.sort(key=lambda d: (-d.score, d.frame))
    return pool[: cfg.strongest_q]


def _in_exit_band(det: Detection, exit_map) -> bool:
    return exit_map is not None and exit_map.contains(det.center)


def collect_pairs(
    target: Tracklet,
    others: list[Tracklet],
    phase: str,
    cfg: RunConfig,
    exit_map=None,
) -> PairSet:
    """Build the training difference vectors for one target tracklet.

    A candidate negative source is admitted when it temporally overlaps
    the target, or when it has not exited the scene before the target
    starts (ends inside the frame interior, or ends after the target's
    start).
    """
    if phase not in ("initial", "reliable"):
        raise ValueError(f"unknown phase {phase!r}")
    samples = _strongest_samples(target, phase, cfg)
    feats = [d.feature for d in samples]
    positives = [
        np.abs(feats[i] - feats[j])
        for i in range(len(feats))
        for j in range(i + 1, len(feats))
    ]
    negatives = []
    for other in sorted(others, key=lambda t: t.id):
        if other.id == target.id:
            continue
        if not _negative_source_admissible(target, other, exit_map):
            continue
        for od in _strongest_samples(other, phase, cfg):
            for z in feats:
                negatives.append(np.abs(z - od.feature))
    dim = feats[0].size if feats else cfg.feature_dim
    return PairSet(
        target_id=target.id,
        positives=np.asarray(positives, dtype=float).reshape(-1, dim),
        negatives=np.asarray(negatives, dtype=float).reshape(-1, dim),
    )


def _negative_source_admissible(target: Tracklet, other: Tracklet, exit_map) -> bool:
    if temporal_overlap(target, other):
        return True
    if other.end < target.start:
        # exited before the target started -> irrelevant for learning
        return not _in_exit_band(other.detections[-1], exit_map)
    return True


def _logistic_loss(a: np.ndarray) -> float:
    return float(np.logaddexp(0.0, a).sum())


def _sigmoid(a: np.ndarray) -> np.ndarray:
    out = np.empty_like(a)
    mask = a >= 0
    out[mask] = 1.0 / (1.0 + np.exp(-a[mask]))
    ea = np.exp(a[~mask])
    out[~mask] = ea / (1.0 + ea)
    return out


def learn_metric(pairs: PairSet, cfg: RunConfig) -> TargetMetric:
    """Greedy orthogonal-column minimization of the summed logistic loss

        sum over matched (x_p, x_n) of log(1 + exp(||W^T x_p||^2 - ||W^T x_n||^2))

    over a capped Cartesian pairing of the positive and negative
    difference vectors.  Column k is initialized with the dominant
    eigenvector of the pair-weighted second-moment difference, projected
    onto the orthogonal complement of columns 1..k-1, then descended with
    Armijo backtracking.  Columns stop at r_max or when the relative loss
    improvement drops below 1e-4; the loss never increases.
    """
    pos = np.asarray(pairs.positives, dtype=float)
    neg = np.asarray(pairs.negatives, dtype=float)
    if pos.size == 0:
        raise ValueError(f"tracklet {pairs.target_id}: no positive pairs to learn from")
    if neg.size == 0:
        raise ValueError(f"tracklet {pairs.target_id}: no negative pairs to learn from")
    n_p, n_d = pos.shape
    n_n = neg.shape[0]
    ip, iN = _matched_pairs(n_p, n_n, cfg.rng_seed, pairs.target_id)

    # pair-weighted init matrix: each matched pair contributes its own
    # x_n x_n^T - x_p x_p^T, which balances unequal class counts
    wp = np.bincount(ip, minlength=n_p).astype(float)
    wn = np.bincount(iN, minlength=n_n).astype(float)
    init_matrix = (neg * wn[:, None]).T @ neg - (pos * wp[:, None]).T @ pos

    r_max = min(n_d, 32)
    cols: list[np.ndarray] = []
    base_p = np.zeros(n_p)
    base_n = np.zeros(n_n)
    current_loss = _logistic_loss(base_p[ip] - base_n[iN])
    initial_loss = current_loss
    curves: list[tuple[float, ...]] = []

    for k in range(r_max):
        basis = None
        if cols:
            q = np.stack(cols, axis=1)
            basis = q / np.linalg.norm(q, axis=0)
        w = _init_column(init_matrix, basis)
        if w is None:
            break
        col_curve: list[float] = []
        w, col_loss = _descend_column(w, pos, neg, base_p, base_n, ip, iN, basis, col_curve)
        improvement = (current_loss - col_loss) / max(abs(current_loss), 1e-12)
        if improvement < _COLUMN_TOL and k > 0:
            break
        if basis is not None:
            w = w - basis @ (basis.T @ w)
        cols.append(w)
        curves.append(tuple(col_curve))
        current_loss = min(current_loss, col_loss)
        base_p += (pos @ w) ** 2
        base_n += (neg @ w) ** 2
        if not math.isfinite(current_loss):
            raise ValueError(f"tracklet {pairs.target_id}: metric loss became non-finite")
        if improvement < _COLUMN_TOL:
            break
    return TargetMetric(
        tracklet_id=pairs.target_id,
        W=np.stack(cols, axis=1),
        initial_loss=initial_loss,
        column_curves=tuple(curves),
    )


def _matched_pairs(n_p: int, n_n: int, rng_seed: int, target_id: int):
    total = n_p * n_n
    if total <= _PAIR_CAP:
        return np.repeat(np.arange(n_p), n_n), np.tile(np.arange(n_n), n_p)
    rng = np.random.default_rng(np.random.SeedSequence([rng_seed, target_id & 0x7FFFFFFF]))
    flat = rng.choice(total, _PAIR_CAP, replace=False)
    flat.sort()
    return flat // n_n, flat % n_n


def _init_column(init_matrix: np.ndarray, basis: np.ndarray | None):
    _, vecs = np.linalg.eigh(init_matrix)
    w = vecs[:, -1].copy()
    if basis is not None:
        w = w - basis @ (basis.T @ w)
    norm = np.linalg.norm(w)
    if norm < 1e-10:
        return None
    w = w / norm
    # deterministic sign
    pivot = np.argmax(np.abs(w))
    if w[pivot] < 0:
        w = -w
    return w


def _descend_column(w, pos, neg, base_p, base_n, ip, iN, basis, curve: list[float]):
    def loss_of(vec):
        a = (base_p + (pos @ vec) ** 2)[ip] - (base_n + (neg @ vec) ** 2)[iN]
        return _logistic_loss(a)

    loss = loss_of(w)
    curve.append(loss)
    for _ in range(_MAX_INNER_STEPS):
        up = pos @ w
        un = neg @ w
        a = (base_p + up**2)[ip] - (base_n + un**2)[iN]
        s = _sigmoid(a)
        coef_p = np.bincount(ip, weights=s, minlength=len(base_p))
        coef_n = np.bincount(iN, weights=s, minlength=len(base_n))
        grad = 2.0 * (pos.T @ (coef_p * up) - neg.T @ (coef_n * un))
        if basis is not None:
            grad = grad - basis @ (basis.T @ grad)
        grad_sq = float(grad @ grad)
        if grad_sq < 1e-18:
            break
        step = 1.0
        accepted = False
        for _ in range(_MAX_HALVINGS):
            candidate = w - step * grad
            cand_loss = loss_of(candidate)
            if cand_loss <= loss - _ARMIJO_C * step * grad_sq:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        relative = (loss - cand_loss) / max(abs(loss), 1e-12)
        w, loss = candidate, cand_loss
        curve.append(loss)
        if relative < _COLUMN_TOL:
            break
    return w, loss


def identity_metric(tracklet_id: int, feature_dim: int) -> TargetMetric:
    """Fallback metric (plain squared Euclidean) for tracklets that have
    no admissible training pairs, e.g. a lone tracklet in its segment."""
    return TargetMetric(tracklet_id=tracklet_id, W=np.eye(feature_dim))


def dump_metric_debug(metrics: dict[int, TargetMetric], path):
    """Write per-column norms and loss curves to CSV for inspection."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("tracklet_id,column,norm,losses\n")
        for tid in sorted(metrics):
            m = metrics[tid]
            for k in range(m.rank):
                norm = float(np.linalg.norm(m.W[:, k]))
                curve = m.column_curves[k] if k < len(m.column_curves) else ()
                losses = ";".join(f"{v:.6g}" for v in curve)
                fh.write(f"{tid},{k},{norm:.6g},{losses}\n")


def metric_distance(metric: TargetMetric, a: np.ndarray, b: np.ndarray) -> float:
    """||W^T |a - b|||^2 -- the learned relative appearance distance."""
    if a.shape != b.shape or a.shape[0] != metric.W.shape[0]:
        raise ValueError(
            f"feature dimensions do not match metric: {a.shape}, {b.shape}, W {metric.W.shape}"
        )
    proj = metric.W.T @ np.abs(a - b)
    return float(proj @ proj)


def build_probe_set(tracklets: list[Tracklet], cfg: RunConfig) -> ProbeSet:
    """Strongest detection feature within each tracklet's first
    probe_window frames; score ties go to the earliest frame."""
    if not tracklets:
        raise ValueError("cannot build probes for an empty tracklet list")
    probes = {}
    for t in tracklets:
        window = [d for d in t.detections if d.frame < t.start + cfg.probe_window]
        best = max(window, key=lambda d: (d.score, -d.frame))
        if best.feature is None:
            raise ValueError(f"tracklet {t.id} has no features for probe selection")
        probes[t.id] = best.feature
    return ProbeSet(probes=probes)


def learn_segment_metrics(
    tracklets: list[Tracklet],
    phase: str,
    cfg: RunConfig,
    exit_map=None,
) -> tuple[dict[int, TargetMetric], dict[int, PairSet]]:
    """Learn one metric per tracklet of a segment, falling back to the
    identity metric when a tracklet has no admissible pairs."""
    metrics: dict[int, TargetMetric] = {}
    pairsets: dict[int, PairSet] = {}
    for t in tracklets:
        pairs = collect_pairs(t, tracklets, phase, cfg, exit_map=exit_map)
        if len(pairs.positives) == 0 or len(pairs.negatives) == 0:
            dim = t.detections[0].feature.size
            metrics[t.id] = identity_metric(t.id, dim)
            continue
        metrics[t.id] = learn_metric(pairs, cfg)
        pairsets[t.id] = pairs
    return metrics, pairsets


def split_threshold(
    metrics: dict[int, TargetMetric], pairsets: dict[int, PairSet]
) -> float:
    """Segment-level refinement threshold: median positive-pair distance
    plus three times the interquartile range."""
    dists = []
    for tid, pairs in pairsets.items():
        metric = metrics[tid]
        proj = pairs.positives @ metric.W
        dists.extend(np.sum(proj**2, axis=1).tolist())
    if not dists:
        return math.inf
    arr = np.asarray(dists)
    q1, med, q3 = np.percentile(arr, [25.0, 50.0, 75.0])
    return float(med + 3.0 * (q3 - q1))


def _first_split_frame(
    t: Tracklet, metric: TargetMetric, probe: np.ndarray, omega: float, run: int
) -> int | None:
    """Frame index starting the first run of ``run`` consecutive
    above-threshold distances, or None."""
    streak = 0
    for d in t.detections:
        dist = metric_distance(metric, d.feature, probe)
        if dist > omega:
            streak += 1
            if streak == run:
                return d.frame - run + 1
        else:
            streak = 0
    return None


def refine_tracklets(
    tracklets: list[Tracklet],
    metrics: dict[int, TargetMetric],
    probes: ProbeSet,
    cfg: RunConfig,
    exit_map=None,
    next_id: int | None = None,
) -> list[Tracklet]:
    """Split appearance-inconsistent tracklets, iterating up to
    cfg.refine_iters passes and re-learning metrics and probes between
    passes.  Split parts shorter than 2 frames are dropped; splitting
    never merges tracklets or adds detections.
    """
    current = list(tracklets)
    if next_id is None:
        next_id = max((t.id for t in current), default=0) + 1
    cur_metrics, cur_probes = metrics, probes
    pairsets: dict[int, PairSet] | None = None
    for iteration in range(cfg.refine_iters):
        if iteration > 0 or cur_metrics is None:
            cur_metrics, pairsets = learn_segment_metrics(current, "initial", cfg, exit_map)
            cur_probes = build_probe_set(current, cfg)
        omega = cfg.distance_threshold
        if omega is None:
            if pairsets is None:
                pairsets = {
                    t.id: collect_pairs(t, current, "initial", cfg, exit_map)
                    for t in current
                }
                pairsets = {
                    tid: p for tid, p in pairsets.items()
                    if len(p.positives) and len(p.negatives)
                }
            omega = split_threshold(cur_metrics, pairsets)
        refined: list[Tracklet] = []
        changed = False
        for t in current:
            if t.id not in cur_metrics or t.id not in cur_probes:
                refined.append(t)
                continue
            split_at = _first_split_frame(
                t, cur_metrics[t.id], cur_probes[t.id], omega, cfg.split_run
            )
            if split_at is None or split_at <= t.start:
                refined.append(t)
                continue
            changed = True
            head = t.detections[: split_at - t.start]
            tail = t.detections[split_at - t.start :]
            if len(head) >= 2:
                refined.append(Tracklet(id=t.id, detections=head))
            if len(tail) >= 2:
                refined.append(Tracklet(id=next_id, detections=tail))
                next_id += 1
        current = refined
        pairsets = None
        if not changed:
            break
    return current
