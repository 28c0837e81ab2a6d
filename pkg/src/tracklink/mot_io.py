"""File ingestion and emission: MOT-style detection/result CSVs, feature
sidecars, ground truth, and key=value run configuration.

All readers sort their output deterministically and all writers emit a
deterministic total row order with 6-significant-digit reals, so equal
inputs produce byte-identical files.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

import numpy as np

from tracklink.model import Box, Detection, RunConfig, Trajectory


class ParseError(ValueError):
    pass


def _fmt(value: float) -> str:
    """6 significant digits, plain decimal point."""
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return format(value, ".6g")


def _parse_row(line: str, lineno: int, path: str, min_cols: int) -> list[float]:
    parts = [p.strip() for p in line.split(",")]
    if len(parts) < min_cols:
        raise ParseError(
            f"{path}:{lineno}: expected at least {min_cols} comma-separated values"
        )
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise ParseError(f"{path}:{lineno}: non-numeric field ({exc})") from None


def load_detections(
    path: str | Path,
    sidecar_path: str | Path | None = None,
    feature_dim: int | None = None,
) -> dict[int, list[Detection]]:
    """Load raw detections grouped by frame, sorted by (frame, x, y).

    Rows are (frame, id, x, y, w, h, score); extra columns are ignored.
    An id >= 1 is kept as ``id_hint`` (synthetic/labeled files); -1 marks
    an unlabeled raw detection.  Scores must lie strictly in (0, 1):
    callers feeding raw detector output must pre-normalize.  When
    ``sidecar_path`` is given, a feature vector is attached to every
    detection; the sidecar indexes detections by their position inside
    the sorted frame group.
    """
    path = Path(path)
    raw: list[tuple[int, int | None, Box, float]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            vals = _parse_row(line, lineno, str(path), 7)
            frame = int(vals[0])
            ident = int(vals[1])
            x, y, w, h = vals[2:6]
            score = vals[6]
            if frame < 1:
                raise ParseError(f"{path}:{lineno}: frame must be >= 1, got {frame}")
            if w <= 0 or h <= 0:
                raise ParseError(f"{path}:{lineno}: non-positive box size w={w}, h={h}")
            if not (0.0 < score < 1.0):
                raise ParseError(
                    f"{path}:{lineno}: detection score must lie in (0, 1), got {score}"
                )
            raw.append((frame, ident if ident >= 1 else None, (x, y, w, h), score))
    raw.sort(key=lambda r: (r[0], r[2][0], r[2][1]))
    features = _load_sidecar(sidecar_path, feature_dim) if sidecar_path else None
    by_frame: dict[int, list[Detection]] = {}
    for frame, ident, box, score in raw:
        group = by_frame.setdefault(frame, [])
        feature = None
        if features is not None:
            key = (frame, len(group))
            if key not in features:
                raise ParseError(
                    f"{sidecar_path}: missing feature row for frame {frame} index {len(group)}"
                )
            feature = features.pop(key)
        group.append(
            Detection(frame=frame, box=box, score=score, feature=feature, id_hint=ident)
        )
    if features:
        extra = sorted(features)[0]
        raise ParseError(
            f"{sidecar_path}: feature row for frame {extra[0]} index {extra[1]} "
            "matches no detection"
        )
    return by_frame


def _load_sidecar(
    path: str | Path, feature_dim: int | None
) -> dict[tuple[int, int], np.ndarray]:
    path = Path(path)
    features: dict[tuple[int, int], np.ndarray] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            vals = _parse_row(line, lineno, str(path), 3)
            frame, idx = int(vals[0]), int(vals[1])
            vec = np.asarray(vals[2:], dtype=float)
            if feature_dim is None:
                feature_dim = vec.size
            if vec.size != feature_dim:
                raise ParseError(
                    f"{path}:{lineno}: feature dimension {vec.size} != expected {feature_dim}"
                )
            if (frame, idx) in features:
                raise ParseError(f"{path}:{lineno}: duplicate feature row ({frame}, {idx})")
            features[(frame, idx)] = vec
    return features


def load_ground_truth(path: str | Path) -> dict[int, list[tuple[int, Box]]]:
    """Load identity-labeled boxes: map id -> frame-ordered (frame, box).

    Declared gaps are preserved.  Rows must carry id >= 1; duplicate
    (frame, id) pairs are rejected.
    """
    path = Path(path)
    tracks: dict[int, dict[int, Box]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            vals = _parse_row(line, lineno, str(path), 6)
            frame, ident = int(vals[0]), int(vals[1])
            x, y, w, h = vals[2:6]
            if ident < 1:
                raise ParseError(f"{path}:{lineno}: ground-truth id must be >= 1, got {ident}")
            if frame < 1:
                raise ParseError(f"{path}:{lineno}: frame must be >= 1, got {frame}")
            if w <= 0 or h <= 0:
                raise ParseError(f"{path}:{lineno}: non-positive box size w={w}, h={h}")
            per_id = tracks.setdefault(ident, {})
            if frame in per_id:
                raise ParseError(f"{path}:{lineno}: duplicate (frame={frame}, id={ident}) row")
            per_id[frame] = (x, y, w, h)
    return {
        ident: [(f, per_id[f]) for f in sorted(per_id)]
        for ident, per_id in sorted(tracks.items())
    }


def write_trajectories(trajectories: list[Trajectory], path: str | Path):
    """Write result rows (frame, track_id, x, y, w, h, 1, -1, -1, -1)
    sorted by (frame, track_id); gap frames appear via interpolation."""
    rows = []
    for traj in trajectories:
        for frame, box in traj.interpolated:
            rows.append((frame, traj.id, box))
    rows.sort(key=lambda r: (r[0], r[1]))
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for frame, tid, (x, y, w, h) in rows:
            fh.write(
                f"{frame},{tid},{_fmt(x)},{_fmt(y)},{_fmt(w)},{_fmt(h)},1,-1,-1,-1\n"
            )


def write_detections(
    detections: dict[int, list[Detection]],
    det_path: str | Path,
    sidecar_path: str | Path | None = None,
):
    """Inverse of load_detections, used by the synthetic generator."""
    det_path = Path(det_path)
    feat_rows = []
    with open(det_path, "w", encoding="utf-8", newline="\n") as fh:
        for frame in sorted(detections):
            group = sorted(detections[frame], key=lambda d: (d.box[0], d.box[1]))
            for idx, det in enumerate(group):
                ident = det.id_hint if det.id_hint is not None else -1
                x, y, w, h = det.box
                fh.write(
                    f"{frame},{ident},{_fmt(x)},{_fmt(y)},{_fmt(w)},{_fmt(h)},{_fmt(det.score)}\n"
                )
                if det.feature is not None:
                    feat_rows.append((frame, idx, det.feature))
    if sidecar_path is not None:
        with open(sidecar_path, "w", encoding="utf-8", newline="\n") as fh:
            for frame, idx, vec in feat_rows:
                vals = ",".join(_fmt(v) for v in vec)
                fh.write(f"{frame},{idx},{vals}\n")


def write_ground_truth(gt: dict[int, list[tuple[int, Box]]], path: str | Path):
    rows = []
    for ident, track in gt.items():
        for frame, box in track:
            rows.append((frame, ident, box))
    rows.sort(key=lambda r: (r[0], r[1]))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for frame, ident, (x, y, w, h) in rows:
            fh.write(f"{frame},{ident},{_fmt(x)},{_fmt(y)},{_fmt(w)},{_fmt(h)},1,-1,-1,-1\n")


_CONFIG_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def load_config(path: str | Path) -> RunConfig:
    """Parse a key=value config file mirroring RunConfig field names.

    '#' starts a comment; unknown keys are errors (typo guard);
    ``distance_threshold`` accepts the literal ``auto``.
    """
    path = Path(path)
    values: dict = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError(f"{path}:{lineno}: expected key=value")
            key, _, raw = line.partition("=")
            key, raw = key.strip(), raw.strip()
            if key not in _CONFIG_FIELDS:
                raise ParseError(f"{path}:{lineno}: unknown config key {key!r}")
            if key in values:
                raise ParseError(f"{path}:{lineno}: duplicate config key {key!r}")
            values[key] = _convert_config_value(key, raw, path, lineno)
    try:
        return RunConfig(**values)
    except ValueError as exc:
        raise ParseError(f"{path}: invalid configuration: {exc}") from None


def _convert_config_value(key: str, raw: str, path, lineno: int):
    if key == "distance_threshold" and raw.lower() in ("auto", "none"):
        return None
    ftype = _CONFIG_FIELDS[key].type
    try:
        if "int" in str(ftype):
            return int(raw)
        return float(raw)
    except ValueError:
        raise ParseError(f"{path}:{lineno}: cannot parse {key}={raw!r}") from None


def dump_config(cfg: RunConfig, path: str | Path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for f in dataclasses.fields(RunConfig):
            value = getattr(cfg, f.name)
            if value is None:
                value = "auto"
            elif isinstance(value, float):
                value = _fmt(value)
            fh.write(f"{f.name}={value}\n")


def result_view(trajectories: list[Trajectory]) -> dict[int, list[tuple[int, Box]]]:
    """In-memory equivalent of write + load_ground_truth on a result."""
    return {
        traj.id: [(frame, box) for frame, box in traj.interpolated]
        for traj in sorted(trajectories, key=lambda t: t.id)
    }
