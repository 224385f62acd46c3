"""Trajectory annotation files: whitespace-separated "frame_id ped_id x y" lines."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

from ..errors import DataError


@dataclass(frozen=True)
class FrameRecord:
    frame_id: int
    ped_id: int
    x: float
    y: float


def parse_trajectory_file(path, frame_interval=1):
    """Read one trajectory file into records sorted by (frame_id, ped_id).

    Lines hold "frame_id ped_id x y"; '#' starts a comment. frame_interval
    optionally down-samples raw files by keeping frames whose id is a
    multiple of the interval.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read trajectory file {path}: {exc}") from exc

    records = []
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 4:
            raise DataError(f"{path}:{lineno}: expected 4 fields, got {len(fields)}")
        try:
            frame_id = int(fields[0])
            ped_id = int(fields[1])
            x = float(fields[2])
            y = float(fields[3])
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: non-numeric field: {exc}") from exc
        if not (math.isfinite(x) and math.isfinite(y)):
            raise DataError(f"{path}:{lineno}: non-finite coordinate")
        if frame_interval > 1 and frame_id % frame_interval != 0:
            continue
        key = (frame_id, ped_id)
        if key in seen:
            raise DataError(f"{path}:{lineno}: duplicate (frame, ped) = {key}")
        seen.add(key)
        records.append(FrameRecord(frame_id, ped_id, x, y))
    records.sort(key=lambda r: (r.frame_id, r.ped_id))
    return records


def write_trajectory_file(records, path, behaviors=None, header=None):
    """Write records in the canonical "%d %d %.6f %.6f" form.

    behaviors (ped_id -> tag) are stored as comment lines so downstream
    tools can evaluate per-behavior subsets; the parser ignores them.
    """
    lines = []
    if header:
        lines.append(f"# {header}")
    if behaviors:
        for ped_id in sorted(behaviors):
            lines.append(f"# behavior: {ped_id} {behaviors[ped_id]}")
    for r in sorted(records, key=lambda r: (r.frame_id, r.ped_id)):
        lines.append(f"{r.frame_id} {r.ped_id} {r.x:.6f} {r.y:.6f}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_behavior_tags(path):
    """Recover the ped_id -> behavior map from '# behavior:' comment lines."""
    tags = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if line.startswith("# behavior:"):
            parts = line[len("# behavior:"):].split()
            if len(parts) == 2:
                tags[int(parts[0])] = parts[1]
    return tags
