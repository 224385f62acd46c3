"""Scene occupancy grids: file format, world/cell mapping, cropping."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import DataError


@dataclass
class SceneGrid:
    """Rasterized static scene; channel 0 is obstacle probability in [0, 1].

    origin is the world coordinate of the (row 0, col 0) cell corner; rows
    index y, columns index x, both increasing with the world axes.
    """

    scene_id: str
    height: int
    width: int
    channels: int
    cell_size: float
    origin: np.ndarray
    data: np.ndarray  # (C, H, W)

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=np.float64)
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.cell_size <= 0:
            raise DataError(f"grid {self.scene_id}: cell_size must be positive")
        if min(self.height, self.width, self.channels) <= 0:
            raise DataError(f"grid {self.scene_id}: degenerate dimensions")
        if self.data.shape != (self.channels, self.height, self.width):
            raise DataError(f"grid {self.scene_id}: data shape {self.data.shape} "
                            f"!= ({self.channels}, {self.height}, {self.width})")
        if not np.all(np.isfinite(self.data)):
            raise DataError(f"grid {self.scene_id}: non-finite cells")
        if self.data.min() < 0.0 or self.data.max() > 1.0:
            raise DataError(f"grid {self.scene_id}: cell values outside [0, 1]")

    def cell_of(self, point):
        """(row, col) of the cell containing a world point (may be out of range)."""
        col = int(np.floor((point[0] - self.origin[0]) / self.cell_size))
        row = int(np.floor((point[1] - self.origin[1]) / self.cell_size))
        return row, col


def parse_grid_file(path, scene_id=None):
    """Read "H W C cell_size origin_x origin_y" header + row-major cell values."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read grid file {path}: {exc}") from exc
    tokens = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            tokens.extend(line.split())
    if len(tokens) < 6:
        raise DataError(f"{path}: missing grid header")
    try:
        h, w, c = int(tokens[0]), int(tokens[1]), int(tokens[2])
        cell_size = float(tokens[3])
        origin = np.array([float(tokens[4]), float(tokens[5])])
        values = np.array([float(t) for t in tokens[6:]], dtype=np.float64)
    except ValueError as exc:
        raise DataError(f"{path}: malformed grid file: {exc}") from exc
    if values.size != c * h * w:
        raise DataError(f"{path}: expected {c * h * w} cells, got {values.size}")
    return SceneGrid(scene_id or path.stem, h, w, c, cell_size, origin,
                     values.reshape(c, h, w))


def write_grid_file(grid, path):
    lines = [f"{grid.height} {grid.width} {grid.channels} "
             f"{grid.cell_size:.6f} {grid.origin[0]:.6f} {grid.origin[1]:.6f}"]
    flat = grid.data.reshape(grid.channels * grid.height, grid.width)
    for row in flat:
        lines.append(" ".join(f"{v:.6f}" for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def crop_scene(grid, center, out_hw):
    """Fixed-size crop (C, out_h, out_w) centered on a world point.

    Cells outside the grid are filled with 1.0 (treated as obstacle).
    """
    out_h, out_w = out_hw
    if out_h <= 0 or out_w <= 0:
        raise DataError("crop size must be positive")
    if not np.all(np.isfinite(np.asarray(center, dtype=np.float64))):
        raise DataError("crop center must be finite")
    row, col = grid.cell_of(center)
    r0 = row - out_h // 2
    c0 = col - out_w // 2
    out = np.ones((grid.channels, out_h, out_w), dtype=np.float64)
    src_r0, src_r1 = max(r0, 0), min(r0 + out_h, grid.height)
    src_c0, src_c1 = max(c0, 0), min(c0 + out_w, grid.width)
    if src_r0 < src_r1 and src_c0 < src_c1:
        out[:, src_r0 - r0:src_r1 - r0, src_c0 - c0:src_c1 - c0] = \
            grid.data[:, src_r0:src_r1, src_c0:src_c1]
    return out


def rotate_grid(grid, angle, center):
    """Nearest-neighbor resample of the grid rotated by angle about a world point.

    Output cell at world q samples the source at center + R(-angle) (q - center);
    source points outside the grid read as 1.0.
    """
    cos_a, sin_a = np.cos(angle), np.sin(angle)
    rows = np.arange(grid.height)
    cols = np.arange(grid.width)
    # world coordinates of every cell center
    cx = grid.origin[0] + (cols + 0.5) * grid.cell_size
    cy = grid.origin[1] + (rows + 0.5) * grid.cell_size
    qx, qy = np.meshgrid(cx, cy)
    dx, dy = qx - center[0], qy - center[1]
    sx = center[0] + cos_a * dx + sin_a * dy
    sy = center[1] - sin_a * dx + cos_a * dy
    src_col = np.floor((sx - grid.origin[0]) / grid.cell_size).astype(int)
    src_row = np.floor((sy - grid.origin[1]) / grid.cell_size).astype(int)
    inside = ((src_row >= 0) & (src_row < grid.height) &
              (src_col >= 0) & (src_col < grid.width))
    data = np.ones_like(grid.data)
    sr = np.clip(src_row, 0, grid.height - 1)
    sc = np.clip(src_col, 0, grid.width - 1)
    for ch in range(grid.channels):
        sampled = grid.data[ch, sr, sc]
        data[ch] = np.where(inside, sampled, 1.0)
    return SceneGrid(grid.scene_id, grid.height, grid.width, grid.channels,
                     grid.cell_size, grid.origin.copy(), data)
