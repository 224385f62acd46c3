"""Windowed sequence samples: extraction, normalization, rotation augmentation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError
from .grids import rotate_grid


@dataclass
class SequenceSample:
    """One pedestrian's observation/future window plus per-step neighbors.

    Coordinates are world meters until normalize() is applied; norm_offset
    and norm_rotation always hold the transform that maps the current
    coordinates back to raw world coordinates.
    """

    ped_id: int
    obs: np.ndarray                 # (T_obs, 2)
    fut: np.ndarray                 # (T_pred, 2)
    neighbors: list                 # T_obs arrays of shape (N_t, 2)
    scene_id: str = "scene"
    start_frame: int = 0
    norm_offset: np.ndarray = field(default_factory=lambda: np.zeros(2))
    norm_rotation: float = 0.0

    @property
    def t_obs(self):
        return self.obs.shape[0]

    @property
    def t_pred(self):
        return self.fut.shape[0]

    def copy(self):
        return SequenceSample(
            ped_id=self.ped_id,
            obs=self.obs.copy(),
            fut=self.fut.copy(),
            neighbors=[n.copy() for n in self.neighbors],
            scene_id=self.scene_id,
            start_frame=self.start_frame,
            norm_offset=self.norm_offset.copy(),
            norm_rotation=self.norm_rotation,
        )


def _infer_frame_step(frames):
    """Smallest positive gap between successive distinct frame ids."""
    uniq = np.unique(frames)
    if uniq.size < 2:
        return 1
    return int(np.diff(uniq).min())


def window_samples(records, t_obs=8, t_pred=12, stride=1, scene_id="scene",
                   max_neighbors=16):
    """Slide a (t_obs + t_pred)-frame window over every pedestrian.

    A window is emitted wherever the pedestrian appears in t_obs + t_pred
    consecutive frames (at the dataset's frame step); per-ped start positions
    advance by `stride`. Neighbors at each observed step are all other
    pedestrians present in that frame, capped at the max_neighbors nearest.
    """
    if stride < 1:
        raise DataError("stride must be >= 1")
    window = t_obs + t_pred
    by_ped = {}
    by_frame = {}
    for r in records:
        by_ped.setdefault(r.ped_id, []).append(r)
        by_frame.setdefault(r.frame_id, {})[r.ped_id] = (r.x, r.y)

    step = _infer_frame_step([r.frame_id for r in records]) if records else 1
    samples = []
    for ped_id in sorted(by_ped):
        recs = sorted(by_ped[ped_id], key=lambda r: r.frame_id)
        frames = np.array([r.frame_id for r in recs])
        coords = np.array([[r.x, r.y] for r in recs])
        starts = []
        for i in range(len(recs) - window + 1):
            if frames[i + window - 1] - frames[i] == (window - 1) * step and \
                    np.all(np.diff(frames[i:i + window]) == step):
                starts.append(i)
        for i in starts[::stride]:
            obs = coords[i:i + t_obs].copy()
            fut = coords[i + t_obs:i + window].copy()
            neighbors = []
            for k in range(t_obs):
                frame = int(frames[i + k])
                others = [(pid, xy) for pid, xy in sorted(by_frame[frame].items())
                          if pid != ped_id]
                if len(others) > max_neighbors:
                    self_pos = obs[k]
                    others.sort(key=lambda item: (
                        (item[1][0] - self_pos[0]) ** 2 + (item[1][1] - self_pos[1]) ** 2,
                        item[0]))
                    others = others[:max_neighbors]
                neighbors.append(np.array([xy for _, xy in others], dtype=np.float64)
                                 .reshape(-1, 2))
            samples.append(SequenceSample(
                ped_id=ped_id, obs=obs, fut=fut, neighbors=neighbors,
                scene_id=scene_id, start_frame=int(frames[i])))
    return samples


def normalize(sample):
    """Translate so the last observed position sits at the origin."""
    if sample.norm_rotation != 0.0:
        raise DataError("normalize expects an unrotated sample")
    offset = sample.obs[-1].copy()
    out = sample.copy()
    out.obs = out.obs - offset
    out.fut = out.fut - offset
    out.neighbors = [n - offset for n in out.neighbors]
    out.norm_offset = sample.norm_offset + offset
    return out


def _rot(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def denormalize_points(points, norm_offset, norm_rotation):
    """Map normalized coordinates back to raw world coordinates."""
    pts = np.asarray(points, dtype=np.float64)
    if norm_rotation != 0.0:
        pts = pts @ _rot(norm_rotation)
    return pts + np.asarray(norm_offset, dtype=np.float64)


def denormalize(sample):
    out = sample.copy()
    out.obs = denormalize_points(out.obs, sample.norm_offset, sample.norm_rotation)
    out.fut = denormalize_points(out.fut, sample.norm_offset, sample.norm_rotation)
    out.neighbors = [denormalize_points(n, sample.norm_offset, sample.norm_rotation)
                     for n in out.neighbors]
    out.norm_offset = np.zeros(2)
    out.norm_rotation = 0.0
    return out


def rotate_augment(sample, grid, angle):
    """Rotate a normalized sample about the origin and resample its grid.

    The grid rotates about the pedestrian's world position (norm_offset) so
    crops taken at the origin stay aligned with the rotated trajectory.
    """
    rot_t = _rot(angle).T
    out = sample.copy()
    out.obs = out.obs @ rot_t
    out.fut = out.fut @ rot_t
    out.neighbors = [n @ rot_t for n in out.neighbors]
    out.norm_rotation = sample.norm_rotation + angle
    new_grid = rotate_grid(grid, angle, center=sample.norm_offset) if angle != 0.0 else grid
    return out, new_grid
