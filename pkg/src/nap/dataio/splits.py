"""Leave-one-out split plans and on-disk dataset loading."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from ..errors import DataError
from .grids import parse_grid_file
from .records import parse_trajectory_file, read_behavior_tags
from .samples import window_samples


@dataclass(frozen=True)
class SplitPlan:
    train_scenes: tuple
    test_scene: str

    def __post_init__(self):
        object.__setattr__(self, "train_scenes", tuple(sorted(self.train_scenes)))
        if self.test_scene in self.train_scenes:
            raise DataError(f"test scene '{self.test_scene}' appears in train scenes")
        if not self.train_scenes:
            raise DataError("split has no training scenes")


def leave_one_out(scene_ids):
    scenes = sorted(scene_ids)
    if len(scenes) < 2:
        raise DataError("leave-one-out needs at least 2 scenes")
    return [SplitPlan(tuple(s for s in scenes if s != test), test) for test in scenes]


@dataclass
class SceneData:
    scene_id: str
    records: list
    grid: object
    samples: list
    behaviors: dict = field(default_factory=dict)


@dataclass
class Dataset:
    scenes: dict
    t_obs: int
    t_pred: int

    def scene_ids(self):
        return sorted(self.scenes)

    def samples_for(self, scene_ids):
        out = []
        for sid in sorted(scene_ids):
            if sid not in self.scenes:
                raise DataError(f"unknown scene '{sid}'")
            out.extend(self.scenes[sid].samples)
        return out

    def train_samples(self, split):
        return self.samples_for(split.train_scenes)

    def test_samples(self, split):
        return self.samples_for([split.test_scene])


def load_dataset(root, t_obs=8, t_pred=12, stride=1, max_neighbors=16):
    """Load every <scene>.txt / <scene>.grid pair under a directory."""
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"dataset directory not found: {root}")
    reserved = ("config.txt", "inputs.txt")
    traj_files = sorted(p for p in root.glob("*.txt") if p.name not in reserved)
    if not traj_files:
        raise DataError(f"no trajectory files (*.txt) in {root}")
    scenes = {}
    for traj in traj_files:
        sid = traj.stem
        grid_path = root / f"{sid}.grid"
        if not grid_path.exists():
            raise DataError(f"missing grid file for scene '{sid}': {grid_path}")
        records = parse_trajectory_file(traj)
        grid = parse_grid_file(grid_path, scene_id=sid)
        samples = window_samples(records, t_obs=t_obs, t_pred=t_pred, stride=stride,
                                 scene_id=sid, max_neighbors=max_neighbors)
        scenes[sid] = SceneData(sid, records, grid, samples,
                                behaviors=read_behavior_tags(traj))
    return Dataset(scenes=scenes, t_obs=t_obs, t_pred=t_pred)
