"""Trajectory/grid parsing, windowing, normalization, augmentation, synthesis."""

from .records import FrameRecord, parse_trajectory_file, read_behavior_tags, write_trajectory_file
from .grids import SceneGrid, crop_scene, parse_grid_file, write_grid_file
from .samples import (
    SequenceSample,
    denormalize,
    denormalize_points,
    normalize,
    rotate_augment,
    window_samples,
)
from .synth import SynthData, synth_dataset
from .splits import Dataset, SceneData, SplitPlan, leave_one_out, load_dataset

__all__ = [
    "FrameRecord",
    "parse_trajectory_file",
    "read_behavior_tags",
    "write_trajectory_file",
    "SceneGrid",
    "crop_scene",
    "parse_grid_file",
    "write_grid_file",
    "SequenceSample",
    "window_samples",
    "normalize",
    "denormalize",
    "denormalize_points",
    "rotate_augment",
    "SynthData",
    "synth_dataset",
    "Dataset",
    "SceneData",
    "SplitPlan",
    "leave_one_out",
    "load_dataset",
]
