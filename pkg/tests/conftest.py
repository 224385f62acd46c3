"""Shared fixtures: tiny configs, toy scenes, and small synthetic datasets."""

import numpy as np
import pytest

from nap.dataio.grids import SceneGrid
from nap.dataio.samples import SequenceSample
from nap.dataio.splits import Dataset, SceneData, SplitPlan
from nap.dataio.synth import synth_dataset
from nap.dataio.samples import window_samples
from nap.model import NapConfig


def tiny_config(**kw):
    """Small dims so gradient checks and forecasts stay fast."""
    base = dict(d_emb=4, d_h=4, d_g=4, d_s=4, d_c=4, d_p=4, d_z=3, d_b=6,
                t_obs=4, t_pred=3, crop_h=8, crop_w=8)
    base.update(kw)
    return NapConfig(**base)


def toy_grid(scene_id="toy", h=16, w=16, cell=0.5, origin=(0.0, 0.0)):
    data = np.zeros((1, h, w))
    data[0, h // 2:h // 2 + 3, w // 2:w // 2 + 3] = 1.0
    return SceneGrid(scene_id=scene_id, height=h, width=w, channels=1,
                     cell_size=cell, origin=np.array(origin), data=data)


def toy_sample(rng, t_obs=4, t_pred=3, n_neighbors=2, scene_id="toy", ped_id=1):
    start = rng.uniform(1.0, 7.0, size=2)
    vel = rng.uniform(-0.4, 0.4, size=2)
    steps = np.arange(t_obs + t_pred)[:, None]
    path = start + steps * vel + rng.normal(0, 0.03, size=(t_obs + t_pred, 2))
    neighbors = [rng.uniform(0.0, 8.0, size=(int(rng.integers(0, n_neighbors + 1)), 2))
                 for _ in range(t_obs)]
    return SequenceSample(ped_id=ped_id, obs=path[:t_obs], fut=path[t_obs:],
                          neighbors=neighbors, scene_id=scene_id)


def small_dataset(seed=100, n_scenes=3, n_peds=6, noise=0.05, t_obs=8, t_pred=12):
    scenes = {}
    for i in range(n_scenes):
        sid = f"synth{i}"
        sd = synth_dataset(seed + i, n_peds, noise=noise, scene_id=sid)
        samples = window_samples(sd.records, t_obs=t_obs, t_pred=t_pred, scene_id=sid)
        scenes[sid] = SceneData(sid, sd.records, sd.grid, samples,
                                behaviors=sd.behaviors)
    return Dataset(scenes=scenes, t_obs=t_obs, t_pred=t_pred)


@pytest.fixture(scope="session")
def mini_dataset():
    return small_dataset()


@pytest.fixture(scope="session")
def mini_split(mini_dataset):
    ids = mini_dataset.scene_ids()
    return SplitPlan(tuple(ids[:-1]), ids[-1])
