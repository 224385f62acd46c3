"""Synthetic crowd generator: a desk-scale stand-in for street datasets.

All emitted coordinates lie on a 1/64 m lattice, so "%.6f" serialization is
exact and file round trips are lossless. One frame = 0.4 s.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from ..numeric.rng import substream
from .grids import SceneGrid
from .records import FrameRecord

UNIT = 1.0 / 64.0
BEHAVIORS = ("linear", "turn", "avoid")


@dataclass
class SynthData:
    records: list
    grid: SceneGrid
    behaviors: dict = field(default_factory=dict)  # ped_id -> behavior tag


def _parse_mix(mix):
    if mix is None:
        return {"linear": 1.0, "turn": 1.0, "avoid": 1.0}
    if isinstance(mix, str):
        if mix == "mixed":
            return {"linear": 1.0, "turn": 1.0, "avoid": 1.0}
        weights = {}
        for part in mix.split(","):
            if ":" in part:
                name, w = part.split(":", 1)
                weights[name.strip()] = float(w)
            else:
                weights[part.strip()] = 1.0
        mix = weights
    bad = set(mix) - set(BEHAVIORS)
    if bad:
        raise ConfigError(f"unknown behaviors in mix: {sorted(bad)}")
    if not mix or all(w <= 0 for w in mix.values()):
        raise ConfigError("behavior mix has no positive weights")
    return {k: float(v) for k, v in mix.items() if v > 0}


def _behavior_counts(mix, n_peds):
    weights = _parse_mix(mix)
    total = sum(weights.values())
    counts = {b: int(round(n_peds * weights.get(b, 0.0) / total)) for b in BEHAVIORS}
    # avoid walkers come in pairs
    if counts["avoid"] % 2:
        counts["avoid"] += 1 if weights.get("avoid", 0) else -1
    drift = n_peds - sum(counts.values())
    for b in BEHAVIORS:
        if drift == 0:
            break
        if weights.get(b, 0) and b != "avoid":
            counts[b] = max(0, counts[b] + drift)
            drift = 0
    return counts


def _snap(v):
    return np.round(np.asarray(v, dtype=np.float64) / UNIT) * UNIT


def _draw_velocity(rng):
    """Dyadic per-frame velocity with speed in [0.32, 0.60] m/frame."""
    for _ in range(1000):
        v = rng.integers(-38, 39, size=2) * UNIT
        speed = float(np.hypot(*v))
        if 0.32 <= speed <= 0.60:
            return v
    return np.array([26 * UNIT, 0.0])


def _path_inside(path, lo=0.5, hi=15.5):
    return path.min() >= lo and path.max() <= hi


def _linear_path(rng, dur):
    for _ in range(200):
        p0 = rng.integers(int(2.0 / UNIT), int(14.0 / UNIT) + 1, size=2) * UNIT
        v = _draw_velocity(rng)
        t = np.arange(dur)[:, None]
        path = p0 + t * v
        if _path_inside(path):
            return path
    p0 = np.array([2.0, 8.0])
    return p0 + np.arange(dur)[:, None] * np.array([24 * UNIT, 0.0])


def _turn_path(rng, dur):
    for _ in range(200):
        p0 = rng.integers(int(3.0 / UNIT), int(13.0 / UNIT) + 1, size=2) * UNIT
        v1 = _draw_velocity(rng)
        sign = 1.0 if rng.integers(0, 2) else -1.0
        v2 = np.array([-sign * v1[1], sign * v1[0]])  # exact 90-degree turn
        k = int(rng.integers(10, dur - 10))
        path = np.empty((dur, 2))
        path[0] = p0
        for t in range(1, dur):
            path[t] = path[t - 1] + (v1 if t <= k else v2)
        if _path_inside(path):
            return path
    path = _linear_path(rng, dur)
    return path


def _avoid_pair(rng, dur, lane_y):
    """Two walkers closing head-on in one lane, dodging apart symmetrically."""
    vx = int(rng.integers(22, 29)) * UNIT  # 0.34..0.44 m/frame, keeps paths in-arena
    gap = 16 * UNIT                        # 0.25 m head-on lateral offset
    span = vx * (dur - 1)
    x_a0 = _snap(8.0 - span / 2.0)
    x_b0 = _snap(8.0 + span / 2.0)
    t = np.arange(dur, dtype=np.float64)
    xa = x_a0 + t * vx
    xb = x_b0 - t * vx
    t_star = dur // 2
    dodge = 4 * UNIT * np.maximum(0.0, 8.0 - np.abs(t - t_star))
    dodge = np.minimum(dodge, 32 * UNIT)
    ya = lane_y - dodge
    yb = lane_y + gap + dodge
    path_a = np.stack([xa, ya], axis=1)
    path_b = np.stack([xb, yb], axis=1)
    return path_a, path_b


def _make_grid(rng, scene_id, hw=(32, 32), cell_size=0.5):
    h, w = hw
    data = np.zeros((1, h, w))
    r0 = int(rng.integers(4, h - 12))
    c0 = int(rng.integers(4, w - 12))
    rh = int(rng.integers(5, 9))
    cw = int(rng.integers(5, 9))
    data[0, r0:r0 + rh, c0:c0 + cw] = 1.0
    return SceneGrid(scene_id, h, w, 1, cell_size, np.zeros(2), data)


def synth_dataset(seed, n_peds, mix=None, noise=0.0, scene_id="synth", span=60):
    """Generate a deterministic synthetic scene.

    Walkers follow one of three scripted behaviors (constant velocity,
    90-degree turn, pairwise head-on avoidance) at 0.4 s per frame inside a
    16 m x 16 m arena with one rectangular obstacle. noise adds seeded
    observation jitter, quantized to the 1/64 m lattice so files still
    round-trip exactly; noise=0 keeps constant-velocity walkers exact.
    """
    if n_peds < 0:
        raise ConfigError("n_peds must be >= 0")
    counts = _behavior_counts(mix, n_peds)
    rng = substream(seed, "synth", scene_id)
    grid = _make_grid(substream(seed, "synth-grid", scene_id), scene_id)

    paths = []  # (ped_id, start_frame, path, behavior)
    ped_id = 1
    for _ in range(counts["linear"]):
        dur = int(rng.integers(26, 41))
        start = int(rng.integers(0, span - dur + 1))
        paths.append((ped_id, start, _linear_path(rng, dur), "linear"))
        ped_id += 1
    for _ in range(counts["turn"]):
        dur = int(rng.integers(26, 41))
        start = int(rng.integers(0, span - dur + 1))
        paths.append((ped_id, start, _turn_path(rng, dur), "turn"))
        ped_id += 1
    lanes = [2.0, 4.5, 7.0, 9.5, 12.0, 14.0]
    for pair_idx in range(counts["avoid"] // 2):
        dur = int(rng.integers(30, 35))
        lane = lanes[pair_idx % len(lanes)]
        wave = pair_idx // len(lanes)
        start = min(wave * (dur + 4), span - dur)
        path_a, path_b = _avoid_pair(rng, dur, lane)
        paths.append((ped_id, start, path_a, "avoid"))
        paths.append((ped_id + 1, start, path_b, "avoid"))
        ped_id += 2

    records = []
    behaviors = {}
    for pid, start, path, tag in paths:
        behaviors[pid] = tag
        if noise > 0:
            jitter = substream(seed, "synth-noise", scene_id, pid) \
                .normal(0.0, noise * 64.0, size=path.shape).round() * UNIT
            path = path + jitter
        for t in range(path.shape[0]):
            records.append(FrameRecord(start + t, pid, float(path[t, 0]),
                                       float(path[t, 1])))
    records.sort(key=lambda r: (r.frame_id, r.ped_id))
    return SynthData(records=records, grid=grid, behaviors=behaviors)
