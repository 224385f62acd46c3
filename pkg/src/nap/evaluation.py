"""ADE/FDE metrics, best-of-K protocol, reports, baselines, heatmap export."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, ShapeError
from .dataio.samples import denormalize_points, normalize
from .model import forecast
from .numeric.rng import substream


def ade(pred, gt):
    """Mean Euclidean distance over all predicted steps."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape or pred.ndim != 2 or pred.shape[1] != 2:
        raise ShapeError(f"ade shapes {pred.shape} vs {gt.shape}")
    return float(np.mean(np.linalg.norm(pred - gt, axis=1)))


def fde(pred, gt):
    """Euclidean distance at the final predicted step."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape or pred.ndim != 2 or pred.shape[1] != 2:
        raise ShapeError(f"fde shapes {pred.shape} vs {gt.shape}")
    return float(np.linalg.norm(pred[-1] - gt[-1]))


def best_of_k(forecasts, gt):
    """(min ADE, min FDE) over the K samples, minimized independently."""
    samples = forecasts.samples if hasattr(forecasts, "samples") else np.asarray(forecasts)
    if len(samples) == 0:
        raise ShapeError("best_of_k needs at least one sample")
    ades = [ade(s, gt) for s in samples]
    fdes = [fde(s, gt) for s in samples]
    return min(ades), min(fdes)


def error_increment(e8, e12):
    """Relative error increase in percent when t_pred grows from 8 to 12."""
    if e8 == 0:
        raise ConfigError("error increment undefined for a zero short-horizon error")
    return (e12 - e8) / e8 * 100.0


# -- reports -----------------------------------------------------------------

@dataclass
class MethodTable:
    method: str
    mode: str              # "single" or "best-of-K"
    k: int
    t_pred: int
    rows: dict = field(default_factory=dict)   # scene -> (ade, fde)

    def average(self):
        if not self.rows:
            raise DataError(f"method '{self.method}' has no scene rows")
        arr = np.array([self.rows[s] for s in sorted(self.rows)])
        return float(arr[:, 0].mean()), float(arr[:, 1].mean())


@dataclass
class MetricsReport:
    methods: dict = field(default_factory=dict)   # name -> MethodTable

    def add_row(self, method, scene, ade_v, fde_v, mode="single", k=1, t_pred=12):
        table = self.methods.get(method)
        if table is None:
            table = MethodTable(method, mode, k, t_pred)
            self.methods[method] = table
        if (table.mode, table.k, table.t_pred) != (mode, k, t_pred):
            raise ConfigError(f"method '{method}' mixes eval protocols")
        table.rows[scene] = (float(ade_v), float(fde_v))

    def merge(self, other):
        for name, table in other.methods.items():
            for scene, (a, f) in sorted(table.rows.items()):
                self.add_row(name, scene, a, f, mode=table.mode, k=table.k,
                             t_pred=table.t_pred)
        return self

    def scenes(self):
        out = set()
        for table in self.methods.values():
            out |= set(table.rows)
        return sorted(out)

    def to_text(self):
        """Aligned table: scene rows + Average row, one "ade / fde" column per method."""
        names = sorted(self.methods)
        scenes = self.scenes()
        headers = ["scene"] + [f"{n} ({self.methods[n].mode}, K={self.methods[n].k}, "
                               f"Tpred={self.methods[n].t_pred})" for n in names]
        rows = []
        for scene in scenes:
            row = [scene]
            for n in names:
                pair = self.methods[n].rows.get(scene)
                row.append("-" if pair is None else f"{pair[0]:.2f} / {pair[1]:.2f}")
            rows.append(row)
        avg_row = ["average"]
        for n in names:
            a, f = self.methods[n].average()
            avg_row.append(f"{a:.2f} / {f:.2f}")
        rows.append(avg_row)
        widths = [max(len(r[i]) for r in [headers] + rows) for i in range(len(headers))]
        lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip()]
        lines.append("  ".join("-" * w for w in widths))
        for r in rows:
            lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
        return "\n".join(lines) + "\n"

    def to_csv(self, method):
        """Delimited rows "scene,ade,fde,mode,K,T_pred" for one method."""
        table = self.methods[method]
        lines = ["scene,ade,fde,mode,K,T_pred"]
        for scene in sorted(table.rows):
            a, f = table.rows[scene]
            lines.append(f"{scene},{a:.6f},{f:.6f},{table.mode},{table.k},{table.t_pred}")
        a, f = table.average()
        lines.append(f"average,{a:.6f},{f:.6f},{table.mode},{table.k},{table.t_pred}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text, method):
        report = cls()
        lines = [l for l in text.splitlines() if l.strip()]
        if not lines or lines[0] != "scene,ade,fde,mode,K,T_pred":
            raise DataError("bad metrics CSV header")
        for line in lines[1:]:
            parts = line.split(",")
            if len(parts) != 6:
                raise DataError(f"bad metrics CSV row: {line!r}")
            scene, a, f, mode, k, t_pred = parts
            if scene == "average":
                continue
            report.add_row(method, scene, float(a), float(f), mode=mode,
                           k=int(k), t_pred=int(t_pred))
        return report


# -- baselines ----------------------------------------------------------------

def constant_position_pred(sample):
    return np.tile(sample.obs[-1], (sample.t_pred, 1))


def constant_velocity_pred(sample):
    v = sample.obs[-1] - sample.obs[-2]
    steps = np.arange(1, sample.t_pred + 1)[:, None]
    return sample.obs[-1] + steps * v


BASELINES = {
    "constant-position": constant_position_pred,
    "constant-velocity": constant_velocity_pred,
}


# -- split evaluation -----------------------------------------------------------

def evaluate_samples(model, samples, grid, k=1, seed=0, behaviors=None, subset=None):
    """Mean (ade, fde) of the model over samples; best-of-k when k > 1.

    subset filters by behavior tag (needs behaviors: ped_id -> tag).
    """
    if subset is not None:
        behaviors = behaviors or {}
        samples = [s for s in samples if behaviors.get(s.ped_id) == subset]
    if not samples:
        raise DataError("no samples to evaluate")
    ades, fdes = [], []
    for idx, s in enumerate(samples):
        ns = normalize(s)
        rng = substream(seed, "eval-eps", s.scene_id, idx) if k > 1 else None
        f = forecast(ns, model, k=k, rng=rng,
                     grid=grid if model.config.uses_scene else None)
        preds = np.stack([denormalize_points(p, f.norm_offset, f.norm_rotation)
                          for p in f.samples])
        a, d = best_of_k(preds, s.fut)
        ades.append(a)
        fdes.append(d)
    return float(np.mean(ades)), float(np.mean(fdes))


def evaluate_baselines(samples):
    """Mean (ade, fde) per closed-form baseline on raw samples."""
    out = {}
    for name, fn in BASELINES.items():
        ades = [ade(fn(s), s.fut) for s in samples]
        fdes = [fde(fn(s), s.fut) for s in samples]
        out[name] = (float(np.mean(ades)), float(np.mean(fdes)))
    return out


def evaluate_split(model, dataset, split, k=1, seed=0, method="nap",
                   allow_train_eval=False, with_baselines=True):
    """Evaluate a trained model on its split's test scene -> MetricsReport."""
    if dataset.t_pred != model.config.t_pred or dataset.t_obs != model.config.t_obs:
        raise ConfigError("dataset windows do not match the model's t_obs/t_pred")
    scene = split.test_scene
    if not allow_train_eval and scene in split.train_scenes:
        raise ConfigError(f"scene '{scene}' is a training scene")
    samples = dataset.test_samples(split)
    if not samples:
        raise DataError(f"no samples in test scene '{scene}'")
    grid = dataset.scenes[scene].grid
    mode = f"best-of-{k}" if k > 1 else "single"
    report = MetricsReport()
    a, f = evaluate_samples(model, samples, grid, k=k, seed=seed)
    report.add_row(method, scene, a, f, mode=mode, k=k, t_pred=model.config.t_pred)
    if with_baselines:
        for name, (ba, bf) in evaluate_baselines(samples).items():
            report.add_row(name, scene, ba, bf, mode="single", k=1,
                           t_pred=model.config.t_pred)
    return report


def increment_study(results_8, results_12):
    """Error-increment table from per-method average (ade, fde) at both horizons.

    results_*: method -> (ade, fde). Returns text table plus the raw numbers,
    one row per method present at both horizons.
    """
    rows = {}
    for method in sorted(set(results_8) & set(results_12)):
        a8, f8 = results_8[method]
        a12, f12 = results_12[method]
        rows[method] = {
            "ade_8": a8, "ade_12": a12, "ade_increment": error_increment(a8, a12),
            "fde_8": f8, "fde_12": f12, "fde_increment": error_increment(f8, f12),
        }
    if not rows:
        raise DataError("increment study needs at least one shared method")
    headers = ["method", "ADE@8", "ADE@12", "ADE incr", "FDE@8", "FDE@12", "FDE incr"]
    body = []
    for method, r in rows.items():
        body.append([method, f"{r['ade_8']:.2f}", f"{r['ade_12']:.2f}",
                     f"{r['ade_increment']:.2f}%", f"{r['fde_8']:.2f}",
                     f"{r['fde_12']:.2f}", f"{r['fde_increment']:.2f}%"])
    widths = [max(len(row[i]) for row in [headers] + body) for i in range(len(headers))]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip(),
             "  ".join("-" * w for w in widths)]
    for row in body:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    return "\n".join(lines) + "\n", rows


# -- heatmaps -------------------------------------------------------------------

@dataclass
class HeatmapGrid:
    height: int
    width: int
    cell_size: float
    origin: np.ndarray
    counts: np.ndarray   # (H, W) point counts

    def total(self):
        return float(self.counts.sum())

    def to_text(self):
        lines = [f"{self.height} {self.width} {self.cell_size:.6f} "
                 f"{self.origin[0]:.6f} {self.origin[1]:.6f}"]
        for row in self.counts:
            lines.append(" ".join(f"{v:.6f}" for v in row))
        return "\n".join(lines) + "\n"


def heatmap(forecasts, origin, cell_size, hw):
    """Bin every decoded predicted point of every sample into grid cells.

    Points are taken in the forecast's own (normalized) frame unless the
    caller de-normalizes first; out-of-range points clip to the border so
    total mass is exactly K * len(decoded steps).
    """
    h, w = hw
    if h <= 0 or w <= 0 or cell_size <= 0:
        raise DataError("degenerate heatmap geometry")
    origin = np.asarray(origin, dtype=np.float64)
    counts = np.zeros((h, w))
    steps0 = [s - 1 for s in forecasts.steps]
    for traj in forecasts.samples:
        pts = traj[steps0]
        cols = np.clip(np.floor((pts[:, 0] - origin[0]) / cell_size).astype(int), 0, w - 1)
        rows = np.clip(np.floor((pts[:, 1] - origin[1]) / cell_size).astype(int), 0, h - 1)
        np.add.at(counts, (rows, cols), 1.0)
    return HeatmapGrid(height=h, width=w, cell_size=float(cell_size),
                       origin=origin, counts=counts)
