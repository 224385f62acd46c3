"""Command line: synth, train, eval, predict, ablate, increment-study.

Every command resolves a RunConfig (defaults <- --config file <- flags),
writes it with input hashes into the run directory, and exits with the
documented status codes (0 ok, 2 config, 3 data, 4 numeric, 5 incompatibility).
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .dataio.records import parse_trajectory_file, write_trajectory_file
from .dataio.grids import parse_grid_file, write_grid_file
from .dataio.samples import SequenceSample, denormalize_points, normalize
from .dataio.splits import SplitPlan, load_dataset
from .dataio.synth import synth_dataset
from .errors import CompatibilityError, ConfigError, DataError, NapError
from .evaluation import MetricsReport, evaluate_split, heatmap, increment_study
from .model import NapModel, VARIANTS, forecast
from .numeric.rng import substream
from .runconfig import RunConfig, load_runconfig, parse_steps, serialize_runconfig
from .train import fit


def _hash_file(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_run_dir(out_dir, rc, inputs=()):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(serialize_runconfig(rc), encoding="utf-8")
    lines = [f"{_hash_file(p)}  {Path(p).name}" for p in sorted(inputs, key=str)]
    (out / "inputs.txt").write_text("\n".join(lines) + "\n" if lines else "",
                                    encoding="utf-8")
    return out


def _data_files(data_dir):
    root = Path(data_dir)
    return sorted(list(root.glob("*.txt")) + list(root.glob("*.grid")))


def _split_for(dataset, rc):
    ids = dataset.scene_ids()
    test = rc.test_scene or ids[-1]
    if test not in ids:
        raise DataError(f"test scene '{test}' not in dataset (have {ids})")
    train = tuple(s for s in ids if s != test)
    return SplitPlan(train, test)


def _figures_dir(out):
    fig = Path(out) / "figures"
    fig.mkdir(exist_ok=True)
    return fig


# -- commands -------------------------------------------------------------------


def cmd_synth(rc):
    out = _write_run_dir(rc.out_dir or "data", rc)
    total = 0
    for i in range(rc.n_scenes):
        sid = f"synth{i}"
        sd = synth_dataset(rc.seed + i, rc.n_peds, mix=rc.mix, noise=rc.noise,
                           scene_id=sid, span=rc.span)
        write_trajectory_file(sd.records, out / f"{sid}.txt",
                              behaviors=sd.behaviors, header="frame_id ped_id x y")
        write_grid_file(sd.grid, out / f"{sid}.grid")
        peds = len({r.ped_id for r in sd.records})
        total += len(sd.records)
        print(f"{sid}: peds={peds} records={len(sd.records)}")
    print(f"wrote {rc.n_scenes} scenes, {total} records -> {out}")
    return 0


def cmd_train(rc):
    dataset = load_dataset(rc.data_dir, t_obs=rc.model.t_obs, t_pred=rc.model.t_pred)
    split = _split_for(dataset, rc)
    out = _write_run_dir(rc.out_dir or "runs/train", rc, _data_files(rc.data_dir))
    model = NapModel(rc.model, seed=rc.seed)
    model, log = fit(model, dataset, rc.train, split=split)
    meta = {"train_scenes": ",".join(split.train_scenes),
            "test_scene": split.test_scene}
    save_checkpoint(model, out / "checkpoint.ckpt", meta=meta)
    (out / "trainlog.txt").write_text(log.to_text(), encoding="utf-8")
    if log.entries:
        from .figures import loss_curve_figure
        loss_curve_figure(log, _figures_dir(out) / "loss.png")
        last = log.entries[-1]
        print(f"epoch {last.epoch}: loss {last.loss:.6f} grad_norm {last.grad_norm:.6f}")
    print(f"checkpoint -> {out / 'checkpoint.ckpt'}")
    return 0


def _write_report(out, report, stem="metrics"):
    (out / "report.txt").write_text(report.to_text(), encoding="utf-8")
    for method in sorted(report.methods):
        name = method.replace("/", "-")
        (out / f"{stem}_{name}.csv").write_text(report.to_csv(method),
                                                encoding="utf-8")
    from .figures import metrics_figure
    metrics_figure(report, _figures_dir(out) / f"{stem}.png")


def cmd_eval(rc):
    model = load_checkpoint(rc.checkpoint)
    if "tpred" in getattr(rc, "explicit", ()) and rc.model.t_pred != model.config.t_pred:
        raise CompatibilityError(
            f"--tpred {rc.model.t_pred} does not match the checkpoint's "
            f"t_pred={model.config.t_pred}")
    dataset = load_dataset(rc.data_dir, t_obs=model.config.t_obs,
                           t_pred=model.config.t_pred)
    split = _split_for(dataset, rc)
    trained_on = [s for s in getattr(model, "meta", {}).get("train_scenes", "").split(",")
                  if s]
    if split.test_scene in trained_on and not rc.allow_train_eval:
        raise ConfigError(f"scene '{split.test_scene}' was a training scene for this "
                          f"checkpoint; pass --allow-train-eval to evaluate it anyway")
    inputs = _data_files(rc.data_dir) + [Path(rc.checkpoint)]
    out = _write_run_dir(rc.out_dir or "runs/eval", rc, inputs)
    report = evaluate_split(model, dataset, split, k=rc.k, seed=rc.seed,
                            allow_train_eval=rc.allow_train_eval)
    _write_report(out, report)
    for method in sorted(report.methods):
        a, f = report.methods[method].average()
        print(f"{method}: ade {a:.4f} fde {f:.4f}")
    return 0


def _track_to_sample(records, t_obs, t_pred):
    """Build a predict-time sample from a raw track file.

    The target is the pedestrian with the most records (ties: smallest id);
    everyone else contributes neighbor coordinates on the shared frames.
    """
    by_ped = {}
    for r in records:
        by_ped.setdefault(r.ped_id, []).append(r)
    if not by_ped:
        raise DataError("track file holds no records")
    target = max(sorted(by_ped), key=lambda p: len(by_ped[p]))
    track = sorted(by_ped[target], key=lambda r: r.frame_id)
    if len(track) < t_obs:
        raise DataError(f"track for ped {target} has {len(track)} points; "
                        f"need at least {t_obs}")
    window = track[-t_obs:]
    frames = [r.frame_id for r in window]
    obs = np.array([[r.x, r.y] for r in window])
    neighbors = []
    for f in frames:
        pts = [[r.x, r.y] for pid in sorted(by_ped) if pid != target
               for r in by_ped[pid] if r.frame_id == f]
        neighbors.append(np.array(pts).reshape(-1, 2))
    return SequenceSample(ped_id=target, obs=obs, fut=np.zeros((t_pred, 2)),
                          neighbors=neighbors, scene_id="track",
                          start_frame=frames[0])


def cmd_predict(rc):
    model = load_checkpoint(rc.checkpoint)
    cfg = model.config
    records = parse_trajectory_file(rc.track)
    sample = _track_to_sample(records, cfg.t_obs, cfg.t_pred)
    grid = None
    if cfg.uses_scene:
        if not rc.grid:
            raise ConfigError("this checkpoint needs a scene grid (--grid)")
        grid = parse_grid_file(rc.grid)
    steps = parse_steps(rc.steps, cfg.t_pred)
    inputs = [Path(rc.track), Path(rc.checkpoint)] + ([Path(rc.grid)] if rc.grid else [])
    out = _write_run_dir(rc.out_dir or "runs/predict", rc, inputs)

    ns = normalize(sample)
    rng = substream(rc.seed, "predict")
    fset = forecast(ns, model, k=rc.k, rng=rng, grid=grid, steps=steps)
    world = [denormalize_points(traj, fset.norm_offset, fset.norm_rotation)
             for traj in fset.samples]

    lines = ["# sample step x y"]
    for ki, traj in enumerate(world):
        for s in fset.steps:
            lines.append(f"{ki} {s} {traj[s - 1][0]:.6f} {traj[s - 1][1]:.6f}")
    (out / "forecast.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")

    from .figures import forecast_figure
    forecast_figure(sample.obs, world, _figures_dir(out) / "forecast.png",
                    steps=fset.steps)
    if rc.heatmap:
        pts = np.concatenate([t[[s - 1 for s in fset.steps]] for t in world])
        if grid is not None:
            origin, cell, hw = grid.origin, grid.cell_size, (grid.height, grid.width)
        else:
            cell = 0.25
            origin = np.floor(pts.min(axis=0) / cell) * cell - 2 * cell
            hi = pts.max(axis=0)
            hw = (int(np.ceil((hi[1] - origin[1]) / cell)) + 2,
                  int(np.ceil((hi[0] - origin[0]) / cell)) + 2)
        world_set = replace(fset, samples=np.stack(world))
        hm = heatmap(world_set, origin, cell, hw)
        (out / "heatmap.grid").write_text(hm.to_text(), encoding="utf-8")
        from .figures import heatmap_figure
        heatmap_figure(hm, _figures_dir(out) / "heatmap.png", obs=sample.obs)
    print(f"wrote {len(world)} forecasts ({len(fset.steps)} steps each) -> "
          f"{out / 'forecast.txt'}")
    return 0


def cmd_ablate(rc):
    dataset = load_dataset(rc.data_dir, t_obs=rc.model.t_obs, t_pred=rc.model.t_pred)
    split = _split_for(dataset, rc)
    inputs = _data_files(rc.data_dir)
    out = _write_run_dir(rc.out_dir or "runs/ablate", rc, inputs)
    data_hash = hashlib.sha256(
        b"".join(_hash_file(p).encode() for p in inputs)).hexdigest()[:12]
    print(f"data hash {data_hash} (shared by all variants)")

    report = MetricsReport()
    try:
        for variant in ("p", "iss", "isg", "isc"):
            model = NapModel(replace(rc.model, variant=variant), seed=rc.seed)
            model, _ = fit(model, dataset, rc.train, split=split)
            sub = evaluate_split(model, dataset, split, k=1, seed=rc.seed,
                                 method=f"nap-{variant}", with_baselines=False,
                                 allow_train_eval=rc.allow_train_eval)
            report.merge(sub)
            a, f = sub.methods[f"nap-{variant}"].average()
            print(f"nap-{variant}: ade {a:.4f} fde {f:.4f}")
            _write_report(out, report, stem="ablation")
    except Exception:
        if report.methods:
            _write_report(out, report, stem="ablation")
        raise
    return 0


def cmd_increment_study(rc):
    inputs = _data_files(rc.data_dir)
    out = _write_run_dir(rc.out_dir or "runs/increment", rc, inputs)
    results = {8: {}, 12: {}}
    for t_pred in (8, 12):
        dataset = load_dataset(rc.data_dir, t_obs=rc.model.t_obs, t_pred=t_pred)
        split = _split_for(dataset, rc)
        for decoder, method in (("nar", "nap"), ("ar", "ar-reference")):
            cfg = replace(rc.model, t_pred=t_pred, decoder=decoder, variant="full",
                          multimodal=False)
            model = NapModel(cfg, seed=rc.seed)
            model, _ = fit(model, dataset, rc.train, split=split)
            rep = evaluate_split(model, dataset, split, k=1, seed=rc.seed,
                                 method=method, with_baselines=False,
                                 allow_train_eval=rc.allow_train_eval)
            results[t_pred][method] = rep.methods[method].average()
            a, f = results[t_pred][method]
            print(f"{method} t_pred={t_pred}: ade {a:.4f} fde {f:.4f}")
    table, rows = increment_study(results[8], results[12])
    (out / "increment.txt").write_text(table, encoding="utf-8")
    lines = ["method,ade_8,ade_12,ade_increment,fde_8,fde_12,fde_increment"]
    for method, r in sorted(rows.items()):
        lines.append(f"{method},{r['ade_8']:.6f},{r['ade_12']:.6f},"
                     f"{r['ade_increment']:.4f},{r['fde_8']:.6f},"
                     f"{r['fde_12']:.6f},{r['fde_increment']:.4f}")
    (out / "increment.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(table, end="")
    return 0


# -- argument plumbing ------------------------------------------------------------


def _common_flags(p):
    p.add_argument("--config", default=None, help="run config file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--threads", type=int, default=None,
                   help="worker cap (results never depend on it)")


def _parser():
    parser = argparse.ArgumentParser(prog="nap",
                                     description="non-autoregressive trajectory prediction")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic scenes")
    _common_flags(p)
    p.add_argument("--n-peds", type=int, default=None)
    p.add_argument("--scenes", type=int, default=None)
    p.add_argument("--mix", default=None, help="'mixed', 'linear', or weights a:b:c")
    p.add_argument("--noise", type=float, default=None)
    p.add_argument("--span", type=int, default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a model")
    _common_flags(p)
    p.add_argument("--data", default=None)
    p.add_argument("--variant", choices=VARIANTS, default=None)
    p.add_argument("--tpred", type=int, choices=(8, 12), default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--test-scene", default=None)
    p.add_argument("--multimodal", action="store_true", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    _common_flags(p)
    p.add_argument("checkpoint")
    p.add_argument("--data", default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--tpred", type=int, choices=(8, 12), default=None)
    p.add_argument("--test-scene", default=None)
    p.add_argument("--allow-train-eval", action="store_true", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="forecast from an observed track")
    _common_flags(p)
    p.add_argument("checkpoint")
    p.add_argument("track", help="trajectory file with the observed track")
    p.add_argument("--grid", default=None, help="scene grid file")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--steps", default=None, help="'all' or 1-based list like 4,8,12")
    p.add_argument("--heatmap", action="store_true", default=None)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("ablate", help="train and compare the four ablation variants")
    _common_flags(p)
    p.add_argument("--data", default=None)
    p.add_argument("--tpred", type=int, choices=(8, 12), default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--test-scene", default=None)
    p.add_argument("--allow-train-eval", action="store_true", default=None)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("increment-study", help="error growth from t_pred 8 to 12")
    _common_flags(p)
    p.add_argument("--data", default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--test-scene", default=None)
    p.add_argument("--allow-train-eval", action="store_true", default=None)
    p.set_defaults(func=cmd_increment_study)

    return parser


def _resolve(args):
    rc = RunConfig()
    if args.config:
        rc = load_runconfig(args.config, base=rc)

    def take(name, current):
        value = getattr(args, name, None)
        return current if value is None else value

    rc.data_dir = take("data", rc.data_dir)
    rc.out_dir = take("out", rc.out_dir)
    rc.test_scene = take("test_scene", rc.test_scene)
    rc.k = take("k", rc.k)
    rc.steps = take("steps", rc.steps)
    rc.threads = take("threads", rc.threads)
    rc.allow_train_eval = bool(take("allow_train_eval", rc.allow_train_eval))
    rc.heatmap = bool(take("heatmap", rc.heatmap))
    rc.n_peds = take("n_peds", rc.n_peds)
    rc.n_scenes = take("scenes", rc.n_scenes)
    rc.mix = take("mix", rc.mix)
    rc.noise = take("noise", rc.noise)
    rc.span = take("span", rc.span)
    rc.checkpoint = take("checkpoint", rc.checkpoint)
    rc.track = take("track", rc.track)
    rc.grid = take("grid", rc.grid)
    rc.explicit = {name for name in ("tpred", "variant", "epochs", "k")
                   if getattr(args, name, None) is not None}

    model_kw = {}
    if getattr(args, "variant", None) is not None:
        model_kw["variant"] = args.variant
    if getattr(args, "tpred", None) is not None:
        model_kw["t_pred"] = args.tpred
    if getattr(args, "multimodal", None):
        model_kw["multimodal"] = True
    if model_kw:
        rc.model = replace(rc.model, **model_kw)
    train_kw = {}
    if getattr(args, "epochs", None) is not None:
        train_kw["epochs"] = args.epochs
    if args.seed is not None:
        rc.seed = args.seed
        train_kw["seed"] = args.seed
    if train_kw:
        rc.train = replace(rc.train, **train_kw)

    if rc.k < 1:
        raise ConfigError("--k must be >= 1")
    if rc.threads < 1:
        raise ConfigError("--threads must be >= 1")
    return rc


def main(argv=None):
    try:
        args = _parser().parse_args(argv)
        rc = _resolve(args)
        return args.func(rc)
    except NapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
