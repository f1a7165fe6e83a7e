"""Command-line entry point: ``occbody {synth,fit,eval,render,gradcheck}``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .body_model import BodyParams, forward, regress_keypoints3d
from .dataset import (
    ParameterPool,
    TEST_BODY,
    read_dataset,
    resolve_model,
    sample_seeds,
    synthesize,
    write_dataset,
)
from .errors import ConfigError, DatasetError, SchemaError
from .fitter import FitConfig, FitResult, fit, gradient_check
from .geometry import WeakPerspectiveCamera
from .losses import TERMS, LossWeights
from .metrics import metrics_to_csv, miou, mpjpe_pa, pve_pa, pve_t_sc
from .renderer import RasterSettings, render_silhouette, save_silhouette_png
from .synth import SynthConfig

WORKERS_ENV = "OCCBODY_WORKERS"
FITS_MANIFEST = "fits.json"


def _echo(command, config, seed):
    print(json.dumps({"command": command, "seed": seed, "config": config}, sort_keys=True,
                     default=str))
    sys.stdout.flush()


def _default_workers():
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _parse_terms(text):
    terms = tuple(t.strip() for t in text.split(",") if t.strip())
    bad = [t for t in terms if t not in TERMS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown loss terms {bad}; choose from {list(TERMS)}")
    if not terms:
        raise argparse.ArgumentTypeError("no loss terms given")
    return terms


def _load_json(path):
    with open(path) as f:
        return json.load(f)


def _synth_config(args, base: SynthConfig):
    changes = {}
    if getattr(args, "image_size", None):
        changes["image_size"] = tuple(args.image_size)
    if args.va is not None:
        changes["view_augmentation"] = args.va
    if args.ipoa is False:
        changes["occlusion_probability"] = 0.0
    elif args.ipoa and base.occlusion_probability == 0.0:
        changes["occlusion_probability"] = SynthConfig.occlusion_probability
    if args.occlusion_prob is not None:
        changes["occlusion_probability"] = args.occlusion_prob
    return base.replace(**changes) if changes else base


def _add_generation_flags(p):
    p.add_argument("--va", dest="va", action="store_true", default=None,
                   help="enable viewpoint augmentation")
    p.add_argument("--no-va", dest="va", action="store_false", help="disable viewpoint augmentation")
    p.add_argument("--ipoa", dest="ipoa", action="store_true", default=None,
                   help="enable inter-person occlusion")
    p.add_argument("--no-ipoa", dest="ipoa", action="store_false",
                   help="disable inter-person occlusion")
    p.add_argument("--occlusion-prob", type=float, default=None,
                   help="probability of compositing a second person")


def _load_pool(args, model):
    if args.pool:
        pool = ParameterPool.load(args.pool)
        if (pool.num_joints, pool.num_betas) != (model.num_joints, model.num_betas):
            raise SchemaError(
                f"pool dimensions ({pool.num_joints}, {pool.num_betas}) do not match the model "
                f"({model.num_joints}, {model.num_betas})")
        return pool
    return ParameterPool.random(model, args.pool_size, seed=args.pool_seed)


# ----------------------------------------------------------------------------
# subcommands


def cmd_synth(args):
    model = resolve_model(args.model, args.model_format)
    base = SynthConfig.from_dict(_load_json(args.config)) if args.config else SynthConfig()
    cfg = _synth_config(args, base)
    pool = _load_pool(args, model)
    _echo("synth", cfg.to_dict(), args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pool.save(out / "pool.json")
    model_ref = TEST_BODY if args.model == TEST_BODY else str(Path(args.model).resolve())
    seeds = sample_seeds(args.seed, args.count)
    samples = synthesize(model, pool, cfg, seeds, workers=args.workers)
    manifest = write_dataset(samples, out, cfg, model_ref=model_ref, pool_ref="pool.json")
    print(f"wrote {manifest.count} samples to {out}")
    return 0


def _fit_one(task):
    model, sample, cfg = task
    return fit(model, sample, cfg)


def cmd_fit(args):
    ds = read_dataset(args.dataset)
    model = ds.model
    base = FitConfig.from_dict(_load_json(args.config)) if args.config else FitConfig()
    changes = {"seed": args.seed}
    for name in ("terms", "max_iters", "lr", "optimizer", "init", "confidence_threshold"):
        v = getattr(args, name)
        if v is not None:
            changes[name] = v
    if args.use_occluder is not None:
        changes["use_occluder"] = args.use_occluder
    if args.learnable_weights:
        changes["weights"] = LossWeights(mode="learnable")
    cfg = base.replace(**changes)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dataset_dir = Path(args.dataset).resolve()
    synth_cfg = _synth_config(args, ds.config)
    regenerate = synth_cfg != ds.config
    _echo("fit", {"fit": cfg.to_dict(), "synth": synth_cfg.to_dict()}, args.seed)
    if regenerate:
        # generation variants: rebuild the targets from the recorded seeds
        if ds.manifest.pool is None:
            raise ConfigError("dataset has no recorded pool; cannot regenerate targets")
        pool = ParameterPool.load(dataset_dir / ds.manifest.pool)
        regen = out / "dataset"
        regen.mkdir(parents=True, exist_ok=True)
        pool.save(regen / "pool.json")
        samples = synthesize(model, pool, synth_cfg, ds.manifest.seeds, workers=args.workers)
        write_dataset(samples, regen, synth_cfg, model_ref=ds.manifest.model, pool_ref="pool.json")
        dataset_dir = regen.resolve()
        ds = read_dataset(dataset_dir, model)

    tasks = [(model, ds[i], cfg) for i in range(len(ds))]
    if args.workers > 1 and len(tasks) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=args.workers) as ex:
            results = list(ex.map(_fit_one, tasks))
    else:
        results = [_fit_one(t) for t in tasks]

    entries = []
    for entry, res in zip(ds.manifest.samples, results):
        name = f"fit_{entry['id']}.json"
        (out / name).write_text(res.to_json() + "\n")
        entries.append({"id": entry["id"], "result": name})
    fits = {"dataset": str(dataset_dir), "config": cfg.to_dict(), "seed": args.seed,
            "samples": entries}
    tmp = out / (FITS_MANIFEST + ".tmp")
    tmp.write_text(json.dumps(fits, sort_keys=True, indent=1, default=str) + "\n")
    os.replace(tmp, out / FITS_MANIFEST)
    print(f"fitted {len(entries)} samples into {out}")
    return 0


def evaluate_fits(results_dir, dataset_dir=None):
    """Metric rows ``(sample_id, metric, value)`` for a fit directory."""
    results_dir = Path(results_dir)
    path = results_dir / FITS_MANIFEST
    if not path.is_file():
        raise DatasetError(f"no {FITS_MANIFEST} in {results_dir}")
    fits = _load_json(path)
    ds = read_dataset(dataset_dir or fits["dataset"])
    model = ds.model
    by_id = {e["id"]: i for i, e in enumerate(ds.manifest.samples)}
    rows = []
    for entry in fits["samples"]:
        if entry["id"] not in by_id:
            raise DatasetError(f"fit result {entry['id']} has no matching dataset sample")
        sample = ds[by_id[entry["id"]]]
        res = FitResult.from_dict(_load_json(results_dir / entry["result"]))
        mesh, _ = forward(model, res.params)
        kp = regress_keypoints3d(model, mesh)
        settings = RasterSettings(sample.silhouette.shape)
        pred_sil = render_silhouette(mesh, res.camera, settings)
        gt_sil = render_silhouette(sample.gt_vertices, sample.gt_camera, settings, faces=model.faces)
        rows += [
            (entry["id"], "mpjpe_pa", mpjpe_pa(kp, sample.gt_joints3d)),
            (entry["id"], "pve_pa", pve_pa(mesh.vertices, sample.gt_vertices)),
            (entry["id"], "pve_t_sc", pve_t_sc(model, res.params.shape, sample.gt_params.shape)),
            (entry["id"], "miou", miou(pred_sil, gt_sil)),
        ]
    return rows


def cmd_eval(args):
    _echo("eval", {"results": args.results, "dataset": args.dataset}, None)
    rows = evaluate_fits(args.results, args.dataset)
    metrics_to_csv(rows, args.out)
    for metric in ("mpjpe_pa", "pve_pa", "pve_t_sc", "miou"):
        vals = [v for _, m, v in rows if m == metric]
        if vals:
            scale, unit = (1.0, "") if metric == "miou" else (1000.0, " mm")
            print(f"{metric}: {np.mean(vals) * scale:.3f}{unit} over {len(vals)} samples")
    print(f"wrote {args.out}")
    return 0


def cmd_render(args):
    model = resolve_model(args.model, args.model_format)
    d = _load_json(args.params)
    params = BodyParams.from_dict(d["params"] if "params" in d else d)
    mesh, _ = forward(model, params)
    size = tuple(args.image_size)
    if args.camera:
        cam = WeakPerspectiveCamera.from_dict(_load_json(args.camera))
    elif "camera" in d:
        cam = WeakPerspectiveCamera.from_dict(d["camera"])
    else:
        cam = framing_camera(mesh.vertices)
    _echo("render", {"camera": cam.to_dict(), "image_size": list(size), "sigma": args.sigma}, None)
    img = render_silhouette(mesh, cam, RasterSettings(size, args.sigma))
    save_silhouette_png(args.out, img)
    print(f"wrote {args.out}")
    return 0


def framing_camera(vertices, margin=1.2):
    """Weak camera centering ``vertices`` with the larger extent spanning ``2 / margin``."""
    lo, hi = vertices[:, :2].min(axis=0), vertices[:, :2].max(axis=0)
    s = 2.0 / (margin * max(float(np.max(hi - lo)), 1e-9))
    return WeakPerspectiveCamera(s, -s * 0.5 * (lo + hi))


def cmd_gradcheck(args):
    from .synth import generate_sample

    model = resolve_model(args.model, args.model_format)
    pool = ParameterPool.random(model, 8, seed=args.seed)
    cfg = SynthConfig(image_size=tuple(args.image_size), occlusion_probability=0.0)
    _echo("gradcheck", {"terms": list(args.terms), "synth": cfg.to_dict()}, args.seed)
    sample = generate_sample(model, pool, cfg, args.seed)
    rng = np.random.default_rng(args.seed)
    params = BodyParams(sample.gt_params.pose + rng.normal(0, 0.05, sample.gt_params.pose.shape),
                        sample.gt_params.shape + rng.normal(0, 0.1, model.num_betas))
    mesh, _ = forward(model, params)
    cam = framing_camera(mesh.vertices)
    rep = gradient_check(model, params, cam, sample, terms=args.terms)
    print(json.dumps({"max_rel_error": rep.max_rel_error, "worst_parameter": rep.worst_name}))
    return 0 if rep.max_rel_error <= args.tol else 1


# ----------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="occbody", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def model_flags(p):
        p.add_argument("--model", default=TEST_BODY,
                       help=f"model file, or '{TEST_BODY}' for the built-in figure")
        p.add_argument("--model-format", default="native", choices=("native", "smpl-npz"))

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    model_flags(p)
    p.add_argument("--pool", help="parameter pool JSON (default: random synthetic pool)")
    p.add_argument("--pool-size", type=int, default=200)
    p.add_argument("--pool-seed", type=int, default=0)
    p.add_argument("--config", help="SynthConfig JSON")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--image-size", type=int, nargs=2, metavar=("H", "W"))
    p.add_argument("--workers", type=int, default=_default_workers())
    _add_generation_flags(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fit", help="fit every sample of a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="FitConfig JSON")
    p.add_argument("--terms", type=_parse_terms, help="comma-separated loss terms, e.g. j2d,S")
    p.add_argument("--max-iters", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--optimizer", choices=("adam", "backtracking"))
    p.add_argument("--init", choices=("mean", "ground-truth"))
    p.add_argument("--confidence-threshold", type=float)
    p.add_argument("--use-occluder", action=argparse.BooleanOptionalAction, default=None,
                   help="ignore pixels covered by the recorded occluder (default: on)")
    p.add_argument("--learnable-weights", action="store_true",
                   help="optimize the per-term log variances")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=_default_workers())
    p.add_argument("--image-size", type=int, nargs=2, metavar=("H", "W"))
    _add_generation_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", help="score fits against their dataset, writing CSV")
    p.add_argument("--results", required=True)
    p.add_argument("--dataset", help="override the dataset recorded with the fits")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("render", help="render body parameters to a PNG silhouette")
    model_flags(p)
    p.add_argument("--params", required=True, help="BodyParams JSON or a fit result")
    p.add_argument("--camera", help="weak-perspective camera JSON")
    p.add_argument("--image-size", type=int, nargs=2, default=(256, 256), metavar=("H", "W"))
    p.add_argument("--sigma", type=float, default=0.7)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("gradcheck", help="finite-difference check of the fitting gradient")
    model_flags(p)
    p.add_argument("--terms", type=_parse_terms, default=("S", "j2d"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--image-size", type=int, nargs=2, default=(64, 64), metavar=("H", "W"))
    p.add_argument("--tol", type=float, default=1e-2)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError) as e:
        print(f"occbody {args.command}: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
