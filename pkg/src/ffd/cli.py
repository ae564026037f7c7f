"""Command-line entry point: ``ffd {synth,train,infer,eval,gradcheck,bench}``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import kernels
from .checkpoint import Checkpoint, model_from_checkpoint
from .config import TrainConfig, load_config, toy_config
from .data import (Sample, load_dataset, read_image, read_manifest, save_dataset)
from .errors import ConfigError, DataError, NumericalError
from .geometry import BoxAbs
from .metrics import Detection, GroundTruth, coco_style_report
from .synth import SynthConfig, scene_to_sample, synthesize_scene

log = logging.getLogger("ffd")

EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4


def worker_count():
    try:
        return max(1, int(os.environ.get("FFD_THREADS", "1")))
    except ValueError as exc:
        raise ConfigError("FFD_THREADS must be an integer") from exc


def map_ordered(fn, items):
    n = worker_count()
    if n == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _write_json(path, obj):
    text = json.dumps(obj, indent=2, sort_keys=True)
    if path is None or str(path) == "-":
        print(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text + "\n")


def _resolve_config(args):
    cfg = load_config(args.config) if getattr(args, "config", None) else TrainConfig()
    if getattr(args, "toy", False) and not args.config:
        cfg = toy_config()
    import dataclasses
    if getattr(args, "seed", None) is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if getattr(args, "tile", None) is not None:
        cfg = cfg.with_tile(args.tile)
    if getattr(args, "iterations", None) is not None:
        cfg = dataclasses.replace(cfg, iterations=args.iterations)
    if getattr(args, "epochs", None) is not None:
        cfg = dataclasses.replace(cfg, epochs=args.epochs)
    return cfg.validate()


# -- synth -------------------------------------------------------------------

def _read_bases(base_dir):
    files = sorted(Path(base_dir).glob("*.png"))
    if not files:
        raise DataError(f"no base images (*.png) in {base_dir}")
    return [read_image(f) for f in files]


def synth_command(base_dir, source_dir, count, seed, out_dir, config=SynthConfig()):
    """Write ``count`` synthesised scenes in the dataset layout; returns the manifest path."""
    bases = _read_bases(base_dir)
    pool = load_dataset(source_dir)
    if not any(s.annotations for s in pool):
        raise DataError(f"source dataset {source_dir} has no instances")
    return synth_from_arrays(bases, pool, count, seed, out_dir, config)


def synth_from_arrays(bases, pool, count, seed, out_dir, config=SynthConfig()):
    def one(i):
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        base = bases[int(rng.integers(len(bases)))]
        image, anns, mask = synthesize_scene(base, pool, config, rng)
        return scene_to_sample(image, anns, mask, f"{i:06d}")

    samples = map_ordered(one, range(count))
    return save_dataset(out_dir, samples)


def _cmd_synth(args):
    cfg = SynthConfig(n_max=args.n_max, max_placement_attempts=args.attempts)
    if args.toy:
        from .toydata import background, fruit_source
        rng = np.random.default_rng(np.random.SeedSequence([args.seed, 10 ** 6]))
        size = (args.size[1], args.size[0])
        pool = [fruit_source(rng, size) for _ in range(4)]
        bases = [background(rng, size) for _ in range(4)]
        path = synth_from_arrays(bases, pool, args.count, args.seed, args.out, cfg)
    else:
        if not args.base_dir or not args.source_dir:
            raise ConfigError("synth needs --base-dir and --source-dir (or --toy)")
        path = synth_command(args.base_dir, args.source_dir, args.count, args.seed, args.out, cfg)
    print(path)


# -- train -------------------------------------------------------------------

def train_command(config, dataset_path, out_dir, split=None):
    from .train import train

    samples = load_dataset(dataset_path, split=split)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = train(config, samples, log_path=out / "loss.csv", dump_dir=out)
    ck = result.checkpoint(config)
    path = ck.save(out / "checkpoint.ffd")
    return path, result


def _cmd_train(args):
    cfg = _resolve_config(args)
    path, result = train_command(cfg, args.data, args.out, args.split)
    final = result.log[-1][1] if result.log else float("nan")
    print(f"{path} iterations={len(result.log)} final_loss={final:.6g}")


# -- infer / eval --------------------------------------------------------------

def _detection_dict(d):
    return {"image_id": d.image_id, "class_id": d.class_id, "score": d.score,
            "box": {"cx": d.box.cx, "cy": d.box.cy, "w": d.box.w, "h": d.box.h}}


def infer_command(checkpoint_path, image_path, threshold=0.5):
    from .inference import infer

    _, model = model_from_checkpoint(Checkpoint.load(checkpoint_path))
    return infer(model, read_image(image_path), threshold, Path(image_path).stem)


def _cmd_infer(args):
    dets = infer_command(args.checkpoint, args.image, args.threshold)
    _write_json(args.out, [_detection_dict(d) for d in dets])


def _gts_for(samples):
    return [GroundTruth(BoxAbs(*b), c, s.name or i) for i, s in enumerate(samples)
            for b, c in s.annotations]


def eval_detections(detections, samples):
    return coco_style_report(detections, _gts_for(samples))


def eval_command(checkpoint_path, dataset_path, threshold=0.0, split=None):
    """Run the checkpoint over a dataset and score it; returns an EvalReport."""
    from .inference import infer

    _, model = model_from_checkpoint(Checkpoint.load(checkpoint_path))
    samples = load_dataset(dataset_path, split=split)
    per_image = map_ordered(
        lambda item: infer(model, item[1].image, threshold, item[1].name or item[0]),
        list(enumerate(samples)))
    return eval_detections([d for dets in per_image for d in dets], samples)


def load_detections(path):
    raw = json.loads(Path(path).read_text())
    try:
        return [Detection(BoxAbs(r["box"]["cx"], r["box"]["cy"], r["box"]["w"], r["box"]["h"]),
                          int(r["class_id"]), float(r["score"]), r.get("image_id", 0))
                for r in raw]
    except (KeyError, TypeError) as exc:
        raise DataError(f"malformed detections file {path}: {exc}") from exc


def _cmd_eval(args):
    if args.detections:
        samples = load_dataset(args.data, split=args.split)
        report = eval_detections(load_detections(args.detections), samples)
    elif args.checkpoint:
        report = eval_command(args.checkpoint, args.data, args.threshold, args.split)
    else:
        raise ConfigError("eval needs --checkpoint or --detections")
    _write_json(args.out, report.to_dict())


# -- gradcheck / bench ---------------------------------------------------------

def gradcheck_command(seed=0, dtype=np.float64, include_detector=True):
    from .gradsuite import run_suite

    return run_suite(seed=seed, dtype=dtype, include_detector=include_detector)


def _cmd_gradcheck(args):
    dtype = np.float32 if args.dtype == "float32" else np.float64
    results = gradcheck_command(args.seed or 0, dtype, not args.skip_detector)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.name:<22} max_rel_error={r.max_rel_error:.3e} "
              f"checked={r.checked} excluded={r.excluded}")
    if not all(r.passed for r in results):
        raise NumericalError("gradient check failed")


def _cmd_bench(args):
    from .bench import forward_timing, kernel_timings
    from .model import Detector

    cfg = _resolve_config(args)
    report = {"active_backend": kernels.BACKEND, "kernels": kernel_timings(args.repeat)}
    model = Detector.build(cfg.model, cfg.seed)
    h, w = cfg.model.backbone.input_size
    report["forward_seconds"] = forward_timing(model, (h, w), args.repeat)
    report["input_size"] = [w, h]
    report["tile"] = cfg.model.backbone.tile
    _write_json(args.out, report)


def build_parser():
    p = argparse.ArgumentParser(prog="ffd", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", help="JSON training/model configuration")
            sp.add_argument("--tile", type=int, choices=(16, 32, 64))
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output path ('-' or omitted prints to stdout)")

    sp = sub.add_parser("synth", help="synthesise overlap-free scenes")
    common(sp, config=False)
    sp.add_argument("--base-dir", help="directory of fruit-free *.png images")
    sp.add_argument("--source-dir", help="annotated dataset providing instances")
    sp.add_argument("--count", type=int, required=True)
    sp.add_argument("--n-max", type=int, default=100)
    sp.add_argument("--attempts", type=int, default=50)
    sp.add_argument("--toy", action="store_true", help="use procedural bases and fruit")
    sp.add_argument("--size", type=int, nargs=2, default=(64, 64), metavar=("W", "H"))
    sp.set_defaults(func=_cmd_synth, seed=0)

    sp = sub.add_parser("train", help="train a detector")
    common(sp)
    sp.add_argument("--data", required=True, help="dataset directory or manifest")
    sp.add_argument("--split", help="only use manifest records with this split tag")
    sp.add_argument("--iterations", type=int)
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--toy", action="store_true", help="start from the 64×64 toy config")
    sp.set_defaults(func=_cmd_train)

    sp = sub.add_parser("infer", help="detect objects in one image")
    common(sp, config=False)
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--image", required=True)
    sp.add_argument("--threshold", type=float, default=0.5)
    sp.set_defaults(func=_cmd_infer)

    sp = sub.add_parser("eval", help="COCO-style AP report")
    common(sp, config=False)
    sp.add_argument("--data", required=True)
    sp.add_argument("--split")
    sp.add_argument("--checkpoint")
    sp.add_argument("--detections", help="score a JSON list of detections instead")
    sp.add_argument("--threshold", type=float, default=0.0)
    sp.set_defaults(func=_cmd_eval)

    sp = sub.add_parser("gradcheck", help="finite-difference check of every primitive")
    common(sp, config=False)
    sp.add_argument("--dtype", choices=("float64", "float32"), default="float64")
    sp.add_argument("--skip-detector", action="store_true")
    sp.set_defaults(func=_cmd_gradcheck)

    sp = sub.add_parser("bench", help="forward-pass and kernel timings")
    common(sp)
    sp.add_argument("--repeat", type=int, default=5)
    sp.add_argument("--toy", action="store_true")
    sp.set_defaults(func=_cmd_bench)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return 0


if __name__ == "__main__":
    sys.exit(main())
