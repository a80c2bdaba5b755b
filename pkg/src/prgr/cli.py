"""Command-line interface: refine scoremaps, evaluate label maps, generate
synthetic cases."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from .bundleio import (PrgrError, ScoreStack, load_bundle, load_labels_png,
                       load_scores_png, save_bundle, save_labels_png)
from .config import PRESETS, RefineConfig, preset_config
from .metrics import evaluate
from .refiner import refine_multiclass
from .rng import splitmix64
from .synth import SynthSpec, synth_case


def _log(args, msg: str) -> None:
    if not args.quiet:
        print(msg, file=sys.stderr)


def _load_scores(path_arg: str) -> ScoreStack:
    paths = [p for p in path_arg.split(",") if p]
    if len(paths) == 1 and Path(paths[0]).is_dir():
        return load_bundle(paths[0])
    return load_scores_png(paths)


def _build_config(args) -> RefineConfig:
    overrides = {}
    if args.config:
        overrides = json.loads(Path(args.config).read_text())
        if not isinstance(overrides, dict):
            raise PrgrError("config-format", "config file must hold an object")
    if args.preset == "custom" and not overrides:
        raise PrgrError("config-missing",
                        "preset 'custom' requires --config")
    cfg = preset_config(args.preset, **overrides)
    if args.seed is not None:
        cfg = cfg.with_overrides(rng_seed=args.seed)
    return cfg


def _cmd_refine(args) -> int:
    image = np.asarray(Image.open(args.image).convert("RGB"))
    stack = _load_scores(args.scores)
    cfg = _build_config(args)
    _log(args, f"refining {stack.planes.shape[0]} class plane(s) at "
               f"{stack.width}x{stack.height}, runs={cfg.runs}, "
               f"iterations={cfg.n_iterations}, threads={args.threads}")
    out = refine_multiclass(image, stack.planes, cfg, threads=args.threads)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    save_bundle(ScoreStack(class_names=list(stack.class_names),
                           planes=out.refined.astype(np.float32)),
                outdir / "refined")
    save_bundle(ScoreStack(class_names=list(stack.class_names),
                           planes=out.variance.astype(np.float32)),
                outdir / "variance")
    save_labels_png(out.labels, outdir / "labels.png")
    manifest = {
        "width": stack.width,
        "height": stack.height,
        "class_names": list(stack.class_names),
        "preset": args.preset,
        "config": cfg.to_dict(),
        "runs": [
            {
                "run": r,
                "classes": [
                    {
                        "class_index": c,
                        "class_name": stack.class_names[c],
                        "iterations": [
                            {"index": rec.index, "gamma": rec.gamma,
                             "sign": rec.sign, "seeds": rec.seeds}
                            for rec in class_records
                        ],
                    }
                    for c, class_records in enumerate(run_records)
                ],
            }
            for r, run_records in enumerate(out.manifest)
        ],
    }
    (outdir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    _log(args, f"wrote {outdir}/refined, variance, labels.png, manifest.json")
    return 0


def _cmd_eval(args) -> int:
    pred = load_labels_png(args.pred)
    gt = load_labels_png(args.gt)
    variance = None
    if args.variance:
        vstack = load_bundle(args.variance)
        if vstack.planes.shape[1:] != pred.shape:
            raise PrgrError("eval-shape",
                            "variance bundle does not match label map")
        # per-pixel variance of the predicted class
        idx = np.minimum(pred, vstack.planes.shape[0] - 1).astype(np.int64)
        variance = np.take_along_axis(
            vstack.planes.astype(np.float64), idx[None], axis=0)[0]
    bands = [int(b) for b in args.trimap.split(",") if b] if args.trimap else []
    report = evaluate(pred, gt, args.classes, trimap_bands=bands,
                      boundary_tolerance=args.boundary_tol,
                      variance=variance)
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    return 0


def _cmd_synth(args) -> int:
    spec = SynthSpec.from_json(Path(args.spec).read_text()) if args.spec \
        else SynthSpec()
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    for i in range(args.n):
        case_seed = splitmix64(args.seed ^ (0x9E3779B97F4A7C15 * (i + 1)))
        case = synth_case(spec, case_seed)
        cdir = outdir / f"case_{i:03d}"
        cdir.mkdir(parents=True, exist_ok=True)
        Image.fromarray(case.image).save(cdir / "image.png", format="PNG")
        save_labels_png(case.gt, cdir / "gt.png")
        save_bundle(case.coarse, cdir / "coarse")
        (cdir / "case.json").write_text(
            json.dumps(case.descriptor, indent=2, sort_keys=True) + "\n")
        _log(args, f"wrote {cdir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prgr",
        description="Probabilistic region-growing refinement of segmentation "
                    "scoremaps")
    parser.add_argument("--threads", type=int, default=1,
                        help="parallel worker count (output is identical "
                             "for any value)")
    parser.add_argument("--quiet", action="store_true",
                        help="suppress progress messages")
    # accept the global flags after the subcommand as well; SUPPRESS keeps a
    # pre-subcommand value from being clobbered by a subparser default
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS)
    common.add_argument("--quiet", action="store_true",
                        default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("refine", help="refine a scoremap stack",
                       parents=[common])
    p.add_argument("--image", required=True, help="input RGB PNG")
    p.add_argument("--scores", required=True,
                   help="bundle directory or comma-separated grayscale PNGs")
    p.add_argument("--preset", default="v3plus", choices=sorted(PRESETS))
    p.add_argument("--config", help="JSON file overriding config fields")
    p.add_argument("--seed", type=int, default=None, help="rng seed override")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_refine)

    p = sub.add_parser("eval", help="evaluate predicted labels against truth",
                       parents=[common])
    p.add_argument("--pred", required=True, help="predicted labels.png")
    p.add_argument("--gt", required=True, help="ground-truth labels.png")
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--trimap", default="",
                   help="comma-separated boundary band widths in px")
    p.add_argument("--boundary-tol", type=int, default=2)
    p.add_argument("--variance", help="variance bundle directory")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("synth", help="generate synthetic cases",
                       parents=[common])
    p.add_argument("--spec", help="JSON SynthSpec file (defaults otherwise)")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PrgrError as e:
        print(f"error: {e.code}: {e}", file=sys.stderr)
        return 2
    except (ValueError, OSError, json.JSONDecodeError) as e:
        print(f"error: invalid-input: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
