"""Command line: ``sensalign gen | align | eval``.

Every alignment flag can also be set through an environment variable named
``SENSALIGN_<FLAG>`` (e.g. ``SENSALIGN_LAMBDA_X``); explicit flags win.
Failures print a single ``error:<stage>: message`` line to stderr and exit 2.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .alignment import align_scene, unmapped_report
from .core import AlignmentConfig, SensAlignError, validate_scene
from .io import aggregate_rows, alignment_to_dict, atomic_write_text, dumps, load_scene, rows_to_csv, save_scene
from .scenegen import SceneGenConfig, generate_scene

ENV_PREFIX = "SENSALIGN_"

ALIGN_FLAGS = (
    # flag, dest, type, default
    ("--k", "k", int, 3),
    ("--l", "l", int, 2),
    ("--lambda-x", "lambda_x", float, 1.0),
    ("--lambda-y", "lambda_y", float, 1.0),
    ("--gram-reg", "gram_reg", float, 1e-3),
    ("--zero-tol", "zero_tol", float, 1e-9),
    ("--unmapped-factor", "unmapped_factor", float, 2.0),
    ("--seed", "seed", int, 0),
)


class CliError(Exception):
    def __init__(self, stage, message):
        super().__init__(message)
        self.stage = stage


def _env_default(dest, typ, default):
    raw = os.environ.get(ENV_PREFIX + dest.upper())
    if raw is None:
        return default
    try:
        return typ(raw)
    except ValueError:
        raise CliError("config", f"{ENV_PREFIX + dest.upper()}={raw!r} is not a valid {typ.__name__}")


def _one_line(text):
    return " ".join(str(text).split())


def cmd_gen(args):
    try:
        data = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError("config", f"cannot read {args.config}: {exc}")
    if not isinstance(data, dict):
        raise CliError("config", "config must be a JSON object")
    scene_id = data.pop("id", None)
    try:
        cfg = SceneGenConfig.from_dict(data)
        scene = generate_scene(cfg, scene_id)
    except SensAlignError as exc:
        raise CliError(exc.stage, str(exc))
    save_scene(scene, args.output, meta={"generator": cfg.to_dict()})
    for name, view in (("lidar", scene.lidar), ("camera", scene.camera), ("bsm", scene.bsm)):
        counts = {"Car": 0, "Person": 0}
        for o in view.objects:
            if o.cls.value in counts:
                counts[o.cls.value] += 1
        print(f"{name}: Car={counts['Car']} Person={counts['Person']}")
    return 0


def cmd_align(args):
    try:
        scene = load_scene(args.scene)
    except SensAlignError as exc:
        raise CliError(exc.stage, str(exc))
    problems = validate_scene(scene)
    if problems:
        raise CliError("validate", "; ".join(problems))
    try:
        cfg = AlignmentConfig(
            k=args.k,
            l=args.l,
            lambda_x=args.lambda_x,
            lambda_y=args.lambda_y,
            zero_tol=args.zero_tol,
            unmapped_factor=args.unmapped_factor,
            gram_reg=args.gram_reg,
        )
    except SensAlignError as exc:
        raise CliError("config", str(exc))
    try:
        cl, cb = align_scene(scene, cfg)
    except SensAlignError as exc:
        raise CliError(f"align/{exc.stage}", str(exc))
    doc = {
        "scene_id": scene.id,
        "config": {
            "k": cfg.k,
            "l": cfg.l,
            "lambda_x": cfg.lambda_x,
            "lambda_y": cfg.lambda_y,
            "gram_reg": cfg.gram_reg,
            "zero_tol": cfg.zero_tol,
            "unmapped_factor": cfg.unmapped_factor,
            "seed": args.seed,
        },
        "camera_lidar": alignment_to_dict(cl, scene.camera, scene.lidar),
        "camera_bsm": alignment_to_dict(cb, scene.camera, scene.bsm),
        "unmapped_report": unmapped_report(cl, cb, scene),
    }
    atomic_write_text(args.output, dumps(doc))
    return 0


def cmd_eval(args):
    docs = []
    for path in args.results:
        try:
            docs.append(json.loads(Path(path).read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError("read", f"cannot read result {path}: {exc}")
    try:
        rows = aggregate_rows(docs)
    except (KeyError, TypeError) as exc:
        raise CliError("eval", f"malformed result document: {exc!r}")
    atomic_write_text(args.output, rows_to_csv(rows))
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="sensalign", description="Cross-modal object alignment by manifold alignment.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic scene file")
    g.add_argument("config", help="scene generator config (JSON)")
    g.add_argument("output", help="scene file to write")
    g.set_defaults(func=cmd_gen)

    a = sub.add_parser("align", help="run camera-lidar and camera-bsm alignment")
    a.add_argument("scene")
    a.add_argument("output")
    for flag, dest, typ, default in ALIGN_FLAGS:
        a.add_argument(flag, dest=dest, type=typ, default=None)
    a.set_defaults(func=cmd_align)

    e = sub.add_parser("eval", help="aggregate result files into a CSV")
    e.add_argument("results", nargs="+")
    e.add_argument("-o", "--output", required=True)
    e.set_defaults(func=cmd_eval)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "align":
            for _, dest, typ, default in ALIGN_FLAGS:
                if getattr(args, dest) is None:
                    setattr(args, dest, _env_default(dest, typ, default))
        return args.func(args)
    except CliError as exc:
        print(f"error:{exc.stage}: {_one_line(exc)}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
