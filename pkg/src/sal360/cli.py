"""Batch command-line front end.

Subcommands: project, fixations, eval, rf, infer, train.
Exit codes: 0 success, 1 internal error, 2 usage/input error.
"""

import argparse
import os
import sys
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import attention, dataset, experts, geometry, losses, metrics, train
from . import tensor as T
from .errors import FormatError
from .imageio import load_grid, save_grid
from .weights import load_weights


class InputError(Exception):
    """User-facing input problem; maps to exit code 2."""


def _parse_resolution(text):
    try:
        w, h = text.lower().split("x")
        return int(h), int(w)
    except ValueError:
        raise InputError(f"bad resolution {text!r}, expected WIDTHxHEIGHT") from None


def cmd_project(args):
    if args.direction == "erp2cmp":
        erp = load_grid(args.input)
        if erp.shape[1] != 2 * erp.shape[0]:
            raise InputError(f"{args.input}: ERP aspect must be 2:1")
        faces = geometry.erp_to_cmp(erp, args.face_size)
        os.makedirs(args.out, exist_ok=True)
        for i in range(6):
            save_grid(faces.faces[i], os.path.join(args.out, f"face{i}.pgm"))
        print(f"wrote 6 faces of {args.face_size}x{args.face_size} to {args.out}")
    else:
        paths = [os.path.join(args.input, f"face{i}.pgm") for i in range(6)]
        missing = [p for p in paths if not os.path.exists(p)]
        if missing:
            raise InputError(f"missing cube faces: {missing}")
        faces = geometry.CubeFaces(np.stack([load_grid(p) for p in paths]))
        h = args.height
        erp = geometry.cmp_to_erp(faces, h, 2 * h)
        os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
        save_grid(np.clip(erp, 0.0, 1.0), args.out)
        print(f"wrote {2 * h}x{h} ERP to {args.out}")
    return 0


def cmd_fixations(args):
    height, width = _parse_resolution(args.resolution)
    with open(args.csv) as fh:
        result = dataset.parse_fixations(fh)
    for lineno, msg in result.errors:
        print(f"line {lineno}: skipped ({msg})", file=sys.stderr)
    frames = defaultdict(list)
    for rec in result.records:
        frames[(rec.video_id, rec.frame_index)].append(rec)
    if not frames:
        raise InputError("no valid gaze records")

    def one(key):
        video_id, frame_index = key
        fix = dataset.rasterize_fixations(frames[key], height, width)
        sal = dataset.blur_fixations(fix, args.sigma)
        fix_dir = os.path.join(args.out, video_id, "fixation")
        sal_dir = os.path.join(args.out, video_id, "saliency")
        os.makedirs(fix_dir, exist_ok=True)
        os.makedirs(sal_dir, exist_ok=True)
        save_grid(fix.grid, os.path.join(fix_dir, f"{frame_index:05d}.pgm"))
        save_grid(sal, os.path.join(sal_dir, f"{frame_index:05d}.pgm"))

    with ThreadPoolExecutor(max_workers=metrics._worker_count()) as pool:
        list(pool.map(one, sorted(frames)))
    print(f"frames={len(frames)} skipped_records={len(result.errors)}")
    return 0


def cmd_eval(args):
    try:
        report = metrics.evaluate_run(
            args.pred, args.gt_sal, args.gt_fix,
            spherical=args.spherical_weights, eps=args.eps)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    csv_text = report.to_csv()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(csv_text)
    else:
        sys.stdout.write(csv_text)
    if report.unreadable:
        print(f"skipped {report.unreadable} unreadable frame(s)", file=sys.stderr)
    return 0 if report.frame_count >= 1 else 2


def cmd_rf(args):
    for title, rows in attention.receptive_field_report():
        print(f"== {title} ==")
        for desc, rf, jump in rows:
            print(f"{desc:<28} rf {rf:>4}  jump {jump:g}")
        print()
    return 0


_WEIGHT_PREFIXES = ("encoder/", "attention/", "decoder/", "poles/", "equator/")


def cmd_infer(args):
    try:
        store = load_weights(args.weights)
    except (OSError, FormatError) as exc:
        raise InputError(str(exc)) from exc
    needed = _WEIGHT_PREFIXES
    if args.stream == "attention":
        needed = _WEIGHT_PREFIXES[:3]
    elif args.stream == "experts":
        needed = _WEIGHT_PREFIXES[3:]
    absent = [p for p in needed
              if not any(k.startswith(p) for k in store)]
    if absent:
        raise InputError(f"weight file missing prefixes: {', '.join(absent)}")
    names = sorted(n for n in os.listdir(args.frames)
                   if n.endswith((".pgm", ".f32")))
    if not names:
        raise InputError(f"no frames in {args.frames}")
    model = attention.full_model()
    h, w = model.input_hw
    os.makedirs(args.out, exist_ok=True)

    frames = []
    for name in names:
        g = load_grid(os.path.join(args.frames, name))
        if g.shape[1] != 2 * g.shape[0]:
            raise InputError(f"{name}: frame aspect must be 2:1")
        if g.shape != (h, w):
            t = T.Tensor(g[None, None])
            with T.no_grad():
                g = T.resize_bilinear(t, h, w).data[0, 0]
        frames.append((name, g))

    y1_maps = {}
    if args.stream in ("attention", "fused"):
        with T.no_grad():
            for name, g in frames:
                x = T.Tensor(np.repeat(g[None], 3, axis=0)[None])
                out = attention.forward_attention(x, store, model)
                y1_maps[name] = out.saliency.data[0, 0]
    y2_maps = {}
    if args.stream in ("experts", "fused"):
        seq = [geometry.erp_to_cmp(g, args.face_size) for _, g in frames]
        face_sal = experts.forward_experts(seq, store, alpha=args.alpha)
        for (name, _), faces in zip(frames, face_sal):
            y2_maps[name] = np.clip(geometry.cmp_to_erp(faces, h, w), 0.0, 1.0)

    for name, _ in frames:
        if args.stream == "attention":
            out_map = y1_maps[name]
        elif args.stream == "experts":
            out_map = y2_maps[name]
        else:
            out_map = experts.fuse(y1_maps[name], y2_maps[name])
        stem = os.path.splitext(name)[0]
        save_grid(out_map, os.path.join(args.out, stem + ".pgm"))
    print(f"wrote {len(frames)} {args.stream} map(s) to {args.out}")
    return 0


def cmd_train(args):
    try:
        initial, final = train.train(
            args.data, args.out_weights, args.steps, lr=args.lr,
            loss_weights=(args.alpha1, args.alpha2, args.beta), eps=args.eps,
            seed=args.seed, log=print if args.verbose else None)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    print(f"initial loss {initial:.6f}  final loss {final:.6f}")
    if args.steps == 0:
        return 0
    return 0 if final < initial else 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sal360",
        description="360-degree video saliency: projections, dataset "
                    "processing, evaluation, and toy inference/training.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("project", help="ERP <-> cubemap projection")
    p.add_argument("--in", dest="input", required=True,
                   help="ERP image (erp2cmp) or directory of face{0..5}.pgm")
    p.add_argument("--out", required=True)
    p.add_argument("--direction", choices=("erp2cmp", "cmp2erp"), required=True)
    p.add_argument("--face-size", type=int, default=experts.FACE_SIZE)
    p.add_argument("--height", type=int, default=512,
                   help="output ERP rows for cmp2erp")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("fixations", help="gaze CSV -> fixation/saliency maps")
    p.add_argument("--csv", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--sigma", type=float, default=dataset.DEFAULT_SIGMA_DEG)
    p.add_argument("--resolution", default="2048x1024")
    p.set_defaults(func=cmd_fixations)

    p = sub.add_parser("eval", help="five-metric batch evaluation")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt-sal", required=True)
    p.add_argument("--gt-fix", required=True)
    p.add_argument("--out")
    p.add_argument("--spherical-weights", action="store_true")
    p.add_argument("--eps", type=float, default=losses.DEFAULT_EPS)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("rf", help="receptive-field report")
    p.set_defaults(func=cmd_rf)

    p = sub.add_parser("infer", help="run the two-stream pipeline on frames")
    p.add_argument("--frames", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--stream", choices=("attention", "experts", "fused"),
                   default="fused")
    p.add_argument("--face-size", type=int, default=experts.FACE_SIZE)
    p.add_argument("--alpha", type=float, default=0.1,
                   help="EMA blend factor for the expert stream")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("train", help="toy-scale attention training")
    p.add_argument("--data", required=True)
    p.add_argument("--out-weights", required=True)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--lr", type=float, default=1e-5)
    p.add_argument("--alpha1", type=float, default=losses.DEFAULT_WEIGHTS[0])
    p.add_argument("--alpha2", type=float, default=losses.DEFAULT_WEIGHTS[1])
    p.add_argument("--beta", type=float, default=losses.DEFAULT_WEIGHTS[2])
    p.add_argument("--eps", type=float, default=losses.DEFAULT_EPS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_train)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - internal failure path
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
