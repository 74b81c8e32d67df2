"""Command-line entry point: ``roispot <command> [options]``.

Exit codes: 0 success, 2 malformed file, 3 invalid value or argument,
4 I/O failure, 5 detections for a video missing from the ground truth.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import io
from .core import (
    FeatureVolume,
    FrameGeometry,
    RoispotError,
    SaliencyVolume,
    ScoreSequence,
    Stage,
    ValidationError,
    parse_size,
)
from .evaluation import (
    VideoMismatchError,
    cost_ratio,
    evaluate,
    gflops_estimate,
    reports_to_csv,
)
from .pipeline import PipelineConfig
from .roi import RoiTrack, crop_resize, read_roi_track, select_rois, write_roi_track
from .saliency import build_saliency
from .spotting import extract_detections
from .synth import SynthConfig, gen_scene, ideal_scores, write_ground_truth

EXIT_OK, EXIT_FORMAT, EXIT_VALIDATION, EXIT_IO, EXIT_MISMATCH = 0, 2, 3, 4, 5
# reference figure for the cost estimate: low-resolution extractor on 224x224 clips
DEFAULT_REF_GFLOPS = 23.13


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _pmap(fn, items, threads):
    items = list(items)
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _pair(text: str) -> tuple[float, float]:
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two comma-separated numbers, got {text!r}") from None
    return a, b


def _add_common(p, *groups):
    p.add_argument("--config", help="pipeline configuration JSON")
    p.add_argument("--threads", type=int, default=1, help="worker threads (never changes results)")
    p.add_argument("--json", action="store_true", help="machine-readable output on stdout")
    if "saliency" in groups:
        p.add_argument("--k", type=int, help="saliency upsampling factor")
        p.add_argument("--sigma-s", type=float, help="spatial Gaussian sigma, upsampled cells")
        p.add_argument("--sigma-t", type=float, help="temporal Gaussian sigma, frames")
    if "roi" in groups:
        p.add_argument("--tau", type=float, help="saliency mass threshold")
        p.add_argument("--min-roi", type=parse_size, help="minimum RoI size WxH in pixels")
        p.add_argument("--frame-size", type=parse_size, help="high-resolution frame size WxH")
    if "nms" in groups:
        p.add_argument("--window", type=int, help="suppression window in frames")
        p.add_argument("--mode", choices=["soft", "hard"])
    if "eval" in groups:
        p.add_argument("--delta", type=float, action="append", help="tolerance (repeatable)")
        p.add_argument("--unit", choices=["frames", "seconds"])
        p.add_argument("--fps", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="roispot", description="Saliency-guided RoI selection and event-spotting tools.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("saliency", help="features -> probability saliency maps")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    _add_common(p, "saliency")

    p = sub.add_parser("select-roi", help="probability saliency -> per-frame RoIs (JSON Lines)")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    _add_common(p, "roi")

    p = sub.add_parser("crop", help="crop and resample RoIs from high-resolution frames")
    p.add_argument("--input", required=True, help="frames tensor [L][H][W][C]")
    p.add_argument("--rois", required=True)
    p.add_argument("--output", required=True)
    _add_common(p, "roi")

    p = sub.add_parser("softnms", help="per-class temporal suppression of score sequences")
    p.add_argument("--input", required=True, action="append", help="scores tensor (repeatable)")
    p.add_argument("--video", action="append", help="video id per input (default: file stem)")
    p.add_argument("--classes", required=True)
    p.add_argument("--output", required=True)
    _add_common(p, "nms")

    p = sub.add_parser("eval", help="mAP at temporal tolerances")
    p.add_argument("--detections", "--input", dest="detections", required=True)
    p.add_argument("--ground-truth", required=True)
    p.add_argument("--classes", required=True)
    p.add_argument("--csv", help="also write a per-class CSV table")
    _add_common(p, "eval")

    p = sub.add_parser("synth", help="write a synthetic blob scene with ground truth")
    p.add_argument("--output", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--video", default="synth")
    p.add_argument("--frames", type=int, default=32)
    p.add_argument("--grid", type=parse_size, default=(14, 14), help="feature grid WxH")
    p.add_argument("--channels", type=int, default=8)
    p.add_argument("--blob-sigma", type=float, default=1.0)
    p.add_argument("--trajectory", choices=["static", "linear", "bounce"], default="static")
    p.add_argument("--velocity", type=_pair, default=(0.0, 0.0), help="vy,vx in cells per frame")
    p.add_argument("--start", type=_pair, help="y,x start position")
    p.add_argument("--bounds-x", type=_pair)
    p.add_argument("--bounds-y", type=_pair)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--active-fraction", type=float, default=0.5)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("cost", help="pixel-proportional compute estimate")
    p.add_argument("--res", type=parse_size, action="append", required=True, help="WxH (repeatable)")
    p.add_argument("--ref", type=parse_size, required=True)
    p.add_argument("--ref-gflops", type=float, default=DEFAULT_REF_GFLOPS)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("pipeline", help="saliency -> RoIs [-> crops] [-> detections -> mAP]")
    p.add_argument("--input", required=True, help="features tensor")
    p.add_argument("--output", required=True, help="output directory")
    p.add_argument("--frames-tensor", help="high-resolution frames to crop")
    p.add_argument("--scores", help="score tensor for detection")
    p.add_argument("--classes")
    p.add_argument("--ground-truth")
    p.add_argument("--video")
    _add_common(p, "saliency", "roi", "nms", "eval")
    return parser


def load_config(args) -> PipelineConfig:
    cfg = PipelineConfig.from_dict(io.load_json(getattr(args, "config", None)))
    g = cfg.geometry
    geom = {}
    if getattr(args, "frame_size", None):
        w, h = args.frame_size
        geom = {"high_w": w, "high_h": h, "low_w": min(g.low_w, w), "low_h": min(g.low_h, h)}
    over = {
        "saliency": {k: v for k, v in (("upsample_k", getattr(args, "k", None)),
                                       ("sigma_spatial", getattr(args, "sigma_s", None)),
                                       ("sigma_temporal", getattr(args, "sigma_t", None)))
                     if v is not None},
        "roi": {k: v for k, v in (("tau", getattr(args, "tau", None)),) if v is not None},
        "nms": {k: v for k, v in (("window", getattr(args, "window", None)),
                                  ("mode", getattr(args, "mode", None))) if v is not None},
        "eval": {k: v for k, v in (("unit", getattr(args, "unit", None)),
                                   ("fps", getattr(args, "fps", None))) if v is not None},
        "geometry": geom,
    }
    if getattr(args, "min_roi", None):
        over["roi"].update(min_w=args.min_roi[0], min_h=args.min_roi[1])
    if getattr(args, "delta", None):
        over["eval"]["tolerances"] = tuple(args.delta)
    if over["eval"].get("unit", cfg.eval.unit) == "frames" and "tolerances" in over["eval"]:
        tol = over["eval"]["tolerances"]
        if any(int(t) != t for t in tol):
            raise ValidationError("frame tolerances must be integers")
        over["eval"]["tolerances"] = tuple(int(t) for t in tol)
    return cfg.updated(**over)


def _emit(args, doc, text):
    print(json.dumps(doc, indent=2) if args.json else text)


def cmd_saliency(args) -> int:
    cfg = load_config(args)
    fv = _read(args.input, FeatureVolume, "a rank-4 feature volume")
    sv = build_saliency(fv, cfg.saliency)
    io.write_tensor(sv, args.output)
    _emit(args, {"frames": sv.frames, "height": sv.height, "width": sv.width},
          f"wrote {sv.frames}x{sv.height}x{sv.width} saliency to {args.output}")
    return EXIT_OK


def _read(path, cls, what, **kw):
    value = io.read_tensor(path, **kw)
    if not isinstance(value, cls):
        raise ValidationError(f"{path}: expected {what}")
    return value


def cmd_select_roi(args) -> int:
    cfg = load_config(args)
    sv = _read(args.input, SaliencyVolume, "a rank-3 saliency volume", stage=Stage.PROBABILITY)
    track = select_rois(sv, cfg.roi, cfg.geometry, threads=args.threads)
    write_roi_track(track, args.output)
    _emit(args, {"frames": len(track)}, f"wrote {len(track)} RoIs to {args.output}")
    return EXIT_OK


def _crop_all(frames, track: RoiTrack, size, threads):
    if frames.shape[0] != len(track):
        raise ValidationError(f"{frames.shape[0]} frames but {len(track)} RoIs")
    patches = _pmap(lambda i: crop_resize(frames[i], track.rois[i], size), range(len(track)), threads)
    return np.stack(patches)


def cmd_crop(args) -> int:
    cfg = load_config(args)
    frames = _read(args.input, FeatureVolume, "a rank-4 frames tensor")
    _, fh, fw, _ = frames.data.shape
    geom = FrameGeometry(fw, fh, min(cfg.geometry.low_w, fw), min(cfg.geometry.low_h, fh))
    track = read_roi_track(args.rois, geom)
    size = (cfg.roi.min_w, cfg.roi.min_h)
    out = _crop_all(frames.data, track, size, args.threads)
    io.write_tensor(out, args.output)
    _emit(args, {"patches": out.shape[0]}, f"wrote {out.shape[0]} patches of {size[0]}x{size[1]}")
    return EXIT_OK


def _detect(paths, videos, cfg, threads):
    if videos and len(videos) != len(paths):
        raise ValidationError("give one --video per --input")
    videos = videos or [Path(p).name.split(".")[0] for p in paths]

    def one(i):
        seq = _read(paths[i], ScoreSequence, "a rank-2 score tensor", kind="scores", probabilities=True)
        return extract_detections(seq, cfg.nms, video=videos[i])

    return _pmap(one, range(len(paths)), threads)


def cmd_softnms(args) -> int:
    cfg = load_config(args)
    classes = io.read_class_list(args.classes)
    sets = _detect(args.input, args.video, cfg, args.threads)
    for es in sets:
        if es.num_classes != len(classes):
            raise ValidationError(f"{es.video}: {es.num_classes} score classes but {len(classes)} labels")
    io.write_events(sets, args.output, classes)
    n = sum(len(es) for es in sets)
    _emit(args, {"detections": n}, f"wrote {n} detections to {args.output}")
    return EXIT_OK


def _report(args, reports, classes):
    doc = [r.to_json(classes) for r in reports]
    lines = [f"{'delta':>8} {'frames':>6} {'mAP':>8}"]
    for r in reports:
        lines.append(f"{r.delta:>8g} {r.delta_frames:>6d} {r.mAP:>8.4f}")
    _emit(args, doc, "\n".join(lines))
    return doc


def cmd_eval(args) -> int:
    cfg = load_config(args)
    classes = io.read_class_list(args.classes)
    dets = io.read_events(args.detections, classes)
    gt = io.read_events(args.ground_truth, classes)
    reports = evaluate(dets, gt, cfg.eval)
    _report(args, reports, classes)
    if args.csv:
        Path(args.csv).write_text(reports_to_csv(reports, classes))
    return EXIT_OK


def cmd_synth(args) -> int:
    gw, gh = args.grid
    cfg = SynthConfig(seed=args.seed, frames=args.frames, height=gh, width=gw, channels=args.channels,
                      blob_sigma=args.blob_sigma, trajectory=args.trajectory, velocity=args.velocity,
                      start=args.start, bounds_y=args.bounds_y, bounds_x=args.bounds_x,
                      noise=args.noise, active_fraction=args.active_fraction)
    fv, gt = gen_scene(cfg, video=args.video)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    io.write_tensor(fv, out / "features.asv")
    io.write_tensor(ideal_scores(gt.events, cfg.frames), out / "scores.asv")
    io.write_events([gt.events], out / "events.jsonl", ["bounce"])
    io.write_class_list(["bounce"], out / "classes.json")
    write_ground_truth(gt, cfg, out / "ground_truth.json")
    _emit(args, {"frames": cfg.frames, "events": [e.frame for e in gt.events]},
          f"wrote scene with {len(gt.events)} events to {out}")
    return EXIT_OK


def cmd_cost(args) -> int:
    ratio = cost_ratio(args.res, args.ref)
    gflops = gflops_estimate(args.res, args.ref, args.ref_gflops)
    _emit(args, {"ratio": ratio, "gflops": gflops, "reference_gflops": args.ref_gflops},
          f"ratio {ratio:.6g}\ngflops {gflops:.4f}")
    return EXIT_OK


def cmd_pipeline(args) -> int:
    cfg = load_config(args)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    fv = _read(args.input, FeatureVolume, "a rank-4 feature volume")
    summary = {"config": cfg.to_dict()}

    sv = build_saliency(fv, cfg.saliency)
    io.write_tensor(sv, out / "saliency.asv")
    track = select_rois(sv, cfg.roi, cfg.geometry, threads=args.threads)
    write_roi_track(track, out / "rois.jsonl")
    summary["rois"] = len(track)

    if args.frames_tensor:
        frames = _read(args.frames_tensor, FeatureVolume, "a rank-4 frames tensor")
        patches = _crop_all(frames.data, track, (cfg.roi.min_w, cfg.roi.min_h), args.threads)
        io.write_tensor(patches, out / "patches.asv")
        summary["patches"] = int(patches.shape[0])

    if args.scores:
        if not args.classes:
            raise ValidationError("--scores needs --classes")
        classes = io.read_class_list(args.classes)
        video = [args.video] if args.video else None
        dets = _detect([args.scores], video, cfg, args.threads)
        io.write_events(dets, out / "detections.jsonl", classes)
        summary["detections"] = sum(len(es) for es in dets)
        if args.ground_truth:
            reports = evaluate(dets, io.read_events(args.ground_truth, classes), cfg.eval)
            summary["reports"] = [r.to_json(classes) for r in reports]
            (out / "report.json").write_text(json.dumps(summary["reports"], indent=2) + "\n")

    text = [f"rois: {summary['rois']}"]
    if "detections" in summary:
        text.append(f"detections: {summary['detections']}")
    for r in summary.get("reports", []):
        text.append(f"mAP@{r['delta']:g}: {r['mAP']:.4f}")
    _emit(args, summary, "\n".join(text))
    return EXIT_OK


COMMANDS = {
    "saliency": cmd_saliency,
    "select-roi": cmd_select_roi,
    "crop": cmd_crop,
    "softnms": cmd_softnms,
    "eval": cmd_eval,
    "synth": cmd_synth,
    "cost": cmd_cost,
    "pipeline": cmd_pipeline,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # usage errors and --help return their code instead of exiting
        return exc.code if isinstance(exc.code, int) else EXIT_VALIDATION
    try:
        if getattr(args, "threads", 1) < 1:
            raise ValidationError("--threads must be >= 1")
        return COMMANDS[args.command](args)
    except (io.TensorFormatError, io.EventFormatError) as exc:
        code, msg = EXIT_FORMAT, exc
    except VideoMismatchError as exc:
        code, msg = EXIT_MISMATCH, exc
    except (ValidationError, RoispotError) as exc:
        code, msg = EXIT_VALIDATION, exc
    except OSError as exc:
        code, msg = EXIT_IO, exc
    print(f"roispot {args.command}: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
