"""``mistguard`` command-line entry point.

Exit codes: 0 success, 2 usage or input error, 3 runtime failsafe abort.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from mistguard import __version__, kernels
from mistguard.detect import DetectorConfig, HybridDetector
from mistguard.evaluate import (DatasetError, EvalError, EvalReport, LatencyStats, MethodResult,
                                Mode, load_dataset, load_frames, render_report, run_eval)
from mistguard.frame import build_kernel, preprocess
from mistguard.netpbm import atomic_write, load_frame, write_pgm

EXIT_OK, EXIT_USAGE, EXIT_FAILSAFE = 0, 2, 3


class UsageError(Exception):
    pass


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _add_detector_flags(p):
    g = p.add_argument_group("detector")
    g.add_argument("--kernel", type=int, default=5, help="Gaussian kernel side (odd, >= 3)")
    g.add_argument("--sigma", type=float, default=1.0, help="Gaussian sigma in pixels")
    g.add_argument("--pixel-diff-threshold", type=int, default=25,
                   help="Method A per-pixel difference threshold")
    g.add_argument("--active-fraction", type=float, default=0.05,
                   help="Method A fraction of active pixels for a positive")
    g.add_argument("--ratio-threshold", type=float, default=0.20,
                   help="Method B quadrant-over-frame mean margin")
    g.add_argument("--mean-floor", type=float, default=1.0,
                   help="Method B frames darker than this are negative")


def _detector_config(args):
    try:
        cfg = DetectorConfig(args.kernel, args.sigma, args.pixel_diff_threshold,
                             args.active_fraction, args.ratio_threshold, args.mean_floor)
        cfg.kernel(), cfg.motion_state(), cfg.roi()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return cfg


def _mode(token):
    try:
        return Mode.parse(token)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_preprocess(args):
    try:
        kernel = build_kernel(args.kernel, args.sigma)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    try:
        raw = load_frame(args.input)
    except (OSError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    atomic_write(args.out, write_pgm(preprocess(raw, kernel)))
    return EXIT_OK


def _frame_files(path):
    if os.path.isdir(path):
        names = sorted(n for n in os.listdir(path) if n.lower().endswith((".ppm", ".pgm")))
        if not names:
            raise UsageError(f"no .ppm/.pgm frames in {path}")
        return [os.path.join(path, n) for n in names]
    return [path]


def cmd_detect(args):
    cfg = _detector_config(args)
    det = HybridDetector(cfg.motion_state(), cfg.roi())
    kernel = cfg.kernel()
    for f in _frame_files(args.input):
        try:
            raw = load_frame(f)
        except (OSError, ValueError) as exc:
            raise UsageError(str(exc)) from None
        d = det.step(preprocess(raw, kernel))
        doc = {
            "frame": os.path.basename(f),
            "frame_seq": d.frame_seq,
            "positive": d.positive,
            "method_a": {"positive": d.method_a.positive,
                         "active_pixels": d.method_a.active_pixel_count,
                         "background_updated": d.method_a.background_updated},
            "method_b": {"positive": d.method_b.positive,
                         "quadrants": list(d.method_b.flagged),
                         "frame_mean": round(d.method_b.frame_mean, 4),
                         "quadrant_means": [round(m, 4) for m in d.method_b.quadrant_means]},
        }
        print(json.dumps(doc))
    return EXIT_OK


def _modes(token):
    if token == "all":
        return [Mode.A, Mode.B, Mode.HYBRID]
    return [_mode(token)]


def cmd_eval(args):
    cfg = _detector_config(args)
    modes = _modes(args.method)
    try:
        dataset = load_dataset(args.manifest)
        results = {}
        for mode in modes:
            cm, lat = run_eval(dataset, cfg, mode)
            results[mode] = MethodResult(cm, LatencyStats.from_samples(lat))
    except (DatasetError, EvalError) as exc:
        raise UsageError(str(exc)) from None
    text, csv_text = render_report(EvalReport(dataset.name, results, cfg))
    sys.stdout.write(text)
    if args.csv:
        atomic_write(args.csv, csv_text.encode("utf-8"))
    return EXIT_OK


def cmd_synth(args):
    from mistguard.synth import generate_sequence, get_scene
    if args.frames < 1:
        raise UsageError(f"--frames must be >= 1, got {args.frames}")
    try:
        scene = get_scene(args.scene)
    except KeyError as exc:
        raise UsageError(exc.args[0]) from None
    try:
        res = generate_sequence(scene, args.frames, args.seed, args.out)
    except OSError as exc:
        raise UsageError(str(exc)) from None
    print(res.manifest_path)
    print(f"manifest sha256 {res.manifest_digest}", file=sys.stderr)
    print(f"frames sha256 {res.frames_digest}", file=sys.stderr)
    return EXIT_OK


def cmd_bench(args):
    from mistguard.bench import bench, compare_backends
    if args.repeat < 1:
        raise UsageError(f"--repeat must be >= 1, got {args.repeat}")
    cfg = _detector_config(args)
    modes = _modes(args.method)
    if args.manifest:
        try:
            frames = load_frames(load_dataset(args.manifest))
        except (DatasetError, OSError, ValueError) as exc:
            raise UsageError(str(exc)) from None
    else:
        from mistguard.synth import get_scene, render_frame
        try:
            scene = get_scene(args.scene)
        except KeyError as exc:
            raise UsageError(exc.args[0]) from None
        if args.frames < 1:
            raise UsageError("--frames must be >= 1")
        frames = [render_frame(scene, i, args.seed) for i in range(args.frames)]
    if args.backend not in ("default", "both") and args.backend not in kernels.BACKENDS:
        raise UsageError(f"backend {args.backend!r} unavailable (have: {', '.join(kernels.BACKENDS)})")
    failed = False
    for mode in modes:
        if args.backend == "both":
            results = compare_backends(frames, mode, args.repeat, cfg)
        else:
            results = [bench(frames, mode, args.repeat, cfg,
                             None if args.backend == "default" else args.backend)]
        for r in results:
            print(r.line())
            failed |= r.verdict == "FAIL"
    return 1 if (failed and args.strict) else EXIT_OK


def cmd_node(args):
    from mistguard.node import ConfigError, NodeAbort, NodeConfig, load_config, run_node
    from mistguard.node.protocol import parse_endpoint
    try:
        cfg = load_config(args.config) if args.config else NodeConfig()
        if args.fps is not None:
            cfg.fps = args.fps
        if args.listen:
            cfg.listen = parse_endpoint(args.listen)
        if args.machine:
            cfg.machines = [parse_endpoint(m) for m in args.machine]
        NodeConfig(**vars(cfg))
    except (OSError, ConfigError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    try:
        run_node(cfg)
    except NodeAbort as exc:
        print(f"mistguard: {exc}", file=sys.stderr)
        return EXIT_FAILSAFE
    return EXIT_OK


def cmd_machine_sim(args):
    from mistguard.node import run_machine_sim
    from mistguard.node.protocol import parse_endpoint
    try:
        address = parse_endpoint(args.listen)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    try:
        run_machine_sim(address, args.id, args.log)
    except OSError as exc:
        raise UsageError(f"cannot listen on {args.listen}: {exc}") from None
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="mistguard", description="Thermal human-presence detection and machine safety node.",
                                allow_abbrev=False)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--log-level", default="WARNING", help="logging level (default WARNING)")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    s = sub.add_parser("preprocess", help="grayscale + smooth one PPM into a PGM", allow_abbrev=False)
    s.add_argument("--in", dest="input", required=True, help="input PPM (or PGM)")
    s.add_argument("--out", required=True, help="output PGM")
    s.add_argument("--kernel", type=int, default=5, help="Gaussian kernel side (odd, >= 3)")
    s.add_argument("--sigma", type=float, default=1.0, help="Gaussian sigma in pixels")
    s.set_defaults(func=cmd_preprocess)

    s = sub.add_parser("detect", help="run the hybrid detector on a frame or directory",
                       allow_abbrev=False)
    s.add_argument("--in", dest="input", required=True, help="frame file or directory of frames")
    _add_detector_flags(s)
    s.set_defaults(func=cmd_detect)

    s = sub.add_parser("eval", help="confusion matrix and accuracy over a manifest",
                       allow_abbrev=False)
    s.add_argument("--manifest", required=True, help="CSV manifest (frame,label,quadrants)")
    s.add_argument("--method", default="hybrid", help="a, b, hybrid or all (default hybrid)")
    s.add_argument("--csv", help="also write the machine-readable report here")
    _add_detector_flags(s)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("synth", help="generate a labeled synthetic frame sequence",
                       allow_abbrev=False)
    s.add_argument("--scene", required=True, help="scene name, e.g. walkthrough-42")
    s.add_argument("--frames", type=int, required=True, help="number of frames")
    s.add_argument("--seed", type=int, default=42, help="noise seed (default 42)")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("bench", help="in-memory per-frame latency benchmark", allow_abbrev=False)
    s.add_argument("--manifest", help="frames to preload; default renders a synthetic scene")
    s.add_argument("--scene", default="walkthrough-42", help="synthetic scene without --manifest")
    s.add_argument("--frames", type=int, default=1000, help="synthetic frame count (default 1000)")
    s.add_argument("--seed", type=int, default=42)
    s.add_argument("--method", default="hybrid", help="a, b, hybrid or all (default hybrid)")
    s.add_argument("--repeat", type=int, default=1, help="passes over the frames (>= 1)")
    s.add_argument("--backend", default="default",
                   help="kernel backend: default, python, cython or both")
    s.add_argument("--strict", action="store_true", help="exit 1 when a budget check FAILs")
    _add_detector_flags(s)
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("node", help="run the mist safety node", allow_abbrev=False)
    s.add_argument("--config", help="key = value config file")
    s.add_argument("--fps", type=float, help="override source.fps")
    s.add_argument("--listen", help="override node.listen (host:port)")
    s.add_argument("--machine", action="append", help="machine endpoint host:port (repeatable)")
    s.set_defaults(func=cmd_node)

    s = sub.add_parser("machine-sim", help="run a simulated robot controller", allow_abbrev=False)
    s.add_argument("--listen", required=True, help="host:port to bind")
    s.add_argument("--id", default="machine", help="machine id")
    s.add_argument("--log", help="CSV command log path")
    s.set_defaults(func=cmd_machine_sim)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"mistguard {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
