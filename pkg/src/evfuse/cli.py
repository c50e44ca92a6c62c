"""``evfuse`` command line: simulate, bin, reconstruct, gradcheck.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical divergence
(or a failed gradient check).
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import sys
from pathlib import Path

import numpy as np

from . import kernels
from .binning import bin_conflict_driven, bin_stacked
from .errors import ConfigError, DivergenceError, EvfuseError
from .events import STACKED, TERNARY, simulate_stream
from .gradcheck import DEFAULT_TOL, random_gradcheck
from .io import (
    atomic_write,
    load_config,
    parse_event_text,
    read_event_tensor,
    read_pgm,
    read_pgm_sequence,
    write_event_tensor,
    write_event_text,
    write_pgm,
    write_tensor,
)
from .metrics import error_map, psnr, ssim
from .sensing import Observation, SensingCase, make_problem
from .solver import SolverConfig, solve

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DIVERGED = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _config(args) -> SolverConfig:
    try:
        cfg = load_config(args.config) if args.config else SolverConfig()
    except FileNotFoundError:
        raise UsageError(f"config file {args.config} not found") from None
    overrides = {k: getattr(args, a) for a, k in
                 (("alpha", "alpha"), ("lambda_e", "lambda_e"), ("lambda_xy", "lambda_xy"),
                  ("lambda_t", "lambda_t"), ("lr", "lr0"), ("epochs", "epochs"),
                  ("eps_p", "eps_p"), ("eps_n", "eps_n"))
                 if getattr(args, a, None) is not None}
    try:
        return cfg.replace(**overrides)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _existing(path, what):
    p = Path(path)
    if not p.exists():
        raise UsageError(f"{what} {path} does not exist")
    return p


def cmd_simulate(args, out, err) -> int:
    video_dir = _existing(args.video_dir, "video directory")
    if not video_dir.is_dir():
        raise UsageError(f"{video_dir} is not a directory")
    cfg = _config(args)
    video = read_pgm_sequence(video_dir)
    stream = simulate_stream(video, cfg.thresholds, args.frame_period)
    write_event_text(stream, args.out_events)
    d, h, w = video.shape
    density = len(stream) / float(h * w * (d - 1))
    print(f"events: {len(stream)}", file=out)
    print(f"density: {density:.6f}", file=out)
    return EXIT_OK


def cmd_bin(args, out, err) -> int:
    if args.strategy == "stacked" and args.num_frames is None:
        raise UsageError("--strategy stacked requires --num-frames")
    stream = parse_event_text(_existing(args.events, "event file"))
    if args.strategy == "conflict":
        result = bin_conflict_driven(stream)
    else:
        result = bin_stacked(stream, args.num_frames, args.sub_frames)
    write_event_tensor(result.frames, args.out_tensor)
    noun = "frame" if result.num_frames == 1 else "frames"
    print(f"{result.num_frames} {noun}", file=out)
    for k, (start, end) in enumerate(result.frame_boundaries):
        print(f"  frame {k}: {start} .. {end} us", file=out)
    return EXIT_OK


def _export_error_map(err, path_stem):
    peak = float(err.max())
    scaled = err / peak if peak > 0 else np.zeros_like(err)
    write_pgm(scaled, path_stem.with_suffix(".pgm"))
    atomic_write(path_stem.with_suffix(".txt"), f"max = {peak!r}\n")


def cmd_reconstruct(args, out, err) -> int:
    if args.events is None:
        raise UsageError("reconstruct requires --events TENSOR")
    case = SensingCase.parse(args.case)
    if len(args.frames) != case.num_observed:
        raise UsageError(f"{case.value} takes {case.num_observed} observed frame(s), got {len(args.frames)}")
    events = read_event_tensor(_existing(args.events, "event tensor"))
    frames = [read_pgm(_existing(f, "frame")) for f in args.frames]
    cfg = _config(args)
    gt = None
    if args.ground_truth:
        gt = read_pgm_sequence(_existing(args.ground_truth, "ground-truth directory"))
    problem = make_problem(Observation(case, np.stack(frames)), events)
    if gt is not None and gt.shape != problem.shape:
        raise EvfuseError(f"ground truth has shape {gt.shape}, reconstruction {problem.shape}")
    H, trace = solve(problem, cfg, ground_truth=gt)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for k, frame in enumerate(H.data, start=1):
        write_pgm(frame, out_dir / f"frame_{k:03d}.pgm")
    write_tensor(H, out_dir / "reconstruction.evft")
    atomic_write(out_dir / "trace.csv", trace.to_csv())
    final = trace.records[-1].objective if len(trace) else float("nan")
    print(f"{problem.d} frames written to {out_dir}", file=out)
    print(f"final objective: {final:.6g}", file=out)
    if gt is not None:
        buf = _io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("frame", "psnr", "ssim"))
        for k, (est, tru) in enumerate(zip(H.data, gt), start=1):
            p = psnr(est, tru)
            s = ssim(est, tru) if min(est.shape) >= 11 else float("nan")
            w.writerow((k, repr(p), repr(s)))
            _export_error_map(error_map(est, tru), out_dir / f"error_{k:03d}")
            print(f"  frame {k:3d}: psnr {p:7.3f} dB  ssim {s:.4f}", file=out)
        atomic_write(out_dir / "metrics.csv", buf.getvalue())
    return EXIT_OK


def _shape(text):
    try:
        h, w, d = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"shape must look like 8x8x5 (h x w x d), got {text!r}")
    if h < 1 or w < 1 or d < 2:
        raise argparse.ArgumentTypeError("shape needs h, w >= 1 and d >= 2")
    return d, h, w


def cmd_gradcheck(args, out, err) -> int:
    cases = list(SensingCase) if args.case == "all" else [SensingCase.parse(args.case)]
    modes = [TERNARY, STACKED] if args.mode == "all" else [args.mode]
    worst = 0.0
    for case in cases:
        for mode in modes:
            r = random_gradcheck(args.seed, args.shape, case, mode, corrupt=args.corrupt_gradient)
            worst = max(worst, r.max_rel_error)
            print(f"{case.value:13s} {mode:8s} max relative error {r.max_rel_error:.3e} "
                  f"({r.checked} checked, {r.skipped} at kinks)", file=out)
    ok = worst < DEFAULT_TOL
    print(f"max relative error: {worst:.3e} ({'pass' if ok else 'FAIL'}, tolerance {DEFAULT_TOL:g})", file=out)
    if not ok:
        print(f"gradient check failed: {worst:.3e} >= {DEFAULT_TOL:g}", file=err)
    return EXIT_OK if ok else EXIT_DIVERGED


def _solver_flags(p):
    p.add_argument("--config", metavar="PATH")
    p.add_argument("--alpha", type=float)
    p.add_argument("--lambda-e", type=float)
    p.add_argument("--lambda-xy", type=float)
    p.add_argument("--lambda-t", type=float)
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="evfuse", description="Fuse intensity frames and events into high-framerate video.")
    parser.add_argument("--version", action="version", version=f"evfuse 0.1.0 ({kernels.BACKEND} kernels)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="fire events from a PGM frame sequence")
    p.add_argument("video_dir")
    p.add_argument("out_events")
    p.add_argument("--frame-period", type=int, default=1000, help="microseconds between frames")
    p.add_argument("--eps-p", type=float)
    p.add_argument("--eps-n", type=float)
    _solver_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bin", help="bin an event text file into event frames")
    p.add_argument("events")
    p.add_argument("out_tensor")
    p.add_argument("--strategy", choices=("conflict", "stacked"), default="conflict")
    p.add_argument("--num-frames", type=int)
    p.add_argument("--sub-frames", type=int, help="latent transitions covered by stacked frames")
    p.set_defaults(func=cmd_bin)

    p = sub.add_parser("reconstruct", help="solve for the high-framerate video")
    p.add_argument("case", choices=("interpolate", "predict", "deblur"))
    p.add_argument("frames", nargs="+", help="observed PGM frame(s)")
    p.add_argument("--events", metavar="TENSOR")
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--ground-truth", metavar="DIR")
    _solver_flags(p)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("gradcheck", help="compare the analytic gradient with finite differences")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--shape", type=_shape, default=(5, 8, 8), help="h x w x d, e.g. 8x8x5")
    p.add_argument("--case", choices=("interpolate", "predict", "deblur", "all"), default="interpolate")
    p.add_argument("--mode", choices=("ternary", "stacked", "all"), default="ternary")
    p.add_argument("--corrupt-gradient", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    try:
        args = build_parser().parse_args(argv)
        return args.func(args, out, err)
    except UsageError as exc:
        print(f"usage error: {exc}", file=err)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=err)
        return EXIT_USAGE
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=err)
        return EXIT_DIVERGED
    except (EvfuseError, ValueError, OSError) as exc:
        print(f"data error: {exc}", file=err)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
