"""Command-line surface: simulate captures, process them into detections and
figure exports, evaluate against ground truth, and print capability numbers.

Exit codes: 0 success, 1 evaluation failure, 2 I/O or format error,
3 invalid arguments.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from typing import Optional

import numpy as np

from . import capture_io, rdmap
from .capture_io import CaptureFormatError
from .scenarios import PRESET_CONFIGS, ScenarioError, load_scenario, simulate_scenario
from .sync import SyncParams, synchronize
from .waveform import SPEED_OF_LIGHT, make_config, resolution_report

EXIT_OK = 0
EXIT_EVAL_FAILED = 1
EXIT_IO = 2
EXIT_USAGE = 3


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage; the contract reserves 2 for I/O errors.
    def error(self, message):
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="csisense",
                     description="Monostatic CSI range-Doppler sensing toolkit")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    calc = sub.add_parser("calc", help="print resolution/ambiguity/accuracy")
    calc.add_argument("--preset", choices=sorted(PRESET_CONFIGS),
                      help="start from a named parameter set")
    calc.add_argument("--subcarriers", type=int)
    calc.add_argument("--frames", type=int)
    calc.add_argument("--spacing", type=float, help="subcarrier spacing, Hz")
    calc.add_argument("--bandwidth", type=float, help="total bandwidth, Hz")
    calc.add_argument("--frame-interval", type=float, help="seconds")
    calc.add_argument("--carrier-freq", type=float, help="Hz")
    calc.add_argument("--wave-speed", type=float, default=SPEED_OF_LIGHT)
    calc.add_argument("--snr-db", type=float,
                      help="also print range accuracy at this SNR")
    calc.set_defaults(func=cmd_calc)

    sim = sub.add_parser("simulate", help="write a capture + truth CSV")
    sim.add_argument("--scenario", required=True,
                     help="preset name (test1, gesture) or scenario file")
    sim.add_argument("--seed", type=int, help="override the scenario seed")
    sim.add_argument("--out", required=True, help="capture file to write")
    sim.add_argument("--truth-out",
                     help="truth CSV path (default: <out>.truth.csv)")
    sim.set_defaults(func=cmd_simulate)

    proc = sub.add_parser("process", help="capture -> detections JSON lines")
    proc.add_argument("capture")
    proc.add_argument("--out", help="detections path (default: stdout)")
    proc.add_argument("--window", type=int, default=32, help="frames per map")
    proc.add_argument("--stride", type=int, default=1)
    proc.add_argument("--no-sic", action="store_true",
                      help="skip zero-Doppler removal")
    proc.add_argument("--no-sync", action="store_true",
                      help="skip delay/phase synchronization")
    proc.add_argument("--upsample", type=int, default=16,
                      help="delay refinement factor")
    proc.add_argument("--delta", type=float, default=math.pi / 2,
                      help="phase jump quantum, rad")
    proc.add_argument("--history", type=int, default=5,
                      help="phase reference history, frames")
    proc.add_argument("--max-lag", type=int,
                      help="coarse delay search half-width (default N/4)")
    proc.add_argument("--fft-window", choices=rdmap.WINDOW_FUNCTIONS,
                      default="hann")
    proc.add_argument("--threshold-db", type=float, default=12.0)
    proc.add_argument("--emit-maps", metavar="DIR",
                      help="write per-window CSV+PGM maps here")
    proc.add_argument("--emit-spectrogram", metavar="FILE",
                      help="write the Doppler-time profile (CSV, or PGM "
                           "if the name ends in .pgm)")
    proc.add_argument("--emit-sync-report", metavar="FILE",
                      help="write the sync report JSON")
    proc.set_defaults(func=cmd_process)

    ev = sub.add_parser("eval", help="compare detections against truth")
    ev.add_argument("detections", help="JSON-lines detections file")
    ev.add_argument("truth", help="truth CSV")
    ev.add_argument("--max-range-err", type=float, default=0.10,
                    help="median range error limit, m")
    ev.add_argument("--max-vel-err", type=float, default=0.03,
                    help="median velocity error limit, m/s")
    ev.add_argument("--min-true-velocity", type=float, default=0.0,
                    help="skip detections where |true velocity| is below this")
    ev.set_defaults(func=cmd_eval)
    return parser


def cmd_calc(args) -> int:
    params = dict(PRESET_CONFIGS[args.preset]) if args.preset else dict(
        PRESET_CONFIGS["wifi-ax211"])
    if args.subcarriers is not None:
        params["n_subcarriers"] = args.subcarriers
    if args.frames is not None:
        params["n_frames"] = args.frames
    if args.spacing is not None:
        params["subcarrier_spacing_hz"] = args.spacing
    if args.bandwidth is not None:
        params["bandwidth_hz"] = args.bandwidth
        if args.spacing is None:
            params.pop("subcarrier_spacing_hz", None)
    if args.frame_interval is not None:
        params["frame_interval_s"] = args.frame_interval
    if args.carrier_freq is not None:
        params["carrier_freq_hz"] = args.carrier_freq
    cfg = make_config(wave_speed_mps=args.wave_speed, **params)
    snr_linear = (10.0 ** (args.snr_db / 10.0)
                  if args.snr_db is not None else None)
    report = resolution_report(cfg, snr_linear)
    print(f"range_resolution_m = {report.range_resolution_m!r}")
    print(f"velocity_resolution_mps = {report.velocity_resolution_mps!r}")
    print(f"max_range_m = {report.max_range_m!r}")
    print(f"max_velocity_span_mps = {report.max_velocity_mps!r}")
    print(f"velocity_limits_mps = +-{report.max_velocity_mps / 2.0!r}")
    if report.range_accuracy_m is not None:
        print(f"range_accuracy_m = {report.range_accuracy_m!r}"
              f"  # at {args.snr_db} dB SNR")
    return EXIT_OK


def cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario)
    cfg, capture, truth = simulate_scenario(scenario, args.seed)
    frames = capture_io.write_capture(args.out, cfg, capture)
    truth_path = args.truth_out or f"{os.path.splitext(args.out)[0]}.truth.csv"
    capture_io.write_ground_truth(truth_path, truth)
    print(f"wrote {frames} frames to {args.out}; truth to {truth_path}")
    return EXIT_OK


def _sync_params(args, n_subcarriers: int) -> SyncParams:
    return SyncParams(
        upsample_factor=args.upsample, phase_step_rad=args.delta,
        history_len=args.history,
        max_lag=args.max_lag if args.max_lag is not None
        else max(1, n_subcarriers // 4))


def cmd_process(args) -> int:
    if args.no_sync and args.emit_sync_report:
        raise ValueError("--emit-sync-report requires synchronization "
                         "(drop --no-sync)")
    header, capture64 = capture_io.read_capture_array(args.capture)
    capture = capture64.astype(complex)
    if capture.shape[0] < args.window:
        raise ValueError(f"capture of {capture.shape[0]} frames is shorter "
                         f"than window {args.window}")
    cfg = make_config(
        n_subcarriers=header.n_subcarriers, n_frames=args.window,
        subcarrier_spacing_hz=header.subcarrier_spacing_hz,
        frame_interval_s=header.frame_interval_s,
        carrier_freq_hz=header.carrier_freq_hz)
    params = _sync_params(args, header.n_subcarriers)

    if not args.no_sync:
        capture, report = synchronize(capture, params)
        if args.emit_sync_report:
            capture_io.write_sync_report_json(args.emit_sync_report, report)

    # Sync (if any) already ran over the whole capture; windows are
    # independent from here on.
    detections = rdmap.track(
        capture, cfg, args.window, args.stride, apply_sync=False,
        apply_sic=not args.no_sic, window_fn=args.fft_window,
        threshold_db=args.threshold_db)
    if args.out:
        capture_io.write_detections_jsonl(args.out, detections)
    else:
        for det in detections:
            print(json.dumps(det.to_json_dict()))

    if args.emit_maps:
        os.makedirs(args.emit_maps, exist_ok=True)
        maps = rdmap.window_maps(
            capture, cfg, args.window, args.stride, apply_sync=False,
            apply_sic=not args.no_sic, window_fn=args.fft_window)
        for index, rdm in enumerate(maps):
            base = os.path.join(args.emit_maps, f"map_{index:05d}")
            capture_io.write_map_csv(base + ".csv", rdm)
            capture_io.write_map_pgm(base + ".pgm", rdm)
    if args.emit_spectrogram:
        profile = rdmap.doppler_time_profile(
            capture, cfg, args.window, args.stride, apply_sync=False,
            apply_sic=not args.no_sic, window_fn=args.fft_window)
        if args.emit_spectrogram.endswith(".pgm"):
            _write_profile_pgm(args.emit_spectrogram, profile)
        else:
            capture_io.write_profile_csv(args.emit_spectrogram, profile)
    return EXIT_OK


def _write_profile_pgm(path, profile) -> None:
    energy = profile.values
    floor = np.max(energy) * 1e-12 if np.max(energy) > 0 else 1.0
    db = 10.0 * np.log10(np.maximum(energy, floor))
    lo, hi = float(np.min(db)), float(np.max(db))
    span = hi - lo if hi > lo else 1.0
    pixels = np.round((db - lo) / span * 255.0).astype(np.uint8)
    header = f"P5\n{pixels.shape[1]} {pixels.shape[0]}\n255\n".encode()
    with open(path, "wb") as fh:
        fh.write(header + pixels.tobytes())


def cmd_eval(args) -> int:
    detections = capture_io.read_detections_jsonl(args.detections)
    truth = capture_io.read_ground_truth(args.truth)
    range_errors = []
    velocity_errors = []
    for index, det in enumerate(detections):
        try:
            t = float(det["t"])
            range_m = float(det["range_m"])
            velocity = float(det["velocity_mps"])
        except (KeyError, TypeError, ValueError) as exc:
            raise CaptureFormatError(
                f"detection {index} lacks a numeric t/range_m/velocity_mps: "
                f"{exc}") from exc
        if abs(float(truth.velocity_at(t))) < args.min_true_velocity:
            continue
        range_errors.append(abs(range_m - float(truth.range_at(t))))
        velocity_errors.append(abs(velocity - float(truth.velocity_at(t))))
    if not range_errors:
        print("nothing to evaluate: no detections pass the filters",
              file=sys.stderr)
        return EXIT_EVAL_FAILED

    r = np.array(range_errors)
    v = np.array(velocity_errors)
    print(f"detections_evaluated = {len(r)}")
    print(f"range_error_m: median={np.median(r):.6f} mean={np.mean(r):.6f} "
          f"p90={np.percentile(r, 90):.6f}")
    print(f"velocity_error_mps: median={np.median(v):.6f} "
          f"mean={np.mean(v):.6f} p90={np.percentile(v, 90):.6f}")
    ok = (np.median(r) <= args.max_range_err
          and np.median(v) <= args.max_vel_err)
    print(f"result = {'pass' if ok else 'fail'} "
          f"(limits: range {args.max_range_err} m, "
          f"velocity {args.max_vel_err} m/s)")
    return EXIT_OK if ok else EXIT_EVAL_FAILED


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except (CaptureFormatError, ScenarioError, OSError) as exc:
        print(f"csisense: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"csisense: {exc}", file=sys.stderr)
        return EXIT_USAGE


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
