"""Capture file format, trajectory CSV ingestion, and export writers.

Capture layout: a 38-byte little-endian header (magic ``CSIF``, version u16,
n_subcarriers u32, total frames u32, carrier Hz f64, spacing Hz f64, frame
interval s f64) followed by frame-major complex entries, each two 32-bit
floats (real then imaginary).
"""
from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass
from typing import IO, Iterable, Iterator, List, Sequence, Tuple

import numpy as np

from .rdmap import Detection, DopplerTimeProfile, RangeDopplerMap
from .sync import SyncReport
from .waveform import WaveformConfig

MAGIC = b"CSIF"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHIIddd")
_ENTRY_BYTES = 8  # two float32 per complex entry


class CaptureFormatError(Exception):
    """Malformed capture or trajectory file."""


@dataclass(frozen=True)
class CaptureHeader:
    """Waveform metadata carried by a capture file."""

    n_subcarriers: int
    n_frames: int
    carrier_freq_hz: float
    subcarrier_spacing_hz: float
    frame_interval_s: float
    version: int = FORMAT_VERSION

    @property
    def bandwidth_hz(self) -> float:
        return self.n_subcarriers * self.subcarrier_spacing_hz


def write_capture(path, cfg: WaveformConfig,
                  frames: Iterable[np.ndarray]) -> int:
    """Stream frames to a capture file; returns the frame count written.

    The frame total is patched into the header after the stream ends, so
    the iterable's length need not be known up front.
    """
    count = 0
    with open(path, "wb") as fh:
        fh.write(_pack_header(cfg, 0))
        for frame in frames:
            row = np.asarray(frame, dtype=np.complex64).ravel()
            if row.size != cfg.n_subcarriers:
                raise CaptureFormatError(
                    f"frame {count} has {row.size} entries, expected "
                    f"{cfg.n_subcarriers}")
            fh.write(row.astype("<c8").tobytes())
            count += 1
        fh.seek(0)
        fh.write(_pack_header(cfg, count))
    return count


def _pack_header(cfg: WaveformConfig, n_frames: int) -> bytes:
    return _HEADER.pack(MAGIC, FORMAT_VERSION, cfg.n_subcarriers, n_frames,
                        cfg.carrier_freq_hz, cfg.subcarrier_spacing_hz,
                        cfg.frame_interval_s)


def read_header(fh: IO[bytes]) -> CaptureHeader:
    raw = fh.read(_HEADER.size)
    if len(raw) < _HEADER.size:
        raise CaptureFormatError("file too short for capture header")
    magic, version, n_sub, n_frames, f_c, spacing, interval = _HEADER.unpack(raw)
    if magic != MAGIC:
        raise CaptureFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise CaptureFormatError(f"unsupported format version {version}")
    if n_sub == 0 or f_c <= 0 or spacing <= 0 or interval <= 0:
        raise CaptureFormatError("non-positive header field")
    return CaptureHeader(n_subcarriers=n_sub, n_frames=n_frames,
                         carrier_freq_hz=f_c, subcarrier_spacing_hz=spacing,
                         frame_interval_s=interval, version=version)


def read_capture(path) -> Tuple[CaptureHeader, Iterator[np.ndarray]]:
    """Open a capture for streaming: header plus a one-frame-at-a-time
    generator. Truncated payloads raise with the offending frame index."""
    fh = open(path, "rb")
    try:
        header = read_header(fh)
    except Exception:
        fh.close()
        raise

    def frames() -> Iterator[np.ndarray]:
        frame_bytes = header.n_subcarriers * _ENTRY_BYTES
        try:
            for index in range(header.n_frames):
                raw = fh.read(frame_bytes)
                if len(raw) < frame_bytes:
                    raise CaptureFormatError(
                        f"truncated at frame {index}: expected {frame_bytes} "
                        f"bytes, got {len(raw)}")
                yield np.frombuffer(raw, dtype="<c8").copy()
        finally:
            fh.close()

    return header, frames()


def read_capture_array(path) -> Tuple[CaptureHeader, np.ndarray]:
    """Whole capture as an (n_frames, n_subcarriers) complex64 array."""
    header, frames = read_capture(path)
    rows = list(frames)
    if rows:
        return header, np.vstack(rows)
    return header, np.zeros((0, header.n_subcarriers), dtype=np.complex64)


@dataclass(frozen=True)
class Trajectory:
    """Ground-truth track with linear interpolation between samples."""

    times_s: np.ndarray
    ranges_m: np.ndarray
    velocities_mps: np.ndarray

    def range_at(self, t) -> np.ndarray:
        return np.interp(t, self.times_s, self.ranges_m)

    def velocity_at(self, t) -> np.ndarray:
        return np.interp(t, self.times_s, self.velocities_mps)


_TRUTH_FIELDS = ["t", "range_m", "velocity_mps"]


def read_ground_truth(path) -> Trajectory:
    """Parse a truth CSV with header ``t,range_m,velocity_mps``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != _TRUTH_FIELDS:
            raise CaptureFormatError(
                f"truth file must start with header {','.join(_TRUTH_FIELDS)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise CaptureFormatError(f"line {lineno}: expected 3 columns")
            try:
                rows.append(tuple(float(x) for x in row))
            except ValueError as exc:
                raise CaptureFormatError(f"line {lineno}: {exc}") from exc
    if not rows:
        raise CaptureFormatError("truth file has no data rows")
    times = np.array([r[0] for r in rows])
    if np.any(np.diff(times) <= 0):
        raise CaptureFormatError("truth timestamps must be strictly increasing")
    return Trajectory(times_s=times,
                      ranges_m=np.array([r[1] for r in rows]),
                      velocities_mps=np.array([r[2] for r in rows]))


def write_ground_truth(path, trajectory: Trajectory) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_TRUTH_FIELDS)
        for t, r, v in zip(trajectory.times_s, trajectory.ranges_m,
                           trajectory.velocities_mps):
            writer.writerow([repr(float(t)), repr(float(r)), repr(float(v))])


def write_map_csv(path, rdm: RangeDopplerMap) -> None:
    """Magnitude map as CSV: range header row, velocity header column."""
    mag = rdm.magnitude()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["velocity_mps"] +
                        [repr(l * rdm.range_scale_m) for l in range(rdm.n_range)])
        for row, p in enumerate(rdm.doppler_bins()):
            writer.writerow([repr(float(p) * rdm.velocity_scale_mps)] +
                            [repr(float(x)) for x in mag[row]])


def _to_pgm(values_db: np.ndarray) -> bytes:
    lo, hi = float(np.min(values_db)), float(np.max(values_db))
    span = hi - lo if hi > lo else 1.0
    pixels = np.round((values_db - lo) / span * 255.0).astype(np.uint8)
    header = f"P5\n{pixels.shape[1]} {pixels.shape[0]}\n255\n".encode()
    return header + pixels.tobytes()


def write_map_pgm(path, rdm: RangeDopplerMap) -> None:
    """Log-magnitude map as 8-bit binary PGM, normalized per map."""
    mag = rdm.magnitude()
    floor = np.max(mag) * 1e-9 if np.max(mag) > 0 else 1.0
    db = 20.0 * np.log10(np.maximum(mag, floor))
    with open(path, "wb") as fh:
        fh.write(_to_pgm(db))


def write_profile_csv(path, profile: DopplerTimeProfile) -> None:
    """Doppler-time profile as CSV: window-time header row, velocity column."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["velocity_mps"] +
                        [repr(float(t)) for t in profile.window_times_s])
        for row, p in enumerate(profile.doppler_bins()):
            writer.writerow([repr(float(p) * profile.velocity_scale_mps)] +
                            [repr(float(x)) for x in profile.values[row]])


def write_detections_jsonl(path, detections: Sequence[Detection]) -> None:
    with open(path, "w") as fh:
        for det in detections:
            fh.write(json.dumps(det.to_json_dict()) + "\n")


def read_detections_jsonl(path) -> List[dict]:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise CaptureFormatError(f"line {lineno}: {exc}") from exc
    return out


def write_sync_report_json(path, report: SyncReport) -> None:
    with open(path, "w") as fh:
        json.dump(report.to_json_dict(), fh, indent=2)
        fh.write("\n")
