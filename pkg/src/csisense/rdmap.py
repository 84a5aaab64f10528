"""Range-Doppler map formation, sub-bin peak estimation, detection, and
sliding-window tracking over long captures."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace as dc_replace
from typing import List, Optional, Tuple

import numpy as np

from . import sic
from .sync import SyncParams, synchronize
from .waveform import WaveformConfig

WINDOW_FUNCTIONS = ("rect", "hann")


@dataclass
class RangeDopplerMap:
    """2D spectrum over (Doppler bin, range bin) with physical axis scales.

    Rows are Doppler bins p in [-P/2, P/2) with bin 0 at the center row;
    columns are range bins l in [0, L). ``values`` may be complex (FFT
    pipeline) or real magnitude (oracle). Scales are meters / m-per-second
    per bin of this map.
    """

    values: np.ndarray
    range_scale_m: float
    velocity_scale_mps: float
    timestamp_s: float = 0.0

    @property
    def n_doppler(self) -> int:
        return self.values.shape[0]

    @property
    def n_range(self) -> int:
        return self.values.shape[1]

    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)

    def doppler_bins(self) -> np.ndarray:
        """Signed Doppler bin index per row."""
        return np.arange(self.n_doppler) - self.n_doppler // 2

    def argmax_cell(self) -> Tuple[int, int]:
        """(row, col) of the magnitude maximum."""
        idx = int(np.argmax(self.magnitude()))
        return idx // self.n_range, idx % self.n_range

    def argmax_bin(self) -> Tuple[int, int]:
        """(doppler bin, range bin) of the magnitude maximum."""
        row, col = self.argmax_cell()
        return row - self.n_doppler // 2, col


@dataclass(frozen=True)
class Detection:
    """One estimated return: when, where, how fast, how strong."""

    time_s: float
    range_m: float
    velocity_mps: float
    power_db: float
    bin_l: int
    bin_p: int
    offset_l: float = 0.0
    offset_p: float = 0.0

    def to_json_dict(self) -> dict:
        return {
            "t": float(self.time_s),
            "range_m": float(self.range_m),
            "velocity_mps": float(self.velocity_mps),
            "power_db": float(self.power_db),
            "bin_l": int(self.bin_l),
            "bin_p": int(self.bin_p),
        }


@dataclass
class DopplerTimeProfile:
    """Doppler energy vs. time: one column per sliding window."""

    values: np.ndarray              # (doppler bins, windows)
    velocity_scale_mps: float
    window_times_s: np.ndarray
    stride_frames: int

    def doppler_bins(self) -> np.ndarray:
        return np.arange(self.values.shape[0]) - self.values.shape[0] // 2


def _axis_window(kind: str, length: int) -> np.ndarray:
    if kind == "rect":
        return np.ones(length)
    if kind == "hann":
        return np.hanning(length)
    raise ValueError(f"unknown window function {kind!r}")


def range_doppler(grid: np.ndarray, cfg: WaveformConfig,
                  window_fn: str = "rect", zero_pad: int = 1,
                  timestamp_s: float = 0.0) -> RangeDopplerMap:
    """2D transform of a synchronized, DC-removed CSI window.

    The range axis is an (unnormalized) inverse DFT over subcarriers, so a
    return at delay tau peaks at bin tau*B; the Doppler axis is a forward
    DFT over frames, peaking at bin fD*M*T, then center-shifted. Optional
    per-axis windows are applied before the transforms; ``zero_pad``
    interpolates both axes by that integer factor.
    """
    grid = np.asarray(grid)
    if grid.ndim != 2 or grid.shape[0] < 2 or grid.shape[1] < 2:
        raise ValueError("need a 2-D grid of at least 2x2")
    m_frames, n_sub = grid.shape
    if zero_pad < 1:
        raise ValueError("zero_pad must be >= 1")
    tapered = grid * np.outer(_axis_window(window_fn, m_frames),
                              _axis_window(window_fn, n_sub))
    # Spectra occupy bins 0..N-1 / 0..M-1, so padding goes at the top. The
    # range transform is the unnormalized sum, so an on-bin unit exponential
    # peaks at magnitude M*N under a rectangular window.
    range_profiles = (np.fft.ifft(tapered, n=n_sub * zero_pad, axis=1)
                      * n_sub * zero_pad)
    spectrum = np.fft.fftshift(
        np.fft.fft(range_profiles, n=m_frames * zero_pad, axis=0), axes=0)
    return RangeDopplerMap(
        values=spectrum,
        range_scale_m=cfg.wave_speed_mps / (2.0 * cfg.bandwidth_hz * zero_pad),
        velocity_scale_mps=cfg.wave_speed_mps / (
            2.0 * cfg.carrier_freq_hz * m_frames * cfg.frame_interval_s
            * zero_pad),
        timestamp_s=timestamp_s)


def _log_magnitude(mag: np.ndarray) -> np.ndarray:
    floor = np.max(mag) * 1e-15 if np.max(mag) > 0 else 1e-300
    return np.log(np.maximum(mag, floor))


def _parabolic_offset(left: float, center: float, right: float) -> float:
    denom = left - 2.0 * center + right
    if denom >= 0.0:
        # Flat or non-concave: no reliable vertex.
        return 0.0
    offset = 0.5 * (left - right) / denom
    return float(np.clip(offset, -0.5, 0.5))


def estimate_peak(rdm: RangeDopplerMap,
                  cell: Tuple[int, int]) -> Tuple[float, float, float]:
    """Sub-bin (range_m, velocity_mps, power_db) at a local-maximum cell.

    Fits a parabola to log-magnitudes along each axis independently; both
    DFT axes are periodic, so neighbors wrap around at the edges. Offsets
    are clamped to half a bin and the range estimate to >= 0.
    """
    row, col = cell
    mag = rdm.magnitude()
    logmag = _log_magnitude(mag)
    up, down = (row - 1) % rdm.n_doppler, (row + 1) % rdm.n_doppler
    left, right = (col - 1) % rdm.n_range, (col + 1) % rdm.n_range
    here = mag[row, col]
    if here < mag[up, col] or here < mag[down, col] \
            or here < mag[row, left] or here < mag[row, right]:
        raise ValueError(f"cell {cell} is not a local maximum")
    off_l = _parabolic_offset(logmag[row, left], logmag[row, col],
                              logmag[row, right])
    off_p = _parabolic_offset(logmag[up, col], logmag[row, col],
                              logmag[down, col])
    bin_p = row - rdm.n_doppler // 2
    range_m = max(0.0, (col + off_l) * rdm.range_scale_m)
    # keep the estimate inside the physical axes even at edge bins
    velocity_limit = rdm.velocity_scale_mps * rdm.n_doppler / 2.0
    velocity = float(np.clip((bin_p + off_p) * rdm.velocity_scale_mps,
                             -velocity_limit, velocity_limit))
    power_db = 20.0 * logmag[row, col] / np.log(10.0)
    return range_m, velocity, power_db


def _local_maxima(mag: np.ndarray) -> np.ndarray:
    """Boolean mask of cells >= all 8 neighbors (circular on both axes)."""
    mask = np.ones_like(mag, dtype=bool)
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if dr == 0 and dc == 0:
                continue
            mask &= mag >= np.roll(np.roll(mag, dr, axis=0), dc, axis=1)
    return mask


def detect(rdm: RangeDopplerMap, threshold_db: float = 12.0,
           max_targets: int = 5) -> List[Detection]:
    """Greedy local-maxima picking above the noise floor.

    The floor is the median map magnitude; candidates must exceed it by
    ``threshold_db``. Picks descend by power, each suppressing its 3x3
    neighborhood, and are refined by sub-bin interpolation. Reported power
    is dB above the floor.
    """
    mag = rdm.magnitude()
    floor = float(np.median(mag))
    if floor <= 0.0:
        floor = float(np.max(mag)) * 1e-9
    if floor <= 0.0:
        return []
    threshold = floor * 10.0 ** (threshold_db / 20.0)
    candidates = _local_maxima(mag) & (mag >= threshold) & (mag > 0)
    available = candidates.copy()
    floor_db = 20.0 * math.log10(floor)
    picks: List[Detection] = []
    while len(picks) < max_targets and np.any(available):
        flat = int(np.argmax(np.where(available, mag, -np.inf)))
        row, col = flat // rdm.n_range, flat % rdm.n_range
        range_m, velocity, power_db = estimate_peak(rdm, (row, col))
        picks.append(Detection(
            time_s=rdm.timestamp_s, range_m=range_m, velocity_mps=velocity,
            power_db=power_db - floor_db, bin_l=col,
            bin_p=row - rdm.n_doppler // 2,
            offset_l=range_m / rdm.range_scale_m - col,
            offset_p=velocity / rdm.velocity_scale_mps
            - (row - rdm.n_doppler // 2)))
        rows = [(row + dr) % rdm.n_doppler for dr in (-1, 0, 1)]
        cols = [(col + dc) % rdm.n_range for dc in (-1, 0, 1)]
        available[np.ix_(rows, cols)] = False
    return picks


def window_starts(n_frames: int, window: int, stride: int) -> range:
    if window < 2:
        raise ValueError("window must be >= 2 frames")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if n_frames < window:
        raise ValueError(
            f"capture of {n_frames} frames is shorter than window {window}")
    return range(0, n_frames - window + 1, stride)


def _prepare_capture(capture: np.ndarray, cfg: WaveformConfig, window: int,
                     apply_sync: bool, sync_params: Optional[SyncParams]
                     ) -> Tuple[np.ndarray, WaveformConfig]:
    capture = np.asarray(capture, dtype=complex)
    if capture.ndim != 2:
        raise ValueError("capture must be a 2-D frame-by-subcarrier array")
    if capture.shape[0] < window:
        raise ValueError(
            f"capture of {capture.shape[0]} frames is shorter than "
            f"window {window}")
    cfg_win = (cfg if cfg.n_frames == window
               else dc_replace(cfg, n_frames=window))
    if apply_sync:
        capture, _ = synchronize(capture, sync_params)
    return capture, cfg_win


def window_maps(capture: np.ndarray, cfg: WaveformConfig,
                window: Optional[int] = None, stride: int = 1, *,
                apply_sync: bool = True, apply_sic: bool = True,
                sync_params: Optional[SyncParams] = None,
                window_fn: str = "hann"):
    """Yield one range-Doppler map per sliding window, center-timestamped."""
    window = window if window is not None else cfg.n_frames
    capture, cfg_win = _prepare_capture(
        capture, cfg, window, apply_sync, sync_params)
    half = (window - 1) / 2.0
    for start in window_starts(capture.shape[0], window, stride):
        block = capture[start:start + window]
        if apply_sic:
            block = sic.remove_dc(block)
        t = (start + half) * cfg_win.frame_interval_s
        yield range_doppler(block, cfg_win, window_fn=window_fn, timestamp_s=t)


def track(capture: np.ndarray, cfg: WaveformConfig,
          window: Optional[int] = None, stride: int = 1, *,
          apply_sync: bool = True, apply_sic: bool = True,
          sync_params: Optional[SyncParams] = None, window_fn: str = "hann",
          threshold_db: float = 12.0) -> List[Detection]:
    """Strongest detection per sliding window over a long capture.

    Synchronization runs once over the whole capture (the sample-clock
    offset is constant and phase alignment is sequential); each window is
    then DC-removed, transformed, and searched independently. Timestamps
    sit at window centers; windows with nothing above threshold simply
    contribute no detection.
    """
    detections: List[Detection] = []
    for rdm in window_maps(capture, cfg, window, stride,
                           apply_sync=apply_sync, apply_sic=apply_sic,
                           sync_params=sync_params, window_fn=window_fn):
        picks = detect(rdm, threshold_db=threshold_db, max_targets=1)
        if picks:
            detections.append(picks[0])
    return detections


def doppler_time_profile(capture: np.ndarray, cfg: WaveformConfig,
                         window: Optional[int] = None, stride: int = 1, *,
                         apply_sync: bool = True, apply_sic: bool = True,
                         sync_params: Optional[SyncParams] = None,
                         window_fn: str = "hann") -> DopplerTimeProfile:
    """Doppler spectrogram: per window, map energy summed over range bins."""
    window = window if window is not None else cfg.n_frames
    columns = []
    times = []
    for rdm in window_maps(capture, cfg, window, stride,
                           apply_sync=apply_sync, apply_sic=apply_sic,
                           sync_params=sync_params, window_fn=window_fn):
        columns.append(np.sum(rdm.magnitude() ** 2, axis=1))
        times.append(rdm.timestamp_s)
    return DopplerTimeProfile(
        values=np.array(columns).T if columns else np.zeros((window, 0)),
        velocity_scale_mps=cfg.wave_speed_mps / (
            2.0 * cfg.carrier_freq_hz * window * cfg.frame_interval_s),
        window_times_s=np.array(times), stride_frames=stride)
