"""Point-target scene simulator: received symbol grids, CSI division, and a
brute-force spectrum oracle used to validate the FFT pipeline."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .rdmap import RangeDopplerMap
from .waveform import WaveformConfig, unambiguous_limits


@dataclass(frozen=True)
class Target:
    """Point reflector with constant range, radial velocity, and complex gain.

    Velocity is the range rate: positive when the target recedes.
    """

    range_m: float
    velocity_mps: float
    gain: complex = 1.0 + 0.0j

    def delay_s(self, wave_speed_mps: float) -> float:
        return 2.0 * self.range_m / wave_speed_mps

    def doppler_hz(self, cfg: WaveformConfig) -> float:
        return 2.0 * self.velocity_mps * cfg.carrier_freq_hz / cfg.wave_speed_mps


@dataclass(frozen=True)
class Impairments:
    """Receiver non-idealities applied to a capture.

    The sample-clock offset is constant over a capture; the per-frame phase
    error is a random walk of occasional quantized jumps (integer multiples
    of ``phase_jump_step_rad``) plus Gaussian drift. The generator is a
    synthetic model of the abrupt frame-to-frame discontinuities seen on
    real NICs; the hardware's true statistics are not characterized.
    """

    delay_offset_samples: float = 0.0
    phase_jump_step_rad: float = 0.0
    phase_jump_prob: float = 0.0
    phase_drift_std_rad: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.phase_jump_prob <= 1.0:
            raise ValueError("phase_jump_prob must be in [0, 1]")
        if self.phase_jump_prob > 0 and self.phase_jump_step_rad <= 0:
            raise ValueError("phase_jump_step_rad must be > 0 when jumps enabled")
        if self.phase_drift_std_rad < 0:
            raise ValueError("phase_drift_std_rad must be >= 0")

    @property
    def active(self) -> bool:
        return (self.delay_offset_samples != 0.0 or self.phase_jump_prob > 0.0
                or self.phase_drift_std_rad > 0.0)


@dataclass(frozen=True)
class Scene:
    """Ground truth for one capture: movers, optional Tx/Rx coupling leakage,
    static clutter, noise level, and receiver impairments.

    ``snr_db`` is per grid entry, referenced to the strongest non-coupling
    target; None means noiseless. The coupling entry must sit at zero range
    and velocity and carry the largest gain magnitude in the scene.
    """

    targets: Sequence[Target] = ()
    coupling: Optional[Target] = None
    clutter: Sequence[Target] = ()
    snr_db: Optional[float] = None
    impairments: Impairments = field(default_factory=Impairments)

    def __post_init__(self):
        for t in self.clutter:
            if t.velocity_mps != 0.0:
                raise ValueError("clutter targets must have zero velocity")
        if self.coupling is not None:
            c = self.coupling
            if c.range_m != 0.0 or c.velocity_mps != 0.0:
                raise ValueError("coupling must sit at zero range and velocity")
            others = [abs(t.gain) for t in (*self.targets, *self.clutter)]
            if others and abs(c.gain) <= max(others):
                raise ValueError("coupling gain must dominate the scene")

    def reflectors(self) -> Tuple[Target, ...]:
        """All reflectors, coupling first when present."""
        head = (self.coupling,) if self.coupling is not None else ()
        return (*head, *self.targets, *self.clutter)

    def noise_reference_power(self) -> float:
        """|gain|^2 of the strongest non-coupling reflector (SNR reference)."""
        gains = [abs(t.gain) for t in (*self.targets, *self.clutter)]
        if not gains:
            raise ValueError("snr reference requires a non-coupling target")
        return max(gains) ** 2


def _check_bounds(cfg: WaveformConfig, targets: Sequence[Target]) -> None:
    r_max, v_max = unambiguous_limits(cfg)
    for t in targets:
        if not 0.0 <= t.range_m < r_max:
            raise ValueError(f"target range {t.range_m} m outside [0, {r_max})")
        if abs(t.velocity_mps) >= v_max / 2.0:
            raise ValueError(
                f"target velocity {t.velocity_mps} m/s outside +-{v_max / 2.0}")


def _channel_rows(cfg: WaveformConfig, targets: Sequence[Target],
                  frame_indices: np.ndarray) -> np.ndarray:
    """Channel factor sum_k a_k e^{j2pi T fD m} e^{-j2pi n df tau} per frame/bin."""
    n = np.arange(cfg.n_subcarriers)
    out = np.zeros((len(frame_indices), cfg.n_subcarriers), dtype=complex)
    for t in targets:
        tau = t.delay_s(cfg.wave_speed_mps)
        f_d = t.doppler_hz(cfg)
        doppler = np.exp(2j * np.pi * cfg.frame_interval_s * f_d * frame_indices)
        delay = np.exp(-2j * np.pi * n * cfg.subcarrier_spacing_hz * tau)
        out += t.gain * np.outer(doppler, delay)
    return out


def _delay_ramp(n_subcarriers: int, offset_samples: float) -> np.ndarray:
    n = np.arange(n_subcarriers)
    return np.exp(-2j * np.pi * n * offset_samples / n_subcarriers)


def phase_error_trace(imp: Impairments, n_frames: int) -> np.ndarray:
    """Cumulative per-frame phase error; frame 0 is error-free."""
    rng = np.random.default_rng([int(imp.rng_seed), 1])
    occurs = rng.random(n_frames - 1) < imp.phase_jump_prob
    signs = rng.integers(0, 2, n_frames - 1) * 2 - 1
    multiples = rng.integers(1, 3, n_frames - 1)
    jumps = np.where(occurs, signs * multiples * imp.phase_jump_step_rad, 0.0)
    drift = (rng.normal(0.0, imp.phase_drift_std_rad, n_frames - 1)
             if imp.phase_drift_std_rad > 0 else np.zeros(n_frames - 1))
    return np.concatenate([[0.0], np.cumsum(jumps + drift)])


def _apply_noise_and_impairments(cfg: WaveformConfig, grid: np.ndarray,
                                 snr_db: Optional[float], ref_power: float,
                                 imp: Impairments) -> np.ndarray:
    if snr_db is not None:
        sigma2 = ref_power * 10.0 ** (-snr_db / 10.0)
        rng = np.random.default_rng([int(imp.rng_seed), 2])
        grid = grid + np.sqrt(sigma2 / 2.0) * (
            rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape))
    if imp.delay_offset_samples != 0.0:
        grid = grid * _delay_ramp(cfg.n_subcarriers, imp.delay_offset_samples)
    if imp.phase_jump_prob > 0.0 or imp.phase_drift_std_rad > 0.0:
        phi = phase_error_trace(imp, grid.shape[0])
        grid = grid * np.exp(1j * phi)[:, None]
    return grid


def simulate_capture(cfg: WaveformConfig, scene: Scene,
                     symbols: np.ndarray) -> np.ndarray:
    """Received symbol grid for a static scene, shape (n_frames, n_subcarriers).

    Each reflector contributes its gain times a per-frame Doppler phasor and
    a per-subcarrier delay ramp; noise is added before the receiver
    impairments multiply in (they are unit-modulus, so noise statistics are
    unchanged).
    """
    if symbols.shape != (cfg.n_frames, cfg.n_subcarriers):
        raise ValueError(f"symbol grid shape {symbols.shape} does not match config")
    _check_bounds(cfg, scene.reflectors())
    frames = np.arange(cfg.n_frames)
    received = symbols * _channel_rows(cfg, scene.reflectors(), frames)
    ref_power = scene.noise_reference_power() if scene.snr_db is not None else 1.0
    return _apply_noise_and_impairments(
        cfg, received, scene.snr_db, ref_power, scene.impairments)


def csi_divide(received: np.ndarray, symbols: np.ndarray) -> np.ndarray:
    """Per-entry channel matrix: received grid divided by the known symbols."""
    if received.shape != symbols.shape:
        raise ValueError(
            f"grid shapes differ: {received.shape} vs {symbols.shape}")
    return received / symbols


def oracle_spectrum(cfg: WaveformConfig, scene: Scene,
                    range_bins: Optional[int] = None,
                    doppler_bins: Optional[int] = None) -> RangeDopplerMap:
    """Brute-force magnitude spectrum of a noiseless, impairment-free scene.

    Evaluates the channel matrix directly from the target parameters and
    takes its 2D transform by explicit nested summation over every output
    bin. No FFT and none of the pipeline stages are involved, so this is an
    independent cross-check for the FFT path. A target at delay tau and
    Doppler fD peaks at range bin tau*B and Doppler bin fD*M*T.
    """
    if scene.snr_db is not None:
        raise ValueError("oracle requires a noiseless scene")
    if scene.impairments.active:
        raise ValueError("oracle requires an impairment-free scene")
    _check_bounds(cfg, scene.reflectors())
    m_total, n_total = cfg.n_frames, cfg.n_subcarriers
    n_range = n_total if range_bins is None else int(range_bins)
    n_doppler = m_total if doppler_bins is None else int(doppler_bins)

    d = _channel_rows(cfg, scene.reflectors(), np.arange(m_total))
    m = np.arange(m_total)
    n = np.arange(n_total)
    doppler_axis = np.arange(n_doppler) - n_doppler // 2
    values = np.zeros((n_doppler, n_range))
    for pi, p in enumerate(doppler_axis):
        doppler_kernel = np.exp(-2j * np.pi * p * m / m_total)
        for li in range(n_range):
            range_kernel = np.exp(2j * np.pi * li * n / n_total)
            values[pi, li] = np.abs(
                np.sum(d * np.outer(doppler_kernel, range_kernel)))
    return RangeDopplerMap(
        values=values,
        range_scale_m=cfg.wave_speed_mps / (2.0 * cfg.bandwidth_hz),
        velocity_scale_mps=cfg.wave_speed_mps / (
            2.0 * cfg.carrier_freq_hz * m_total * cfg.frame_interval_s))


def trajectory_samples(path: Sequence[Tuple], frame_count: int,
                       frame_interval_s: float
                       ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-frame (times, ranges, velocities) from piecewise-linear waypoints.

    Waypoints are (t, range) or (t, range, velocity) tuples with strictly
    increasing t, covering [0, frame_count * frame_interval]. Range is
    interpolated linearly; velocity is taken from each segment's starting
    waypoint when given, otherwise from the segment slope.
    """
    if len(path) == 0:
        raise ValueError("empty trajectory path")
    ts = np.array([float(p[0]) for p in path])
    rs = np.array([float(p[1]) for p in path])
    vs = [float(p[2]) if len(p) > 2 and p[2] is not None else None for p in path]
    if len(ts) > 1 and np.any(np.diff(ts) <= 0):
        raise ValueError("path times must be strictly increasing")
    duration = frame_count * frame_interval_s
    tol = 1e-9 * max(1.0, duration)
    # A lone waypoint means a constant trajectory, which covers any span.
    if len(ts) > 1 and (ts[0] > tol or ts[-1] + tol < duration):
        raise ValueError(
            f"path covers [{ts[0]}, {ts[-1]}] s but capture needs "
            f"[0, {duration}] s")

    times = np.arange(frame_count) * frame_interval_s
    ranges = np.interp(times, ts, rs)
    if len(ts) == 1:
        velocities = np.full(frame_count, vs[0] if vs[0] is not None else 0.0)
    else:
        if all(v is not None for v in vs):
            segment_v = np.asarray(vs[:-1])
        else:
            segment_v = np.diff(rs) / np.diff(ts)
        seg = np.clip(np.searchsorted(ts, times, side="right") - 1,
                      0, len(segment_v) - 1)
        velocities = segment_v[seg]
    return times, ranges, velocities


def simulate_trajectory(cfg: WaveformConfig, path: Sequence[Tuple],
                        frame_count: int, *, gain: complex = 1.0 + 0.0j,
                        coupling: Optional[Target] = None,
                        clutter: Sequence[Target] = (),
                        snr_db: Optional[float] = None,
                        impairments: Optional[Impairments] = None
                        ) -> np.ndarray:
    """CSI stream for one mover following ``path``, shape (frame_count, N).

    The mover's delay ramp follows the interpolated per-frame range; its
    Doppler phase accumulates frame by frame from the instantaneous
    velocity, which reduces to the constant-velocity phasor on linear
    segments. Static coupling/clutter, noise, and impairments are applied
    exactly as in ``simulate_capture``.
    """
    if frame_count < 1:
        raise ValueError("frame_count must be >= 1")
    imp = impairments if impairments is not None else Impairments()
    _, ranges, velocities = trajectory_samples(
        path, frame_count, cfg.frame_interval_s)
    movers = [Target(float(r), float(v), gain) for r, v in zip(ranges, velocities)]
    _check_bounds(cfg, movers)
    statics = ((coupling,) if coupling is not None else ()) + tuple(clutter)
    _check_bounds(cfg, statics)

    n = np.arange(cfg.n_subcarriers)
    taus = 2.0 * ranges / cfg.wave_speed_mps
    delay_ramps = np.exp(-2j * np.pi * np.outer(
        taus, n * cfg.subcarrier_spacing_hz))
    f_d = 2.0 * velocities * cfg.carrier_freq_hz / cfg.wave_speed_mps
    steps = 2.0 * np.pi * cfg.frame_interval_s * f_d
    psi = np.concatenate([[0.0], np.cumsum(steps[1:])])
    grid = gain * np.exp(1j * psi)[:, None] * delay_ramps
    if statics:
        grid = grid + _channel_rows(cfg, statics, np.arange(frame_count))

    ref_power = max([abs(gain)] + [abs(t.gain) for t in clutter]) ** 2
    return _apply_noise_and_impairments(cfg, grid, snr_db, ref_power, imp)
