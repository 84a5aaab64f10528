"""Built-in scenario presets and the key-value scenario file parser."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .capture_io import Trajectory
from .channel import Impairments, Target, simulate_trajectory, trajectory_samples
from .waveform import SPEED_OF_LIGHT, WaveformConfig, make_config


class ScenarioError(Exception):
    """Bad scenario name or file contents."""


# 160 MHz / 6.3 GHz / 25 ms frame spacing: the Wi-Fi 6E sensing setup.
PRESET_CONFIGS = {
    "wifi-ax211": dict(n_subcarriers=512, n_frames=32,
                       subcarrier_spacing_hz=312.5e3, frame_interval_s=0.025,
                       carrier_freq_hz=6.3e9),
}

SCENARIO_TEST1 = """\
# Metal plate on a rail: 0.6 m -> 0.3 m over 3.9 s.
subcarriers = 512
spacing_hz = 312.5e3
frame_interval_s = 0.025
carrier_freq_hz = 6.3e9
frame_count = 156
snr_db = 20
target_gain = 1.0
coupling_gain_db = 30
path = 0, 0.6; 3.9, 0.3
delay_offset_samples = 2.25
phase_jump_step_rad = 1.5707963267948966
phase_jump_prob = 0.08
phase_drift_std_rad = 0.005
"""

SCENARIO_GESTURE = """\
# Hand waved toward/away from the antennas: 0 -> 0.4 m triangle, 2 s period.
subcarriers = 512
spacing_hz = 312.5e3
frame_interval_s = 0.025
carrier_freq_hz = 6.3e9
frame_count = 320
snr_db = 20
target_gain = 1.0
coupling_gain_db = 30
path = 0, 0; 1, 0.4; 2, 0; 3, 0.4; 4, 0; 5, 0.4; 6, 0; 7, 0.4; 8, 0
delay_offset_samples = 2.25
phase_jump_step_rad = 1.5707963267948966
phase_jump_prob = 0.08
phase_drift_std_rad = 0.005
"""

PRESET_SCENARIOS = {"test1": SCENARIO_TEST1, "gesture": SCENARIO_GESTURE}


@dataclass
class Scenario:
    """Parsed simulation description."""

    n_subcarriers: int
    subcarrier_spacing_hz: float
    frame_interval_s: float
    carrier_freq_hz: float
    frame_count: int
    path: List[Tuple[float, ...]]
    wave_speed_mps: float = SPEED_OF_LIGHT
    snr_db: Optional[float] = None
    target_gain: float = 1.0
    coupling_gain_db: Optional[float] = None
    clutter: List[Tuple[float, float]] = field(default_factory=list)
    delay_offset_samples: float = 0.0
    phase_jump_step_rad: float = 0.0
    phase_jump_prob: float = 0.0
    phase_drift_std_rad: float = 0.0
    seed: int = 0

    def config(self, n_frames: Optional[int] = None) -> WaveformConfig:
        return make_config(
            n_subcarriers=self.n_subcarriers,
            n_frames=n_frames if n_frames is not None else self.frame_count,
            subcarrier_spacing_hz=self.subcarrier_spacing_hz,
            frame_interval_s=self.frame_interval_s,
            carrier_freq_hz=self.carrier_freq_hz,
            wave_speed_mps=self.wave_speed_mps)


def _parse_path(value: str) -> List[Tuple[float, ...]]:
    points = []
    for chunk in value.split(";"):
        parts = [p.strip() for p in chunk.split(",") if p.strip()]
        if len(parts) not in (2, 3):
            raise ScenarioError(f"path waypoint {chunk!r} needs t,range[,velocity]")
        points.append(tuple(float(p) for p in parts))
    if not points:
        raise ScenarioError("path has no waypoints")
    return points


def _parse_clutter(value: str) -> List[Tuple[float, float]]:
    out = []
    for chunk in value.split(";"):
        parts = [p.strip() for p in chunk.split(",") if p.strip()]
        if len(parts) != 2:
            raise ScenarioError(f"clutter entry {chunk!r} needs range,gain")
        out.append((float(parts[0]), float(parts[1])))
    return out


_FLOAT_KEYS = {
    "spacing_hz": "subcarrier_spacing_hz",
    "frame_interval_s": "frame_interval_s",
    "carrier_freq_hz": "carrier_freq_hz",
    "wave_speed_mps": "wave_speed_mps",
    "target_gain": "target_gain",
    "coupling_gain_db": "coupling_gain_db",
    "delay_offset_samples": "delay_offset_samples",
    "phase_jump_step_rad": "phase_jump_step_rad",
    "phase_jump_prob": "phase_jump_prob",
    "phase_drift_std_rad": "phase_drift_std_rad",
}


def parse_scenario(text: str) -> Scenario:
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioError(f"line {lineno}: expected key = value")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        try:
            if key == "subcarriers":
                values["n_subcarriers"] = int(float(value))
            elif key == "frame_count":
                values["frame_count"] = int(float(value))
            elif key == "seed":
                values["seed"] = int(float(value))
            elif key == "bandwidth_hz":
                values["bandwidth_hz"] = float(value)
            elif key == "snr_db":
                values["snr_db"] = None if value.lower() == "none" else float(value)
            elif key == "path":
                values["path"] = _parse_path(value)
            elif key == "clutter":
                values["clutter"] = _parse_clutter(value)
            elif key in _FLOAT_KEYS:
                values[_FLOAT_KEYS[key]] = float(value)
            else:
                raise ScenarioError(f"line {lineno}: unknown key {key!r}")
        except ValueError as exc:
            raise ScenarioError(f"line {lineno}: {exc}") from exc

    bandwidth = values.pop("bandwidth_hz", None)
    if bandwidth is not None and "subcarrier_spacing_hz" not in values:
        if "n_subcarriers" not in values:
            raise ScenarioError("bandwidth_hz needs subcarriers")
        values["subcarrier_spacing_hz"] = bandwidth / values["n_subcarriers"]
    missing = [k for k in ("n_subcarriers", "subcarrier_spacing_hz",
                           "frame_interval_s", "carrier_freq_hz",
                           "frame_count", "path") if k not in values]
    if missing:
        raise ScenarioError(f"scenario is missing keys: {', '.join(missing)}")
    return Scenario(**values)


def load_scenario(name_or_path: str) -> Scenario:
    """Resolve a preset name or read a scenario file."""
    if name_or_path in PRESET_SCENARIOS:
        return parse_scenario(PRESET_SCENARIOS[name_or_path])
    try:
        with open(name_or_path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ScenarioError(
            f"{name_or_path!r} is neither a preset "
            f"({', '.join(sorted(PRESET_SCENARIOS))}) nor a readable file: "
            f"{exc}") from exc
    return parse_scenario(text)


def simulate_scenario(scenario: Scenario, seed: Optional[int] = None
                      ) -> Tuple[WaveformConfig, np.ndarray, Trajectory]:
    """Produce (config, CSI capture, per-frame ground truth) for a scenario."""
    rng_seed = seed if seed is not None else scenario.seed
    impairments = Impairments(
        delay_offset_samples=scenario.delay_offset_samples,
        phase_jump_step_rad=scenario.phase_jump_step_rad,
        phase_jump_prob=scenario.phase_jump_prob,
        phase_drift_std_rad=scenario.phase_drift_std_rad,
        rng_seed=rng_seed)
    coupling = None
    if scenario.coupling_gain_db is not None:
        coupling = Target(0.0, 0.0, scenario.target_gain
                          * 10.0 ** (scenario.coupling_gain_db / 20.0))
    clutter = [Target(r, 0.0, g) for r, g in scenario.clutter]
    cfg = scenario.config()
    capture = simulate_trajectory(
        cfg, scenario.path, scenario.frame_count, gain=scenario.target_gain,
        coupling=coupling, clutter=clutter, snr_db=scenario.snr_db,
        impairments=impairments)
    times, ranges, velocities = trajectory_samples(
        scenario.path, scenario.frame_count, scenario.frame_interval_s)
    truth = Trajectory(times_s=times, ranges_m=ranges,
                       velocities_mps=velocities)
    return cfg, capture, truth
