import json

import numpy as np
import pytest

from csisense.cli import main

SMALL_SCENARIO = """\
subcarriers = 64
spacing_hz = 312.5e3
frame_interval_s = 0.025
carrier_freq_hz = 6.3e9
frame_count = 48
snr_db = 20
target_gain = 1.0
coupling_gain_db = 30
path = 0, 10.0; 1.2, 10.3
delay_offset_samples = 1.25
phase_jump_step_rad = 1.5707963267948966
phase_jump_prob = 0.1
phase_drift_std_rad = 0.005
"""


def parse_kv(output):
    values = {}
    for line in output.strip().splitlines():
        key, _, rest = line.partition("=")
        values[key.strip()] = rest.split("#")[0].strip()
    return values


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    scenario = root / "small.scenario"
    scenario.write_text(SMALL_SCENARIO)
    assert main(["simulate", "--scenario", str(scenario), "--seed", "3",
                 "--out", str(root / "cap.bin")]) == 0
    assert main(["process", str(root / "cap.bin"), "--window", "16",
                 "--out", str(root / "det.jsonl")]) == 0
    return root


def test_calc_preset(capsys):
    assert main(["calc", "--preset", "wifi-ax211"]) == 0
    values = parse_kv(capsys.readouterr().out)
    assert float(values["range_resolution_m"]) == pytest.approx(0.936875)
    assert float(values["velocity_resolution_mps"]) == pytest.approx(
        0.0297420634920635, rel=1e-9)
    assert float(values["max_range_m"]) == pytest.approx(479.68)
    assert values["velocity_limits_mps"].startswith("+-0.4758")


def test_calc_with_snr(capsys):
    assert main(["calc", "--preset", "wifi-ax211", "--snr-db", "20"]) == 0
    values = parse_kv(capsys.readouterr().out)
    assert float(values["range_accuracy_m"]) == pytest.approx(0.066247,
                                                              abs=1e-5)


def test_calc_bandwidth_only(capsys):
    assert main(["calc", "--bandwidth", "1.499e8"]) == 0
    values = parse_kv(capsys.readouterr().out)
    assert float(values["range_resolution_m"]) == pytest.approx(1.0)


def test_calc_invalid_flag_exits_3(capsys):
    assert main(["calc", "--bandwidth", "not-a-number"]) == 3
    assert main(["frobnicate"]) == 3
    assert main(["calc", "--bandwidth", "-5"]) == 3


def test_simulate_writes_capture_and_truth(workdir):
    assert (workdir / "cap.bin").stat().st_size == 38 + 48 * 64 * 8
    truth_lines = (workdir / "cap.truth.csv").read_text().splitlines()
    assert truth_lines[0] == "t,range_m,velocity_mps"
    assert len(truth_lines) == 1 + 48


def test_simulate_deterministic(workdir, tmp_path):
    scenario = workdir / "small.scenario"
    for name in ("a", "b"):
        assert main(["simulate", "--scenario", str(scenario), "--seed", "3",
                     "--out", str(tmp_path / f"{name}.bin"),
                     "--truth-out", str(tmp_path / f"{name}.csv")]) == 0
    assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.bin").read_bytes() == (workdir / "cap.bin").read_bytes()


def test_simulate_unknown_scenario_exits_2(tmp_path):
    assert main(["simulate", "--scenario", "nope",
                 "--out", str(tmp_path / "x.bin")]) == 2


def test_process_detections(workdir):
    rows = [json.loads(line)
            for line in (workdir / "det.jsonl").read_text().splitlines()]
    assert len(rows) == 48 - 16 + 1
    times = [r["t"] for r in rows]
    assert times == sorted(times)
    velocities = np.array([r["velocity_mps"] for r in rows])
    assert np.median(np.abs(velocities - 0.25)) < 0.03
    for field in ("t", "range_m", "velocity_mps", "power_db", "bin_l", "bin_p"):
        assert field in rows[0]


def test_process_deterministic(workdir, tmp_path):
    out = tmp_path / "det2.jsonl"
    assert main(["process", str(workdir / "cap.bin"), "--window", "16",
                 "--out", str(out)]) == 0
    assert out.read_bytes() == (workdir / "det.jsonl").read_bytes()


def test_process_emits_reports(workdir, tmp_path):
    maps_dir = tmp_path / "maps"
    prof_csv = tmp_path / "prof.csv"
    sync_json = tmp_path / "sync.json"
    assert main(["process", str(workdir / "cap.bin"), "--window", "16",
                 "--stride", "8", "--out", str(tmp_path / "d.jsonl"),
                 "--emit-maps", str(maps_dir),
                 "--emit-spectrogram", str(prof_csv),
                 "--emit-sync-report", str(sync_json)]) == 0
    maps = sorted(maps_dir.iterdir())
    assert [p.name for p in maps[:2]] == ["map_00000.csv", "map_00000.pgm"]
    assert len(maps) == 2 * 5  # (48-16)/8 + 1 windows
    doc = json.loads(sync_json.read_text())
    assert doc["effective_lag_samples"] == pytest.approx(1.25, abs=1 / 16)
    lines = prof_csv.read_text().splitlines()
    assert len(lines) == 1 + 16


def test_process_no_sic_dominated_by_coupling_cell(workdir, tmp_path):
    out = tmp_path / "nosic.jsonl"
    assert main(["process", str(workdir / "cap.bin"), "--window", "16",
                 "--no-sic", "--out", str(out)]) == 0
    rows = [json.loads(line) for line in out.read_text().splitlines()]
    assert rows
    assert all(r["bin_l"] == 0 and r["bin_p"] == 0 for r in rows)


def spectrogram_matrix(path):
    lines = path.read_text().splitlines()
    return np.array([[float(x) for x in line.split(",")[1:]]
                     for line in lines[1:]])


def test_process_no_sync_smears_doppler(workdir, tmp_path):
    # Uncorrected phase jumps spread energy across Doppler bins, dropping
    # the dominant-bin share of each window's spectrum.
    fractions = {}
    for label, flags in (("sync", []), ("nosync", ["--no-sync"])):
        prof = tmp_path / f"{label}.csv"
        assert main(["process", str(workdir / "cap.bin"), "--window", "16",
                     "--out", str(tmp_path / f"{label}.jsonl"),
                     "--emit-spectrogram", str(prof)] + flags) == 0
        energy = spectrogram_matrix(prof)
        fractions[label] = np.mean(np.max(energy, axis=0)
                                   / np.sum(energy, axis=0))
    assert fractions["nosync"] < fractions["sync"]


def test_process_rejects_sync_report_without_sync(workdir, tmp_path):
    assert main(["process", str(workdir / "cap.bin"), "--no-sync",
                 "--emit-sync-report", str(tmp_path / "s.json")]) == 3


def test_process_bad_capture_exits_2(tmp_path):
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"XXXX" + b"\x00" * 100)
    assert main(["process", str(bad)]) == 2
    assert main(["process", str(tmp_path / "missing.bin")]) == 2


def test_process_truncated_capture_exits_2(workdir, tmp_path):
    raw = (workdir / "cap.bin").read_bytes()
    cut = tmp_path / "cut.bin"
    cut.write_bytes(raw[: 38 + 10 * 64 * 8 + 17])
    assert main(["process", str(cut), "--window", "8"]) == 2


def test_eval_pass_and_fail(workdir, tmp_path, capsys):
    det = str(workdir / "det.jsonl")
    truth = str(workdir / "cap.truth.csv")
    assert main(["eval", det, truth, "--max-range-err", "0.5",
                 "--max-vel-err", "0.05"]) == 0
    out = capsys.readouterr().out
    assert "range_error_m" in out and "result = pass" in out
    assert main(["eval", det, truth, "--max-range-err", "1e-9"]) == 1


def test_eval_empty_detections(workdir, tmp_path):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    assert main(["eval", str(empty), str(workdir / "cap.truth.csv")]) == 1


def test_eval_missing_truth_exits_2(workdir, tmp_path):
    assert main(["eval", str(workdir / "det.jsonl"),
                 str(tmp_path / "missing.csv")]) == 2


def test_eval_malformed_detections_exits_2(workdir, tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"t": 0.1}\n')
    assert main(["eval", str(bad), str(workdir / "cap.truth.csv")]) == 2


def test_process_window_longer_than_capture_exits_3(workdir):
    assert main(["process", str(workdir / "cap.bin"), "--window", "999"]) == 3


def test_help_exits_zero():
    assert main(["--help"]) == 0
    assert main(["process", "--help"]) == 0
