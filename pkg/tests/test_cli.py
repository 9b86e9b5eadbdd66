"""Command-line interface: metrics output, sweeps, exit codes."""

import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from uwbaudio.audio_core import AudioBlock
from uwbaudio.audio_format import AudioFormat
from uwbaudio.cli import main
from uwbaudio.wav_io import read_wav, write_wav

BASE_CONF = """
phy_profile = 1.2
preset_latency_ms = 10
duration_s = 1
audio.sampling_rate_hz = 48000
audio.bit_depth = 16
audio.channels = 2
seed = 1
"""


@pytest.fixture
def conf(tmp_path) -> Path:
    path = tmp_path / "scenario.conf"
    path.write_text(BASE_CONF)
    return path


class TestBitrate:
    def test_cd_resolution(self, capsys):
        assert main(["bitrate", "--rate", "44100", "--depth", "16", "--channels", "2"]) == 0
        assert capsys.readouterr().out.strip() == "1411.2 kbps, CD resolution"

    def test_hi_resolution_eligible(self, capsys):
        assert main(["bitrate", "--rate", "96000", "--depth", "24", "--channels", "2"]) == 0
        out = capsys.readouterr().out.strip()
        assert out == "4608 kbps, Hi Resolution, Hi-Res-wireless eligible"

    def test_sub_cd(self, capsys):
        assert main(["bitrate", "--rate", "8000", "--depth", "16", "--channels", "1"]) == 0
        assert capsys.readouterr().out.strip() == "128 kbps, sub-CD"

    def test_bad_flags_exit_config(self, capsys):
        assert main(["bitrate", "--rate", "44100", "--depth", "20", "--channels", "2"]) == 2


class TestRun:
    def test_writes_metrics_json(self, conf, tmp_path, capsys):
        metrics_path = tmp_path / "m.json"
        code = main(["run", "--config", str(conf), "--metrics", str(metrics_path)])
        assert code == 0
        payload = json.loads(metrics_path.read_text())
        assert payload["success_rate"] >= 0.999
        assert payload["seed"] == 1
        assert payload["real_latency_us"]["mean"] <= 10_000

    def test_infeasible_config_exit_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.conf"
        bad.write_text(BASE_CONF + "audio.sampling_rate_hz = 192000\naudio.bit_depth = 24\n")
        assert main(["run", "--config", str(bad)]) == 2
        assert "error:" in capsys.readouterr().err

    def test_malformed_config_names_key_and_line(self, tmp_path, capsys):
        bad = tmp_path / "bad.conf"
        bad.write_text("seed = 1\nloss_prob = banana\n")
        assert main(["run", "--config", str(bad)]) == 2
        err = capsys.readouterr().err
        assert "loss_prob" in err and "line 2" in err

    def test_flag_overrides(self, conf, tmp_path, capsys):
        metrics_path = tmp_path / "m.json"
        code = main([
            "run", "--config", str(conf), "--metrics", str(metrics_path),
            "--preset-latency-ms", "5", "--profile", "1.6", "--seed", "4",
        ])
        assert code == 0
        payload = json.loads(metrics_path.read_text())
        assert payload["seed"] == 4
        assert payload["real_latency_us"]["mean"] <= 5_000

    def test_wav_passthrough_bit_identical(self, conf, tmp_path, capsys):
        fmt = AudioFormat(48000, 16, 2)
        rng = np.random.default_rng(11)
        frames = 96 * 50
        samples = rng.integers(-32768, 32768, size=frames * 2, dtype=np.int16)
        src = tmp_path / "in.wav"
        dst = tmp_path / "out.wav"
        write_wav(src, AudioBlock(fmt, samples))
        code = main(["run", "--config", str(conf), "--in", str(src), "--out", str(dst)])
        assert code == 0
        played = read_wav(dst)
        assert played.format == fmt
        assert np.array_equal(played.samples, samples)

    def test_trace_written(self, conf, tmp_path, capsys):
        trace_path = tmp_path / "t.trace"
        assert main(["run", "--config", str(conf), "--trace", str(trace_path)]) == 0
        lines = trace_path.read_text().splitlines()
        assert lines
        assert all(len(l.split(",", 6)) == 7 for l in lines)


class TestSweep:
    def test_six_cells(self, conf, tmp_path, capsys):
        out = tmp_path / "sweep.csv"
        code = main([
            "sweep", "--config", str(conf),
            "--presets", "5,10,20", "--profiles", "1.2,1.6", "--out", str(out),
        ])
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == (
            "bandwidth_profile,channel,sampling_rate,bit_depth,bit_rate_kbps,"
            "preset_latency_ms,real_latency_ms,link_utilization,success_rate"
        )
        assert len(lines) == 7
        for line in lines[1:]:
            cells = line.split(",")
            assert cells[1] == "Stereo"
            assert cells[4] == "1536"
            assert float(cells[6]) <= float(cells[5])
            assert 0.70 <= float(cells[7]) <= 0.82
            assert float(cells[8]) >= 0.999

    def test_empty_preset_list_header_only(self, conf, tmp_path, capsys):
        out = tmp_path / "empty.csv"
        assert main(["sweep", "--config", str(conf), "--presets", "", "--out", str(out)]) == 0
        assert out.read_text().splitlines() == [
            "bandwidth_profile,channel,sampling_rate,bit_depth,bit_rate_kbps,"
            "preset_latency_ms,real_latency_ms,link_utilization,success_rate"
        ]

    def test_repeat_invocation_byte_identical(self, conf, tmp_path, capsys):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        ta, tb = tmp_path / "a.trace", tmp_path / "b.trace"
        args = ["sweep", "--config", str(conf), "--presets", "5,10", "--profiles", "1.2"]
        assert main(args + ["--out", str(a), "--trace", str(ta)]) == 0
        assert main(args + ["--out", str(b), "--trace", str(tb)]) == 0
        assert a.read_bytes() == b.read_bytes()
        assert ta.read_bytes() == tb.read_bytes()

    def test_infeasible_cell_marked_and_sweep_continues(self, tmp_path, capsys):
        conf_hi = tmp_path / "hi.conf"
        conf_hi.write_text(
            BASE_CONF + "audio.sampling_rate_hz = 96000\naudio.bit_depth = 24\n"
            "phy_rate_bps = 4000000\n"
        )
        out = tmp_path / "sweep.csv"
        code = main(["sweep", "--config", str(conf_hi), "--presets", "5",
                     "--profiles", "1.2", "--out", str(out)])
        assert code == 0
        rows = out.read_text().splitlines()
        assert len(rows) == 2
        assert "infeasible" in rows[1]


class TestFrames:
    def test_dump_then_check(self, tmp_path, capsys):
        assert main(["frames", "--count", "5", "--seed", "3"]) == 0
        dump = capsys.readouterr().out
        path = tmp_path / "frames.hex"
        path.write_text(dump)
        assert main(["frames", "--check", str(path)]) == 0
        assert "5 frames verified" in capsys.readouterr().out

    def test_check_golden_corpus(self, capsys):
        golden = Path(__file__).parent / "data" / "golden_frames.hex"
        assert main(["frames", "--check", str(golden)]) == 0
        assert "24 frames verified" in capsys.readouterr().out

    def test_corrupt_file_fails(self, tmp_path, capsys):
        path = tmp_path / "bad.hex"
        path.write_text("00" * 20 + "\n")
        assert main(["frames", "--check", str(path)]) == 1


class TestEntryPoint:
    def test_installed_console_script(self, conf):
        result = subprocess.run(
            [sys.executable, "-m", "uwbaudio.cli", "bitrate",
             "--rate", "48000", "--depth", "16", "--channels", "2"],
            capture_output=True, text=True,
        )
        assert result.returncode == 0
        assert "1536 kbps" in result.stdout
