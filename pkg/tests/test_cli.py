import json
import os

from halluscan.cli import main

from helpers import GOLDEN_DIR, GOLDEN_PROMPT, BENCH_DIR

GOLDEN_RESPONSES = os.path.join(GOLDEN_DIR, "responses")

REPLAY_FLAGS = [
    "--stride", "1",
    "--m", "1",
    "--workers", "1",
    "--backend", "replay",
    "--fixtures", GOLDEN_RESPONSES,
]


def test_detect_replay_prints_summary_and_paths(tmp_path, capsys, golden_frames_dir):
    rc = main(
        ["detect", golden_frames_dir, "--prompt", GOLDEN_PROMPT, "--out", str(tmp_path)]
        + REPLAY_FLAGS
    )
    out = capsys.readouterr().out
    assert rc == 0
    lines = out.splitlines()
    assert lines[0] == "golden: score 66.00, 3 findings, 6 gateway calls"
    wrote = [line for line in lines[1:] if line.startswith("wrote ")]
    assert len(wrote) == 2
    for line in wrote:
        assert os.path.exists(line[len("wrote "):])
    assert os.path.exists(str(tmp_path / "golden.report.json"))
    assert os.path.exists(str(tmp_path / "golden.report.md"))


def test_detect_reads_config_file(tmp_path, capsys, golden_frames_dir):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(
        json.dumps(
            {
                "stride": 1,
                "m": 1,
                "workers": 1,
                "backend": "replay",
                "fixture_dir": GOLDEN_RESPONSES,
            }
        )
    )
    rc = main(
        [
            "detect",
            golden_frames_dir,
            "--prompt",
            GOLDEN_PROMPT,
            "--out",
            str(tmp_path / "reports"),
            "--config",
            str(cfg_path),
        ]
    )
    assert rc == 0
    assert "score 66.00" in capsys.readouterr().out


def test_record_subcommand_forces_record_backend(tmp_path, capsys, monkeypatch, golden_frames_dir):
    monkeypatch.delenv("HALLUSCAN_API_KEY", raising=False)
    fixtures = tmp_path / "empty"
    fixtures.mkdir()
    rc = main(
        [
            "record",
            golden_frames_dir,
            "--prompt",
            GOLDEN_PROMPT,
            "--backend",
            "replay",
            "--fixtures",
            str(fixtures),
            "--out",
            str(tmp_path),
        ]
    )
    err = capsys.readouterr().err
    assert rc == 2
    assert err.startswith("error: ")
    assert "HALLUSCAN_API_KEY" in err


def test_unknown_flag_is_a_usage_error(capsys, golden_frames_dir):
    rc = main(
        ["detect", golden_frames_dir, "--prompt", "x", "--frobnicate"] + REPLAY_FLAGS
    )
    assert rc == 2


def test_missing_prompt_is_a_usage_error(capsys, golden_frames_dir):
    rc = main(["detect", golden_frames_dir] + REPLAY_FLAGS)
    assert rc == 2
    assert "--prompt" in capsys.readouterr().err


def test_invalid_config_value_is_a_usage_error(tmp_path, capsys, golden_frames_dir):
    rc = main(
        [
            "detect",
            golden_frames_dir,
            "--prompt",
            GOLDEN_PROMPT,
            "--out",
            str(tmp_path),
            "--dc-fraction",
            "1.5",
        ]
        + REPLAY_FLAGS
    )
    err = capsys.readouterr().err
    assert rc == 2
    assert "dc_fraction" in err


def test_missing_source_is_an_input_error(tmp_path, capsys):
    rc = main(
        ["detect", str(tmp_path / "nope"), "--prompt", "x", "--out", str(tmp_path)]
        + REPLAY_FLAGS
    )
    err = capsys.readouterr().err
    assert rc == 3
    assert "stage ingest:" in err


def test_missing_fixture_is_a_gateway_error(tmp_path, capsys, golden_frames_dir):
    fixtures = tmp_path / "empty"
    fixtures.mkdir()
    rc = main(
        [
            "detect",
            golden_frames_dir,
            "--prompt",
            GOLDEN_PROMPT,
            "--out",
            str(tmp_path),
            "--stride",
            "1",
            "--m",
            "1",
            "--workers",
            "1",
            "--backend",
            "replay",
            "--fixtures",
            str(fixtures),
        ]
    )
    err = capsys.readouterr().err
    assert rc == 4
    assert "no fixture for request" in err
    assert "stage static_kg:" in err


def test_empty_prompt_is_a_validation_error(tmp_path, capsys, golden_frames_dir):
    rc = main(
        ["detect", golden_frames_dir, "--prompt", "", "--out", str(tmp_path)]
        + REPLAY_FLAGS
    )
    assert rc == 5
    assert "prompt" in capsys.readouterr().err


def test_cost_for_a_fractional_m(capsys):
    rc = main(["cost", "--m", "3.5", "--per-call", "0.08"])
    assert rc == 0
    assert capsys.readouterr().out == "m=3.5: 16 calls, $1.28\n"


def test_cost_defaults_to_the_configured_m(capsys):
    rc = main(["cost"])
    assert rc == 0
    assert capsys.readouterr().out == "m=4: 18 calls, $1.44\n"


def test_cost_rejects_m_below_one(capsys):
    rc = main(["cost", "--m", "0.5"])
    assert rc == 2
    assert "--m must be >= 1" in capsys.readouterr().err


def test_cost_over_a_dataset(tmp_path, capsys):
    dataset = tmp_path / "ann.jsonl"
    lines = []
    for i in range(10):
        lines.append(
            json.dumps(
                {
                    "video_id": "v%02d" % i,
                    "prompt": "p%d" % i,
                    "pch": False,
                    "static": [],
                    "dynamic": [],
                }
            )
        )
    dataset.write_text("\n".join(lines) + "\n")
    rc = main(["cost", "--dataset", str(dataset)])
    assert rc == 0
    assert capsys.readouterr().out == "10 videos at m=4: 180 calls, $14.40\n"


def test_bench_replay_writes_metrics(tmp_path, capsys, bench_paths):
    out_dir = tmp_path / "bench-out"
    rc = main(
        [
            "bench",
            bench_paths["dataset"],
            "--frames-root",
            bench_paths["frames_root"],
            "--out",
            str(out_dir),
            "--stride",
            "1",
            "--m",
            "1",
            "--workers",
            "1",
            "--backend",
            "replay",
            "--fixtures",
            bench_paths["responses"],
        ]
    )
    out = capsys.readouterr().out
    assert rc == 0
    assert "bench01" in out
    with open(str(out_dir / "metrics.txt"), encoding="utf-8") as fh:
        assert out == fh.read()
    with open(str(out_dir / "metrics.json"), "rb") as fh:
        got = fh.read()
    with open(os.path.join(BENCH_DIR, "expected", "metrics.json"), "rb") as fh:
        assert got == fh.read()
