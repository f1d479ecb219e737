import os

import pytest

import helpers


@pytest.fixture
def tiny_video(tmp_path):
    """Three distinct frames on disk; returns (directory, paths)."""
    directory = str(tmp_path / "tiny")
    paths = helpers.make_frame_dir(
        directory, [(200, 40, 40), (40, 200, 40), (40, 40, 200)]
    )
    return directory, paths


@pytest.fixture
def golden_frames_dir():
    path = os.path.join(helpers.GOLDEN_DIR, "frames", "golden")
    assert os.path.isdir(path), "run scripts/make_golden.py first"
    return path


@pytest.fixture
def bench_paths():
    return {
        "dataset": os.path.join(helpers.BENCH_DIR, "annotations.jsonl"),
        "frames_root": os.path.join(helpers.BENCH_DIR, "frames"),
        "responses": os.path.join(helpers.BENCH_DIR, "responses"),
        "expected": os.path.join(helpers.BENCH_DIR, "expected"),
    }
