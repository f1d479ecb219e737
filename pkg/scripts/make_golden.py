"""Regenerate the committed replay fixtures under tests/fixtures/.

Runs the full pipeline in record mode against the scripted transport from
tests/helpers.py, then sanity-checks the hand-computed expectations the
test suite asserts. Rerun after any change that alters request payloads
or report layout, then commit the refreshed fixtures.
"""

import json
import os
import shutil
import sys

REPO = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, os.path.join(REPO, "tests"))

import helpers  # noqa: E402

from halluscan.config import Config  # noqa: E402
from halluscan.gateway import Gateway  # noqa: E402
from halluscan.bench import run_benchmark  # noqa: E402
from halluscan.pipeline import run_detect  # noqa: E402


def reset(path):
    shutil.rmtree(path, ignore_errors=True)
    os.makedirs(path)


def record_config(fixture_dir):
    return Config(
        stride=1, m=1, backend="record", fixture_dir=fixture_dir, workers=1
    ).validate()


def make_golden():
    frames_dir = os.path.join(helpers.GOLDEN_DIR, "frames", "golden")
    responses = os.path.join(helpers.GOLDEN_DIR, "responses")
    expected = os.path.join(helpers.GOLDEN_DIR, "expected")
    for path in (frames_dir, responses, expected):
        reset(path)
    helpers.make_square_frame_dir(frames_dir, helpers.GOLDEN_SQUARES)

    cfg = record_config(responses)
    gw = Gateway.from_config(cfg, post_fn=helpers.ScriptedModel(helpers.GOLDEN_BEHAVIORS))
    doc, paths = run_detect(
        frames_dir, helpers.GOLDEN_PROMPT, cfg, gw=gw, out_dir=expected
    )

    assert doc["score"]["value"] == 66.0, doc["score"]
    assert doc["ledger"]["total_calls"] == 6, doc["ledger"]
    assert doc["cost_estimate"] == {"calls": 6, "cost_usd": 0.48}
    codes = sorted(f["code"] for f in doc["findings"])
    assert codes == ["D3", "PCH", "S6"], codes
    print("golden: score %.1f, %d calls, report at %s" % (
        doc["score"]["value"], doc["ledger"]["total_calls"], paths["structured"]))


def make_bench():
    frames_root = os.path.join(helpers.BENCH_DIR, "frames")
    responses = os.path.join(helpers.BENCH_DIR, "responses")
    expected = os.path.join(helpers.BENCH_DIR, "expected")
    for path in (frames_root, responses, expected):
        reset(path)

    for video_id, base in sorted(helpers.BENCH_COLORS.items()):
        colors = [base, base, base]
        helpers.make_frame_dir(os.path.join(frames_root, video_id), colors)

    dataset = os.path.join(helpers.BENCH_DIR, "annotations.jsonl")
    with open(dataset, "w", encoding="utf-8") as fh:
        for record in helpers.BENCH_ANNOTATIONS:
            fh.write(json.dumps(record, sort_keys=True) + "\n")

    cfg = record_config(responses)
    factory = lambda: Gateway.from_config(  # noqa: E731
        cfg, post_fn=helpers.ScriptedModel(helpers.BENCH_BEHAVIORS)
    )
    metrics = run_benchmark(dataset, frames_root, cfg, expected, gw_factory=factory)

    s6 = metrics["per_category"]["S6"]
    assert (s6["tp"], s6["fp"], s6["fn"]) == (1, 1, 0), s6
    assert abs(s6["f1"] - 2.0 / 3.0) < 1e-12, s6
    assert all(v == 1.0 for v in metrics["binary_precision"].values()), metrics
    scores = {vid: row["score"] for vid, row in metrics["videos"].items()}
    assert scores == {
        "bench01": 68.0,
        "bench02": 96.0,
        "bench03": 84.0,
        "bench04": 76.0,
        "bench05": 100.0,
    }, scores
    print("bench: 5 videos, S6 f1=%.4f, scores %s" % (s6["f1"], scores))


if __name__ == "__main__":
    make_golden()
    make_bench()
    print("fixtures regenerated under tests/fixtures/")
