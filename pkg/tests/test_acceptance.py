"""End-to-end acceptance checks.

Each test prints exactly one summary line so the suite doubles as a
human-readable checklist:

    ACCEPTANCE <n> <name> PASS|FAIL
"""

import glob
import json
import os
import time

import numpy as np
import pytest

from halluscan.bench import (
    AnnotationRecord,
    PredictionRecord,
    evaluate,
    run_benchmark,
)
from halluscan.config import Config
from halluscan.errors import ContractError
from halluscan.frames import Frame, FrameSet, synthetic_frameset
from halluscan.gateway import Gateway, estimate_cost
from halluscan.keyframes import (
    KeyframeSet,
    choose_dc,
    density_stats,
    extract_detail_frames,
    pairwise_distances,
    select_keyframes,
)
from halluscan.pipeline import run_detect
from halluscan.schemas import DYNAMIC_CODES, STATIC_CODES
from halluscan.scoring import DurationWeights, duration_weights, video_quality_score

from helpers import (
    GOLDEN_DIR,
    GOLDEN_PROMPT,
    GOLDEN_SQUARES,
    ScriptedModel,
    bench_config,
    brute_force_metrics,
    golden_config,
    make_frame_dir,
    make_square_frame_dir,
)
from test_keyframes import brute_force_stats

README = os.path.join(os.path.dirname(__file__), os.pardir, "README.md")


def _report(capsys, num, name, fn):
    try:
        fn()
    except BaseException:
        with capsys.disabled():
            print("ACCEPTANCE %d %-24s FAIL" % (num, name))
        raise
    with capsys.disabled():
        print("ACCEPTANCE %d %-24s PASS" % (num, name))


def test_criterion_1_clustering_oracle(capsys):
    def check():
        rng = np.random.default_rng(4)
        start = time.monotonic()
        for _ in range(50):
            n = int(rng.integers(2, 201))
            dim = int(rng.integers(1, 17))
            fs = synthetic_frameset(rng.normal(size=(n, dim)).tolist())
            d = pairwise_distances(fs, "euclidean")
            d_c = choose_dc(d, 0.02)
            rows = d.tolist()
            for kernel in ("cutoff", "gaussian"):
                stats = density_stats(d, d_c, kernel)
                rho, delta, gamma = brute_force_stats(rows, d_c, kernel)
                if kernel == "cutoff":
                    assert stats.rho.tolist() == rho
                    assert stats.delta.tolist() == delta
                    assert stats.gamma.tolist() == gamma
                else:
                    assert np.max(np.abs(stats.rho - np.asarray(rho))) <= 1e-9
                    assert np.max(np.abs(stats.delta - np.asarray(delta))) <= 1e-9
                    assert np.max(np.abs(stats.gamma - np.asarray(gamma))) <= 1e-9
        assert time.monotonic() - start < 5.0

    _report(capsys, 1, "clustering-oracle", check)


def test_criterion_2_segment_recovery(capsys):
    def check():
        start = time.monotonic()
        dim = 8
        centroids = np.zeros((4, dim))
        for k in range(4):
            centroids[k, k] = 10.0
        separation = float(np.linalg.norm(centroids[0] - centroids[1]))
        sigma = 0.05 * separation
        hits = 0
        for seed in range(100):
            rng = np.random.default_rng(1000 + seed)
            feats = np.concatenate(
                [centroids[k] + sigma * rng.normal(size=(10, dim)) for k in range(4)]
            )
            fs = synthetic_frameset(feats.tolist())
            d = pairwise_distances(fs, "euclidean")
            stats = density_stats(d, choose_dc(d, 0.02), "gaussian")
            kset = select_keyframes(stats, 4)
            if sorted(i // 10 for i in kset.indices) == [0, 1, 2, 3]:
                hits += 1
        assert hits >= 95
        assert time.monotonic() - start < 10.0

    _report(capsys, 2, "segment-recovery", check)


def test_criterion_3_detail_frame_trace(capsys):
    def check():
        fs = synthetic_frameset([[0.0], [0.0], [0.5], [1.0], [1.0], [1.6], [2.0]])
        details = extract_detail_frames(fs, H=(0, 3, 6), tau_d=0.4, metric="absdiff")
        assert details == (2, 5)

    _report(capsys, 3, "detail-frame-trace", check)


def test_criterion_4_golden_replay(capsys, tmp_path, golden_frames_dir):
    def check():
        doc, paths = run_detect(
            golden_frames_dir, GOLDEN_PROMPT, golden_config(), out_dir=str(tmp_path)
        )
        for kind in ("structured", "prose"):
            name = os.path.basename(paths[kind])
            with open(paths[kind], "rb") as fh:
                got = fh.read()
            with open(os.path.join(GOLDEN_DIR, "expected", name), "rb") as fh:
                assert got == fh.read()
        m = len(doc["clusters"])
        assert m == 1
        assert doc["ledger"]["total_calls"] == 4 * m + 2
        hand = 100.0 - 2.0 * 1.0 - 4.0 * 5.0 - 4.0 * 3.0
        assert hand == 66.0
        assert abs(doc["score"]["value"] - hand) <= 1e-9

    _report(capsys, 4, "golden-replay", check)


def test_criterion_5_score_properties(capsys):
    def check():
        rng = np.random.default_rng(7)
        for _ in range(100):
            n = int(rng.integers(1, 40))
            ts = np.sort(rng.uniform(0.0, 100.0, size=n))
            total = float(ts[-1]) + float(rng.uniform(0.1, 5.0))
            fs = FrameSet(
                frames=[
                    Frame(index=i, source_index=i, timestamp_s=float(t))
                    for i, t in enumerate(ts)
                ],
                features=None,
                total_duration_s=total,
            )
            m = int(rng.integers(1, n + 1))
            picked = sorted(int(i) for i in rng.choice(n, size=m, replace=False))
            T = duration_weights(KeyframeSet(indices=tuple(picked), m=m), fs)
            assert abs(sum(T.T) - 1.0) <= 1e-9

            empty = [[] for _ in range(m)]
            clean = video_quality_score(0.0, empty, empty, T)
            assert clean.value == 100.0

            static = [list(rng.uniform(0, 4, size=rng.integers(0, 3))) for _ in range(m)]
            dynamic = [list(rng.uniform(0, 4, size=rng.integers(0, 3))) for _ in range(m)]
            s_c = float(rng.uniform(0, 5))
            base = video_quality_score(s_c, static, dynamic, T)
            slot = int(rng.integers(0, m))
            extra = float(rng.uniform(0.1, 10.0))
            if rng.random() < 0.5:
                static[slot] = static[slot] + [extra]
            else:
                dynamic[slot] = dynamic[slot] + [extra]
            worse = video_quality_score(s_c, static, dynamic, T)
            assert worse.value < base.value or worse.value == 0.0

        two = video_quality_score(
            0.0, [[5.0], []], [[], [5.0]], DurationWeights(T=(0.5, 0.5))
        )
        assert two.value == 80.0

    _report(capsys, 5, "score-properties", check)


def _random_dataset(rng):
    def draw(codes):
        k = int(rng.integers(0, 4))
        return tuple(codes[int(j)] for j in rng.integers(0, len(codes), k))

    annotations = []
    predictions = []
    for i in range(int(rng.integers(1, 51))):
        vid = "v%02d" % (i,)
        annotations.append(
            AnnotationRecord(
                video_id=vid,
                prompt="prompt %d" % (i,),
                pch=bool(rng.integers(0, 2)),
                static_codes=draw(STATIC_CODES),
                dynamic_codes=draw(DYNAMIC_CODES),
            )
        )
        if rng.random() < 0.8:
            predictions.append(
                PredictionRecord(
                    video_id=vid,
                    pch_pred=bool(rng.integers(0, 2)),
                    static_codes_pred=draw(STATIC_CODES),
                    dynamic_codes_pred=draw(DYNAMIC_CODES),
                )
            )
    return predictions, annotations


def test_criterion_6_metrics_oracle(capsys):
    def check():
        rng = np.random.default_rng(3)
        for _ in range(20):
            predictions, annotations = _random_dataset(rng)
            for matching in ("set", "multiset"):
                got = evaluate(predictions, annotations, matching=matching)
                assert got == brute_force_metrics(predictions, annotations, matching)

        annotations = [
            AnnotationRecord("a", "p", False, ("S2",), ()),
            AnnotationRecord("b", "p", False, (), ()),
            AnnotationRecord("c", "p", False, (), ()),
        ]
        predictions = [
            PredictionRecord("a", False, ("S2",), ()),
            PredictionRecord("b", False, ("S2",), ()),
            PredictionRecord("c", False, (), ()),
        ]
        row = evaluate(predictions, annotations)["per_category"]["S2"]
        assert row["f1"] == 2 / 3

    _report(capsys, 6, "metrics-oracle", check)


def test_criterion_7_cost_estimator(capsys):
    def check():
        assert estimate_cost(3.5, 0.08) == (16, 1.28)
        with pytest.raises(ContractError):
            estimate_cost(0.5, 0.08)

    _report(capsys, 7, "cost-estimator", check)


def test_criterion_8_ablation_observability(capsys, tmp_path):
    def check():
        directory = str(tmp_path / "frames")
        make_square_frame_dir(directory, GOLDEN_SQUARES)
        prompt = "tape02: two still scenes with a cut"
        expectations = {
            "full": (True, True),
            "no_static_kg": (False, True),
            "no_dynamic_kg": (True, False),
            "no_kg": (False, False),
        }
        for ablation, (want_static, want_dynamic) in sorted(expectations.items()):
            fixture_dir = str(tmp_path / ("responses-" + ablation))
            cfg = Config(
                stride=1,
                m=2,
                backend="record",
                fixture_dir=fixture_dir,
                workers=1,
                ablation=ablation,
            )
            gw = Gateway.from_config(cfg, post_fn=ScriptedModel({"tape02": {}}))
            run_detect(directory, prompt, cfg, gw=gw)
            texts = []
            for path in glob.glob(os.path.join(fixture_dir, "*.request.json")):
                with open(path, encoding="utf-8") as fh:
                    texts.append(json.load(fh)["prompt_text"])
            assert texts
            has_static = any(
                '"static_kgs":' in t or '"triples":' in t for t in texts
            )
            has_dynamic = any(
                '"dynamic_kg":' in t or '"temporal_relations":' in t for t in texts
            )
            assert has_static == want_static
            assert has_dynamic == want_dynamic

    _report(capsys, 8, "ablation-observability", check)


def test_criterion_9_replay_determinism(capsys, tmp_path, bench_paths):
    def check():
        with open(README, encoding="utf-8") as fh:
            readme = fh.read()
        assert "## Reproducibility" in readme
        assert "not reproducible" in readme
        assert "byte-identical" in readme

        metrics_path = str(tmp_path / "committed" / "metrics.json")
        run_benchmark(
            bench_paths["dataset"],
            bench_paths["frames_root"],
            bench_config(),
            str(tmp_path / "committed"),
        )
        with open(metrics_path, "rb") as fh:
            got = fh.read()
        with open(os.path.join(bench_paths["expected"], "metrics.json"), "rb") as fh:
            assert got == fh.read()

        dataset = tmp_path / "mini.jsonl"
        lines = []
        for vid in ("rec01", "rec02"):
            make_frame_dir(
                str(tmp_path / "frames" / vid),
                [(60, 60, 60), (200, 60, 60), (60, 200, 60)],
            )
            lines.append(
                json.dumps(
                    {
                        "video_id": vid,
                        "prompt": "%s: solid color cards" % (vid,),
                        "pch": False,
                        "static": [],
                        "dynamic": [],
                    },
                    sort_keys=True,
                )
            )
        dataset.write_text("\n".join(lines) + "\n", encoding="utf-8")
        fixture_dir = str(tmp_path / "recorded")

        rec_cfg = Config(
            stride=1, m=1, backend="record", fixture_dir=fixture_dir, workers=1
        )
        run_benchmark(
            str(dataset),
            str(tmp_path / "frames"),
            rec_cfg,
            str(tmp_path / "out-rec"),
            gw_factory=lambda: Gateway.from_config(rec_cfg, post_fn=ScriptedModel({})),
        )
        rep_cfg = Config(
            stride=1, m=1, backend="replay", fixture_dir=fixture_dir, workers=1
        )
        run_benchmark(
            str(dataset), str(tmp_path / "frames"), rep_cfg, str(tmp_path / "out-rep")
        )
        with open(str(tmp_path / "out-rec" / "metrics.json"), "rb") as fh:
            recorded = fh.read()
        with open(str(tmp_path / "out-rep" / "metrics.json"), "rb") as fh:
            assert fh.read() == recorded

    _report(capsys, 9, "replay-determinism", check)
