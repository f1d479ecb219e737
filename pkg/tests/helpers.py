"""Shared test scaffolding: deterministic frames and a scripted transport.

The scripted transport stands in for the chat-completions endpoint. It
routes on the TASK header of each prompt, reads the canonical INPUT
payload, and answers from a per-video behavior table, so recorded
fixtures and expectations stay in one place.
"""

import json
import os
import re

import numpy as np
from PIL import Image

TASK_RE = re.compile(r"\ATASK: (\S+)$", re.M)
INPUT_MARKER = "\n\nINPUT:\n"
REPAIR_MARKER = "\n\nREPAIR NOTICE:"


def split_prompt(prompt_text):
    """Return (task, instructions, payload, repair_count) of one prompt."""
    body = prompt_text
    repairs = 0
    idx = body.find(REPAIR_MARKER)
    if idx != -1:
        repairs = body[idx:].count("REPAIR NOTICE:")
        body = body[:idx]
    match = TASK_RE.match(body)
    if match is None:
        raise AssertionError("prompt lacks a TASK header: %r" % (body[:80],))
    head, payload_text = body.split(INPUT_MARKER, 1)
    instructions = head.split("\n\n", 1)[1]
    return match.group(1), instructions, json.loads(payload_text), repairs


def envelope(doc):
    content = json.dumps(doc, sort_keys=True)
    return json.dumps({"choices": [{"message": {"content": content}}]})


def tag_of(text):
    return text.split(":", 1)[0].strip()


class ReplyQueue:
    """post_fn stub replaying a fixed list of (status, text) replies."""

    def __init__(self, replies):
        self.replies = list(replies)
        self.prompts = []
        self.bodies = []

    def __call__(self, url, headers, body, timeout):
        self.bodies.append(body)
        self.prompts.append(body["messages"][0]["content"][0]["text"])
        return self.replies.pop(0)


class ScriptedModel:
    """post_fn-compatible transport answering from a behavior table.

    behaviors maps a video tag (the prompt text before the first colon)
    to a dict with optional keys: similarity, consistency_severity,
    premise_valid, static, local_dynamic, global_dynamic (the last three
    are lists of (code, severity) pairs).
    """

    def __init__(self, behaviors=None, overrides=None):
        self.behaviors = behaviors or {}
        self.overrides = overrides or {}
        self.calls = []

    def _behavior(self, text):
        return self.behaviors.get(tag_of(text), {})

    def __call__(self, url, headers, body, timeout):
        prompt_text = body["messages"][0]["content"][0]["text"]
        task, instructions, payload, repairs = split_prompt(prompt_text)
        n_images = sum(1 for part in body["messages"][0]["content"] if part["type"] == "image_url")
        self.calls.append((task, payload, repairs, n_images))
        if task in self.overrides:
            doc = self.overrides[task](payload, instructions, repairs)
        else:
            doc = self.answer(task, payload, instructions)
        return 200, envelope(doc)

    def answer(self, task, payload, instructions):
        if task == "premise_check":
            b = self._behavior(payload["prompt"])
            return {
                "valid": b.get("premise_valid", True),
                "reason": "scripted premise judgement",
            }
        if task == "static_kg":
            return {"graphs": [self.graph_for(i) for i in payload["frames"]]}
        if task == "summary_and_consistency":
            b = self._behavior(payload["prompt"])
            similarity = b.get("similarity", 0.9)
            tag = tag_of(payload["prompt"])
            if similarity < payload["tau_c"]:
                summary = "%s: a slow pan over an empty gray corridor" % (tag,)
            else:
                summary = "%s: content matching the prompt" % (tag,)
            return {
                "summary": summary,
                "similarity": similarity,
                "severity": b.get("consistency_severity", 0),
                "rationale": "scripted comparison of prompt and content",
            }
        if task == "static_detect":
            b = self._behavior(payload["summary"])
            frames = payload["frames"]
            return {
                "findings": [
                    {
                        "code": code,
                        "severity": severity,
                        "description": "scripted static finding %s" % (code,),
                        "frame_index": frames[0],
                    }
                    for code, severity in b.get("static", [])
                ]
            }
        if task == "cluster_dynamic_kg":
            cluster = payload["cluster"]
            frames = sorted([cluster["keyframe"], *cluster["details"]])
            doc = {
                "temporal_relations": [
                    {
                        "from_frame": a,
                        "to_frame": b2,
                        "subject": "ball",
                        "change": "position",
                        "detail": "the ball advances",
                    }
                    for a, b2 in zip(frames, frames[1:])
                ]
            }
            if "tracked_objects" in instructions:
                doc["tracked_objects"] = [{"label": "ball", "frames": frames}]
            return doc
        if task == "cluster_dynamic_detect":
            b = self._behavior(payload["summary"])
            keyframe = payload["cluster"]["keyframe"]
            return {
                "findings": [
                    {
                        "code": code,
                        "severity": severity,
                        "description": "scripted local dynamic finding %s" % (code,),
                        "frames": [keyframe],
                    }
                    for code, severity in b.get("local_dynamic", [])
                ]
            }
        if task == "global_dynamic":
            b = self._behavior(payload["summary"])
            keyframes = payload["keyframes"]
            doc = {
                "findings": [
                    {
                        "code": code,
                        "severity": severity,
                        "description": "scripted global dynamic finding %s" % (code,),
                        "frames": [keyframes[0]],
                    }
                    for code, severity in b.get("global_dynamic", [])
                ]
            }
            if "temporal_relations" in instructions:
                doc["temporal_relations"] = [
                    {
                        "from_frame": a,
                        "to_frame": b2,
                        "subject": "ball",
                        "change": "position",
                        "detail": "the ball drifts between scenes",
                    }
                    for a, b2 in zip(keyframes, keyframes[1:])
                ]
            if "tracked_objects" in instructions:
                doc["tracked_objects"] = [{"label": "ball", "frames": list(keyframes)}]
            return doc
        raise AssertionError("unexpected task %r" % (task,))

    @staticmethod
    def graph_for(frame_index):
        return {
            "frame_index": frame_index,
            "entities": [
                {"label": "ball", "attributes": {"color": "red"}},
                {"label": "floor", "attributes": {}},
            ],
            "triples": [
                {"subject": "ball", "predicate": "resting on", "object": "floor"}
            ],
        }


def write_frame(path, rgb, size=(64, 64)):
    arr = np.zeros((size[1], size[0], 3), dtype=np.uint8)
    arr[:, :] = rgb
    Image.fromarray(arr, mode="RGB").save(path, format="PNG")
    return path


def write_square_frame(path, corner, gray, size=(64, 64), edge=16):
    """Black frame with one gray square; position drives the distances."""
    arr = np.zeros((size[1], size[0], 3), dtype=np.uint8)
    x, y = corner
    arr[y : y + edge, x : x + edge] = (gray, gray, gray)
    Image.fromarray(arr, mode="RGB").save(path, format="PNG")


def make_frame_dir(directory, colors, size=(64, 64)):
    """Write one PNG per color as frame_000.png onward; return the paths."""
    os.makedirs(directory, exist_ok=True)
    paths = []
    for i, rgb in enumerate(colors):
        path = os.path.join(directory, "frame_%03d.png" % (i,))
        write_frame(path, rgb, size)
        paths.append(path)
    return paths


def make_square_frame_dir(directory, squares):
    os.makedirs(directory, exist_ok=True)
    paths = []
    for i, (corner, gray) in enumerate(squares):
        path = os.path.join(directory, "frame_%03d.png" % (i,))
        write_square_frame(path, corner, gray)
        paths.append(path)
    return paths


# two scenes of four frames each: the square sits still and flickers a
# little within a scene, then jumps corners and dims at the cut, so only
# the cut exceeds the default tau_d
GOLDEN_SQUARES = [
    ((4, 4), 230),
    ((4, 4), 232),
    ((4, 4), 234),
    ((4, 4), 236),
    ((44, 44), 100),
    ((44, 44), 102),
    ((44, 44), 104),
    ((44, 44), 106),
]

GOLDEN_PROMPT = "golden: a red ball rolls across a wooden table"

GOLDEN_BEHAVIORS = {
    "golden": {
        "similarity": 0.3,
        "consistency_severity": 1,
        "static": [("S6", 5)],
        "local_dynamic": [("D3", 3)],
    }
}

BENCH_PROMPTS = {
    "bench01": "bench01: a red ball rests on a wooden floor",
    "bench02": "bench02: a dog catches a frisbee midair",
    "bench03": "bench03: a kettle pours tea into a cup",
    "bench04": "bench04: two skaters cross a frozen lake",
    "bench05": "bench05: a candle burns on a windowsill",
}

BENCH_COLORS = {
    "bench01": (180, 60, 50),
    "bench02": (60, 180, 90),
    "bench03": (70, 90, 190),
    "bench04": (190, 180, 60),
    "bench05": (120, 70, 170),
}

BENCH_BEHAVIORS = {
    "bench01": {"static": [("S6", 5)], "local_dynamic": [("D3", 3)]},
    "bench02": {"similarity": 0.3, "consistency_severity": 2},
    "bench03": {"static": [("S6", 4)]},
    "bench04": {"global_dynamic": [("D4", 6)]},
    "bench05": {},
}

BENCH_ANNOTATIONS = [
    {"video_id": "bench01", "prompt": BENCH_PROMPTS["bench01"], "pch": False, "static": ["S6"], "dynamic": ["D3"]},
    {"video_id": "bench02", "prompt": BENCH_PROMPTS["bench02"], "pch": True, "static": [], "dynamic": []},
    {"video_id": "bench03", "prompt": BENCH_PROMPTS["bench03"], "pch": False, "static": ["S2"], "dynamic": []},
    {"video_id": "bench04", "prompt": BENCH_PROMPTS["bench04"], "pch": False, "static": [], "dynamic": ["D4"]},
    {"video_id": "bench05", "prompt": BENCH_PROMPTS["bench05"], "pch": False, "static": [], "dynamic": []},
]

FIXTURES_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "fixtures")
GOLDEN_DIR = os.path.join(FIXTURES_DIR, "golden")
BENCH_DIR = os.path.join(FIXTURES_DIR, "bench")


def golden_config(**extra):
    from halluscan.config import Config

    base = dict(
        stride=1,
        m=1,
        backend="replay",
        fixture_dir=os.path.join(GOLDEN_DIR, "responses"),
        workers=1,
    )
    base.update(extra)
    return Config(**base).validate()


def bench_config(**extra):
    from halluscan.config import Config

    base = dict(
        stride=1,
        m=1,
        backend="replay",
        fixture_dir=os.path.join(BENCH_DIR, "responses"),
        workers=1,
    )
    base.update(extra)
    return Config(**base).validate()


def brute_force_metrics(predictions, annotations, matching):
    """Independent per-video recomputation of the benchmark metrics."""
    from halluscan.schemas import DYNAMIC_CODES, STATIC_CODES

    preds = {p.video_id: p for p in predictions}
    per = {}
    for code in STATIC_CODES + DYNAMIC_CODES:
        tp = fp = fn = 0
        for ann in annotations:
            pred = preds.get(ann.video_id)
            if code in STATIC_CODES:
                codes_ann = list(ann.static_codes)
                codes_pred = list(pred.static_codes_pred) if pred else []
            else:
                codes_ann = list(ann.dynamic_codes)
                codes_pred = list(pred.dynamic_codes_pred) if pred else []
            if matching == "set":
                a, p = code in codes_ann, code in codes_pred
                tp += a and p
                fp += p and not a
                fn += a and not p
            else:
                ca, cp = codes_ann.count(code), codes_pred.count(code)
                tp += min(ca, cp)
                fp += max(cp - ca, 0)
                fn += max(ca - cp, 0)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = (
            2 * precision * recall / (precision + recall)
            if precision + recall
            else 0.0
        )
        per[code] = {
            "f1": f1,
            "fn": fn,
            "fp": fp,
            "precision": precision,
            "recall": recall,
            "tp": tp,
        }
    binary = {}
    for key in ("DH", "OH", "PCH", "SH"):
        tp = fp = 0
        for ann in annotations:
            pred = preds.get(ann.video_id)
            if key == "PCH":
                predicted = pred.pch_pred if pred else False
                annotated = ann.pch
            elif key == "SH":
                predicted = bool(pred.static_codes_pred) if pred else False
                annotated = bool(ann.static_codes)
            elif key == "DH":
                predicted = bool(pred.dynamic_codes_pred) if pred else False
                annotated = bool(ann.dynamic_codes)
            else:
                predicted = pred.any_pred if pred else False
                annotated = ann.has_hallucination
            if predicted and annotated:
                tp += 1
            elif predicted:
                fp += 1
        binary[key] = tp / (tp + fp) if tp + fp else 0.0
    return {"binary_precision": binary, "matching": matching, "per_category": per}


def random_eval_case(rng):
    """One random annotation set plus a partial prediction set."""
    from halluscan.bench import AnnotationRecord, PredictionRecord
    from halluscan.schemas import DYNAMIC_CODES, STATIC_CODES

    def draw(codes):
        k = int(rng.integers(0, 4))
        return tuple(codes[int(j)] for j in rng.integers(0, len(codes), k))

    annotations = []
    predictions = []
    for i in range(int(rng.integers(1, 8))):
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
    return annotations, predictions
