"""Benchmark harness: annotation loading, metric computation, batch runs.

Annotations are JSON lines, one video per line, carrying the prompt, a
prompt-consistency flag, and the static and dynamic category codes a human
annotator assigned. Predictions reuse the shape. Metrics are
micro-averaged per category over all videos, plus four binary precisions.
"""

import collections
import dataclasses
import json
import os
from typing import Any, Dict, List, Optional, Sequence, Tuple

import jsonschema

from .config import Config
from .errors import ContractError, HalluscanError, InputError
from .gateway import Gateway
from .pipeline import run_detect
from .schemas import ANNOTATION_LINE_SCHEMA, DYNAMIC_CODES, STATIC_CODES

ALL_CODES = STATIC_CODES + DYNAMIC_CODES
BINARY_KEYS = ("DH", "OH", "PCH", "SH")


@dataclasses.dataclass(frozen=True)
class AnnotationRecord:
    video_id: str
    prompt: str
    pch: bool
    static_codes: Tuple[str, ...]
    dynamic_codes: Tuple[str, ...]

    @property
    def has_hallucination(self) -> bool:
        return self.pch or bool(self.static_codes) or bool(self.dynamic_codes)


@dataclasses.dataclass(frozen=True)
class PredictionRecord:
    video_id: str
    pch_pred: bool
    static_codes_pred: Tuple[str, ...]
    dynamic_codes_pred: Tuple[str, ...]

    @property
    def any_pred(self) -> bool:
        return self.pch_pred or bool(self.static_codes_pred) or bool(self.dynamic_codes_pred)


def load_annotations(path: str) -> List[AnnotationRecord]:
    if not os.path.isfile(path):
        raise InputError("annotation file does not exist: %s" % (path,))
    records: List[AnnotationRecord] = []
    seen = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError("line %d is not valid JSON: %s" % (lineno, exc))
            try:
                jsonschema.validate(instance=doc, schema=ANNOTATION_LINE_SCHEMA)
            except jsonschema.ValidationError as exc:
                raise InputError("line %d: %s" % (lineno, exc.message))
            if doc["video_id"] in seen:
                raise InputError(
                    "line %d: duplicate video_id %r" % (lineno, doc["video_id"])
                )
            seen.add(doc["video_id"])
            records.append(
                AnnotationRecord(
                    video_id=doc["video_id"],
                    prompt=doc["prompt"],
                    pch=doc["pch"],
                    static_codes=tuple(doc["static"]),
                    dynamic_codes=tuple(doc["dynamic"]),
                )
            )
    return records


def dataset_stats(records: Sequence[AnnotationRecord]) -> Dict[str, float]:
    n = len(records)
    if n == 0:
        return {
            "hallucinated_count": 0,
            "mean_dynamic": 0.0,
            "mean_static": 0.0,
            "mean_total": 0.0,
            "video_count": 0,
        }
    total_static = sum(len(r.static_codes) for r in records)
    total_dynamic = sum(len(r.dynamic_codes) for r in records)
    return {
        "hallucinated_count": sum(1 for r in records if r.has_hallucination),
        "mean_dynamic": total_dynamic / n,
        "mean_static": total_static / n,
        "mean_total": (total_static + total_dynamic) / n,
        "video_count": n,
    }


def prediction_from_report(doc: Dict[str, Any]) -> PredictionRecord:
    static = [f["code"] for f in doc["findings"] if f["kind"] == "static"]
    dynamic = [f["code"] for f in doc["findings"] if f["kind"] == "dynamic"]
    return PredictionRecord(
        video_id=doc["video_id"],
        pch_pred=doc["consistency"]["hallucinated"],
        static_codes_pred=tuple(static),
        dynamic_codes_pred=tuple(dynamic),
    )


def _safe_div(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def _prf(tp: int, fp: int, fn: int) -> Dict[str, float]:
    p = _safe_div(tp, tp + fp)
    r = _safe_div(tp, tp + fn)
    f1 = _safe_div(2 * p * r, p + r)
    return {"f1": f1, "fn": fn, "fp": fp, "precision": p, "recall": r, "tp": tp}


def evaluate(
    predictions: Sequence[PredictionRecord],
    annotations: Sequence[AnnotationRecord],
    matching: str = "set",
) -> Dict[str, Any]:
    """Micro-averaged per-category P/R/F1 plus the four binary precisions.

    Set matching scores each category once per video; multiset matching
    scores repeated codes by their counts. Zero denominators report 0.
    """
    if matching not in ("set", "multiset"):
        raise ContractError("unknown matching mode: %r" % (matching,))
    ann_by_id = {a.video_id: a for a in annotations}
    preds_by_id: Dict[str, PredictionRecord] = {}
    for p in predictions:
        if p.video_id not in ann_by_id:
            raise ContractError("prediction for unknown video %r" % (p.video_id,))
        if p.video_id in preds_by_id:
            raise ContractError("duplicate prediction for video %r" % (p.video_id,))
        preds_by_id[p.video_id] = p

    empty = lambda vid: PredictionRecord(vid, False, (), ())  # noqa: E731
    tp = {c: 0 for c in ALL_CODES}
    fp = {c: 0 for c in ALL_CODES}
    fn = {c: 0 for c in ALL_CODES}
    binary_tp = {k: 0 for k in BINARY_KEYS}
    binary_fp = {k: 0 for k in BINARY_KEYS}

    for ann in annotations:
        pred = preds_by_id.get(ann.video_id) or empty(ann.video_id)
        for codes_ann, codes_pred in (
            (ann.static_codes, pred.static_codes_pred),
            (ann.dynamic_codes, pred.dynamic_codes_pred),
        ):
            if matching == "set":
                sa, sp = set(codes_ann), set(codes_pred)
                for c in sp & sa:
                    tp[c] += 1
                for c in sp - sa:
                    fp[c] += 1
                for c in sa - sp:
                    fn[c] += 1
            else:
                ca = collections.Counter(codes_ann)
                cp = collections.Counter(codes_pred)
                for c in set(ca) | set(cp):
                    hit = min(ca[c], cp[c])
                    tp[c] += hit
                    fp[c] += cp[c] - hit
                    fn[c] += ca[c] - hit
        flags = {
            "DH": (bool(pred.dynamic_codes_pred), bool(ann.dynamic_codes)),
            "OH": (pred.any_pred, ann.has_hallucination),
            "PCH": (pred.pch_pred, ann.pch),
            "SH": (bool(pred.static_codes_pred), bool(ann.static_codes)),
        }
        for key, (predicted, annotated) in flags.items():
            if predicted and annotated:
                binary_tp[key] += 1
            elif predicted:
                binary_fp[key] += 1

    return {
        "binary_precision": {
            k: _safe_div(binary_tp[k], binary_tp[k] + binary_fp[k])
            for k in BINARY_KEYS
        },
        "matching": matching,
        "per_category": {c: _prf(tp[c], fp[c], fn[c]) for c in ALL_CODES},
    }


def render_metrics_text(metrics: Dict[str, Any]) -> str:
    lines = ["category  tp  fp  fn  precision  recall      f1"]
    for code, row in metrics["per_category"].items():
        lines.append(
            "%-8s %3d %3d %3d %10.4f %7.4f %7.4f"
            % (code, row["tp"], row["fp"], row["fn"], row["precision"], row["recall"], row["f1"])
        )
    lines.append("")
    lines.append("binary precision")
    for key, value in metrics["binary_precision"].items():
        lines.append("%-8s %7.4f" % (key, value))
    if "videos" in metrics:
        lines.append("")
        lines.append("video                 score")
        for vid, row in metrics["videos"].items():
            score = "%7.2f" % (row["score"],) if row["score"] is not None else "  error"
            lines.append("%-20s %s" % (vid, score))
    lines.append("")
    return "\n".join(lines)


def run_benchmark(
    dataset_path: str,
    frames_root: str,
    cfg: Config,
    out_dir: str,
    gw_factory=None,
) -> Dict[str, Any]:
    """Run the full pipeline per annotated video and score the predictions.

    A per-video failure is recorded and scored as an empty prediction
    unless cfg.fail_fast is set. Each video gets a fresh gateway (and
    ledger); fixtures live in one shared directory.
    """
    records = load_annotations(dataset_path)
    if not records:
        raise InputError("annotation file is empty: %s" % (dataset_path,))
    if gw_factory is None:
        gw_factory = lambda: Gateway.from_config(cfg)  # noqa: E731

    predictions: List[PredictionRecord] = []
    videos: Dict[str, Dict[str, Any]] = {}
    for rec in sorted(records, key=lambda r: r.video_id):
        source = os.path.join(frames_root, rec.video_id)
        try:
            doc, _ = run_detect(
                source,
                rec.prompt,
                cfg,
                gw=gw_factory(),
                video_id=rec.video_id,
                out_dir=out_dir,
            )
            predictions.append(prediction_from_report(doc))
            videos[rec.video_id] = {"error": None, "score": doc["score"]["value"]}
        except HalluscanError as exc:
            if cfg.fail_fast:
                raise
            predictions.append(PredictionRecord(rec.video_id, False, (), ()))
            videos[rec.video_id] = {"error": str(exc), "score": None}

    metrics = evaluate(predictions, records, matching="set")
    metrics["ablation"] = cfg.ablation
    metrics["dataset"] = dataset_stats(records)
    metrics["videos"] = videos

    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "metrics.json"), "w", encoding="utf-8") as fh:
        json.dump(metrics, fh, sort_keys=True, indent=2)
        fh.write("\n")
    with open(os.path.join(out_dir, "metrics.txt"), "w", encoding="utf-8") as fh:
        fh.write(render_metrics_text(metrics))
    return metrics
