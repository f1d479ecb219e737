"""Assemble, validate, and render the two-part video quality report."""

import json
import os
from typing import Any, Dict, List, Optional, Sequence

from .config import Config
from .detect import ConsistencyResult, Finding, PremiseResult
from .errors import ValidationError
from .frames import FrameSet
from .gateway import estimate_cost
from .keyframes import ClusterSet, KeyframeSet
from .kg import DynamicKG, StaticKG
from .schemas import CATEGORY_LABELS
from .scoring import (
    DurationWeights,
    aggregate,
    duration_weights,
    severities_by_keyframe,
    video_quality_score,
)

REPORT_VERSION = 1


def canonical_json(doc: Any) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _finding_id(i: int) -> str:
    return "f-%03d" % (i,)


def build_report(
    video_id: str,
    prompt: str,
    premise: Optional[PremiseResult],
    consistency: ConsistencyResult,
    consistency_f: Optional[Finding],
    cluster_set: ClusterSet,
    keyframes: KeyframeSet,
    fs: FrameSet,
    static_graphs: Dict[int, List[StaticKG]],
    dynamic_kgs: Dict[int, Optional[DynamicKG]],
    static_f: Dict[int, List[Finding]],
    local_f: Dict[int, List[Finding]],
    group_dkg: Optional[DynamicKG],
    global_f: Sequence[Finding],
    warnings: Sequence[str],
    ledger_digest: Dict[str, Any],
    cfg: Config,
) -> Dict[str, Any]:
    """Merge all stage outputs into one validated report document.

    Findings are merged in a fixed order (consistency, then each cluster's
    static then local dynamic, then global) and numbered f-000 onward, so
    the document is identical for any worker count.
    """
    findings: List[Finding] = []
    consistency_id: Optional[str] = None
    if consistency_f is not None:
        consistency_id = _finding_id(len(findings))
        findings.append(consistency_f)

    cluster_sections = []
    for cluster in cluster_set.clusters:
        cid = cluster.cluster_id
        static_ids = []
        for f in static_f.get(cid, []):
            static_ids.append(_finding_id(len(findings)))
            findings.append(f)
        local_ids = []
        for f in local_f.get(cid, []):
            local_ids.append(_finding_id(len(findings)))
            findings.append(f)
        dkg = dynamic_kgs.get(cid)
        cluster_sections.append(
            {
                "cluster_id": cid,
                "detail_indices": list(cluster.detail_indices),
                "dynamic_kg": dkg.to_dict() if dkg is not None else None,
                "keyframe_index": cluster.keyframe_index,
                "keyframe_timestamp_s": fs.frames[cluster.keyframe_index].timestamp_s,
                "local_finding_ids": local_ids,
                "static_finding_ids": static_ids,
                "static_kg": [g.to_dict() for g in static_graphs.get(cid, [])],
            }
        )

    global_ids = []
    for f in global_f:
        global_ids.append(_finding_id(len(findings)))
        findings.append(f)

    aggregated = aggregate(findings, cfg.agg_mode, cfg.severity_weights)
    s_c, static_by_kf, dynamic_by_kf = severities_by_keyframe(
        findings, cluster_set, keyframes
    )
    T = duration_weights(keyframes, fs)
    score = video_quality_score(
        s_c, static_by_kf, dynamic_by_kf, T, cfg.alpha, cfg.beta, cfg.gamma
    )
    calls, cost = estimate_cost(keyframes.m, cfg.per_call_usd)

    score_doc = score.to_dict()
    score_doc["duration_weights"] = list(T.T)
    score_doc["dynamic_by_keyframe"] = [list(x) for x in dynamic_by_kf]
    score_doc["s_c"] = s_c
    score_doc["static_by_keyframe"] = [list(x) for x in static_by_kf]

    consistency_doc = consistency.to_dict()
    consistency_doc["finding_id"] = consistency_id

    doc = {
        "aggregated": [
            {
                "member_ids": [_finding_id(i) for i in agg.member_indices],
                "mode": agg.mode,
                "s_h": agg.s_h,
                "severities": agg.triple.to_dict(),
            }
            for agg in aggregated
        ],
        "clusters": cluster_sections,
        "consistency": consistency_doc,
        "cost_estimate": {"calls": calls, "cost_usd": cost},
        "findings": [
            dict(f.to_dict(), id=_finding_id(i)) for i, f in enumerate(findings)
        ],
        "global": {
            "dynamic_kg": group_dkg.to_dict() if group_dkg is not None else None,
            "finding_ids": global_ids,
        },
        "ledger": ledger_digest,
        "premise": premise.to_dict() if premise is not None else None,
        "prompt": prompt,
        "report_version": REPORT_VERSION,
        "video_id": video_id,
        "warnings": list(warnings),
    }
    doc["score"] = score_doc
    validate_report(doc)
    return doc


def validate_report(doc: Dict[str, Any]) -> None:
    """Cross-checks before any write: references and score recomputation."""
    ids = [f["id"] for f in doc["findings"]]
    if len(ids) != len(set(ids)):
        raise ValidationError("duplicate finding ids")

    referenced: List[str] = []
    if doc["consistency"]["finding_id"] is not None:
        referenced.append(doc["consistency"]["finding_id"])
    for section in doc["clusters"]:
        referenced.extend(section["static_finding_ids"])
        referenced.extend(section["local_finding_ids"])
    referenced.extend(doc["global"]["finding_ids"])
    if sorted(referenced) != sorted(ids):
        raise ValidationError(
            "finding ids and section references disagree: %s vs %s"
            % (sorted(ids), sorted(referenced))
        )

    member_ids = [i for agg in doc["aggregated"] for i in agg["member_ids"]]
    if sorted(member_ids) != sorted(ids):
        raise ValidationError("aggregation does not partition the findings")

    for f in doc["findings"]:
        if f["code"] not in CATEGORY_LABELS:
            raise ValidationError("finding %s has unknown code %r" % (f["id"], f["code"]))
        if not 0.0 <= f["severity"] <= 10.0:
            raise ValidationError("finding %s severity out of range" % (f["id"],))

    s = doc["score"]
    recomputed = video_quality_score(
        s["s_c"],
        s["static_by_keyframe"],
        s["dynamic_by_keyframe"],
        DurationWeights(T=tuple(s["duration_weights"])),
        s["alpha"],
        s["beta"],
        s["gamma"],
    )
    if abs(recomputed.value - s["value"]) > 1e-9:
        raise ValidationError(
            "embedded score %r disagrees with recomputation %r"
            % (s["value"], recomputed.value)
        )


def _fmt(x: float) -> str:
    return ("%.6f" % (x,)).rstrip("0").rstrip(".") or "0"


def render_prose(doc: Dict[str, Any]) -> str:
    lines: List[str] = []
    add = lines.append
    add("# Video quality report: %s" % (doc["video_id"],))
    add("")
    add("## Summary")
    add("")
    n_static = sum(1 for f in doc["findings"] if f["kind"] == "static")
    n_dynamic = sum(1 for f in doc["findings"] if f["kind"] == "dynamic")
    n_cons = sum(1 for f in doc["findings"] if f["kind"] == "consistency")
    add("- Prompt: %s" % (doc["prompt"],))
    add("- VideoQualityScore: %s / 100" % (_fmt(doc["score"]["value"]),))
    add(
        "- Findings: %d total (%d consistency, %d static, %d dynamic)"
        % (len(doc["findings"]), n_cons, n_static, n_dynamic)
    )
    if doc["premise"] is not None:
        verdict = "valid" if doc["premise"]["valid"] else "invalid"
        add("- Premise: %s (%s)" % (verdict, doc["premise"]["reason"]))
    add("- Gateway calls: %d" % (doc["ledger"]["total_calls"],))
    add(
        "- Estimated cost: %d calls, $%s"
        % (doc["cost_estimate"]["calls"], _fmt(doc["cost_estimate"]["cost_usd"]))
    )
    add("")
    if doc["aggregated"]:
        add("| group | members | s_c | s_s | s_d | s_h |")
        add("| --- | --- | --- | --- | --- | --- |")
        for i, agg in enumerate(doc["aggregated"]):
            sev = agg["severities"]
            add(
                "| %d | %s | %s | %s | %s | %s |"
                % (
                    i,
                    " ".join(agg["member_ids"]),
                    _fmt(sev["s_c"]),
                    _fmt(sev["s_s"]),
                    _fmt(sev["s_d"]),
                    _fmt(agg["s_h"]),
                )
            )
    else:
        add("No hallucinations detected; the video scores a clean 100.")
    add("")
    add("## Consistency check")
    add("")
    c = doc["consistency"]
    verdict = "hallucinated" if c["hallucinated"] else "consistent"
    add(
        "- Similarity %s vs threshold %s: %s"
        % (_fmt(c["similarity"]), _fmt(c["tau_c"]), verdict)
    )
    add("- Model summary: %s" % (c["summary"],))
    add("- Working summary: %s" % (c["working_summary"],))
    if c["rationale"]:
        add("- Rationale: %s" % (c["rationale"],))
    add("")
    by_id = {f["id"]: f for f in doc["findings"]}
    add("## Per-cluster analysis")
    for section in doc["clusters"]:
        add("")
        add(
            "### Cluster %d (keyframe %d at %s s)"
            % (
                section["cluster_id"],
                section["keyframe_index"],
                _fmt(section["keyframe_timestamp_s"]),
            )
        )
        add("")
        add(
            "- Detail frames: %s"
            % (", ".join(str(i) for i in section["detail_indices"]) or "none",)
        )
        n_entities = sum(len(g["entities"]) for g in section["static_kg"])
        n_triples = sum(len(g["triples"]) for g in section["static_kg"])
        add("- Static KG: %d entities, %d triples" % (n_entities, n_triples))
        if section["dynamic_kg"] is not None:
            add(
                "- Dynamic KG: %d tracked objects, %d temporal relations"
                % (
                    len(section["dynamic_kg"]["tracked_objects"]),
                    len(section["dynamic_kg"]["temporal_relations"]),
                )
            )
        for label, key in (
            ("Static findings", "static_finding_ids"),
            ("Local dynamic findings", "local_finding_ids"),
        ):
            if section[key]:
                add("- %s:" % (label,))
                for fid in section[key]:
                    f = by_id[fid]
                    add(
                        "  - %s [%s %s, severity %s, frames %s] %s"
                        % (
                            fid,
                            f["code"],
                            f["label"],
                            _fmt(f["severity"]),
                            ",".join(str(i) for i in f["frames"]),
                            f["description"],
                        )
                    )
            else:
                add("- %s: none" % (label,))
    add("")
    add("## Whole-video analysis")
    add("")
    g = doc["global"]
    if g["dynamic_kg"] is not None:
        add(
            "- Group dynamic KG: %d tracked objects, %d temporal relations"
            % (
                len(g["dynamic_kg"]["tracked_objects"]),
                len(g["dynamic_kg"]["temporal_relations"]),
            )
        )
    if g["finding_ids"]:
        add("- Global dynamic findings:")
        for fid in g["finding_ids"]:
            f = by_id[fid]
            add(
                "  - %s [%s %s, severity %s, frames %s] %s"
                % (
                    fid,
                    f["code"],
                    f["label"],
                    _fmt(f["severity"]),
                    ",".join(str(i) for i in f["frames"]),
                    f["description"],
                )
            )
    else:
        add("- Global dynamic findings: none")
    if doc["warnings"]:
        add("")
        add("## Warnings")
        add("")
        for w in doc["warnings"]:
            add("- %s" % (w,))
    add("")
    return "\n".join(lines)


def render(
    doc: Dict[str, Any],
    out_dir: str,
    formats: Sequence[str] = ("structured", "prose"),
) -> Dict[str, str]:
    validate_report(doc)
    os.makedirs(out_dir, exist_ok=True)
    paths = {}
    if "structured" in formats:
        path = os.path.join(out_dir, "%s.report.json" % (doc["video_id"],))
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(canonical_json(doc))
        paths["structured"] = path
    if "prose" in formats:
        path = os.path.join(out_dir, "%s.report.md" % (doc["video_id"],))
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(render_prose(doc))
        paths["prose"] = path
    return paths


def parse(path: str) -> Dict[str, Any]:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    validate_report(doc)
    return doc
