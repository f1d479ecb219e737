"""Prompt builders for every gateway step.

Each prompt is a TASK header, instruction prose, and one canonical JSON
INPUT block. Context that an ablation removes (static graphs, temporal
relations) only ever appears inside the INPUT block, so a serialized
request provably contains a context block exactly when its key string
appears. Instruction prose therefore never spells field names in quoted
JSON-key form.
"""

import json
from typing import Any, Dict, List, Optional, Sequence

_JSON_ONLY = (
    "Reply with exactly one JSON object and no surrounding prose or "
    "markdown fence."
)


def render_payload(payload: Dict[str, Any]) -> str:
    return json.dumps(payload, sort_keys=True, indent=2)


def _compose(task: str, instructions: str, payload: Dict[str, Any]) -> str:
    return (
        "TASK: %s\n\n%s\n%s\n\nINPUT:\n%s" % (task, instructions, _JSON_ONLY, render_payload(payload))
    )


def premise_prompt(prompt_text: str) -> str:
    instructions = (
        "Judge whether the video-generation prompt below describes a premise "
        "that adheres to real-world constraints. Return fields: valid "
        "(boolean) and reason (short explanation)."
    )
    return _compose("premise_check", instructions, {"prompt": prompt_text})


def static_kg_prompt(frame_indices: Sequence[int]) -> str:
    instructions = (
        "For each attached frame, in order, detect the visible objects, "
        "recognize their pairwise relationships, and emit one scene graph. "
        "Return a field graphs: a list with one item per frame, each item "
        "carrying frame_index (from the list below), entities (objects, each "
        "with a label and optional attributes), and triples (subject, "
        "predicate, object statements where subject and object repeat entity "
        "labels)."
    )
    return _compose(
        "static_kg", instructions, {"frames": list(frame_indices)}
    )


def summary_consistency_prompt(
    prompt_text: str,
    keyframe_indices: Sequence[int],
    graphs: Optional[List[Dict[str, Any]]],
    tau_c: float,
) -> str:
    instructions = (
        "Summarize the video shown by the attached keyframes: main events, "
        "objects, and interactions. Then rate how similar the generation "
        "prompt and your summary are on a 0-to-1 scale, and rate the "
        "severity of any prompt-video mismatch on a 0-to-10 scale (0 when "
        "the video matches the prompt). Return fields: summary, similarity, "
        "severity, rationale."
    )
    payload: Dict[str, Any] = {
        "keyframes": list(keyframe_indices),
        "prompt": prompt_text,
        "tau_c": tau_c,
    }
    if graphs is not None:
        payload["static_kgs"] = graphs
    return _compose("summary_and_consistency", instructions, payload)


def static_detect_prompt(
    summary: str,
    frame_indices: Sequence[int],
    graphs: Optional[List[Dict[str, Any]]],
) -> str:
    instructions = (
        "Inspect each attached frame for static hallucinations: category "
        "codes S1 geometric structure, S2 biological structure, S3 lighting "
        "or shadow or material, S4 color distribution, S5 depth of field, "
        "S6 composition or semantics, S7 motion blur, S8 physical "
        "phenomenon, S9 image quality. Return a field findings: a list "
        "where each item has code, severity (0 to 10), description, and "
        "frame_index taken from the frame list below."
    )
    payload: Dict[str, Any] = {
        "frames": list(frame_indices),
        "summary": summary,
    }
    if graphs is not None:
        payload["static_kgs"] = graphs
    return _compose("static_detect", instructions, payload)


def cluster_dynamic_kg_prompt(
    cluster: Dict[str, Any],
    tracked: Optional[List[Dict[str, Any]]],
    graphs: Optional[List[Dict[str, Any]]],
) -> str:
    if tracked is not None:
        instructions = (
            "The attached frames form one keyframe cluster. For every "
            "consecutive frame pair, describe how the tracked objects "
            "change: position, interaction, or attribute changes. Return a "
            "field temporal_relations: a list where each item has "
            "from_frame, to_frame, subject (a tracked object id from the "
            "input), change (position, interaction, or attribute), and "
            "detail."
        )
    else:
        instructions = (
            "The attached frames form one keyframe cluster. Identify the "
            "objects you can follow across the frames, then, for every "
            "consecutive frame pair, describe how they change: position, "
            "interaction, or attribute changes. Return fields: "
            "tracked_objects (a list where each item has label and frames, "
            "the frame indices where the object appears) and "
            "temporal_relations (a list where each item has from_frame, "
            "to_frame, subject repeating a tracked object label, change as "
            "position, interaction, or attribute, and detail)."
        )
    payload: Dict[str, Any] = {"cluster": cluster}
    if tracked is not None:
        payload["tracked_objects"] = tracked
    if graphs is not None:
        payload["static_kgs"] = graphs
    return _compose("cluster_dynamic_kg", instructions, payload)


def cluster_dynamic_detect_prompt(
    summary: str,
    cluster: Dict[str, Any],
    dynamic_kg: Optional[Dict[str, Any]],
    static_findings: List[Dict[str, Any]],
) -> str:
    instructions = (
        "Inspect the attached cluster frames for dynamic hallucinations "
        "between frames: category codes D1 clipping, D2 implausible fusion, "
        "D3 appearance or disappearance, D4 implausible motion, D5 "
        "implausible transform, D6 implausible penetration, D7 physical "
        "interaction error, D8 logical interaction error, D9 other. The "
        "static findings already confirmed for these frames are included "
        "below; prioritize temporal anomalies involving them. Return a "
        "field findings: a list where each item has code, severity (0 to "
        "10), description, and frames (the cluster frame indices involved)."
    )
    payload: Dict[str, Any] = {
        "cluster": cluster,
        "static_findings": static_findings,
        "summary": summary,
    }
    if dynamic_kg is not None:
        payload["dynamic_kg"] = dynamic_kg
    return _compose("cluster_dynamic_detect", instructions, payload)


def global_dynamic_prompt(
    summary: str,
    keyframe_indices: Sequence[int],
    tracked: Optional[List[Dict[str, Any]]],
    graphs: Optional[List[Dict[str, Any]]],
    want_relations: bool,
) -> str:
    if want_relations and tracked is not None:
        instructions = (
            "The attached frames are the keyframes of the whole video, in "
            "order. First, for every consecutive keyframe pair, describe "
            "how the tracked objects change across scenes (position, "
            "interaction, or attribute changes). Second, report dynamic "
            "hallucinations visible at this whole-video scale, using "
            "category codes D1 through D9 as defined for dynamic "
            "anomalies. Return fields: temporal_relations (items with "
            "from_frame, to_frame, subject as a tracked object id, change, "
            "detail) and findings (items with code, severity 0 to 10, "
            "description, and frames listing keyframe indices)."
        )
    elif want_relations:
        instructions = (
            "The attached frames are the keyframes of the whole video, in "
            "order. First, identify the objects you can follow across the "
            "keyframes. Second, for every consecutive keyframe pair, "
            "describe how those objects change across scenes (position, "
            "interaction, or attribute changes). Third, report dynamic "
            "hallucinations visible at this whole-video scale, using "
            "category codes D1 through D9 as defined for dynamic "
            "anomalies. Return fields: tracked_objects (items with label "
            "and frames), temporal_relations (items with from_frame, "
            "to_frame, subject repeating a tracked object label, change, "
            "detail), and findings (items with code, severity 0 to 10, "
            "description, and frames listing keyframe indices)."
        )
    else:
        instructions = (
            "The attached frames are the keyframes of the whole video, in "
            "order. Report dynamic hallucinations visible at this "
            "whole-video scale, using category codes D1 through D9 as "
            "defined for dynamic anomalies. Return a field findings: a "
            "list where each item has code, severity (0 to 10), "
            "description, and frames listing keyframe indices."
        )
    payload: Dict[str, Any] = {
        "keyframes": list(keyframe_indices),
        "summary": summary,
    }
    if tracked is not None:
        payload["tracked_objects"] = tracked
    if graphs is not None:
        payload["static_kgs"] = graphs
    return _compose("global_dynamic", instructions, payload)
