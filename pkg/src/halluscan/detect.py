"""Consistency, static, and dynamic hallucination detection.

Stage outputs are typed Finding records carrying a taxonomy code, a
severity in [0, 10], the frames involved, and the stage that produced
them. Replies with out-of-taxonomy codes, out-of-range severities, or
frame references outside the request scope are rejected so the gateway
retry loop can demand a compliant reply.
"""

import dataclasses
from typing import Any, Dict, List, Optional, Sequence, Tuple

from .errors import ContractError, ValidationError
from .frames import FrameSet
from .gateway import Gateway, GatewayRequest
from .keyframes import KeyframeCluster, KeyframeSet
from .kg import DynamicKG, StaticKG, group_dynamic_call
from .prompts import (
    cluster_dynamic_detect_prompt,
    premise_prompt,
    static_detect_prompt,
    summary_consistency_prompt,
)
from .schemas import CATEGORY_LABELS, CONSISTENCY_CODE, DYNAMIC_CODES, STATIC_CODES

KINDS = ("consistency", "static", "dynamic")
STAGES = ("consistency", "static", "local_dynamic", "global_dynamic")


@dataclasses.dataclass(frozen=True)
class HallucinationCategory:
    kind: str
    code: str

    def validate(self) -> "HallucinationCategory":
        ok = (
            (self.kind == "consistency" and self.code == CONSISTENCY_CODE)
            or (self.kind == "static" and self.code in STATIC_CODES)
            or (self.kind == "dynamic" and self.code in DYNAMIC_CODES)
        )
        if not ok:
            raise ValidationError(
                "category code %r does not belong to kind %r" % (self.code, self.kind)
            )
        return self

    @property
    def label(self) -> str:
        return CATEGORY_LABELS[self.code]


@dataclasses.dataclass(frozen=True)
class Finding:
    category: HallucinationCategory
    severity: float
    frame_refs: Tuple[int, ...]
    description: str
    source_stage: str

    def validate(self) -> "Finding":
        self.category.validate()
        if not 0.0 <= self.severity <= 10.0:
            raise ValidationError("severity %r outside [0, 10]" % (self.severity,))
        if self.source_stage not in STAGES:
            raise ValidationError("unknown source stage %r" % (self.source_stage,))
        if self.source_stage in ("static", "local_dynamic") and not self.frame_refs:
            raise ValidationError("%s findings need frame references" % (self.source_stage,))
        return self

    def to_dict(self) -> Dict[str, Any]:
        return {
            "code": self.category.code,
            "description": self.description,
            "frames": list(self.frame_refs),
            "kind": self.category.kind,
            "label": self.category.label,
            "severity": self.severity,
            "stage": self.source_stage,
        }


@dataclasses.dataclass(frozen=True)
class ConsistencyResult:
    summary: str
    similarity: float
    tau_c: float
    hallucinated: bool
    consistency_severity: float
    rationale: str
    working_summary: str

    def to_dict(self) -> Dict[str, Any]:
        return {
            "hallucinated": self.hallucinated,
            "rationale": self.rationale,
            "severity": self.consistency_severity,
            "similarity": self.similarity,
            "summary": self.summary,
            "tau_c": self.tau_c,
            "working_summary": self.working_summary,
        }


@dataclasses.dataclass(frozen=True)
class PremiseResult:
    valid: bool
    reason: str

    def to_dict(self) -> Dict[str, Any]:
        return {"reason": self.reason, "valid": self.valid}


def static_finding(doc: Dict[str, Any]) -> Finding:
    return Finding(
        category=HallucinationCategory(kind="static", code=doc["code"]),
        severity=float(doc["severity"]),
        frame_refs=(int(doc["frame_index"]),),
        description=doc["description"],
        source_stage="static",
    ).validate()


def dynamic_finding(doc: Dict[str, Any], stage: str) -> Finding:
    return Finding(
        category=HallucinationCategory(kind="dynamic", code=doc["code"]),
        severity=float(doc["severity"]),
        frame_refs=tuple(sorted(set(int(f) for f in doc["frames"]))),
        description=doc["description"],
        source_stage=stage,
    ).validate()


def consistency_finding(result: ConsistencyResult) -> Optional[Finding]:
    if not result.hallucinated:
        return None
    return Finding(
        category=HallucinationCategory(kind="consistency", code=CONSISTENCY_CODE),
        severity=result.consistency_severity,
        frame_refs=(),
        description=result.rationale or "video content diverges from the prompt",
        source_stage="consistency",
    ).validate()


def check_premise(prompt: str, gw: Gateway) -> PremiseResult:
    if not prompt:
        raise ContractError("prompt must be non-empty")
    resp = gw.complete(
        GatewayRequest(
            step="premise_check",
            prompt_text=premise_prompt(prompt),
            images=(),
            schema_id="premise",
        )
    )
    return PremiseResult(valid=resp.parsed["valid"], reason=resp.parsed["reason"])


def summarize_and_check_consistency(
    prompt: str,
    keyframes: KeyframeSet,
    fs: FrameSet,
    graphs: Sequence[StaticKG],
    gw: Gateway,
    tau_c: float = 0.5,
    ablation: str = "full",
) -> ConsistencyResult:
    """One gateway call judging prompt-to-content similarity.

    Below tau_c (strict) the video counts as consistency-hallucinated;
    otherwise the prompt itself becomes the working summary for the later
    detection stages.
    """
    if not prompt:
        raise ContractError("prompt must be non-empty")
    include_graphs = ablation in ("full", "no_dynamic_kg")
    graph_payload = [g.to_dict() for g in graphs] if include_graphs else None
    req = GatewayRequest(
        step="summary_and_consistency",
        prompt_text=summary_consistency_prompt(
            prompt, list(keyframes.indices), graph_payload, tau_c
        ),
        images=tuple(fs.frames[i].image_ref for i in keyframes.indices),
        schema_id="consistency",
    )
    resp = gw.complete(req)
    similarity = float(resp.parsed["similarity"])
    hallucinated = similarity < tau_c
    severity = float(resp.parsed["severity"]) if hallucinated else 0.0
    summary = resp.parsed["summary"]
    return ConsistencyResult(
        summary=summary,
        similarity=similarity,
        tau_c=tau_c,
        hallucinated=hallucinated,
        consistency_severity=severity,
        rationale=resp.parsed["rationale"],
        working_summary=summary if hallucinated else prompt,
    )


def _parse_static_findings(
    doc: Dict[str, Any], allowed_frames: Sequence[int]
) -> List[Finding]:
    allowed = set(allowed_frames)
    findings = []
    for f in doc["findings"]:
        if f["frame_index"] not in allowed:
            raise ValidationError(
                "finding cites frame %d outside the request" % (f["frame_index"],)
            )
        findings.append(static_finding(f))
    return findings


def detect_static(
    frame_index: int,
    image_ref: str,
    graph: Optional[StaticKG],
    summary: str,
    gw: Gateway,
    ablation: str = "full",
) -> List[Finding]:
    """Single-frame static detection; one gateway call for one frame."""
    include_graphs = ablation in ("full", "no_dynamic_kg") and graph is not None
    payload = [graph.to_dict()] if include_graphs else None
    req = GatewayRequest(
        step="static_detect",
        prompt_text=static_detect_prompt(summary, [frame_index], payload),
        images=(image_ref,),
        schema_id="static_findings",
    )
    resp = gw.complete(
        req, postparse=lambda doc: _parse_static_findings(doc, [frame_index])
    )
    return resp.result


def detect_static_cluster(
    cluster: KeyframeCluster,
    fs: FrameSet,
    graphs: Sequence[StaticKG],
    summary: str,
    gw: Gateway,
    ablation: str = "full",
) -> List[Finding]:
    """Batched static detection: one call covering the cluster's frames."""
    scope = cluster.frame_indices()
    include_graphs = ablation in ("full", "no_dynamic_kg")
    if include_graphs and tuple(g.frame_index for g in graphs) != scope:
        raise ContractError("graphs must cover exactly the cluster frames")
    payload = [g.to_dict() for g in graphs] if include_graphs else None
    req = GatewayRequest(
        step="static_detect",
        prompt_text=static_detect_prompt(summary, list(scope), payload),
        images=tuple(fs.frames[i].image_ref for i in scope),
        schema_id="static_findings",
    )
    resp = gw.complete(req, postparse=lambda doc: _parse_static_findings(doc, scope))
    return resp.result


def detect_dynamic_local(
    cluster: KeyframeCluster,
    fs: FrameSet,
    dkg: Optional[DynamicKG],
    summary: str,
    gw: Gateway,
    ablation: str = "full",
    static_findings: Sequence[Finding] = (),
) -> List[Finding]:
    """One call per cluster for within-cluster dynamic hallucinations."""
    scope = cluster.frame_indices()
    include_dkg = ablation in ("full", "no_static_kg")
    if include_dkg and dkg is None:
        raise ContractError("dynamic KG required outside the no-dynamic ablations")
    context = [
        {
            "code": f.category.code,
            "frame_index": f.frame_refs[0],
            "severity": f.severity,
        }
        for f in static_findings
    ]
    req = GatewayRequest(
        step="cluster_dynamic",
        prompt_text=cluster_dynamic_detect_prompt(
            summary,
            {"details": list(cluster.detail_indices), "keyframe": cluster.keyframe_index},
            dkg.to_dict() if include_dkg else None,
            context,
        ),
        images=tuple(fs.frames[i].image_ref for i in scope),
        schema_id="dynamic_findings",
    )

    def postparse(doc: Dict[str, Any]) -> List[Finding]:
        findings = []
        for f in doc["findings"]:
            if not set(f["frames"]) <= set(scope):
                raise ValidationError(
                    "finding cites frames %s outside the cluster" % (f["frames"],)
                )
            findings.append(dynamic_finding(f, "local_dynamic"))
        return findings

    resp = gw.complete(req, postparse=postparse)
    return resp.result


def detect_dynamic_global(
    keyframes: KeyframeSet,
    fs: FrameSet,
    graphs: Sequence[StaticKG],
    summary: str,
    gw: Gateway,
    ablation: str = "full",
) -> Tuple[DynamicKG, List[Finding], List[str]]:
    """The combined group call: one request builds the group dynamic KG
    and detects global dynamic hallucinations."""
    dkg, finding_docs, warnings = group_dynamic_call(
        keyframes, fs, graphs, summary, gw, ablation
    )
    findings = [dynamic_finding(doc, "global_dynamic") for doc in finding_docs]
    return dkg, findings, warnings
