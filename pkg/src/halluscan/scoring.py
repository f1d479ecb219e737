"""Severity aggregation, keyframe duration weights, and the quality score.

The final score starts at 100 and subtracts alpha-weighted consistency
severity plus beta- and gamma-weighted per-keyframe severity sums, each
keyframe weighted by the share of video duration it owns. The result is
clamped to [0, 100].
"""

import dataclasses
from typing import Any, Dict, List, Optional, Sequence, Tuple

from .detect import Finding
from .errors import ContractError
from .frames import FrameSet
from .keyframes import ClusterSet, KeyframeSet

AGG_KINDS = ("consistency", "static", "dynamic")


@dataclasses.dataclass(frozen=True)
class SeverityTriple:
    s_c: float
    s_s: float
    s_d: float

    def validate(self) -> "SeverityTriple":
        for name, v in (("s_c", self.s_c), ("s_s", self.s_s), ("s_d", self.s_d)):
            if not 0.0 <= v <= 10.0:
                raise ContractError("%s=%r outside [0, 10]" % (name, v))
        return self

    def to_dict(self) -> Dict[str, float]:
        return {"s_c": self.s_c, "s_d": self.s_d, "s_s": self.s_s}


@dataclasses.dataclass(frozen=True)
class AggregatedHallucination:
    member_indices: Tuple[int, ...]
    triple: SeverityTriple
    s_h: float
    mode: str


@dataclasses.dataclass(frozen=True)
class DurationWeights:
    T: Tuple[float, ...]

    def validate(self) -> "DurationWeights":
        if any(t < 0 for t in self.T):
            raise ContractError("duration weights must be non-negative")
        if abs(sum(self.T) - 1.0) > 1e-9:
            raise ContractError("duration weights must sum to 1")
        return self


@dataclasses.dataclass(frozen=True)
class QualityScore:
    value: float
    alpha: float
    beta: float
    gamma: float
    consistency_penalty: float
    static_penalty: float
    dynamic_penalty: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "components": {
                "consistency": self.consistency_penalty,
                "dynamic": self.dynamic_penalty,
                "static": self.static_penalty,
            },
            "gamma": self.gamma,
            "value": self.value,
        }


def _check_weights(weights: Optional[Dict[str, float]]) -> Dict[str, float]:
    if weights is None:
        raise ContractError("weighted mode needs severity weights")
    if sorted(weights) != sorted(AGG_KINDS):
        raise ContractError("weights must cover exactly %s" % (list(AGG_KINDS),))
    if any(w < 0 for w in weights.values()):
        raise ContractError("weights must be non-negative")
    if abs(sum(weights.values()) - 1.0) > 1e-9:
        raise ContractError("weights must sum to 1")
    return weights


def aggregate(
    findings: Sequence[Finding],
    mode: str = "max",
    weights: Optional[Dict[str, float]] = None,
) -> List[AggregatedHallucination]:
    """Group findings whose frame references overlap; score each group.

    Findings without frame references (consistency) form their own groups.
    Each group's severity triple takes the per-kind maximum over members,
    then s_h is the triple's maximum or its weighted average.
    """
    if mode not in ("max", "weighted"):
        raise ContractError("unknown aggregation mode: %r" % (mode,))
    if mode == "weighted":
        weights = _check_weights(weights)

    n = len(findings)
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a: int, b: int) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    refs = [set(f.frame_refs) for f in findings]
    for i in range(n):
        if not refs[i]:
            continue
        for j in range(i + 1, n):
            if refs[i] & refs[j]:
                union(i, j)

    groups: Dict[int, List[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)

    out = []
    for root in sorted(groups):
        members = tuple(sorted(groups[root]))
        by_kind = {"consistency": 0.0, "static": 0.0, "dynamic": 0.0}
        for idx in members:
            f = findings[idx]
            by_kind[f.category.kind] = max(by_kind[f.category.kind], f.severity)
        triple = SeverityTriple(
            s_c=by_kind["consistency"], s_s=by_kind["static"], s_d=by_kind["dynamic"]
        ).validate()
        if mode == "max":
            s_h = max(triple.s_c, triple.s_s, triple.s_d)
        else:
            assert weights is not None
            s_h = (
                weights["consistency"] * triple.s_c
                + weights["static"] * triple.s_s
                + weights["dynamic"] * triple.s_d
            )
        out.append(
            AggregatedHallucination(
                member_indices=members, triple=triple, s_h=s_h, mode=mode
            )
        )
    return out


def duration_weights(keyframes: KeyframeSet, fs: FrameSet) -> DurationWeights:
    """Midpoint-interval ownership: keyframe i owns from the midpoint with
    its left neighbour to the midpoint with its right one, clipped to the
    video bounds."""
    if not keyframes.indices:
        raise ContractError("at least one keyframe required")
    total = fs.total_duration_s
    if total <= 0:
        raise ContractError("total duration must be > 0")
    times = [fs.frames[i].timestamp_s for i in keyframes.indices]
    bounds = [0.0]
    for a, b in zip(times, times[1:]):
        bounds.append(min(max((a + b) / 2.0, 0.0), total))
    bounds.append(total)
    T = tuple((hi - lo) / total for lo, hi in zip(bounds, bounds[1:]))
    return DurationWeights(T=T).validate()


def severities_by_keyframe(
    findings: Sequence[Finding],
    clusters: ClusterSet,
    keyframes: KeyframeSet,
) -> Tuple[float, List[List[float]], List[List[float]]]:
    """Attribute finding severities to keyframes for the score formula.

    Static and local dynamic findings land on the keyframe of the cluster
    owning their first referenced frame; global dynamic findings spread
    severity/m uniformly over all keyframes; consistency severity is the
    maximum over consistency findings.
    """
    m = len(keyframes.indices)
    cluster_of: Dict[int, int] = {}
    for c in clusters.clusters:
        for idx in c.frame_indices():
            cluster_of[idx] = c.cluster_id
    s_c = 0.0
    static_by_kf: List[List[float]] = [[] for _ in range(m)]
    dynamic_by_kf: List[List[float]] = [[] for _ in range(m)]
    for f in findings:
        if f.source_stage == "consistency":
            s_c = max(s_c, f.severity)
        elif f.source_stage == "static":
            static_by_kf[cluster_of[f.frame_refs[0]]].append(f.severity)
        elif f.source_stage == "local_dynamic":
            dynamic_by_kf[cluster_of[f.frame_refs[0]]].append(f.severity)
        elif f.source_stage == "global_dynamic":
            for i in range(m):
                dynamic_by_kf[i].append(f.severity / m)
        else:
            raise ContractError("finding from unknown stage %r" % (f.source_stage,))
    return s_c, static_by_kf, dynamic_by_kf


def video_quality_score(
    s_c: float,
    static_by_kf: Sequence[Sequence[float]],
    dynamic_by_kf: Sequence[Sequence[float]],
    T: DurationWeights,
    alpha: float = 2.0,
    beta: float = 4.0,
    gamma: float = 4.0,
) -> QualityScore:
    m = len(T.T)
    if len(static_by_kf) != m or len(dynamic_by_kf) != m:
        raise ContractError("per-keyframe severity lists must match the weights")
    if not 0.0 <= s_c <= 10.0:
        raise ContractError("s_c outside [0, 10]")
    for per_kf in (static_by_kf, dynamic_by_kf):
        for sev_list in per_kf:
            for s in sev_list:
                if not 0.0 <= s <= 10.0:
                    raise ContractError("severity %r outside [0, 10]" % (s,))
    consistency_penalty = alpha * s_c
    static_penalty = beta * sum(
        T.T[i] * sum(static_by_kf[i]) for i in range(m)
    )
    dynamic_penalty = gamma * sum(
        T.T[i] * sum(dynamic_by_kf[i]) for i in range(m)
    )
    raw = 100.0 - consistency_penalty - static_penalty - dynamic_penalty
    value = min(max(raw, 0.0), 100.0)
    return QualityScore(
        value=value,
        alpha=alpha,
        beta=beta,
        gamma=gamma,
        consistency_penalty=consistency_penalty,
        static_penalty=static_penalty,
        dynamic_penalty=dynamic_penalty,
    )
