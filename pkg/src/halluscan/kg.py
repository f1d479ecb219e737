"""Static and dynamic scene knowledge graphs.

A static graph holds the entities and (subject, predicate, object) triples
of one frame. A dynamic graph spans a cluster or the whole keyframe group:
objects tracked across frames by normalized label, plus gateway-proposed
temporal change relations. Relations that reference unknown objects or
out-of-scope frames are dropped with a warning rather than stored.
"""

import dataclasses
import re
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

from .errors import ContractError, KGExtractionError, ValidationError
from .frames import FrameSet
from .gateway import Gateway, GatewayRequest
from .keyframes import KeyframeCluster, KeyframeSet
from .prompts import (
    cluster_dynamic_kg_prompt,
    global_dynamic_prompt,
    static_kg_prompt,
)
from .schemas import CHANGE_KINDS

GROUP_SCOPE = "group"

_SLUG_RE = re.compile(r"[^a-z0-9]+")


def slugify(label: str) -> str:
    slug = _SLUG_RE.sub("-", label.strip().lower()).strip("-")
    return slug or "entity"


@dataclasses.dataclass(frozen=True)
class Entity:
    id: str
    label: str
    attributes: Tuple[Tuple[str, str], ...] = ()

    def to_dict(self) -> Dict[str, Any]:
        return {
            "attributes": {k: v for k, v in self.attributes},
            "id": self.id,
            "label": self.label,
        }


@dataclasses.dataclass(frozen=True)
class Triple:
    subject: str
    predicate: str
    object: str
    frame_index: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "frame_index": self.frame_index,
            "object": self.object,
            "predicate": self.predicate,
            "subject": self.subject,
        }


@dataclasses.dataclass(frozen=True)
class StaticKG:
    frame_index: int
    entities: Tuple[Entity, ...]
    triples: Tuple[Triple, ...]

    def validate(self) -> "StaticKG":
        ids = [e.id for e in self.entities]
        if len(ids) != len(set(ids)):
            raise ValidationError("duplicate entity ids in frame %d" % (self.frame_index,))
        for e in self.entities:
            if not e.label:
                raise ValidationError("entity with empty label in frame %d" % (self.frame_index,))
        known = set(ids)
        for t in self.triples:
            if t.subject not in known or t.object not in known:
                raise ValidationError(
                    "triple (%s, %s, %s) references an unknown entity"
                    % (t.subject, t.predicate, t.object)
                )
            if not t.predicate:
                raise ValidationError("triple with empty predicate")
        return self

    def to_dict(self) -> Dict[str, Any]:
        return {
            "entities": [e.to_dict() for e in self.entities],
            "frame_index": self.frame_index,
            "triples": [t.to_dict() for t in self.triples],
        }


@dataclasses.dataclass(frozen=True)
class TrackedObject:
    id: str
    label: str
    presence: Tuple[int, ...]

    def to_dict(self) -> Dict[str, Any]:
        return {"frames": list(self.presence), "id": self.id, "label": self.label}


@dataclasses.dataclass(frozen=True)
class TemporalRelation:
    from_frame: int
    to_frame: int
    subject: str
    change: str
    detail: str

    def to_dict(self) -> Dict[str, Any]:
        return {
            "change": self.change,
            "detail": self.detail,
            "from_frame": self.from_frame,
            "subject": self.subject,
            "to_frame": self.to_frame,
        }


@dataclasses.dataclass(frozen=True)
class DynamicKG:
    scope: str
    tracked_objects: Tuple[TrackedObject, ...]
    temporal_relations: Tuple[TemporalRelation, ...]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "scope": self.scope,
            "temporal_relations": [r.to_dict() for r in self.temporal_relations],
            "tracked_objects": [o.to_dict() for o in self.tracked_objects],
        }


def _assign_entity_ids(labels: Sequence[str]) -> List[str]:
    """Slugified labels; labels sharing a slug get #1..#k suffixes."""
    slugs = [slugify(label) for label in labels]
    counts: Dict[str, int] = {}
    for s in slugs:
        counts[s] = counts.get(s, 0) + 1
    seen: Dict[str, int] = {}
    ids = []
    for s in slugs:
        if counts[s] == 1:
            ids.append(s)
        else:
            seen[s] = seen.get(s, 0) + 1
            ids.append("%s#%d" % (s, seen[s]))
    return ids


def parse_static_kg(frame_index: int, doc: Dict[str, Any]) -> StaticKG:
    """Turn one schema-valid graph document into a validated StaticKG.

    Triple endpoints may repeat an entity label or a disambiguated id;
    an endpoint matching nothing raises ValidationError so the gateway
    retry loop can ask for a repaired reply.
    """
    raw_entities = doc["entities"]
    labels = [e["label"] for e in raw_entities]
    ids = _assign_entity_ids(labels)
    entities = []
    for ent_id, raw in zip(ids, raw_entities):
        attrs = tuple(sorted((raw.get("attributes") or {}).items()))
        entities.append(Entity(id=ent_id, label=raw["label"], attributes=attrs))

    by_id = {e.id for e in entities}
    first_by_slug: Dict[str, str] = {}
    for e in entities:
        first_by_slug.setdefault(slugify(e.label), e.id)

    def resolve(ref: str) -> str:
        if ref in by_id:
            return ref
        slug = slugify(ref)
        if slug in by_id:
            return slug
        if slug in first_by_slug:
            return first_by_slug[slug]
        raise ValidationError(
            "triple endpoint %r matches no entity of frame %d" % (ref, frame_index)
        )

    triples = tuple(
        Triple(
            subject=resolve(t["subject"]),
            predicate=t["predicate"],
            object=resolve(t["object"]),
            frame_index=frame_index,
        )
        for t in doc["triples"]
    )
    return StaticKG(
        frame_index=frame_index, entities=tuple(entities), triples=triples
    ).validate()


def parse_static_kg_batch(
    expected_indices: Sequence[int], doc: Dict[str, Any]
) -> Dict[int, StaticKG]:
    """Validate a batched reply covering exactly the requested frames."""
    got = [g["frame_index"] for g in doc["graphs"]]
    if sorted(got) != sorted(expected_indices) or len(got) != len(set(got)):
        raise ValidationError(
            "reply covers frames %s, expected %s" % (sorted(got), sorted(expected_indices))
        )
    return {
        g["frame_index"]: parse_static_kg(g["frame_index"], g) for g in doc["graphs"]
    }


def build_static_kg(frame_index: int, image_ref: str, gw: Gateway) -> StaticKG:
    """One gateway call for a single frame's scene graph."""
    req = GatewayRequest(
        step="static_kg",
        prompt_text=static_kg_prompt([frame_index]),
        images=(image_ref,),
        schema_id="static_kg_batch",
    )
    resp = gw.complete(req, postparse=lambda doc: parse_static_kg_batch([frame_index], doc))
    if resp.result is None or frame_index not in resp.result:
        raise KGExtractionError(
            "no graph extracted for frame %d" % (frame_index,), frame_index=frame_index
        )
    return resp.result[frame_index]


def build_static_kgs(
    frame_indices: Sequence[int], image_refs: Sequence[str], gw: Gateway
) -> Dict[int, StaticKG]:
    """One gateway call covering a whole cluster's frames."""
    if len(frame_indices) != len(image_refs):
        raise ContractError("frame indices and image refs must align")
    req = GatewayRequest(
        step="static_kg",
        prompt_text=static_kg_prompt(list(frame_indices)),
        images=tuple(image_refs),
        schema_id="static_kg_batch",
    )
    resp = gw.complete(
        req, postparse=lambda doc: parse_static_kg_batch(list(frame_indices), doc)
    )
    return resp.result


def track_objects(graphs: Iterable[StaticKG]) -> Tuple[TrackedObject, ...]:
    """Merge same-id entities across frames into presence-mapped objects.

    Entity ids are lowercase slugs already, so label matching is
    case-insensitive by construction; #k suffixes keep same-frame
    duplicates apart.
    """
    presence: Dict[str, List[int]] = {}
    label_for: Dict[str, str] = {}
    for g in graphs:
        for e in g.entities:
            presence.setdefault(e.id, []).append(g.frame_index)
            label_for.setdefault(e.id, e.label)
    tracked = []
    for obj_id in sorted(presence):
        frames = tuple(sorted(set(presence[obj_id])))
        tracked.append(TrackedObject(id=obj_id, label=label_for[obj_id], presence=frames))
    return tuple(tracked)


def tracked_from_response(
    docs: Sequence[Dict[str, Any]], scope_frames: Sequence[int]
) -> Tuple[TrackedObject, ...]:
    """Trust-mode tracking: the reply itself declares the tracked objects."""
    scope = set(scope_frames)
    ids = _assign_entity_ids([d["label"] for d in docs])
    tracked = []
    for obj_id, d in zip(ids, docs):
        frames = tuple(sorted(set(d["frames"])))
        if not set(frames) <= scope:
            raise ValidationError(
                "tracked object %r cites frames outside the cluster" % (d["label"],)
            )
        tracked.append(TrackedObject(id=obj_id, label=d["label"], presence=frames))
    return tuple(sorted(tracked, key=lambda t: t.id))


def parse_temporal_relations(
    docs: Sequence[Dict[str, Any]],
    tracked: Sequence[TrackedObject],
    scope_frames: Sequence[int],
    scope_name: str,
) -> Tuple[Tuple[TemporalRelation, ...], List[str]]:
    """Keep valid relations; drop the rest with a warning per relation."""
    scope = set(scope_frames)
    by_id = {t.id for t in tracked}
    first_by_slug: Dict[str, str] = {}
    for t in tracked:
        first_by_slug.setdefault(slugify(t.label), t.id)
    kept: List[TemporalRelation] = []
    warnings: List[str] = []
    for d in docs:
        subject = d["subject"]
        if subject not in by_id:
            slug = slugify(subject)
            subject = slug if slug in by_id else first_by_slug.get(slug)
        if subject is None:
            warnings.append(
                "%s: dropped relation citing unknown object %r"
                % (scope_name, d["subject"])
            )
            continue
        if d["from_frame"] >= d["to_frame"]:
            warnings.append(
                "%s: dropped relation with non-increasing frames %d->%d"
                % (scope_name, d["from_frame"], d["to_frame"])
            )
            continue
        if d["from_frame"] not in scope or d["to_frame"] not in scope:
            warnings.append(
                "%s: dropped relation citing frames outside scope (%d->%d)"
                % (scope_name, d["from_frame"], d["to_frame"])
            )
            continue
        if d["change"] not in CHANGE_KINDS:
            warnings.append(
                "%s: dropped relation with unknown change kind %r"
                % (scope_name, d["change"])
            )
            continue
        kept.append(
            TemporalRelation(
                from_frame=d["from_frame"],
                to_frame=d["to_frame"],
                subject=subject,
                change=d["change"],
                detail=d["detail"],
            )
        )
    return tuple(kept), warnings


def _cluster_payload(cluster: KeyframeCluster) -> Dict[str, Any]:
    return {
        "details": list(cluster.detail_indices),
        "keyframe": cluster.keyframe_index,
    }


def build_dynamic_kg(
    cluster: KeyframeCluster,
    fs: FrameSet,
    graphs: Sequence[StaticKG],
    gw: Gateway,
    ablation: str = "full",
) -> Tuple[DynamicKG, List[str]]:
    """One gateway call proposing this cluster's temporal relations.

    With ablation no_static_kg there are no static graphs; the reply must
    then declare its own tracked objects (trust mode).
    """
    scope_frames = cluster.frame_indices()
    trust_mode = ablation == "no_static_kg"
    if not trust_mode:
        if tuple(g.frame_index for g in graphs) != scope_frames:
            raise ContractError(
                "graphs must cover exactly the cluster frames %s" % (scope_frames,)
            )
        tracked = track_objects(graphs)
        prompt = cluster_dynamic_kg_prompt(
            _cluster_payload(cluster),
            [t.to_dict() for t in tracked],
            [g.to_dict() for g in graphs],
        )
    else:
        tracked = ()
        prompt = cluster_dynamic_kg_prompt(_cluster_payload(cluster), None, None)

    images = tuple(fs.frames[i].image_ref for i in scope_frames)
    scope_name = "cluster %d" % (cluster.cluster_id,)
    holder: Dict[str, Any] = {}

    def postparse(doc: Dict[str, Any]) -> DynamicKG:
        if trust_mode:
            if "tracked_objects" not in doc:
                raise ValidationError("reply must declare tracked_objects")
            objs = tracked_from_response(doc["tracked_objects"], scope_frames)
        else:
            objs = tracked
        relations, warnings = parse_temporal_relations(
            doc["temporal_relations"], objs, scope_frames, scope_name
        )
        holder["warnings"] = warnings
        return DynamicKG(
            scope="cluster:%d" % (cluster.cluster_id,),
            tracked_objects=objs,
            temporal_relations=relations,
        )

    resp = gw.complete(
        GatewayRequest(
            step="cluster_dynamic",
            prompt_text=prompt,
            images=images,
            schema_id="temporal_relations",
        ),
        postparse=postparse,
    )
    return resp.result, holder.get("warnings", [])


def group_dynamic_call(
    keyframes: KeyframeSet,
    fs: FrameSet,
    graphs: Sequence[StaticKG],
    summary: str,
    gw: Gateway,
    ablation: str = "full",
) -> Tuple[DynamicKG, List[Dict[str, Any]], List[str]]:
    """The combined group call: dynamic KG plus global finding documents.

    Returns the group DynamicKG, the raw finding documents (converted to
    typed findings by the detection layer), and any drop warnings.
    """
    scope_frames = tuple(keyframes.indices)
    want_relations = ablation in ("full", "no_static_kg")
    trust_mode = ablation in ("no_static_kg", "no_kg")
    if not trust_mode:
        if tuple(g.frame_index for g in graphs) != scope_frames:
            raise ContractError("graphs must cover exactly the keyframes")
        tracked = track_objects(graphs)
        prompt = global_dynamic_prompt(
            summary,
            list(scope_frames),
            [t.to_dict() for t in tracked],
            [g.to_dict() for g in graphs],
            want_relations,
        )
    else:
        tracked = ()
        prompt = global_dynamic_prompt(
            summary, list(scope_frames), None, None, want_relations
        )

    images = tuple(fs.frames[i].image_ref for i in scope_frames)
    holder: Dict[str, Any] = {}

    def postparse(doc: Dict[str, Any]) -> DynamicKG:
        if trust_mode and want_relations:
            if "tracked_objects" not in doc:
                raise ValidationError("reply must declare tracked_objects")
            objs = tracked_from_response(doc["tracked_objects"], scope_frames)
        else:
            objs = tracked
        relation_docs = doc.get("temporal_relations", [])
        relations, warnings = parse_temporal_relations(
            relation_docs, objs, scope_frames, GROUP_SCOPE
        )
        for f in doc["findings"]:
            if not set(f["frames"]) <= set(scope_frames):
                raise ValidationError(
                    "global finding cites non-keyframe frames %s" % (f["frames"],)
                )
        holder["warnings"] = warnings
        holder["findings"] = doc["findings"]
        return DynamicKG(
            scope=GROUP_SCOPE, tracked_objects=objs, temporal_relations=relations
        )

    resp = gw.complete(
        GatewayRequest(
            step="global_dynamic",
            prompt_text=prompt,
            images=images,
            schema_id="global_dynamic",
        ),
        postparse=postparse,
    )
    return resp.result, holder.get("findings", []), holder.get("warnings", [])


def build_group_dynamic_kg(
    keyframes: KeyframeSet,
    fs: FrameSet,
    graphs: Sequence[StaticKG],
    gw: Gateway,
    summary: str = "",
    ablation: str = "full",
) -> Tuple[DynamicKG, List[str]]:
    dkg, _, warnings = group_dynamic_call(keyframes, fs, graphs, summary, gw, ablation)
    return dkg, warnings
