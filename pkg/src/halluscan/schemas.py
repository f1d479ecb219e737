"""Response and annotation schemas plus the hallucination taxonomy codes.

Every gateway step demands a single JSON document; these schemas are the
contract. Free text, unknown category codes, and out-of-range severities
are rejected so that a retry can ask the model for a compliant reply.
"""

from typing import Any, Dict

import jsonschema

from .errors import ValidationError

STATIC_CODES = ("S1", "S2", "S3", "S4", "S5", "S6", "S7", "S8", "S9")
DYNAMIC_CODES = ("D1", "D2", "D3", "D4", "D5", "D6", "D7", "D8", "D9")
CONSISTENCY_CODE = "PCH"

CATEGORY_LABELS = {
    "PCH": "prompt-consistency",
    "S1": "geometric-structure",
    "S2": "biological-structure",
    "S3": "lighting-shadow-material",
    "S4": "color-distribution",
    "S5": "depth-of-field",
    "S6": "composition-semantics",
    "S7": "motion-blur",
    "S8": "physical-phenomenon",
    "S9": "image-quality",
    "D1": "clipping",
    "D2": "implausible-fusion",
    "D3": "appearance-disappearance",
    "D4": "implausible-motion",
    "D5": "implausible-transform",
    "D6": "implausible-penetration",
    "D7": "physical-interaction-error",
    "D8": "logical-interaction-error",
    "D9": "other",
}

CHANGE_KINDS = ("position", "interaction", "attribute")

_SEVERITY = {"type": "number", "minimum": 0, "maximum": 10}

_ENTITY = {
    "type": "object",
    "properties": {
        "label": {"type": "string", "minLength": 1},
        "attributes": {
            "type": "object",
            "additionalProperties": {"type": "string"},
        },
    },
    "required": ["label"],
    "additionalProperties": False,
}

_TRIPLE = {
    "type": "object",
    "properties": {
        "subject": {"type": "string", "minLength": 1},
        "predicate": {"type": "string", "minLength": 1},
        "object": {"type": "string", "minLength": 1},
    },
    "required": ["subject", "predicate", "object"],
    "additionalProperties": False,
}

_GRAPH = {
    "type": "object",
    "properties": {
        "frame_index": {"type": "integer", "minimum": 0},
        "entities": {"type": "array", "items": _ENTITY},
        "triples": {"type": "array", "items": _TRIPLE},
    },
    "required": ["frame_index", "entities", "triples"],
    "additionalProperties": False,
}

_STATIC_FINDING = {
    "type": "object",
    "properties": {
        "code": {"type": "string", "enum": list(STATIC_CODES)},
        "severity": _SEVERITY,
        "description": {"type": "string"},
        "frame_index": {"type": "integer", "minimum": 0},
    },
    "required": ["code", "severity", "description", "frame_index"],
    "additionalProperties": False,
}

_DYNAMIC_FINDING = {
    "type": "object",
    "properties": {
        "code": {"type": "string", "enum": list(DYNAMIC_CODES)},
        "severity": _SEVERITY,
        "description": {"type": "string"},
        "frames": {
            "type": "array",
            "items": {"type": "integer", "minimum": 0},
            "minItems": 1,
        },
    },
    "required": ["code", "severity", "description", "frames"],
    "additionalProperties": False,
}

_TEMPORAL_RELATION = {
    "type": "object",
    "properties": {
        "from_frame": {"type": "integer", "minimum": 0},
        "to_frame": {"type": "integer", "minimum": 0},
        "subject": {"type": "string", "minLength": 1},
        "change": {"type": "string", "enum": list(CHANGE_KINDS)},
        "detail": {"type": "string"},
    },
    "required": ["from_frame", "to_frame", "subject", "change", "detail"],
    "additionalProperties": False,
}

_TRACKED_OBJECT = {
    "type": "object",
    "properties": {
        "label": {"type": "string", "minLength": 1},
        "frames": {
            "type": "array",
            "items": {"type": "integer", "minimum": 0},
            "minItems": 1,
        },
    },
    "required": ["label", "frames"],
    "additionalProperties": False,
}

SCHEMAS: Dict[str, Dict[str, Any]] = {
    "consistency": {
        "type": "object",
        "properties": {
            "summary": {"type": "string"},
            "similarity": {"type": "number", "minimum": 0, "maximum": 1},
            "severity": _SEVERITY,
            "rationale": {"type": "string"},
        },
        "required": ["summary", "similarity", "severity", "rationale"],
        "additionalProperties": False,
    },
    "static_kg_batch": {
        "type": "object",
        "properties": {"graphs": {"type": "array", "items": _GRAPH}},
        "required": ["graphs"],
        "additionalProperties": False,
    },
    "static_findings": {
        "type": "object",
        "properties": {
            "findings": {"type": "array", "items": _STATIC_FINDING}
        },
        "required": ["findings"],
        "additionalProperties": False,
    },
    "temporal_relations": {
        "type": "object",
        "properties": {
            "temporal_relations": {
                "type": "array",
                "items": _TEMPORAL_RELATION,
            },
            "tracked_objects": {"type": "array", "items": _TRACKED_OBJECT},
        },
        "required": ["temporal_relations"],
        "additionalProperties": False,
    },
    "dynamic_findings": {
        "type": "object",
        "properties": {
            "findings": {"type": "array", "items": _DYNAMIC_FINDING}
        },
        "required": ["findings"],
        "additionalProperties": False,
    },
    "global_dynamic": {
        "type": "object",
        "properties": {
            "temporal_relations": {
                "type": "array",
                "items": _TEMPORAL_RELATION,
            },
            "tracked_objects": {"type": "array", "items": _TRACKED_OBJECT},
            "findings": {"type": "array", "items": _DYNAMIC_FINDING},
        },
        "required": ["findings"],
        "additionalProperties": False,
    },
    "premise": {
        "type": "object",
        "properties": {
            "valid": {"type": "boolean"},
            "reason": {"type": "string"},
        },
        "required": ["valid", "reason"],
        "additionalProperties": False,
    },
}

ANNOTATION_LINE_SCHEMA: Dict[str, Any] = {
    "type": "object",
    "properties": {
        "video_id": {"type": "string", "minLength": 1},
        "prompt": {"type": "string"},
        "pch": {"type": "boolean"},
        "static": {
            "type": "array",
            "items": {"type": "string", "enum": list(STATIC_CODES)},
        },
        "dynamic": {
            "type": "array",
            "items": {"type": "string", "enum": list(DYNAMIC_CODES)},
        },
    },
    "required": ["video_id", "prompt", "pch", "static", "dynamic"],
    "additionalProperties": False,
}


def validate_response(schema_id: str, doc: Any) -> None:
    """Raise ValidationError when doc does not satisfy the step's schema."""
    try:
        schema = SCHEMAS[schema_id]
    except KeyError:
        raise ValidationError("unknown response schema: %r" % (schema_id,))
    try:
        jsonschema.validate(instance=doc, schema=schema)
    except jsonschema.ValidationError as exc:
        raise ValidationError("response violates schema %s: %s" % (schema_id, exc.message))
