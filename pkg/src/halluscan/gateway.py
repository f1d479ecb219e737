"""Vendor-neutral multimodal gateway with live, record, and replay backends.

Every pipeline step goes through ``Gateway.complete``: the request is a
prompt plus image references, the response must be a single JSON document
matching the step's schema. Invalid replies trigger a repair prompt and a
retry. The record backend persists every attempt keyed by its request
hash; the replay backend serves those fixtures back, which makes a
recorded run fully reproducible offline.
"""

import base64
import dataclasses
import hashlib
import io
import json
import os
import threading
import time
from typing import Any, Callable, Dict, List, Optional, Tuple

import requests
from PIL import Image

from .config import Config
from .errors import (
    ConfigError,
    ContractError,
    FixtureMissingError,
    GatewayParseError,
    GatewayTransportError,
    ValidationError,
)
from .schemas import validate_response

STEPS = (
    "summary_and_consistency",
    "static_kg",
    "static_detect",
    "cluster_dynamic",
    "global_dynamic",
    "premise_check",
)

TEXT_ONLY_STEPS = ("premise_check",)

DEFAULT_TIMEOUT_S = 60.0
BACKOFF_BASE_S = 1.0
BACKOFF_FACTOR = 2.0
TRANSPORT_RETRIES = 3


@dataclasses.dataclass(frozen=True)
class GatewayRequest:
    step: str
    prompt_text: str
    images: Tuple[str, ...]
    schema_id: str

    def validate(self) -> "GatewayRequest":
        if self.step not in STEPS:
            raise ContractError("unknown gateway step: %r" % (self.step,))
        if self.step not in TEXT_ONLY_STEPS and not self.images:
            raise ContractError("step %s requires at least one image" % (self.step,))
        return self


@dataclasses.dataclass(frozen=True)
class GatewayResponse:
    raw_text: str
    parsed: Dict[str, Any]
    attempts: int
    cost_usd: float
    result: Any = None


def file_digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def request_hash(req: GatewayRequest) -> str:
    """Content hash over step, prompt text, and source image digests."""
    payload = {
        "step": req.step,
        "prompt": req.prompt_text,
        "images": [file_digest(p) for p in req.images],
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def repair_request(req: GatewayRequest, error: str) -> GatewayRequest:
    prompt = (
        req.prompt_text
        + "\n\nREPAIR NOTICE: the previous reply was rejected (%s). "
        "Reply again with exactly one JSON object that satisfies the "
        "required fields, and nothing else." % (error,)
    )
    return GatewayRequest(
        step=req.step,
        prompt_text=prompt,
        images=req.images,
        schema_id=req.schema_id,
    )


def parse_json_document(text: str) -> Dict[str, Any]:
    """Parse one JSON object, tolerating a surrounding markdown fence."""
    body = text.strip()
    if body.startswith("```"):
        lines = body.splitlines()
        if lines and lines[-1].strip().startswith("```"):
            body = "\n".join(lines[1:-1]).strip()
        else:
            body = "\n".join(lines[1:]).strip()
    try:
        doc = json.loads(body)
    except json.JSONDecodeError as exc:
        raise ValidationError("reply is not valid JSON: %s" % (exc,))
    if not isinstance(doc, dict):
        raise ValidationError("reply must be a single JSON object")
    return doc


class CallLedger:
    """Append-only log of completed model calls."""

    def __init__(self) -> None:
        self._entries: List[Tuple[str, str, float]] = []
        self._lock = threading.Lock()

    def append(self, request_hash_: str, step: str, cost_usd: float) -> None:
        with self._lock:
            self._entries.append((request_hash_, step, cost_usd))

    @property
    def entries(self) -> Tuple[Tuple[str, str, float], ...]:
        with self._lock:
            return tuple(self._entries)

    @property
    def total_calls(self) -> int:
        return len(self.entries)

    @property
    def total_cost_usd(self) -> float:
        return float(sum(e[2] for e in self.entries))

    def by_step(self) -> Dict[str, int]:
        counts: Dict[str, int] = {}
        for _, step, _ in self.entries:
            counts[step] = counts.get(step, 0) + 1
        return dict(sorted(counts.items()))

    def digest(self) -> Dict[str, Any]:
        """Order-independent summary; safe to embed in golden reports."""
        return {"by_step": self.by_step(), "total_calls": self.total_calls}


class FixtureStore:
    """Directory of <request_hash>.request/.response.json plus a manifest."""

    def __init__(self, root: str, create: bool = False) -> None:
        self.root = root
        self._lock = threading.Lock()
        if create:
            os.makedirs(root, exist_ok=True)
        elif not os.path.isdir(root):
            raise ConfigError("fixture directory does not exist: %s" % (root,))

    def response_path(self, request_hash_: str) -> str:
        return os.path.join(self.root, request_hash_ + ".response.json")

    def request_path(self, request_hash_: str) -> str:
        return os.path.join(self.root, request_hash_ + ".request.json")

    def load(self, request_hash_: str) -> Optional[Dict[str, Any]]:
        path = self.response_path(request_hash_)
        if not os.path.isfile(path):
            return None
        try:
            with open(path, "r", encoding="utf-8") as fh:
                return json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise GatewayParseError("fixture %s is unreadable: %s" % (path, exc))

    def save(self, req: GatewayRequest, request_hash_: str, raw_text: str) -> None:
        request_doc = {
            "images": [file_digest(p) for p in req.images],
            "prompt_text": req.prompt_text,
            "request_hash": request_hash_,
            "schema_id": req.schema_id,
            "step": req.step,
        }
        response_doc = {
            "raw_text": raw_text,
            "request_hash": request_hash_,
            "schema_id": req.schema_id,
            "step": req.step,
        }
        with self._lock:
            self._write(self.request_path(request_hash_), request_doc)
            self._write(self.response_path(request_hash_), response_doc)
            manifest_path = os.path.join(self.root, "manifest.json")
            manifest: Dict[str, Any] = {"fixtures": {}}
            if os.path.isfile(manifest_path):
                with open(manifest_path, "r", encoding="utf-8") as fh:
                    manifest = json.load(fh)
            manifest.setdefault("fixtures", {})[request_hash_] = {
                "schema_id": req.schema_id,
                "step": req.step,
            }
            manifest["fixtures"] = dict(sorted(manifest["fixtures"].items()))
            self._write(manifest_path, manifest)

    @staticmethod
    def _write(path: str, doc: Dict[str, Any]) -> None:
        tmp = path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, sort_keys=True, indent=2)
            fh.write("\n")
        os.replace(tmp, path)


def _default_post_fn(
    url: str, headers: Dict[str, str], body: Dict[str, Any], timeout: float
) -> Tuple[int, str]:
    resp = requests.post(url, headers=headers, json=body, timeout=timeout)
    return resp.status_code, resp.text


PostFn = Callable[[str, Dict[str, str], Dict[str, Any], float], Tuple[int, str]]


class Gateway:
    def __init__(
        self,
        backend: str = "replay",
        fixture_dir: Optional[str] = None,
        base_url: Optional[str] = None,
        model: str = "gpt-4v",
        api_key: Optional[str] = None,
        max_retries: int = 2,
        per_call_usd: float = 0.08,
        max_image_edge: int = 768,
        timeout_s: float = DEFAULT_TIMEOUT_S,
        post_fn: Optional[PostFn] = None,
        sleep_fn: Optional[Callable[[float], None]] = None,
        ledger: Optional[CallLedger] = None,
    ) -> None:
        if backend not in ("live", "record", "replay"):
            raise ConfigError("unknown backend: %r" % (backend,))
        self.backend = backend
        self.model = model
        self.max_retries = max_retries
        self.per_call_usd = per_call_usd
        self.max_image_edge = max_image_edge
        self.timeout_s = timeout_s
        self.sleep_fn = sleep_fn or time.sleep
        self.ledger = ledger or CallLedger()
        self.store: Optional[FixtureStore] = None
        if backend in ("replay", "record"):
            if not fixture_dir:
                raise ConfigError("%s backend requires fixture_dir" % (backend,))
            self.store = FixtureStore(fixture_dir, create=(backend == "record"))
        self.post_fn = post_fn
        self.base_url = base_url
        self.api_key = api_key
        if backend in ("live", "record") and post_fn is None:
            self.api_key = api_key or os.environ.get("HALLUSCAN_API_KEY")
            if not self.api_key:
                raise ConfigError(
                    "live calls need an API key in HALLUSCAN_API_KEY"
                )
            if not base_url:
                raise ConfigError("live calls need base_url")
            self.post_fn = _default_post_fn

    @classmethod
    def from_config(cls, cfg: Config, post_fn: Optional[PostFn] = None, **kwargs: Any) -> "Gateway":
        return cls(
            backend=cfg.backend,
            fixture_dir=cfg.fixture_dir,
            base_url=cfg.endpoint,
            model=cfg.model,
            max_retries=cfg.max_retries,
            per_call_usd=cfg.per_call_usd,
            max_image_edge=cfg.max_image_edge,
            post_fn=post_fn,
            **kwargs,
        )

    def complete(
        self,
        req: GatewayRequest,
        postparse: Optional[Callable[[Dict[str, Any]], Any]] = None,
    ) -> GatewayResponse:
        """Run one step to a validated response, retrying through repairs.

        ``postparse`` may perform semantic checks beyond the JSON schema;
        raising ValidationError from it re-enters the repair loop.
        """
        req.validate()
        current = req
        cost_so_far = 0.0
        last_error = "no attempt made"
        for attempt in range(1, self.max_retries + 2):
            h = request_hash(current)
            if self.backend == "replay":
                assert self.store is not None
                fixture = self.store.load(h)
                if fixture is None:
                    raise FixtureMissingError(
                        "no fixture for request %s (step %s)" % (h, current.step)
                    )
                raw_text = fixture["raw_text"]
                cost = 0.0
            else:
                raw_text = self._transport_call(current)
                cost = self.per_call_usd
            cost_so_far += cost
            self.ledger.append(h, current.step, cost)
            if self.backend == "record":
                assert self.store is not None
                self.store.save(current, h, raw_text)
            try:
                doc = parse_json_document(raw_text)
                validate_response(current.schema_id, doc)
                result = postparse(doc) if postparse is not None else None
            except ValidationError as exc:
                last_error = str(exc)
                current = repair_request(current, last_error)
                continue
            return GatewayResponse(
                raw_text=raw_text,
                parsed=doc,
                attempts=attempt,
                cost_usd=cost_so_far,
                result=result,
            )
        raise GatewayParseError(
            "step %s produced no valid reply in %d attempts; last error: %s"
            % (req.step, self.max_retries + 1, last_error)
        )

    def _transport_call(self, req: GatewayRequest) -> str:
        assert self.post_fn is not None
        body = self._build_body(req)
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = "Bearer %s" % (self.api_key,)
        url = (self.base_url or "").rstrip("/") + "/chat/completions"
        delay = BACKOFF_BASE_S
        last = "no transport attempt"
        for i in range(TRANSPORT_RETRIES + 1):
            status: Optional[int] = None
            try:
                status, text = self.post_fn(url, headers, body, self.timeout_s)
            except Exception as exc:  # noqa: BLE001 - surfaced after retries
                last = "transport exception: %s" % (exc,)
            if status is not None:
                if status == 200:
                    return self._extract_content(text)
                if 400 <= status < 500:
                    raise GatewayTransportError(
                        "HTTP %d from gateway: %s" % (status, text[:500])
                    )
                last = "HTTP %d" % (status,)
            if i < TRANSPORT_RETRIES:
                self.sleep_fn(delay)
                delay *= BACKOFF_FACTOR
        raise GatewayTransportError(
            "transport failed after %d attempts: %s" % (TRANSPORT_RETRIES + 1, last)
        )

    @staticmethod
    def _extract_content(text: str) -> str:
        try:
            envelope = json.loads(text)
            content = envelope["choices"][0]["message"]["content"]
        except (json.JSONDecodeError, KeyError, IndexError, TypeError) as exc:
            raise GatewayTransportError("malformed completion envelope: %s" % (exc,))
        if not isinstance(content, str):
            raise GatewayTransportError("completion content is not text")
        return content

    def _build_body(self, req: GatewayRequest) -> Dict[str, Any]:
        content: List[Dict[str, Any]] = [{"type": "text", "text": req.prompt_text}]
        for path in req.images:
            content.append(
                {
                    "type": "image_url",
                    "image_url": {
                        "url": "data:image/png;base64," + self._encode_image(path)
                    },
                }
            )
        return {
            "model": self.model,
            "messages": [{"role": "user", "content": content}],
            "temperature": 0,
        }

    def _encode_image(self, path: str) -> str:
        """PNG-encode for transmission, downscaled to the configured edge."""
        with Image.open(path) as img:
            if max(img.size) > self.max_image_edge:
                img = img.copy()
                img.thumbnail(
                    (self.max_image_edge, self.max_image_edge), Image.BILINEAR
                )
            buf = io.BytesIO()
            img.convert("RGB").save(buf, format="PNG")
        return base64.b64encode(buf.getvalue()).decode("ascii")


def estimate_cost(m: float, per_call_usd: float = 0.08) -> Tuple[int, float]:
    """Calls and dollars for one video with m keyframe clusters: 4m + 2."""
    if m < 1:
        raise ContractError("m must be >= 1")
    calls = int(round(4 * m + 2))
    return calls, calls * per_call_usd
