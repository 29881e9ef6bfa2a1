"""Optional language-model hook: prompt templates, an OpenAI-compatible
chat-completion client with an on-disk transcript cache, and total parsers
for the structured replies.

Nothing in this module is touched unless a client is explicitly built.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import re
import tempfile
import threading
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from typing import Any, Optional

import httpx

from .table import Table, to_markdown
from .values import TYPE_TAGS, Unit, parse_unit_text

log = logging.getLogger(__name__)

REPLAY_MODES = ("off", "prefer", "strict")
PLACEHOLDER = re.compile(r"\{(gt_table|cand_table|partial_alignment)\}")


class LlmError(Exception):
    pass


class MissingBinding(LlmError, KeyError):
    pass


class PromptTooLarge(LlmError, ValueError):
    pass


class ProviderError(LlmError):
    """Transport, HTTP, quota or replay failure."""


class Timeout(ProviderError):
    pass


# -- templates --------------------------------------------------------------------------


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    body: str

    @property
    def placeholders(self) -> list[str]:
        return sorted(set(PLACEHOLDER.findall(self.body)))


ALIGN_REFINE = PromptTemplate("align-refine", """\
You are aligning two versions of the same table.

Ground-truth table:
{gt_table}

Candidate table:
{cand_table}

Pairs already aligned (do not change them):
{partial_alignment}

Propose additional correspondences only between rows or columns that are still
unmatched. A pair is valid when both sides describe the same entity or attribute,
even if wording, abbreviations or formatting differ. Leave genuinely missing or
extra rows and columns unmatched.

Reply with a single fenced block, one JSON object per line:
```
{"axis": "column", "gt": "<gt header>", "cand": "<candidate header>"}
{"axis": "row", "gt": <gt row index>, "cand": <candidate row index>}
```
""")

COMPARE_TUPLES = PromptTemplate("compare-tuples", """\
Compare the value in the ground-truth table with the value in the candidate table.

Ground-truth table:
{gt_table}

Candidate table:
{cand_table}

Context:
{partial_alignment}

Decide the data type (number, text, boolean, date, time, list, other), whether the
values are an exact match, a partial match or a mismatch, and the units on each side.
For a partial match give the normalized difference |GT - candidate| / |candidate|.
Values in incompatible units are a mismatch.

Reply with a single fenced block, one JSON object per line:
```
{"data_type": "number", "classification": "partial", "magnitude": 0.1, "gt_unit": "USD", "cand_unit": "USD", "note": "..."}
```
""")

DIRECT_RUBRIC = PromptTemplate("direct-rubric-baseline", """\
Rate how well the candidate table reproduces the ground-truth table.

Ground-truth table:
{gt_table}

Candidate table:
{cand_table}

Notes:
{partial_alignment}

List the rows and columns that are missing or extra and every cell whose value
differs, then give an overall score between 0 (unrelated) and 1 (identical).

Reply with a single fenced block containing one JSON object:
```
{"missing": [], "extra": [], "differences": [], "score": 1.0}
```
""")

TEMPLATES = {t.id: t for t in (ALIGN_REFINE, COMPARE_TUPLES, DIRECT_RUBRIC)}


def _render_alignment(a: Any) -> str:
    if a is None:
        return "(none)"
    if isinstance(a, str):
        return a
    from .align import Alignment
    if isinstance(a, Alignment):
        lines = [f"column gt={p.gt} cand={p.cand} ({p.strictness})" for p in a.column_map]
        lines += [f"row gt={p.gt} cand={p.cand} ({p.strictness})" for p in a.row_map]
        lines.append(f"unmatched gt rows: {a.unmatched_gt_rows}")
        lines.append(f"unmatched gt columns: {a.unmatched_gt_cols}")
        lines.append(f"unmatched candidate rows: {a.unmatched_cand_rows}")
        lines.append(f"unmatched candidate columns: {a.unmatched_cand_cols}")
        return "\n".join(lines)
    return json.dumps(a, sort_keys=True, ensure_ascii=False)


def _render_table(t: Any) -> str:
    if t is None:
        return ""
    if isinstance(t, Table):
        return to_markdown(t).rstrip("\n")
    return str(t)


def render_prompt(t: PromptTemplate, max_chars: int = 400_000, **bindings: Any) -> str:
    """Fill every placeholder; tables become markdown pipe tables."""
    missing = [name for name in t.placeholders if name not in bindings]
    if missing:
        raise MissingBinding(f"unbound placeholder(s): {', '.join(missing)}")

    def fill(m: re.Match) -> str:
        name = m.group(1)
        if name == "partial_alignment":
            return _render_alignment(bindings[name])
        return _render_table(bindings[name])

    text = PLACEHOLDER.sub(fill, t.body)
    if len(text) > max_chars:
        raise PromptTooLarge(f"rendered prompt has {len(text)} characters (limit {max_chars})")
    return text


# -- client ------------------------------------------------------------------------------


@dataclass
class LlmConfig:
    base_url: str = ""
    model: str = ""
    api_key: str = ""
    replay: str = "off"
    cache_dir: Optional[str] = None
    timeout: float = 60.0
    max_retries: int = 3
    backoff: float = 0.5
    max_concurrency: int = 4
    provider: str = "openai-compatible"

    def __post_init__(self) -> None:
        if self.replay not in REPLAY_MODES:
            raise ValueError(f"replay mode must be one of {REPLAY_MODES}")

    @classmethod
    def from_env(cls, env: Optional[dict] = None, **overrides: Any) -> "LlmConfig":
        env = os.environ if env is None else env
        values = dict(
            base_url=env.get("TABX_LLM_BASE_URL", ""),
            model=env.get("TABX_LLM_MODEL", ""),
            api_key=env.get("TABX_LLM_API_KEY", ""),
            replay=env.get("TABX_LLM_REPLAY", "off"),
            cache_dir=env.get("TABX_LLM_CACHE_DIR") or None,
        )
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


@dataclass
class Transcript:
    request_hash: str
    template_id: str
    model: str
    prompt: str
    response: str
    timestamp: str
    provider: str

    def to_dict(self) -> dict:
        return asdict(self)


def request_hash(template_id: str, prompt: str, model: str) -> str:
    payload = json.dumps([template_id, prompt, model], ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class TranscriptCache:
    """Content-addressed directory with one JSON file per transcript."""

    def __init__(self, root: str):
        self.root = root

    def path(self, key: str) -> str:
        return os.path.join(self.root, f"{key}.json")

    def get(self, key: str) -> Optional[Transcript]:
        try:
            with open(self.path(key), encoding="utf-8") as fh:
                return Transcript(**json.load(fh))
        except FileNotFoundError:
            return None
        except (ValueError, TypeError) as e:
            log.warning("unreadable transcript %s: %s", key, e)
            return None

    def put(self, t: Transcript) -> None:
        os.makedirs(self.root, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=self.root, prefix=".tmp-", suffix=".json")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(t.to_dict(), fh, ensure_ascii=False, indent=1, sort_keys=True)
            os.replace(tmp, self.path(t.request_hash))
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


class LlmClient:
    """Thread-safe chat-completion client; at most ``max_concurrency`` requests in flight."""

    def __init__(self, config: LlmConfig, transport: Optional[httpx.BaseTransport] = None,
                 sleep=time.sleep):
        self.config = config
        self.cache = TranscriptCache(config.cache_dir) if config.cache_dir else None
        self._transport = transport
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(max(1, config.max_concurrency))
        self._lock = threading.Lock()
        self.network_calls = 0

    def complete(self, prompt: str, template_id: str = "adhoc") -> str:
        cfg = self.config
        key = request_hash(template_id, prompt, cfg.model)
        if cfg.replay != "off":
            if self.cache is not None:
                hit = self.cache.get(key)
                if hit is not None:
                    return hit.response
            if cfg.replay == "strict":
                raise ProviderError(f"replay-miss: no transcript for {key}")
        with self._slots:
            text = self._request(prompt)
        if self.cache is not None:
            self.cache.put(Transcript(key, template_id, cfg.model, prompt, text,
                                      datetime.now(timezone.utc).isoformat(), cfg.provider))
        return text

    def _request(self, prompt: str) -> str:
        cfg = self.config
        if not cfg.base_url:
            raise ProviderError("no provider endpoint configured (TABX_LLM_BASE_URL)")
        url = cfg.base_url.rstrip("/") + "/chat/completions"
        headers = {"Content-Type": "application/json"}
        if cfg.api_key:
            headers["Authorization"] = f"Bearer {cfg.api_key}"
        # sampling parameters are left at provider defaults on purpose
        body = {"model": cfg.model, "messages": [{"role": "user", "content": prompt}]}
        last: Exception = ProviderError("no attempt made")
        attempts = cfg.max_retries + 1
        with httpx.Client(timeout=cfg.timeout, transport=self._transport) as http:
            for attempt in range(attempts):
                if attempt:
                    self._sleep(cfg.backoff * 2 ** (attempt - 1))
                with self._lock:
                    self.network_calls += 1
                try:
                    resp = http.post(url, json=body, headers=headers)
                except httpx.TimeoutException as e:
                    last = Timeout(f"request timed out: {e}")
                    continue
                except httpx.HTTPError as e:
                    last = ProviderError(f"transport error: {e}")
                    continue
                if resp.status_code == 429 or resp.status_code >= 500:
                    last = ProviderError(f"HTTP {resp.status_code}")
                    continue
                if resp.status_code >= 400:
                    raise ProviderError(f"HTTP {resp.status_code}: {resp.text[:200]}")
                try:
                    content = resp.json()["choices"][0]["message"]["content"]
                except (ValueError, KeyError, IndexError, TypeError):
                    raise ProviderError("malformed chat-completion response") from None
                if not isinstance(content, str):
                    raise ProviderError("chat-completion content is not text")
                return content
        raise last


# -- response parsing -------------------------------------------------------------------------

FENCE = re.compile(r"```[^\n`]*\n(.*?)(?:```|\Z)", re.S)


@dataclass
class AlignmentProposal:
    axis: str
    gt: Any
    cand: Any


@dataclass
class ParsedResponse:
    items: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)


def _segments(raw: Any) -> tuple[list[str], list[str]]:
    """Candidate JSON segments from fenced blocks, or from bare lines if unfenced."""
    if not isinstance(raw, str) or not raw.strip():
        return [], []
    blocks = FENCE.findall(raw)
    body = "\n".join(blocks) if blocks else raw
    segments, diags = [], []
    for line in body.splitlines():
        s = line.strip().rstrip(",")
        if not s or s in ("[", "]"):
            continue
        if s.startswith("{") or s.startswith("["):
            segments.append(s)
        elif blocks:
            diags.append(f"skipped non-JSON line: {s[:60]!r}")
    return segments, diags


def _objects(raw: Any) -> tuple[list[dict], list[str]]:
    segs, diags = _segments(raw)
    out = []
    for s in segs:
        try:
            obj = json.loads(s)
        except ValueError:
            diags.append(f"malformed segment: {s[:60]!r}")
            continue
        if isinstance(obj, list):
            obj = [o for o in obj if isinstance(o, dict)]
            out.extend(obj)
        elif isinstance(obj, dict):
            out.append(obj)
        else:
            diags.append(f"segment is not an object: {s[:60]!r}")
    return out, diags


def _ref(v: Any) -> bool:
    return (isinstance(v, int) and not isinstance(v, bool)) or (isinstance(v, str) and v.strip() != "")


def parse_alignment_response(raw: Any) -> ParsedResponse:
    """Row/column pair proposals; never raises."""
    try:
        objs, diags = _objects(raw)
    except Exception as e:  # pragma: no cover - defensive totality
        return ParsedResponse([], [f"parser failure: {e}"])
    items = []
    for o in objs:
        axis = o.get("axis")
        if axis in ("col", "columns"):
            axis = "column"
        if axis == "rows":
            axis = "row"
        if axis not in ("row", "column") or not _ref(o.get("gt")) or not _ref(o.get("cand")):
            diags.append(f"incomplete pair proposal: {json.dumps(o, ensure_ascii=False)[:80]}")
            continue
        items.append(AlignmentProposal(axis, o["gt"], o["cand"]))
    return ParsedResponse(items, diags)


def _unit(v: Any) -> Optional[Unit]:
    if v is None or v == "":
        return None
    s = str(v).strip()
    u = parse_unit_text(s)
    # unknown symbols are still kept so that differing ones look incompatible
    return u if u is not None else Unit("opaque", s, 1.0, s)


def parse_tuple_response(raw: Any) -> ParsedResponse:
    """Comparison-tuple candidates as dicts; never raises.

    Units become ``Unit`` objects; keys the model omitted are left out so the
    caller keeps its own value for them.
    """
    try:
        objs, diags = _objects(raw)
    except Exception as e:  # pragma: no cover
        return ParsedResponse([], [f"parser failure: {e}"])
    items = []
    for o in objs:
        dtype = o.get("data_type")
        cls = o.get("classification")
        mag = o.get("magnitude")
        if dtype is not None and dtype not in TYPE_TAGS:
            diags.append(f"unknown data type {dtype!r}")
            continue
        if not isinstance(cls, str):
            diags.append("tuple without classification")
            continue
        if mag is not None and (isinstance(mag, bool) or not isinstance(mag, (int, float))
                                or not math.isfinite(mag)):
            diags.append(f"non-numeric magnitude {mag!r}")
            continue
        item = {"data_type": dtype, "classification": cls.lower(),
                "magnitude": float(mag) if mag is not None else None,
                "note": str(o["note"]) if o.get("note") is not None else None}
        for side in ("gt_unit", "cand_unit"):
            if side in o:
                item[side] = _unit(o[side])
        items.append(item)
    return ParsedResponse(items, diags)
