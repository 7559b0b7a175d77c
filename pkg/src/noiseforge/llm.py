"""LLM annotation client and the naive/reasoned/refined noise pipeline.

Speaks the chat-completions wire shape (model, messages[], temperature)
against any compatible endpoint. Responses are cached on disk keyed by
(model, prompt) so reruns replay byte-for-byte without network calls.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DatasetError, LLMAuthError, LLMServiceError
from .graph import Graph, LabelSet

__all__ = [
    "LLMConfig",
    "AnnotationRecord",
    "build_prompt",
    "parse_label",
    "annotate",
    "records_to_labelset",
    "refine",
    "noise_rate_report",
]


@dataclass
class LLMConfig:
    base_url: str = "https://api.openai.com/v1"
    model: str = "gpt-4o-mini"
    api_key_env: str = "OPENAI_API_KEY"
    temperature: float = 0.0
    max_retries: int = 3
    backoff_base: float = 1.0
    backoff_cap: float = 30.0
    cache_dir: str | Path | None = None
    timeout: float = 60.0

    def __post_init__(self):
        if self.max_retries < 0:
            raise DatasetError("max_retries must be >= 0")
        if self.temperature < 0:
            raise DatasetError("temperature must be >= 0")


@dataclass
class AnnotationRecord:
    node: int
    mode: str  # naive | reasoned
    prompt_hash: str
    raw_response: str
    parsed_label: int | None  # 0-indexed class id
    parse_status: str  # exact | normalized | unparsed
    timestamp: float = 0.0


def build_prompt(texts: dict, class_names, domain: str, reasoned: bool):
    """System/user message pair for one node.

    Naive and reasoned prompts differ only in the final response
    instruction: reasoned mode asks for the label on the first line
    followed by a one-sentence justification.
    """
    if not class_names:
        raise DatasetError("annotation requires class names")
    title = (texts or {}).get("title", "")
    description = (texts or {}).get("description", "")
    if not title and not description:
        raise DatasetError("node has no text attributes")
    label_list = ", ".join(class_names)
    if reasoned:
        instruction = ("Respond with the chosen label on the first line, followed by a "
                       "one-sentence justification for your choice on the next line.")
    else:
        instruction = "Respond with only the chosen label on the first line and nothing else."
    system = f"You are a domain expert in {domain}."
    user = (
        "Your task is to predict the most appropriate topic label for the item below. "
        f"You must choose from the following topic labels only: {label_list}.\n\n"
        f"Title: {title}\n"
        f"Description: {description}\n\n"
        f"{instruction}"
    )
    return [{"role": "system", "content": system}, {"role": "user", "content": user}]


_PUNCT = re.compile(r"[^a-z0-9 ]+")


def _normalize(text: str) -> str:
    return " ".join(_PUNCT.sub(" ", text.lower()).split())


def parse_label(raw: str, class_names):
    """Match the first response line against class names.

    Exact case-insensitive equality first, then a whitespace/punctuation
    normalized containment match. Returns (0-indexed id or None, status).
    """
    first = raw.strip().splitlines()[0].strip() if raw.strip() else ""
    for i, name in enumerate(class_names):
        if first.lower() == name.lower():
            return i, "exact"
    norm_first = _normalize(first)
    if norm_first:
        for i, name in enumerate(class_names):
            norm_name = _normalize(name)
            if norm_first == norm_name or f" {norm_name} " in f" {norm_first} ":
                return i, "normalized"
    return None, "unparsed"


class _Cache:
    """Append-only JSON-lines cache keyed by sha256(model + prompt)."""

    def __init__(self, path: Path | None):
        self.path = path
        self.entries: dict[str, str] = {}
        if path is not None and path.exists():
            with open(path, encoding="utf-8") as f:
                for line in f:
                    line = line.strip()
                    if line:
                        rec = json.loads(line)
                        self.entries[rec["key"]] = rec["response"]

    def get(self, key: str):
        return self.entries.get(key)

    def put(self, key: str, response: str):
        self.entries[key] = response
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(json.dumps({"key": key, "response": response}, ensure_ascii=False) + "\n")


def _http_transport(cfg: LLMConfig):
    import requests

    api_key = os.environ.get(cfg.api_key_env, "")

    def post(payload: dict) -> str:
        try:
            resp = requests.post(
                cfg.base_url.rstrip("/") + "/chat/completions",
                headers={"Authorization": f"Bearer {api_key}",
                         "Content-Type": "application/json"},
                json=payload,
                timeout=cfg.timeout,
            )
        except requests.RequestException as e:
            raise LLMServiceError(f"transport failure: {e}") from e
        if resp.status_code in (401, 403):
            raise LLMAuthError(f"endpoint rejected credentials (HTTP {resp.status_code})")
        if resp.status_code == 429 or resp.status_code >= 500:
            raise LLMServiceError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        resp.raise_for_status()
        return resp.json()["choices"][0]["message"]["content"]

    return post


def _call_with_retries(transport, payload, cfg: LLMConfig, sleep=time.sleep) -> str:
    attempt = 0
    while True:
        try:
            return transport(payload)
        except LLMAuthError:
            raise
        except LLMServiceError:
            if attempt >= cfg.max_retries:
                raise
            sleep(min(cfg.backoff_base * 2 ** attempt, cfg.backoff_cap))
            attempt += 1


def annotate(g: Graph, cfg: LLMConfig, mode: str, nodes=None,
             transport=None, sleep=time.sleep) -> list[AnnotationRecord]:
    """One annotation record per node; cache hits skip the network.

    Per-node transport failures after retries are recorded as unparsed
    (the run continues); authentication failure aborts immediately. One
    automatic re-ask happens on unparsed output.
    """
    if mode not in ("naive", "reasoned"):
        raise DatasetError(f"unknown annotation mode: {mode}")
    if g.class_names is None:
        raise DatasetError("annotation requires class_names on the graph")
    if g.text_attrs is None:
        raise DatasetError("annotation requires per-node text attributes")
    if transport is None:
        transport = _http_transport(cfg)
    cache_path = Path(cfg.cache_dir) / "annotations.jsonl" if cfg.cache_dir else None
    cache = _Cache(cache_path)
    domain = g.name or "this dataset's subject area"
    node_ids = range(g.num_nodes) if nodes is None else nodes
    records = []
    for v in node_ids:
        messages = build_prompt(g.text_attrs[v], g.class_names, domain, mode == "reasoned")
        payload = {"model": cfg.model, "messages": messages, "temperature": cfg.temperature}
        key = hashlib.sha256(
            (cfg.model + json.dumps(messages, sort_keys=True)).encode()
        ).hexdigest()
        raw = cache.get(key)
        if raw is None:
            try:
                raw = _call_with_retries(transport, payload, cfg, sleep)
            except LLMAuthError:
                raise
            except LLMServiceError:
                records.append(AnnotationRecord(v, mode, key, "", None, "unparsed",
                                                time.time()))
                continue
            label, status = parse_label(raw, g.class_names)
            if status == "unparsed":
                # one re-ask before giving up
                try:
                    raw = _call_with_retries(transport, payload, cfg, sleep)
                except LLMServiceError:
                    pass
            cache.put(key, raw)
        label, status = parse_label(raw, g.class_names)
        records.append(AnnotationRecord(v, mode, key, raw, label, status, time.time()))
    return records


def records_to_labelset(records: list[AnnotationRecord], truth: LabelSet,
                        provenance: str) -> LabelSet:
    """Label vector from records; unparsed nodes fall back to the true label
    (treated as clean rather than injecting parser artifacts as noise)."""
    values = truth.values.copy()
    for rec in records:
        if rec.parsed_label is not None:
            values[rec.node] = rec.parsed_label
    return LabelSet(values, provenance=provenance)


def refine(naive: LabelSet, reasoned: LabelSet, truth: LabelSet) -> LabelSet:
    """Keep the reasoned label only where both annotations disagree with
    the ground truth; everywhere else the true label stands."""
    if not (len(naive) == len(reasoned) == len(truth)):
        raise DatasetError("refine: label sets differ in length")
    both_wrong = (naive.values != truth.values) & (reasoned.values != truth.values)
    values = np.where(both_wrong, reasoned.values, truth.values)
    return LabelSet(values, provenance="llm-refined")


def noise_rate_report(labelsets: dict[str, LabelSet], truth: LabelSet) -> dict[str, float]:
    """Disagreement fraction of each label set against the truth."""
    report = {}
    for name, ls in labelsets.items():
        if len(ls) != len(truth):
            raise DatasetError(f"noise rate: {name} length mismatch")
        report[name] = float(np.mean(ls.values != truth.values))
    return report
