"""Parsing of raw model output into evidence triples and a final label.

The model is told to answer with a fenced JSON object holding QA evidence,
a 1-5 Likert score per veracity label, and its own suggested verdict. Real
outputs stray from that in every way imaginable, so parsing is defensive:
think blocks are stripped, the JSON is located by fence or brace matching,
Likert values are coerced and clamped, and anything irrecoverable raises
``VerdictParseError`` for the caller's fallback path - never a crash.

The final label is the argmax of the Likert scores; the model's own verdict
only breaks ties.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .labels import LABELS, canonical_answer_type, canonical_label

THINK_OPEN = "<think>"
THINK_CLOSE = "</think>"

MAX_QA_TRIPLES = 10


class VerdictParseError(Exception):
    """Model output that cannot be turned into a verdict report."""


@dataclass
class LikertScores:
    supported: int = 1
    refuted: int = 1
    not_enough_evidence: int = 1
    conflicting: int = 1

    def by_label(self) -> dict[str, int]:
        return dict(zip(LABELS, (self.supported, self.refuted, self.not_enough_evidence, self.conflicting)))


@dataclass
class QaTriple:
    question: str
    answer: str
    source_id: int | None  # None = unresolved
    answer_type: str
    url: str = ""


@dataclass
class VerdictReport:
    qa: list[QaTriple] = field(default_factory=list)
    scores: LikertScores = field(default_factory=LikertScores)
    model_verdict: str = ""
    final_label: str = LABELS[0]
    think_text: str | None = None


def strip_think(raw: str) -> tuple[str, str | None]:
    """Remove think spans; returns (body, think text or None).

    Every well-formed ``<think>...</think>`` span is removed (contents
    joined with newlines, the first span being the primary one); a trailing
    unclosed ``<think>`` swallows the rest of the text. The body therefore
    never contains an opening tag, which makes the operation idempotent
    even on adversarial input.
    """
    thoughts: list[str] = []
    body = raw
    while True:
        start = body.find(THINK_OPEN)
        if start == -1:
            break
        end = body.find(THINK_CLOSE, start + len(THINK_OPEN))
        if end == -1:
            thoughts.append(body[start + len(THINK_OPEN) :])
            body = body[:start]
            break
        thoughts.append(body[start + len(THINK_OPEN) : end])
        body = body[:start] + body[end + len(THINK_CLOSE) :]
    think_text = "\n".join(t.strip() for t in thoughts) if thoughts else None
    return body.strip(), think_text


def extract_json(body: str) -> str:
    """Locate the JSON payload in the model's answer.

    Prefers the first ```json fence (unterminated fences run to the end of
    text); otherwise falls back to the first balanced brace span, tracking
    strings and escapes so braces inside values don't fool it.
    """
    fence_start = body.find("```json")
    if fence_start != -1:
        content_start = fence_start + len("```json")
        fence_end = body.find("```", content_start)
        if fence_end == -1:
            return body[content_start:].strip()
        return body[content_start:fence_end].strip()

    start = body.find("{")
    if start == -1:
        raise VerdictParseError("no JSON object found in model output")
    depth = 0
    in_string = False
    escaped = False
    for i in range(start, len(body)):
        char = body[i]
        if in_string:
            if escaped:
                escaped = False
            elif char == "\\":
                escaped = True
            elif char == '"':
                in_string = False
            continue
        if char == '"':
            in_string = True
        elif char == "{":
            depth += 1
        elif char == "}":
            depth -= 1
            if depth == 0:
                return body[start : i + 1]
    raise VerdictParseError("unbalanced braces in model output")


def _coerce_likert(value: object) -> int:
    """1-5 integer from whatever the model put in the score slot."""
    if isinstance(value, bool):
        return 1
    if isinstance(value, str):
        try:
            value = float(value.strip())
        except ValueError:
            return 1
    if isinstance(value, (int, float)):
        try:
            return max(1, min(5, round(value)))
        except (ValueError, OverflowError):  # NaN / Infinity sneak through json.loads
            return 1
    return 1


def _parse_scores(raw: object) -> LikertScores:
    if not isinstance(raw, dict):
        raise VerdictParseError("claim_veracity is not an object")
    by_label: dict[str, int] = {}
    for key, value in raw.items():
        label = canonical_label(str(key))
        if label is not None:
            by_label[label] = _coerce_likert(value)
    return LikertScores(
        supported=by_label.get(LABELS[0], 1),
        refuted=by_label.get(LABELS[1], 1),
        not_enough_evidence=by_label.get(LABELS[2], 1),
        conflicting=by_label.get(LABELS[3], 1),
    )


def _parse_source_id(value: object) -> int | None:
    # the model sometimes writes "1,2" or "Source 3"; first integer wins
    text = str(value)
    digits = ""
    for char in text:
        if char.isdigit():
            digits += char
        elif digits:
            break
    return int(digits) if digits else None


def _parse_qa(raw: object, num_sources: int, resolve_url) -> list[QaTriple]:
    if not isinstance(raw, list):
        return []
    triples: list[QaTriple] = []
    for entry in raw:
        if not isinstance(entry, dict):
            continue
        question = entry.get("question")
        answer = entry.get("answer")
        if not question or not answer or not isinstance(question, str) or not isinstance(answer, str):
            continue
        source_id = _parse_source_id(entry.get("source", ""))
        if source_id is not None and not 1 <= source_id <= num_sources:
            source_id = None
        triples.append(
            QaTriple(
                question=question,
                answer=answer,
                source_id=source_id,
                answer_type=canonical_answer_type(str(entry.get("answer_type", ""))),
                url=resolve_url(source_id) if source_id is not None else "",
            )
        )
        if len(triples) == MAX_QA_TRIPLES:
            break
    return triples


def select_label(scores: LikertScores, model_verdict: str) -> str:
    """The label with the highest score; ties prefer the model's verdict,
    then the fixed label order."""
    by_label = scores.by_label()
    best = max(by_label.values())
    tied = [label for label in LABELS if by_label[label] == best]
    model_label = canonical_label(model_verdict)
    if model_label in tied:
        return model_label
    return tied[0]


def parse_verdict(
    json_text: str,
    num_sources: int,
    source_urls: list[str] | None = None,
    think_text: str | None = None,
) -> VerdictReport:
    """Validate and convert the extracted JSON into a VerdictReport.

    ``source_urls[i]`` is the URL of source id i+1; when omitted, URLs stay
    empty. Missing claim_veracity or veracity_verdict is a parse failure.
    """
    try:
        data = json.loads(json_text)
    except json.JSONDecodeError as exc:
        raise VerdictParseError(f"invalid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise VerdictParseError("model output is not a JSON object")
    if "claim_veracity" not in data:
        raise VerdictParseError("missing claim_veracity")
    if "veracity_verdict" not in data:
        raise VerdictParseError("missing veracity_verdict")

    scores = _parse_scores(data["claim_veracity"])
    model_verdict = str(data["veracity_verdict"] or "")

    def resolve_url(source_id: int) -> str:
        if source_urls and 1 <= source_id <= len(source_urls):
            return source_urls[source_id - 1]
        return ""

    qa = _parse_qa(data.get("questions"), num_sources, resolve_url)
    return VerdictReport(
        qa=qa,
        scores=scores,
        model_verdict=model_verdict,
        final_label=select_label(scores, model_verdict),
        think_text=think_text,
    )


def parse_llm_output(
    raw: str, num_sources: int, source_urls: list[str] | None = None
) -> VerdictReport:
    """Full pipeline on raw assistant text: strip think, find JSON, parse."""
    body, think_text = strip_think(raw)
    json_text = extract_json(body)
    return parse_verdict(json_text, num_sources, source_urls, think_text)
