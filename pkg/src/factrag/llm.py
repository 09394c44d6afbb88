"""Chat-completion client for the local model endpoint.

One generation per claim. The request follows the local-server convention
``{model, messages, options: {temperature, num_predict}, stream: false}``;
the response may be either that family's ``{message: {content}}`` shape or
the OpenAI-compatible ``{choices: [{message: {content}}]}``. An endpoint URL
of ``mock://chat`` selects a canned deterministic backend for offline runs
and tests.

Thinking-mode control sits behind the single ``think`` config switch: the
request always carries the endpoint-level think flag, and when thinking is
off the soft ``/no_think`` directive is also appended to the user message,
so either server capability honors it.
"""

from __future__ import annotations

import json
import logging
import re
import threading
import time
from dataclasses import dataclass

import httpx

logger = logging.getLogger(__name__)

MOCK_SCHEME = "mock://"
NO_THINK_DIRECTIVE = "/no_think"

_SOURCE_HEADER_RE = re.compile(r"^## Source ID: (\d+) \[", re.MULTILINE)


class ChatError(Exception):
    """Endpoint unreachable, timed out, or returned an unusable response."""


@dataclass
class LlmConfig:
    endpoint_url: str = "http://localhost:11434/api/chat"
    model_name: str = "qwen3:14b"
    think: bool = False
    temperature: float = 0.0
    max_output_tokens: int = 4096
    timeout_s: float = 55.0
    max_retries: int = 1

    def __post_init__(self) -> None:
        if self.timeout_s <= 0:
            raise ValueError("timeout_s must be > 0")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


@dataclass
class ChatResult:
    text: str
    latency_s: float
    prompt_tokens: int | None = None
    completion_tokens: int | None = None


def mock_chat_response(system: str, think: bool) -> str:
    """Deterministic canned response shaped like a real model's output.

    Produces one QA entry per source block found in the system prompt (up
    to 10), a fixed Likert block, and verdict Refuted, fenced exactly the
    way the prompt demands. With think enabled the JSON is preceded by a
    think block, mirroring live traffic.
    """
    source_ids = _SOURCE_HEADER_RE.findall(system)[:10]
    questions = [
        {
            "question": f"What does source {sid} establish about the claim?",
            "answer": f"Source {sid} does not corroborate the claimed facts.",
            "source": sid,
            "answer_type": "Extractive",
        }
        for sid in source_ids
    ]
    body = {
        "questions": questions,
        "claim_veracity": {
            "Supported": "1",
            "Refuted": "5",
            "Not Enough Evidence": "1",
            "Conflicting Evidence/Cherrypicking": "1",
        },
        "veracity_verdict": "Refuted",
    }
    fenced = "```json\n" + json.dumps(body, indent=4) + "\n```"
    if think:
        return "<think>\nChecking each source against the claim.\n</think>\n\n" + fenced
    return fenced


class ChatClient:
    """Single-endpoint chat client with bounded concurrency and retries.

    The semaphore caps in-flight generations (default 1): a single-GPU
    server serializes anyway, and the cap keeps batch workers from queueing
    up timeouts.
    """

    def __init__(
        self,
        cfg: LlmConfig,
        concurrency: int = 1,
        transport: httpx.BaseTransport | None = None,
        retry_base_s: float = 0.5,
    ):
        self.cfg = cfg
        self._semaphore = threading.Semaphore(max(1, concurrency))
        self._retry_base_s = retry_base_s
        self._mock = cfg.endpoint_url.startswith(MOCK_SCHEME)
        self._client: httpx.Client | None = None
        if not self._mock:
            self._client = httpx.Client(timeout=cfg.timeout_s, transport=transport)

    def close(self) -> None:
        if self._client is not None:
            self._client.close()

    def chat(self, system: str, user: str) -> ChatResult:
        """One chat completion; returns the full assistant text and timing."""
        if not self.cfg.think:
            user = f"{user}\n{NO_THINK_DIRECTIVE}"
        started = time.perf_counter()
        if self._mock:
            text = mock_chat_response(system, self.cfg.think)
            return ChatResult(text=text, latency_s=time.perf_counter() - started)
        payload = {
            "model": self.cfg.model_name,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
            "options": {
                "temperature": self.cfg.temperature,
                "num_predict": self.cfg.max_output_tokens,
            },
            "think": self.cfg.think,
            "stream": False,
        }
        data = self._post_with_retries(payload)
        text, prompt_tokens, completion_tokens = _parse_chat_response(data)
        latency = time.perf_counter() - started
        logger.info(
            "chat done in %.2fs (prompt_tokens=%s, completion_tokens=%s)",
            latency,
            prompt_tokens,
            completion_tokens,
        )
        return ChatResult(
            text=text,
            latency_s=latency,
            prompt_tokens=prompt_tokens,
            completion_tokens=completion_tokens,
        )

    def _post_with_retries(self, payload: dict) -> dict:
        assert self._client is not None
        last_error: Exception | None = None
        for attempt in range(self.cfg.max_retries + 1):
            if attempt:
                delay = min(30.0, self._retry_base_s * 2 ** (attempt - 1))
                logger.warning(
                    "chat request failed (%s), retry %d/%d in %.1fs",
                    last_error,
                    attempt,
                    self.cfg.max_retries,
                    delay,
                )
                time.sleep(delay)
            try:
                with self._semaphore:
                    response = self._client.post(self.cfg.endpoint_url, json=payload)
                if response.status_code >= 500:
                    last_error = ChatError(f"endpoint returned HTTP {response.status_code}")
                    continue
                response.raise_for_status()
                return response.json()
            except httpx.HTTPStatusError as exc:
                raise ChatError(f"chat endpoint rejected request: {exc}") from exc
            except httpx.HTTPError as exc:
                last_error = exc
        raise ChatError(
            f"chat endpoint failed after {self.cfg.max_retries} retries: {last_error}"
        )


def _parse_chat_response(data: dict) -> tuple[str, int | None, int | None]:
    try:
        if "message" in data:
            text = data["message"]["content"]
            return text, data.get("prompt_eval_count"), data.get("eval_count")
        if "choices" in data:
            text = data["choices"][0]["message"]["content"]
            usage = data.get("usage") or {}
            return text, usage.get("prompt_tokens"), usage.get("completion_tokens")
    except (KeyError, IndexError, TypeError) as exc:
        raise ChatError(f"malformed chat response: {exc}") from exc
    raise ChatError("chat response carries no assistant message")
