"""Prompt construction, chat-completions client, and QA parsing/validation."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import httpx

from .arabic import DIGIT_CLASS, arabic_letter_ratio, parse_int
from .errors import ConfigError, ParseError, ProtocolError, TransportError
from .segment import Article

logger = logging.getLogger(__name__)

DEFAULT_API_KEY_ENV = "LEXFORGE_API_KEY"

_OUTPUT_FORMAT_LINE = (
    'The output must be in the form of a dictionary: {question: "", answer: ""}.'
)
_INSTRUCTIONS = (
    "1. Both the questions and answers must be in Arabic.",
    "2. The question should be written as if someone asked it without legal knowledge.",
    "3. The answer must be written as if provided by a legal advisor.",
    "4. Each answer must begin with the article number and law provided in the text.",
)
_EXAMPLE_BLOCK = (
    "Example:\n"
    "Legal text: Law No. (4) of 2005 amending Civil Service Law No. (4) of 1998. "
    "Amendment to Article (11): Employees in the second category may be promoted to "
    "the first category, and employees in the first category may be promoted to the "
    "upper category upon meeting the conditions outlined in the law.\n"
    'Generated question and answer: {"question": "If I have an employee in the second '
    'category, can they be promoted to the first category?", "answer": "Yes, according '
    "to Article 2 of Law No. (4) of 2005, which amends Civil Service Law No. (4) of "
    "1998, employees in the second category may be promoted to the first category "
    'provided they meet the conditions outlined in the law."}'
)

_FENCE_LINE_RE = re.compile(r"^```[\w-]*[ \t]*$", re.MULTILINE)
_CITATION_RE = re.compile(rf"مادة\s*\(?\s*({DIGIT_CLASS}+)")


@dataclass(frozen=True)
class PromptSpec:
    """Inputs for one generation prompt."""

    law_title: str
    article_number: int
    legal_text: str
    num_questions: int = 1

    def __post_init__(self):
        if self.num_questions < 1:
            raise ValueError("num_questions must be >= 1")
        if not self.legal_text.strip():
            raise ValueError("legal_text must be non-empty")


@dataclass(frozen=True)
class QAPair:
    """One generated question/answer with provenance."""

    question: str
    answer: str
    law_id: str
    article_number: int
    provider: str
    model_name: str
    created_at: str


@dataclass(frozen=True)
class ProviderConfig:
    """How to reach a chat-completions endpoint and how hard to push it."""

    base_url: str
    model_name: str
    api_key_env: str = DEFAULT_API_KEY_ENV
    max_concurrency: int = 4
    requests_per_second: float = 2.0
    max_retries: int = 3
    temperature: float = 0.7

    def __post_init__(self):
        if self.max_concurrency < 1:
            raise ValueError("max_concurrency must be >= 1")
        if self.requests_per_second <= 0:
            raise ValueError("requests_per_second must be > 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if not 0 <= self.temperature <= 2:
            raise ValueError("temperature must be in [0, 2]")


def build_prompt(spec: PromptSpec) -> str:
    """Render the generation prompt; deterministic for a given spec."""
    lines = [
        f"Write {spec.num_questions} question(s) and answer(s) from the following legal text.",
        f"{spec.law_title} in Article {spec.article_number}.",
        spec.legal_text,
        _OUTPUT_FORMAT_LINE,
        "Instructions:",
        *_INSTRUCTIONS,
        _EXAMPLE_BLOCK,
    ]
    return "\n".join(lines)


class _TokenBucket:
    """Blocking token bucket; capacity 1 keeps requests strictly spaced."""

    def __init__(self, rate: float, capacity: float = 1.0):
        self._rate = rate
        self._capacity = capacity
        self._tokens = capacity
        self._stamp = time.monotonic()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = time.monotonic()
                self._tokens = min(
                    self._capacity, self._tokens + (now - self._stamp) * self._rate
                )
                self._stamp = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                wait = (1.0 - self._tokens) / self._rate
            time.sleep(wait)


@dataclass
class ClientStats:
    network_calls: int = 0
    cache_hits: int = 0
    retries: int = 0


@dataclass(frozen=True)
class Completion:
    content: str
    created_at: str
    from_cache: bool


class ChatClient:
    """Chat-completions client with rate limiting, retries, and a response cache.

    The cache is keyed by (model, messages); hits bypass the network
    entirely, and an in-memory single-flight guard ensures a given key
    performs at most one network call per process.
    """

    def __init__(
        self,
        config: ProviderConfig,
        cache_dir: str | Path | None = None,
        *,
        timeout: float = 60.0,
        retry_base_delay: float = 0.25,
    ):
        self.config = config
        self.cache_dir = Path(cache_dir) if cache_dir is not None else None
        if self.cache_dir is not None:
            self.cache_dir.mkdir(parents=True, exist_ok=True)
        self.stats = ClientStats()
        self._retry_base_delay = retry_base_delay
        self._bucket = _TokenBucket(config.requests_per_second)
        self._net_slots = threading.BoundedSemaphore(config.max_concurrency)
        self._http = httpx.Client(timeout=timeout)
        self._memory: dict[str, Completion] = {}
        self._memory_lock = threading.Lock()
        self._flights: dict[str, threading.Lock] = {}
        self._flights_lock = threading.Lock()

    # -- cache plumbing -----------------------------------------------------

    def _cache_key(self, messages: list[dict]) -> str:
        digest = hashlib.sha256()
        digest.update(self.config.model_name.encode("utf-8"))
        digest.update(b"\x00")
        digest.update(json.dumps(messages, ensure_ascii=False, sort_keys=True).encode("utf-8"))
        return digest.hexdigest()

    def _cache_path(self, key: str) -> Path | None:
        if self.cache_dir is None:
            return None
        return self.cache_dir / f"{key}.json"

    def _cache_load(self, key: str) -> Completion | None:
        with self._memory_lock:
            hit = self._memory.get(key)
        if hit is not None:
            return hit
        path = self._cache_path(key)
        if path is None or not path.is_file():
            return None
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
            completion = Completion(
                content=data["content"], created_at=data["created_at"], from_cache=True
            )
        except (ValueError, KeyError):
            logger.warning("discarding unreadable cache entry %s", path)
            return None
        with self._memory_lock:
            self._memory[key] = completion
        return completion

    def _cache_store(self, key: str, completion: Completion) -> None:
        with self._memory_lock:
            self._memory[key] = Completion(
                content=completion.content,
                created_at=completion.created_at,
                from_cache=True,
            )
        path = self._cache_path(key)
        if path is None:
            return
        tmp = path.with_suffix(".tmp")
        tmp.write_text(
            json.dumps(
                {
                    "model": self.config.model_name,
                    "content": completion.content,
                    "created_at": completion.created_at,
                },
                ensure_ascii=False,
            ),
            encoding="utf-8",
        )
        tmp.replace(path)

    def _flight_lock(self, key: str) -> threading.Lock:
        with self._flights_lock:
            return self._flights.setdefault(key, threading.Lock())

    # -- network ------------------------------------------------------------

    def _post_once(self, payload: dict, headers: dict) -> httpx.Response:
        self._bucket.acquire()
        with self._net_slots:
            self.stats.network_calls += 1
            return self._http.post(
                f"{self.config.base_url.rstrip('/')}/chat/completions",
                json=payload,
                headers=headers,
            )

    def _request(self, messages: list[dict]) -> str:
        api_key = os.environ.get(self.config.api_key_env)
        if not api_key:
            raise ConfigError(
                f"no API key: environment variable {self.config.api_key_env} is unset"
            )
        payload = {
            "model": self.config.model_name,
            "messages": messages,
            "temperature": self.config.temperature,
        }
        headers = {"Authorization": f"Bearer {api_key}"}

        delay = self._retry_base_delay
        last_status: int | None = None
        attempts = 0
        while True:
            attempts += 1
            try:
                response = self._post_once(payload, headers)
                last_status = response.status_code
                retryable = last_status == 429 or last_status >= 500
                if not retryable:
                    if last_status != 200:
                        raise TransportError(
                            f"endpoint returned HTTP {last_status}",
                            status=last_status,
                            attempts=attempts,
                        )
                    return self._extract_content(response)
            except httpx.HTTPError as exc:
                last_status = None
                logger.warning("request failed (%s), attempt %d", exc, attempts)
            if attempts > self.config.max_retries:
                raise TransportError(
                    f"retries exhausted after {attempts} attempts"
                    + (f" (last status {last_status})" if last_status else ""),
                    status=last_status,
                    attempts=attempts,
                )
            self.stats.retries += 1
            time.sleep(delay)
            delay *= 2

    @staticmethod
    def _extract_content(response: httpx.Response) -> str:
        try:
            data = response.json()
        except ValueError as exc:
            raise ProtocolError(f"endpoint body is not JSON: {exc}") from exc
        try:
            content = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProtocolError(
                "response missing choices[0].message.content"
            ) from exc
        if not isinstance(content, str):
            raise ProtocolError("choices[0].message.content is not a string")
        return content

    # -- public surface -----------------------------------------------------

    def complete(self, messages: list[dict]) -> Completion:
        """Send one chat request, serving repeats from the cache."""
        key = self._cache_key(messages)
        hit = self._cache_load(key)
        if hit is not None:
            self.stats.cache_hits += 1
            return hit
        with self._flight_lock(key):
            hit = self._cache_load(key)
            if hit is not None:
                self.stats.cache_hits += 1
                return hit
            content = self._request(messages)
            completion = Completion(
                content=content,
                created_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
                from_cache=False,
            )
            self._cache_store(key, completion)
        # waiters still holding the old lock object will find the cache entry
        with self._flights_lock:
            self._flights.pop(key, None)
        return completion

    def chat(self, messages: list[dict]) -> str:
        return self.complete(messages).content

    def generate(self, spec: PromptSpec) -> str:
        """Raw response text for one prompt spec."""
        return self.chat([{"role": "user", "content": build_prompt(spec)}])

    def generate_many(self, specs: list[PromptSpec]) -> list[str]:
        """Run specs with bounded concurrency; results in submission order."""
        if not specs:
            return []
        with ThreadPoolExecutor(max_workers=self.config.max_concurrency) as pool:
            return list(pool.map(self.generate, specs))

    def close(self) -> None:
        self._http.close()


_shared_clients: dict[tuple, ChatClient] = {}
_shared_clients_lock = threading.Lock()


def _client_for(config: ProviderConfig, cache_dir: str | Path | None) -> ChatClient:
    key = (config, str(cache_dir) if cache_dir is not None else None)
    with _shared_clients_lock:
        client = _shared_clients.get(key)
        if client is None:
            client = ChatClient(config, cache_dir)
            _shared_clients[key] = client
        return client


def request_generation(
    client: ProviderConfig, spec: PromptSpec, *, cache_dir: str | Path | None = None
) -> str:
    """One-shot generation against *client*; per-process clients are pooled
    so the cache and rate limiter are shared across calls."""
    return _client_for(client, cache_dir).generate(spec)


# -- output parsing ---------------------------------------------------------


def _iter_json_values(text: str):
    decoder = json.JSONDecoder()
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch in "{[":
            try:
                value, end = decoder.raw_decode(text, i)
            except ValueError:
                i += 1
                continue
            yield value
            i = end
        else:
            i += 1


def parse_llm_output(raw: str, expected_n: int) -> list[dict]:
    """Extract up to *expected_n* {"question", "answer"} dicts from *raw*.

    Handles code fences, a single object, an array of objects, and
    concatenated objects, with prose before or after. Pairs missing a
    non-empty field are dropped with a logged diagnostic; if nothing
    survives, raises ParseError with a snippet of the raw text.
    """
    if expected_n < 1:
        raise ValueError("expected_n must be >= 1")
    text = _FENCE_LINE_RE.sub("", raw)
    candidates: list = []
    for value in _iter_json_values(text):
        if isinstance(value, list):
            candidates.extend(value)
        else:
            candidates.append(value)

    pairs: list[dict] = []
    for idx, obj in enumerate(candidates):
        if not isinstance(obj, dict):
            logger.warning("pair %d rejected: not an object (%r)", idx, obj)
            continue
        question = obj.get("question")
        answer = obj.get("answer")
        if not isinstance(question, str) or not question.strip():
            logger.warning("pair %d rejected: missing or empty 'question'", idx)
            continue
        if not isinstance(answer, str) or not answer.strip():
            logger.warning("pair %d rejected: missing or empty 'answer'", idx)
            continue
        pairs.append({"question": question, "answer": answer})

    if not pairs:
        snippet = raw[:120] + ("..." if len(raw) > 120 else "")
        raise ParseError(f"no question/answer pairs extracted from: {snippet!r}")
    return pairs[:expected_n]


# -- validation -------------------------------------------------------------


@dataclass
class ValidationReport:
    checks: dict[str, bool] = field(default_factory=dict)
    passed: bool = False


def validate_qa(pair: QAPair, article: Article) -> ValidationReport:
    """Report-only checks tying a generated pair back to its source article."""
    nonempty = bool(pair.question.strip()) and bool(pair.answer.strip())
    arabic = (
        arabic_letter_ratio(pair.question) >= 0.6
        and arabic_letter_ratio(pair.answer) >= 0.6
    )
    head = pair.answer[:120]
    citation = any(
        parse_int(m.group(1)) == article.article_number
        for m in _CITATION_RE.finditer(head)
    )
    checks = {
        "nonempty": nonempty,
        "arabic_content": arabic,
        "article_citation": citation,
    }
    return ValidationReport(checks=checks, passed=all(checks.values()))
