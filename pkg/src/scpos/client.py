"""HTTP client for chat/completions-style text generation endpoints.

Two wire adapters: an OpenAI-compatible chat body (the default — both local
runtimes and hosted APIs speak it) and a minimal raw-completion body for
anything else. Results are cached on disk keyed by (prompt, params, model,
salt); sampling at temperature 1.0 is nondeterministic, so replayable
evaluation runs entirely from this cache. Transient failures retry with
exponential backoff; 4xx other than 408/429 fail immediately.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import requests

log = logging.getLogger(__name__)

ENV_ENDPOINT = "SCPOS_ENDPOINT"
ENV_API_KEY = "SCPOS_API_KEY"
ENV_CACHE_DIR = "SCPOS_CACHE_DIR"

_RETRYABLE_STATUS = frozenset({408, 429, 500, 502, 503, 504})


class InferenceError(RuntimeError):
    """Non-retryable failure or malformed response."""


class EndpointExhaustedError(InferenceError):
    """All retry attempts failed."""


@dataclass(frozen=True, slots=True)
class GenerationParams:
    max_new_tokens: int = 2000
    repetition_penalty: float = 1.3
    temperature: float = 1.0
    top_p: float = 0.7
    top_k: int = 40

    def __post_init__(self) -> None:
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be >= 1")
        if not (0.0 < self.top_p <= 1.0):
            raise ValueError("top_p must be in (0, 1]")
        if self.top_k < 0:
            raise ValueError("top_k must be >= 0")


_PROFILES = {
    "usa7b": GenerationParams(),
    "short_output": replace(GenerationParams(), max_new_tokens=400),
}


def profile(name: str) -> GenerationParams:
    """Named parameter presets: 'usa7b' and 'short_output'."""
    try:
        return _PROFILES[name]
    except KeyError:
        raise InferenceError(
            f"unknown profile {name!r} (known: {', '.join(sorted(_PROFILES))})"
        ) from None


@dataclass(frozen=True, slots=True)
class InferenceResult:
    prompt_hash: str
    completion: str
    latency_ms: float
    attempt_count: int
    from_cache: bool


@dataclass(frozen=True)
class EndpointConfig:
    url: str
    api_key: str = ""
    model_id: str = "default"
    adapter: str = "openai-chat"  # or "raw"
    timeout: float = 120.0
    max_retries: int = 4
    backoff_base: float = 0.5
    backoff_cap: float = 30.0
    max_concurrency: int = 4
    min_interval: float = 0.0

    @classmethod
    def from_env(cls, **overrides) -> "EndpointConfig":
        values = {
            "url": os.environ.get(ENV_ENDPOINT, ""),
            "api_key": os.environ.get(ENV_API_KEY, ""),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        if not values.get("url"):
            raise InferenceError(f"no endpoint URL ({ENV_ENDPOINT} unset and no flag given)")
        return cls(**values)


def _openai_chat_body(prompt: str, params: GenerationParams, model_id: str) -> dict:
    return {
        "model": model_id,
        "messages": [{"role": "user", "content": prompt}],
        "max_tokens": params.max_new_tokens,
        "temperature": params.temperature,
        "top_p": params.top_p,
        # Non-standard but honored by common local runtimes; hosted APIs ignore them.
        "top_k": params.top_k,
        "repetition_penalty": params.repetition_penalty,
    }


def _openai_chat_extract(body: dict) -> str:
    choices = body.get("choices")
    if not choices:
        raise InferenceError("malformed response: no choices")
    first = choices[0]
    message = first.get("message")
    if isinstance(message, dict) and isinstance(message.get("content"), str):
        return message["content"]
    if isinstance(first.get("text"), str):
        return first["text"]
    raise InferenceError("malformed response: no completion text in first choice")


def _raw_body(prompt: str, params: GenerationParams, model_id: str) -> dict:
    return {"model": model_id, "prompt": prompt, **asdict(params)}


def _raw_extract(body: dict) -> str:
    for key in ("completion", "text"):
        if isinstance(body.get(key), str):
            return body[key]
    raise InferenceError("malformed response: expected 'completion' or 'text' field")


_ADAPTERS = {
    "openai-chat": (_openai_chat_body, _openai_chat_extract),
    "raw": (_raw_body, _raw_extract),
}


class InferenceClient:
    """Shareable across worker threads; cache writes are serialized and at
    most ``max_concurrency`` requests are in flight at once."""

    def __init__(
        self,
        endpoint: EndpointConfig | None,
        cache_dir: str | Path | None = None,
        replay_only: bool = False,
        model_id: str | None = None,
    ) -> None:
        if endpoint is not None and endpoint.adapter not in _ADAPTERS:
            raise InferenceError(f"unknown adapter {endpoint.adapter!r}")
        if endpoint is None and not replay_only:
            raise InferenceError("an endpoint is required unless replay_only is set")
        self.endpoint = endpoint
        # Cache keys carry the model id even in replay mode (no endpoint).
        self.model_id = model_id or (endpoint.model_id if endpoint else "default")
        if cache_dir is None:
            cache_dir = os.environ.get(ENV_CACHE_DIR)
        self.cache_dir = Path(cache_dir) if cache_dir else None
        self.replay_only = replay_only
        self.request_count = 0
        self._count_lock = threading.Lock()
        self._cache_lock = threading.Lock()
        self._rate_lock = threading.Lock()
        self._last_start = 0.0
        limit = endpoint.max_concurrency if endpoint else 1
        self._slots = threading.Semaphore(max(1, limit))

    # -- cache ---------------------------------------------------------

    def cache_key(self, prompt: str, params: GenerationParams, salt: str = "") -> str:
        payload = json.dumps(
            [prompt, asdict(params), self.model_id, salt],
            ensure_ascii=False,
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def _cache_path(self, key: str) -> Path | None:
        if self.cache_dir is None:
            return None
        return self.cache_dir / f"{key}.json"

    def _cache_get(self, key: str) -> str | None:
        path = self._cache_path(key)
        if path is None or not path.exists():
            return None
        try:
            stored = json.loads(path.read_text(encoding="utf-8"))
            completion = stored["completion"]
            checksum = stored["meta"]["checksum"]
        except (OSError, json.JSONDecodeError, KeyError, TypeError):
            log.warning("unreadable cache entry %s; treating as miss", path.name)
            return None
        if hashlib.sha256(completion.encode("utf-8")).hexdigest() != checksum:
            log.warning("checksum mismatch in cache entry %s; treating as miss", path.name)
            return None
        return completion

    def _cache_put(
        self, key: str, prompt: str, params: GenerationParams, salt: str, completion: str
    ) -> None:
        path = self._cache_path(key)
        if path is None:
            return
        entry = {
            "request": {
                "prompt": prompt,
                "params": asdict(params),
                "model_id": self.model_id,
                "salt": salt,
            },
            "completion": completion,
            "meta": {
                "checksum": hashlib.sha256(completion.encode("utf-8")).hexdigest(),
                "created_at": time.time(),
            },
        }
        with self._cache_lock:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(
                json.dumps(entry, ensure_ascii=False, indent=1), encoding="utf-8"
            )

    def seed_cache(
        self, prompt: str, params: GenerationParams, completion: str, salt: str = ""
    ) -> str:
        """Store a completion as if it had been generated; returns the key.
        This is how replay caches are built from recorded runs."""
        key = self.cache_key(prompt, params, salt)
        self._cache_put(key, prompt, params, salt, completion)
        return key

    # -- generation ----------------------------------------------------

    def generate(
        self, prompt: str, params: GenerationParams, salt: str = ""
    ) -> InferenceResult:
        """Return the completion for a prompt, from cache when possible.

        ``salt`` distinguishes otherwise-identical requests (e.g. repeated
        evaluation runs of the same sample) in the cache key.
        """
        key = self.cache_key(prompt, params, salt)
        cached = self._cache_get(key)
        if cached is not None:
            return InferenceResult(key, cached, 0.0, 0, from_cache=True)
        if self.replay_only:
            raise InferenceError(f"cache miss for {key[:12]}... in replay mode")

        build_body, extract = _ADAPTERS[self.endpoint.adapter]
        body = build_body(prompt, params, self.endpoint.model_id)
        headers = {"Content-Type": "application/json"}
        if self.endpoint.api_key:
            headers["Authorization"] = f"Bearer {self.endpoint.api_key}"

        last_error: Exception | None = None
        started = time.perf_counter()
        for attempt in range(1, self.endpoint.max_retries + 1):
            self._throttle()
            with self._slots:
                try:
                    with self._count_lock:
                        self.request_count += 1
                    response = requests.post(
                        self.endpoint.url,
                        json=body,
                        headers=headers,
                        timeout=self.endpoint.timeout,
                    )
                except requests.RequestException as exc:
                    last_error = exc
                    log.warning("attempt %d/%d failed: %s", attempt, self.endpoint.max_retries, exc)
                else:
                    if response.status_code in _RETRYABLE_STATUS:
                        last_error = InferenceError(f"HTTP {response.status_code}")
                        log.warning(
                            "attempt %d/%d got HTTP %d",
                            attempt, self.endpoint.max_retries, response.status_code,
                        )
                    elif response.status_code != 200:
                        raise InferenceError(
                            f"HTTP {response.status_code} from endpoint: {response.text[:200]}"
                        )
                    else:
                        try:
                            completion = extract(response.json())
                        except (ValueError, InferenceError) as exc:
                            raise InferenceError(f"malformed response body: {exc}") from exc
                        latency = (time.perf_counter() - started) * 1000.0
                        self._cache_put(key, prompt, params, salt, completion)
                        return InferenceResult(key, completion, latency, attempt, False)
            if attempt < self.endpoint.max_retries:
                delay = min(
                    self.endpoint.backoff_base * (2 ** (attempt - 1)),
                    self.endpoint.backoff_cap,
                )
                time.sleep(delay)
        raise EndpointExhaustedError(
            f"endpoint failed after {self.endpoint.max_retries} attempts: {last_error}"
        )

    def _throttle(self) -> None:
        if not self.endpoint or self.endpoint.min_interval <= 0:
            return
        with self._rate_lock:
            now = time.monotonic()
            wait = self.endpoint.min_interval - (now - self._last_start)
            if wait > 0:
                time.sleep(wait)
            self._last_start = time.monotonic()
