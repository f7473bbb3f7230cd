"""Multi-provider chat-completions gateway with relative-token accounting.

Every completion is charged in relative tokens, (p_O/p_I) * n_I + n_O, the
budget unit all runs are measured in.  A `scripted:` endpoint replays canned
replies from a JSONL file, which makes whole runs deterministic.
"""

from __future__ import annotations

import json
import math
import threading
import time
from dataclasses import dataclass
from typing import Sequence

import httpx

from .specfile import PromptBundle

PAPER_FORMULA = "paper"                       # (p_O / p_I) * n_I + n_O
COST_NORMALIZED_FORMULA = "cost_normalized"   # (p_I / p_O) * n_I + n_O

RETRYABLE_STATUS = {429, 500, 502, 503, 504}


class GatewayError(RuntimeError):
    """Completion could not be obtained (after retries, where applicable)."""


@dataclass
class ModelConfig:
    name: str
    endpoint: str
    api_key_env: str = ""
    price_in: float = 1.0        # currency per input token, > 0
    price_out: float = 1.0       # currency per output token, >= 0
    temperature: float = 1.0
    max_tokens: int = 2048
    weight: float = 1.0

    def __post_init__(self):
        if self.price_in <= 0:
            raise ValueError(f"{self.name}: input token price must be > 0")
        if self.price_out < 0:
            raise ValueError(f"{self.name}: output token price must be >= 0")
        if self.weight < 0:
            raise ValueError(f"{self.name}: mix weight must be >= 0")

    @property
    def scripted(self) -> bool:
        return self.endpoint.startswith("scripted:")


@dataclass
class Completion:
    text: str
    n_in: int
    n_out: int
    model: str
    latency: float = 0.0
    estimated: bool = False


class TokenLedger:
    """Per-model token counters and the relative-token total; thread-safe."""

    def __init__(self, formula: str = PAPER_FORMULA):
        if formula not in (PAPER_FORMULA, COST_NORMALIZED_FORMULA):
            raise ValueError(f"unknown token formula {formula!r}")
        self.formula = formula
        self.per_model: dict[str, dict] = {}
        self.relative_total = 0.0
        self._lock = threading.Lock()

    def delta(self, model: ModelConfig, n_in: int, n_out: int) -> float:
        if self.formula == PAPER_FORMULA:
            return (model.price_out / model.price_in) * n_in + n_out
        if model.price_out <= 0:
            raise ValueError(f"{model.name}: cost-normalized formula needs p_O > 0")
        return (model.price_in / model.price_out) * n_in + n_out

    def record(self, model: ModelConfig, n_in: int, n_out: int) -> float:
        if n_in < 0 or n_out < 0:
            raise ValueError("token counts must be non-negative")
        d = self.delta(model, n_in, n_out)
        with self._lock:
            row = self.per_model.setdefault(
                model.name, {"n_in": 0, "n_out": 0, "relative": 0.0, "cost": 0.0})
            row["n_in"] += n_in
            row["n_out"] += n_out
            row["relative"] += d
            row["cost"] += n_in * model.price_in + n_out * model.price_out
            self.relative_total += d
        return d

    def below(self, budget: float) -> bool:
        with self._lock:
            return self.relative_total < budget

    def snapshot(self) -> dict:
        with self._lock:
            return {
                "formula": self.formula,
                "relative_total": self.relative_total,
                "per_model": {k: dict(v) for k, v in self.per_model.items()},
            }


def pick_model(models: Sequence[ModelConfig], rng) -> ModelConfig:
    """Chooses a model with probability proportional to its mix weight."""
    if not models:
        raise GatewayError("no models configured")
    total = sum(m.weight for m in models)
    if total <= 0:
        raise GatewayError("all model weights are zero")
    r = rng.random() * total
    acc = 0.0
    for m in models:
        acc += m.weight
        if r < acc:
            return m
    return models[-1]


class ScriptedProvider:
    """Replays {text, n_I, n_O} JSONL lines in order, cycling when exhausted."""

    def __init__(self, path: str):
        self.replies = []
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                self.replies.append(
                    (obj["text"], int(obj.get("n_I", 0)), int(obj.get("n_O", 0))))
        if not self.replies:
            raise GatewayError(f"scripted provider file {path} has no replies")
        self._idx = 0
        self._lock = threading.Lock()

    def next(self) -> tuple[str, int, int]:
        with self._lock:
            reply = self.replies[self._idx % len(self.replies)]
            self._idx += 1
        return reply


def _estimate_tokens(text: str) -> int:
    return math.ceil(len(text) / 4)


class LLMGateway:
    """Issues chat completions against scripted or HTTP chat endpoints."""

    def __init__(self, models: Sequence[ModelConfig], ledger: TokenLedger,
                 transport: httpx.BaseTransport | None = None,
                 retries: int = 3, backoff: float = 0.5,
                 sleep=time.sleep, timeout: float = 120.0,
                 env: dict | None = None):
        import os
        self.models = list(models)
        self.ledger = ledger
        self.retries = retries
        self.backoff = backoff
        self._sleep = sleep
        self._env = env if env is not None else os.environ
        self._client = httpx.Client(transport=transport, timeout=timeout)
        self._scripts: dict[str, ScriptedProvider] = {}
        for m in self.models:
            if m.scripted:
                self._scripts[m.name] = ScriptedProvider(m.endpoint[len("scripted:"):])

    def close(self):
        self._client.close()

    def pick_model(self, rng) -> ModelConfig:
        return pick_model(self.models, rng)

    def complete(self, bundle: PromptBundle, model: ModelConfig) -> Completion:
        start = time.monotonic()
        if model.scripted:
            text, n_in, n_out = self._scripts[model.name].next()
            return Completion(text=text, n_in=n_in, n_out=n_out, model=model.name,
                              latency=time.monotonic() - start)
        return self._complete_http(bundle, model, start)

    def _complete_http(self, bundle: PromptBundle, model: ModelConfig,
                       start: float) -> Completion:
        headers = {"Content-Type": "application/json"}
        if model.api_key_env:
            key = self._env.get(model.api_key_env, "")
            if not key:
                raise GatewayError(
                    f"model {model.name}: API key env var {model.api_key_env} is not set")
            headers["Authorization"] = f"Bearer {key}"
        body = {
            "model": model.name,
            "messages": [
                {"role": "system", "content": bundle.system_prompt},
                {"role": "user", "content": bundle.user_prompt},
            ],
            "temperature": model.temperature,
            "max_tokens": model.max_tokens,
        }

        last_error = None
        for attempt in range(self.retries):
            if attempt:
                self._sleep(self.backoff * 2 ** (attempt - 1))
            try:
                response = self._client.post(model.endpoint, json=body, headers=headers)
            except httpx.HTTPError as exc:
                last_error = f"transport error: {exc}"
                continue
            if response.status_code in RETRYABLE_STATUS:
                last_error = f"HTTP {response.status_code}"
                continue
            if response.status_code != 200:
                raise GatewayError(
                    f"model {model.name}: HTTP {response.status_code}: "
                    f"{response.text[:200]}")
            return self._parse(response, bundle, model, start)
        raise GatewayError(
            f"model {model.name}: giving up after {self.retries} attempts ({last_error})")

    def _parse(self, response: httpx.Response, bundle: PromptBundle,
               model: ModelConfig, start: float) -> Completion:
        try:
            data = response.json()
            text = data["choices"][0]["message"]["content"]
        except (ValueError, LookupError, TypeError) as exc:
            raise GatewayError(f"model {model.name}: malformed response: {exc}")
        usage = data.get("usage") or {}
        n_in = usage.get("prompt_tokens")
        n_out = usage.get("completion_tokens")
        estimated = n_in is None or n_out is None
        if n_in is None:
            n_in = _estimate_tokens(bundle.system_prompt + bundle.user_prompt)
        if n_out is None:
            n_out = _estimate_tokens(text or "")
        return Completion(text=text or "", n_in=int(n_in), n_out=int(n_out),
                          model=model.name, latency=time.monotonic() - start,
                          estimated=estimated)

    def complete_within_budget(self, bundle: PromptBundle, model: ModelConfig,
                               budget: float) -> tuple[Completion, float] | None:
        """Atomic budget gate: no new completion once the total has hit the
        budget; the per-sampler in-flight call is the only allowed overshoot."""
        if not self.ledger.below(budget):
            return None
        completion = self.complete(bundle, model)
        delta = self.ledger.record(model, completion.n_in, completion.n_out)
        return completion, delta
