"""Policy abstraction: remote chat-completion backend plus a scripted replay
backend that makes full episodes bit-reproducible for tests and determinism
checks."""

from __future__ import annotations

import json
import os
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from typing import Optional

from .protocol import PromptBundle, Trajectory, render_policy_text, wrap_observation

DEFAULT_API_KEY_ENV = "KBAGYM_API_KEY"

MAX_RETRIES = 2
RETRY_BACKOFF_SECONDS = 0.25

DEFAULT_EXHAUSTED_OUTPUT = "<think>\nreplay script exhausted\n</think>\n<answer>\nthe answer is \\boxed{[]}\n</answer>"


class PolicyError(Exception):
    def __init__(self, message: str, retryable: bool = False):
        super().__init__(message)
        self.retryable = retryable


@dataclass(frozen=True)
class PolicyConfig:
    kind: str = "replay"  # replay | remote
    endpoint_url: Optional[str] = None
    model_name: Optional[str] = None
    temperature: float = 1.0
    max_output_tokens: int = 2048
    request_timeout: float = 60.0
    api_key_env: str = DEFAULT_API_KEY_ENV
    request_logprobs: bool = False

    def __post_init__(self):
        if self.kind not in ("replay", "remote"):
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_output_tokens < 1 or self.request_timeout <= 0:
            raise ValueError("max_output_tokens and request_timeout must be positive")
        if self.kind == "remote" and (not self.endpoint_url or not self.model_name):
            raise ValueError("remote policy requires endpoint_url and model_name")


@dataclass(frozen=True)
class PolicyOutput:
    text: str
    logprobs: Optional[tuple[float, ...]] = None


def render_chat_request(prompt: PromptBundle, trajectory: Trajectory, config: PolicyConfig) -> bytes:
    """OpenAI-compatible chat body; observations ride as user messages wrapped
    in <tool_response> tags. Byte-stable for fixed inputs."""
    messages = [
        {"role": "system", "content": prompt.system_text},
        {"role": "user", "content": prompt.user_text},
    ]
    for turn in trajectory.turns:
        messages.append({"role": "assistant", "content": render_policy_text(turn)})
        if turn.observation is not None:
            messages.append({"role": "user", "content": wrap_observation(turn.observation)})
    body = {
        "model": config.model_name,
        "messages": messages,
        "temperature": config.temperature,
        "max_tokens": config.max_output_tokens,
    }
    if config.request_logprobs:
        body["logprobs"] = True
    return json.dumps(body, ensure_ascii=False).encode("utf-8")


@dataclass(frozen=True)
class ReplayScript:
    """Scripted outputs keyed by question id (or question text), with '*' as a
    wildcard; lookups past the script end return the declared terminal output."""

    outputs: dict[str, tuple[str, ...]] = field(default_factory=dict)
    exhausted_output: str = DEFAULT_EXHAUSTED_OUTPUT

    def lookup(self, key: str, step: int) -> str:
        script = self.outputs.get(key)
        if script is None:
            script = self.outputs.get("*", ())
        if step < len(script):
            return script[step]
        return self.exhausted_output

    @classmethod
    def from_file(cls, path) -> "ReplayScript":
        payload = json.loads(open(path, encoding="utf-8").read())
        outputs = {k: tuple(v) for k, v in payload.get("scripts", {}).items()}
        return cls(outputs, payload.get("exhausted_output", DEFAULT_EXHAUSTED_OUTPUT))


class ReplayPolicy:
    def __init__(self, script: ReplayScript):
        self.script = script

    def decide(self, prompt: PromptBundle, trajectory: Trajectory) -> PolicyOutput:
        return PolicyOutput(self.script.lookup(trajectory.key, len(trajectory.turns)))


class RemotePolicy:
    """POSTs to {endpoint_url}/chat/completions with up to two retries and
    exponential backoff on retryable failures."""

    def __init__(self, config: PolicyConfig):
        if config.kind != "remote":
            raise ValueError("RemotePolicy requires a remote PolicyConfig")
        self.config = config

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.config.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        return headers

    def _post_once(self, body: bytes) -> PolicyOutput:
        url = self.config.endpoint_url.rstrip("/") + "/chat/completions"
        req = urllib.request.Request(url, data=body, headers=self._headers())
        try:
            with urllib.request.urlopen(req, timeout=self.config.request_timeout) as resp:
                raw = resp.read()
        except urllib.error.HTTPError as exc:
            retryable = exc.code == 429 or exc.code >= 500
            raise PolicyError(f"HTTP {exc.code} from policy endpoint", retryable=retryable) from exc
        except (urllib.error.URLError, TimeoutError, OSError) as exc:
            raise PolicyError(f"transport failure: {exc}", retryable=True) from exc
        try:
            payload = json.loads(raw.decode("utf-8"))
            choice = payload["choices"][0]
            text = choice["message"]["content"]
            if not isinstance(text, str):
                raise TypeError("content is not a string")
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise PolicyError(f"malformed completion response: {exc}", retryable=False) from exc
        logprobs = None
        lp = choice.get("logprobs")
        if isinstance(lp, dict) and isinstance(lp.get("content"), list):
            try:
                logprobs = tuple(float(item["logprob"]) for item in lp["content"])
            except (KeyError, TypeError, ValueError):
                logprobs = None
        return PolicyOutput(text, logprobs)

    def decide(self, prompt: PromptBundle, trajectory: Trajectory) -> PolicyOutput:
        body = render_chat_request(prompt, trajectory, self.config)
        last: Optional[PolicyError] = None
        for attempt in range(MAX_RETRIES + 1):
            try:
                return self._post_once(body)
            except PolicyError as exc:
                last = exc
                if not exc.retryable or attempt == MAX_RETRIES:
                    raise
                time.sleep(RETRY_BACKOFF_SECONDS * (2**attempt))
        raise last  # pragma: no cover


def make_policy(config: PolicyConfig, script: Optional[ReplayScript] = None):
    if config.kind == "remote":
        return RemotePolicy(config)
    return ReplayPolicy(script or ReplayScript())
