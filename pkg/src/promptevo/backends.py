"""Model backends: a masked-token proposer, a text generator and a condition
classifier.

The optimizer only talks to the three protocols below. ``Http*`` clients
speak the JSON-over-HTTP wire protocol::

    POST /v1/fill_mask {text, mask_sentinel, top_k}           -> {proposals: [{token, score}]}
    POST /v1/generate  {prompt, num_return, beam_size,
                        temperature, top_p, no_repeat_ngram,
                        seed?}                                  -> {texts: [...]}
    POST /v1/classify  {texts: [...], label_set: [...]}         -> {labels: [...]}
"""

from __future__ import annotations

import logging
import math
import os
import threading
import time
from dataclasses import asdict, dataclass, field
from typing import Protocol, Sequence, runtime_checkable

import requests

from .errors import (
    BackendUnreachable,
    ConfigInvalid,
    EmptyGeneration,
    MalformedResponse,
    NoMaskInRequest,
    UnknownLabelFromServer,
)
from .prompt import MASK

logger = logging.getLogger(__name__)

ENV_URLS = {
    "generator": "PROMPTEVO_GEN_URL",
    "proposer": "PROMPTEVO_MASK_URL",
    "classifier": "PROMPTEVO_CLF_URL",
}


@dataclass(frozen=True)
class TokenProposal:
    token: str
    score: float


@dataclass(frozen=True)
class GenerationParams:
    num_return: int = 3
    beam_size: int = 30
    temperature: float = 0.7
    top_p: float = 0.7
    no_repeat_ngram: int = 2

    def __post_init__(self):
        if self.num_return < 1:
            raise ConfigInvalid("num_return must be >= 1")
        if self.num_return > self.beam_size:
            raise ConfigInvalid(f"num_return {self.num_return} exceeds beam_size {self.beam_size}")
        if not self.temperature > 0:
            raise ConfigInvalid("temperature must be positive")
        if not 0 < self.top_p <= 1:
            raise ConfigInvalid("top_p must lie in (0, 1]")
        if self.no_repeat_ngram < 0:
            raise ConfigInvalid("no_repeat_ngram must be >= 0")


@dataclass(frozen=True)
class ClassifierVerdict:
    text: str
    label: str


@runtime_checkable
class TokenProposer(Protocol):
    def propose(self, masked_text: str, top_k: int) -> list[TokenProposal]: ...


@runtime_checkable
class TextGenerator(Protocol):
    def generate(self, prompt: str, params: GenerationParams, seed: int | None = None) -> list[str]: ...


@runtime_checkable
class ConditionClassifier(Protocol):
    def classify(self, texts: Sequence[str], label_set: Sequence[str]) -> list[ClassifierVerdict]: ...


@dataclass
class BackendSuite:
    proposer: TokenProposer
    generator: TextGenerator
    classifier: ConditionClassifier
    description: dict = field(default_factory=dict)


# -- HTTP ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HttpSettings:
    base_url: str
    timeout: float = 30.0
    retries: int = 3
    backoff: float = 0.5
    bearer_token: str | None = None
    concurrency: int = 4


class _HttpClient:
    endpoint = ""

    def __init__(self, settings: HttpSettings, session: requests.Session | None = None):
        if settings.concurrency < 1:
            raise ConfigInvalid("concurrency must be >= 1")
        if settings.retries < 0:
            raise ConfigInvalid("retries must be >= 0")
        self.settings = settings
        self.url = settings.base_url.rstrip("/") + self.endpoint
        self._session = session or requests.Session()
        self._slots = threading.BoundedSemaphore(settings.concurrency)

    def _headers(self) -> dict:
        h = {"Content-Type": "application/json"}
        if self.settings.bearer_token:
            h["Authorization"] = f"Bearer {self.settings.bearer_token}"
        return h

    def probe(self) -> None:
        """Raise BackendUnreachable unless the server answers at all."""
        try:
            self._session.get(self.settings.base_url, timeout=self.settings.timeout)
        except requests.RequestException as exc:
            raise BackendUnreachable(f"{self.endpoint}: no answer from server ({type(exc).__name__})") from exc

    def _post(self, payload: dict) -> dict:
        s = self.settings
        last = "no attempt"
        for attempt in range(s.retries + 1):
            if attempt:
                time.sleep(s.backoff * 2 ** (attempt - 1))
            try:
                with self._slots:
                    resp = self._session.post(self.url, json=payload, headers=self._headers(), timeout=s.timeout)
            except requests.RequestException as exc:
                last = type(exc).__name__
                continue
            if resp.status_code >= 500 or resp.status_code == 429:
                last = f"HTTP {resp.status_code}"
                continue
            if resp.status_code >= 400:
                self._client_error(resp)
            try:
                body = resp.json()
            except ValueError as exc:
                raise MalformedResponse(f"{self.endpoint}: response is not JSON") from exc
            if not isinstance(body, dict):
                raise MalformedResponse(f"{self.endpoint}: response is not a JSON object")
            return body
        raise BackendUnreachable(f"{self.endpoint}: gave up after {s.retries + 1} attempts ({last})")

    def _client_error(self, resp: requests.Response):
        try:
            err = resp.json().get("error", "")
        except (ValueError, AttributeError):
            err = ""
        if err == "no_mask":
            raise NoMaskInRequest(f"{self.endpoint}: server found no mask in the request")
        raise MalformedResponse(f"{self.endpoint}: request rejected with HTTP {resp.status_code} {err}".rstrip())


class HttpTokenProposer(_HttpClient):
    endpoint = "/v1/fill_mask"

    def __init__(self, settings: HttpSettings, mask_sentinel: str = MASK, **kw):
        super().__init__(settings, **kw)
        self.mask_sentinel = mask_sentinel

    def propose(self, masked_text: str, top_k: int) -> list[TokenProposal]:
        if top_k < 1:
            raise ConfigInvalid("top_k must be >= 1")
        if masked_text.count(self.mask_sentinel) != 1:
            raise NoMaskInRequest(f"expected exactly one {self.mask_sentinel!r} in {masked_text!r}")
        body = self._post({"text": masked_text, "mask_sentinel": self.mask_sentinel, "top_k": top_k})
        raw = body.get("proposals")
        if not isinstance(raw, list):
            raise MalformedResponse("fill_mask: missing 'proposals' list")
        out = []
        for item in raw:
            try:
                tok, score = item["token"], float(item["score"])
            except (TypeError, KeyError, ValueError) as exc:
                raise MalformedResponse(f"fill_mask: bad proposal {item!r}") from exc
            if not isinstance(tok, str) or not tok or not math.isfinite(score):
                raise MalformedResponse(f"fill_mask: bad proposal {item!r}")
            out.append(TokenProposal(tok, score))
        if any(a.score < b.score for a, b in zip(out, out[1:])):
            raise MalformedResponse("fill_mask: proposals not sorted by score")
        return out[:top_k]


class HttpTextGenerator(_HttpClient):
    endpoint = "/v1/generate"

    def generate(self, prompt: str, params: GenerationParams, seed: int | None = None) -> list[str]:
        if not prompt.strip():
            raise ConfigInvalid("cannot generate from an empty prompt")
        payload = {"prompt": prompt, **asdict(params)}
        if seed is not None:
            payload["seed"] = seed
        body = self._post(payload)
        texts = body.get("texts")
        if not isinstance(texts, list) or not all(isinstance(t, str) for t in texts):
            raise MalformedResponse("generate: missing 'texts' list of strings")
        if not texts:
            raise EmptyGeneration(f"generate: no text for {prompt!r}")
        return texts[: params.num_return]


class HttpConditionClassifier(_HttpClient):
    endpoint = "/v1/classify"

    def classify(self, texts: Sequence[str], label_set: Sequence[str]) -> list[ClassifierVerdict]:
        texts = list(texts)
        if not texts:
            raise ConfigInvalid("cannot classify an empty batch")
        body = self._post({"texts": texts, "label_set": list(label_set)})
        labels = body.get("labels")
        if not isinstance(labels, list) or len(labels) != len(texts):
            raise MalformedResponse("classify: 'labels' missing or not aligned with the request")
        allowed = set(label_set)
        for label in labels:
            if label not in allowed:
                raise UnknownLabelFromServer(f"classify: label {label!r} outside the configured set")
        return [ClassifierVerdict(t, lab) for t, lab in zip(texts, labels)]


def http_backends(
    generator_url: str | None = None,
    proposer_url: str | None = None,
    classifier_url: str | None = None,
    *,
    mask_sentinel: str = MASK,
    **settings,
) -> BackendSuite:
    """Build HTTP clients; missing URLs fall back to the PROMPTEVO_*_URL variables."""
    urls = {
        "generator": generator_url or os.environ.get(ENV_URLS["generator"]),
        "proposer": proposer_url or os.environ.get(ENV_URLS["proposer"]),
        "classifier": classifier_url or os.environ.get(ENV_URLS["classifier"]),
    }
    missing = [k for k, v in urls.items() if not v]
    if missing:
        raise ConfigInvalid(f"no URL for backend(s): {', '.join(missing)}")
    return BackendSuite(
        proposer=HttpTokenProposer(HttpSettings(urls["proposer"], **settings), mask_sentinel=mask_sentinel),
        generator=HttpTextGenerator(HttpSettings(urls["generator"], **settings)),
        classifier=HttpConditionClassifier(HttpSettings(urls["classifier"], **settings)),
        description={"kind": "http", **urls},
    )
