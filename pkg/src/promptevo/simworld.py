"""Deterministic toy backends and an exhaustive search oracle.

A toy world bundles all three backends:

* proposer: a scored lexicon plus overrides keyed on the words left and
  right of the mask;
* generator: ordered triggers. For a conditional prompt, the first trigger
  whose token set is contained in the prompt's words and which covers the
  prompt's condition decides what is emitted: a label's templates, or an
  echo of the conditional prompt itself. Without a trigger the confusion
  label's templates are emitted. Optional seeded noise swaps texts to
  another label's template;
* classifier: the first keyword found scanning left to right.
"""

from __future__ import annotations

import hashlib
import json
import random
import string
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import TYPE_CHECKING, Mapping, Sequence

from .backends import BackendSuite, ClassifierVerdict, GenerationParams, TokenProposal
from .errors import ConfigInvalid, NeighborhoodTooLarge, NoMaskInRequest
from .prompt import MASK, Prompt, expand_children, tokenize_prompt

if TYPE_CHECKING:
    from .optimizer import OptimizerConfig

ECHO = "<echo>"


@dataclass(frozen=True)
class ToyLexicon:
    entries: Mapping[str, float]
    # (left, right) -> ranked tokens; None marks the prompt boundary
    overrides: Mapping[tuple[str | None, str | None], tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.entries:
            raise ConfigInvalid("toy lexicon is empty")
        for tok, score in self.entries.items():
            if not float("-inf") < score < float("inf"):
                raise ConfigInvalid(f"lexicon score for {tok!r} is not finite")
        for ctx, toks in self.overrides.items():
            if not toks:
                raise ConfigInvalid(f"override for {ctx} is empty")

    def ranking(self) -> list[tuple[str, float]]:
        return sorted(self.entries.items(), key=lambda kv: (-kv[1], kv[0]))


@dataclass(frozen=True)
class Trigger:
    tokens: frozenset[str]
    # condition -> source label whose templates are emitted, or ECHO
    emit: Mapping[str, str]
    name: str = ""


@dataclass(frozen=True)
class ToyWorldSpec:
    labels: tuple[str, ...]
    lexicon: ToyLexicon
    templates: Mapping[str, tuple[str, ...]]
    triggers: tuple[Trigger, ...]
    keywords: Mapping[str, str]
    confusion_label: str
    fallback_label: str
    noise_seed: int = 0
    noise_rate: float = 0.0

    def __post_init__(self):
        labels = set(self.labels)
        if not self.labels:
            raise ConfigInvalid("toy world has no labels")
        for label in self.labels:
            if not self.templates.get(label):
                raise ConfigInvalid(f"label {label!r} has no emission template")
            if label not in self.keywords.values():
                raise ConfigInvalid(f"label {label!r} has no keyword")
        for kw, label in self.keywords.items():
            if label not in labels:
                raise ConfigInvalid(f"keyword {kw!r} maps to unknown label {label!r}")
        for trig in self.triggers:
            for cond, src in trig.emit.items():
                if cond not in labels or (src != ECHO and src not in labels):
                    raise ConfigInvalid(f"trigger {trig.name or sorted(trig.tokens)} refers to unknown labels")
            unknown = trig.tokens - set(self.lexicon.entries) - self._override_vocab()
            if unknown:
                raise ConfigInvalid(f"trigger tokens {sorted(unknown)} are outside the vocabulary")
        if self.confusion_label not in labels or self.fallback_label not in labels:
            raise ConfigInvalid("confusion/fallback label must be one of the labels")
        if not 0.0 <= self.noise_rate < 1.0:
            raise ConfigInvalid("noise_rate must lie in [0, 1)")

    def _override_vocab(self) -> set[str]:
        vocab = set()
        for (left, right), toks in self.lexicon.overrides.items():
            vocab.update(toks)
            vocab.update(w for w in (left, right) if w)
        return vocab

    @classmethod
    def from_json(cls, data: dict) -> "ToyWorldSpec":
        try:
            lex = data["lexicon"]
            overrides = {
                (o.get("left"), o.get("right")): tuple(o["tokens"]) for o in lex.get("overrides", [])
            }
            triggers = tuple(
                Trigger(frozenset(t["tokens"]), dict(t["emit"]), t.get("name", "")) for t in data["triggers"]
            )
            return cls(
                labels=tuple(data["labels"]),
                lexicon=ToyLexicon(dict(lex["entries"]), overrides),
                templates={k: tuple(v) for k, v in data["templates"].items()},
                triggers=triggers,
                keywords=dict(data["keywords"]),
                confusion_label=data["confusion_label"],
                fallback_label=data.get("fallback_label", data["confusion_label"]),
                noise_seed=int(data.get("noise_seed", 0)),
                noise_rate=float(data.get("noise_rate", 0.0)),
            )
        except (KeyError, TypeError, AttributeError) as exc:
            raise ConfigInvalid(f"malformed toy world: {exc}") from exc


def standard_world_path() -> Path:
    return Path(str(resources.files("promptevo") / "fixtures" / "toyworld.json"))


def load_world(path: str | Path | None = None, **overrides) -> "ToyWorld":
    """Load a toy world from JSON; ``None`` or ``"standard"`` gives the bundled fixture."""
    if path is None or str(path) == "standard":
        path = standard_world_path()
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise ConfigInvalid(f"cannot read toy world {path}: {exc}") from exc
    data.update(overrides)
    return ToyWorld(ToyWorldSpec.from_json(data))


def _stable_seed(*parts) -> int:
    digest = hashlib.sha256("\x1f".join(map(str, parts)).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


class ToyWorld:
    """In-process implementation of all three backend protocols."""

    def __init__(self, spec: ToyWorldSpec, mask_sentinel: str = MASK):
        self.spec = spec
        self.mask_sentinel = mask_sentinel
        self._ranking = spec.lexicon.ranking()

    @property
    def labels(self) -> tuple[str, ...]:
        return self.spec.labels

    def backends(self, description: dict | None = None) -> BackendSuite:
        return BackendSuite(self, self, self, description or {"kind": "sim"})

    # proposer

    def propose(self, masked_text: str, top_k: int, mask: str | None = None) -> list[TokenProposal]:
        mask = mask or self.mask_sentinel
        words = masked_text.split()
        if words.count(mask) != 1:
            raise NoMaskInRequest(f"expected exactly one {mask!r} in {masked_text!r}")
        i = words.index(mask)
        left = words[i - 1] if i > 0 else None
        right = words[i + 1] if i + 1 < len(words) else None

        ranked = list(self._ranking)
        forced = self.spec.lexicon.overrides.get((left, right))
        if forced:
            top = ranked[0][1] if ranked else 0.0
            head = [(tok, top + len(forced) - r) for r, tok in enumerate(forced)]
            ranked = head + [(t, s) for t, s in ranked if t not in forced]
        return [TokenProposal(t, float(s)) for t, s in ranked[:top_k]]

    # generator

    def _emission(self, words: Sequence[str]) -> tuple[str, str]:
        condition = words[-1]
        present = set(words[:-1])
        for trig in self.spec.triggers:
            if condition in trig.emit and trig.tokens <= present:
                return condition, trig.emit[condition]
        return condition, self.spec.confusion_label

    def generate_detailed(
        self, prompt: str, params: GenerationParams, seed: int | None = None
    ) -> tuple[list[str], list[bool]]:
        """Generated texts plus, per text, whether noise swapped it."""
        words = prompt.split()
        if not words:
            raise ConfigInvalid("cannot generate from an empty prompt")
        _, source = self._emission(words)
        if source == ECHO:
            return [" ".join(words)], [False]

        texts = list(self.spec.templates[source][: params.num_return])
        swapped = [False] * len(texts)
        if self.spec.noise_rate > 0:
            rng = random.Random(_stable_seed(self.spec.noise_seed, seed, " ".join(words)))
            others = [lab for lab in self.spec.labels if lab != source]
            for k in range(len(texts)):
                if others and rng.random() < self.spec.noise_rate:
                    other = self.spec.templates[rng.choice(others)]
                    texts[k] = other[k % len(other)]
                    swapped[k] = True
        return texts, swapped

    def generate(self, prompt: str, params: GenerationParams, seed: int | None = None) -> list[str]:
        return self.generate_detailed(prompt, params, seed)[0]

    # classifier

    def classify_one(self, text: str) -> str:
        for raw in text.lower().split():
            word = raw.strip(string.punctuation)
            if word in self.spec.keywords:
                return self.spec.keywords[word]
        return self.spec.fallback_label

    def classify(self, texts: Sequence[str], label_set: Sequence[str] | None = None) -> list[ClassifierVerdict]:
        return [ClassifierVerdict(t, self.classify_one(t)) for t in texts]


# -- oracle ------------------------------------------------------------------------------


@dataclass(frozen=True)
class OracleResult:
    best_prompt: Prompt
    best_score: float
    neighborhood_size: int
    depth: int
    best_ops: int = 0


def brute_force_best(
    seed_prompt: str | Prompt,
    depth: int,
    world: ToyWorld,
    objective_config: "OptimizerConfig | None" = None,
    max_prompts: int = 10**6,
) -> OracleResult:
    """Exhaustive best prompt within ``depth`` operations of the seed.

    Scores come from the optimizer's own evaluation pipeline. Ties go to
    fewer operations, then to the lexicographically smaller template.
    """
    from .optimizer import OptimizerConfig, evaluate_prompt

    if depth < 0:
        raise ConfigInvalid("depth must be >= 0")
    if world.spec.noise_rate != 0:
        raise ConfigInvalid("the oracle needs a noise-free toy world")
    cfg = objective_config or OptimizerConfig(labels=world.labels)
    seed = seed_prompt if isinstance(seed_prompt, Prompt) else tokenize_prompt(seed_prompt, cfg.placeholder)

    ops = {seed.template: 0}
    prompts = {seed.template: seed}
    frontier = [seed]
    for d in range(1, depth + 1):
        nxt = []
        for p in frontier:
            for child in expand_children(
                p, world, top_k=cfg.proposal_top_k, context_label=cfg.mask_context_label
            ):
                if child.template in ops:
                    continue
                ops[child.template] = d
                prompts[child.template] = child
                nxt.append(child)
                if len(ops) > max_prompts:
                    raise NeighborhoodTooLarge(f"more than {max_prompts} prompts within depth {depth}")
        frontier = nxt

    suite = world.backends()
    best_key, best = None, None
    for template in sorted(prompts):
        score = evaluate_prompt(prompts[template], suite, cfg).score.value
        key = (-score, ops[template], template)
        if best_key is None or key < best_key:
            best_key, best = key, prompts[template]
    return OracleResult(best, -best_key[0], len(prompts), depth, best_key[1])
