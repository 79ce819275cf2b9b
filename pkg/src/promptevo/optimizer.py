"""The (1, lambda) prompt search.

Each iteration expands the current prompt into all single-operation
children, scores every child and keeps the best child as the next parent.
The parent itself never competes (comma selection), so the incumbent score
may drop between iterations. Every incumbent, plus the seed, goes into a
pool and the final answer is the pool's best entry.
"""

from __future__ import annotations

import enum
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

from .backends import BackendSuite, GenerationParams
from .errors import BackendError, ConfigInvalid, EmptyPool, EmptyText, MetricError
from .metrics import BleuConfig, ObjectiveScore, bleu_sentence, tally
from .prompt import PLACEHOLDER, Prompt, expand_children, tokenize_prompt

logger = logging.getLogger(__name__)

ISEAR_LABELS = ("anger", "disgust", "fear", "guilt", "joy", "sadness", "shame")
DISQUALIFIED = float("-inf")


class FilterMode(enum.Enum):
    PER_TEXT = "per-text"
    PROMPT_AVERAGE = "prompt-average"
    BOTH = "both"

    @property
    def per_text(self) -> bool:
        return self in (FilterMode.PER_TEXT, FilterMode.BOTH)

    @property
    def prompt_average(self) -> bool:
        return self in (FilterMode.PROMPT_AVERAGE, FilterMode.BOTH)


@dataclass(frozen=True)
class OptimizerConfig:
    max_iterations: int = 10
    labels: tuple[str, ...] = ISEAR_LABELS
    bleu: BleuConfig = field(default_factory=BleuConfig)
    generation: GenerationParams = field(default_factory=GenerationParams)
    filter_mode: FilterMode = FilterMode.BOTH
    placeholder: str = PLACEHOLDER
    concurrency: int = 4
    rng_seed: int | None = 0
    proposal_top_k: int = 1
    mask_context_label: str | None = None

    MU = 1  # comma selection keeps a single parent

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        if isinstance(self.filter_mode, str):
            object.__setattr__(self, "filter_mode", FilterMode(self.filter_mode))
        if self.max_iterations < 1:
            raise ConfigInvalid("max_iterations must be >= 1")
        if not self.labels:
            raise ConfigInvalid("label set is empty")
        if len(set(self.labels)) != len(self.labels):
            raise ConfigInvalid("label set has duplicates")
        if self.concurrency < 1:
            raise ConfigInvalid("concurrency must be >= 1")
        if self.proposal_top_k < 1:
            raise ConfigInvalid("proposal_top_k must be >= 1")

    def to_json(self) -> dict:
        d = asdict(self)
        d["labels"] = list(self.labels)
        d["filter_mode"] = self.filter_mode.value
        return d


@dataclass
class ConditionResult:
    label: str
    prompt_text: str
    texts: list[str]
    bleu: list[float | None]
    kept: list[bool]
    verdicts: list[str | None]

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "prompt_text": self.prompt_text,
            "texts": self.texts,
            "bleu": self.bleu,
            "kept": self.kept,
            "verdict": self.verdicts,
        }


@dataclass
class Candidate:
    prompt: Prompt
    conditions: list[ConditionResult]
    score: ObjectiveScore
    warnings: list[str] = field(default_factory=list)

    @property
    def value(self) -> float:
        return self.score.value

    @property
    def kept_texts(self) -> list[str]:
        return [t for c in self.conditions for t, k in zip(c.texts, c.kept) if k]

    @property
    def filtered_texts(self) -> list[str]:
        return [t for c in self.conditions for t, k in zip(c.texts, c.kept) if not k]


@dataclass
class IterationRecord:
    iteration: int
    parent_id: str
    children: list[Candidate]
    incumbent: Candidate
    carried_over: bool = False
    warnings: list[str] = field(default_factory=list)


@dataclass
class OptimizationResult:
    best: Candidate
    best_iteration: int
    seed: Candidate
    iterations: list[IterationRecord]

    @property
    def pool(self) -> list[Candidate]:
        return [self.seed] + [it.incumbent for it in self.iterations]


def _disqualified(labels: Sequence[str], n_filtered: int = 0) -> ObjectiveScore:
    return ObjectiveScore(0.0, {lab: 0.0 for lab in labels}, 0, n_filtered, disqualified=True)


def evaluate_prompt(prompt: Prompt, backends: BackendSuite, cfg: OptimizerConfig) -> Candidate:
    """Generate for every condition, drop paraphrases, score with the classifier."""
    conditions: list[ConditionResult] = []
    warnings: list[str] = []
    try:
        for label in cfg.labels:
            text = prompt.render(label)
            generated = list(backends.generator.generate(text, cfg.generation, cfg.rng_seed))
            bleu: list[float | None] = []
            kept: list[bool] = []
            for g in generated:
                try:
                    b = bleu_sentence(g, text, cfg.bleu)
                except EmptyText:
                    bleu.append(None)
                    kept.append(False)
                    continue
                bleu.append(b)
                kept.append(not (cfg.filter_mode.per_text and b > cfg.bleu.threshold))
            conditions.append(ConditionResult(label, text, generated, bleu, kept, [None] * len(generated)))

        n_total = sum(len(c.texts) for c in conditions)
        n_kept = sum(sum(c.kept) for c in conditions)
        scored = [b for c in conditions for b in c.bleu if b is not None]
        if cfg.filter_mode.prompt_average and scored and sum(scored) / len(scored) > cfg.bleu.threshold:
            warnings.append("mean BLEU against the conditional prompts exceeds the threshold")
            return Candidate(prompt, conditions, _disqualified(cfg.labels, n_total - n_kept), warnings)
        if n_kept == 0:
            warnings.append("every generated text was filtered")
            return Candidate(prompt, conditions, _disqualified(cfg.labels, n_total), warnings)

        batch = [(c, i) for c in conditions for i, k in enumerate(c.kept) if k]
        verdicts = backends.classifier.classify([c.texts[i] for c, i in batch], cfg.labels)
        if len(verdicts) != len(batch):
            raise BackendError("classifier returned a misaligned batch")
        for (c, i), v in zip(batch, verdicts):
            c.verdicts[i] = v.label
        t = tally([v.label for v in verdicts], [c.label for c, _ in batch], cfg.labels)
    except (BackendError, MetricError) as exc:
        warnings.append(f"{type(exc).__name__}: {exc}")
        logger.warning("candidate %r disqualified: %s", prompt.template, exc)
        return Candidate(prompt, conditions, _disqualified(cfg.labels), warnings)
    return Candidate(prompt, conditions, ObjectiveScore.from_tally(t, n_total - n_kept), warnings)


def _evaluate_all(prompts: Sequence[Prompt], backends: BackendSuite, cfg: OptimizerConfig) -> list[Candidate]:
    if cfg.concurrency == 1 or len(prompts) < 2:
        return [evaluate_prompt(p, backends, cfg) for p in prompts]
    with ThreadPoolExecutor(max_workers=cfg.concurrency) as pool:
        return list(pool.map(lambda p: evaluate_prompt(p, backends, cfg), prompts))


def run_iteration(
    parent: Candidate, backends: BackendSuite, cfg: OptimizerConfig, iteration: int = 1
) -> IterationRecord:
    warnings: list[str] = []
    prompts = expand_children(
        parent.prompt,
        backends.proposer,
        top_k=cfg.proposal_top_k,
        context_label=cfg.mask_context_label,
        warnings=warnings,
    )
    children = _evaluate_all(prompts, backends, cfg)

    # the parent is not a contender; later children must be strictly better
    incumbent, best = None, DISQUALIFIED
    for child in children:
        if child.value > best:
            incumbent, best = child, child.value
    if incumbent is None:
        warnings.append("all children disqualified; parent carried over")
        return IterationRecord(iteration, parent.prompt.id, children, parent, True, warnings)
    return IterationRecord(iteration, parent.prompt.id, children, incumbent, False, warnings)


def select_one_best(pool: Sequence[Candidate]) -> tuple[int, Candidate]:
    """Index and entry of the best pool member; the earliest wins ties."""
    if not pool:
        raise EmptyPool("candidate pool is empty")
    best_i = 0
    for i, cand in enumerate(pool):
        if cand.value > pool[best_i].value:
            best_i = i
    if pool[best_i].score.disqualified:
        logger.warning("every pool entry is disqualified; returning the seed")
    return best_i, pool[best_i]


def optimize(
    seed: str | Prompt,
    backends: BackendSuite,
    cfg: OptimizerConfig = OptimizerConfig(),
    on_iteration: Callable[[IterationRecord], None] | None = None,
    on_seed: Callable[[Candidate], None] | None = None,
) -> OptimizationResult:
    prompt = seed if isinstance(seed, Prompt) else tokenize_prompt(seed, cfg.placeholder)
    seed_cand = evaluate_prompt(prompt, backends, cfg)
    if on_seed is not None:
        on_seed(seed_cand)
    logger.info("seed %r scored %.4f", prompt.template, seed_cand.value)

    records: list[IterationRecord] = []
    parent = seed_cand
    for i in range(1, cfg.max_iterations + 1):
        rec = run_iteration(parent, backends, cfg, i)
        records.append(rec)
        if on_iteration is not None:
            on_iteration(rec)
        logger.info("iteration %d: %r scored %.4f", i, rec.incumbent.prompt.template, rec.incumbent.value)
        parent = rec.incumbent

    idx, best = select_one_best([seed_cand] + [r.incumbent for r in records])
    return OptimizationResult(best, idx, seed_cand, records)
