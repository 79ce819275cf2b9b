"""Sentence-level BLEU for paraphrase detection and macro-F1 over a fixed
label set.
"""

from __future__ import annotations

import math
import string
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import EmptyText, LengthMismatch, UnknownLabel

_TRAILING = string.punctuation + string.whitespace


@dataclass(frozen=True)
class BleuConfig:
    """
    ``smoothing`` selects how zero n-gram matches are treated:

    * ``"exp"``: the mteval-v13a geometric scheme, the k-th zero-match order
      gets precision ``1 / (2**k * total_n)``.
    * ``"epsilon"``: a zero-match order gets ``smoothing_epsilon / total_n``.

    With either scheme a candidate sharing no unigram with the reference
    scores exactly 0.
    """

    max_ngram_order: int = 4
    smoothing: str = "exp"
    smoothing_epsilon: float = 1e-9
    threshold: float = 0.2

    def __post_init__(self):
        if self.max_ngram_order < 1:
            raise ValueError("max_ngram_order must be >= 1")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must lie in [0, 1]")
        if self.smoothing not in ("exp", "epsilon"):
            raise ValueError(f"unknown smoothing {self.smoothing!r}")
        if not self.smoothing_epsilon > 0:
            raise ValueError("smoothing_epsilon must be positive")


def normalize(text: str) -> list[str]:
    """Lowercase, drop trailing punctuation, split on whitespace."""
    return text.lower().rstrip(_TRAILING).split()


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu_sentence(candidate: str, reference: str, cfg: BleuConfig = BleuConfig()) -> float:
    cand = normalize(candidate)
    ref = normalize(reference)
    if not cand or not ref:
        raise EmptyText("BLEU needs non-empty candidate and reference")

    order = min(cfg.max_ngram_order, len(cand))
    log_sum = 0.0
    any_match = False
    zero_orders = 0
    for n in range(1, order + 1):
        cand_counts = _ngrams(cand, n)
        ref_counts = _ngrams(ref, n)
        total = len(cand) - n + 1
        correct = sum(min(c, ref_counts[g]) for g, c in cand_counts.items())
        if correct:
            any_match = True
            p = correct / total
        elif cfg.smoothing == "exp":
            zero_orders += 1
            p = 1.0 / (2**zero_orders * total)
        else:
            p = cfg.smoothing_epsilon / total
        log_sum += math.log(p)
    if not any_match:
        return 0.0

    c, r = len(cand), len(ref)
    bp = 1.0 if c >= r else math.exp(1.0 - r / c)
    return bp * math.exp(log_sum / order)


def is_paraphrase(candidate: str, conditional_prompt: str, cfg: BleuConfig = BleuConfig()) -> bool:
    return bleu_sentence(candidate, conditional_prompt, cfg) > cfg.threshold


# -- F1 -------------------------------------------------------------------------------


@dataclass(frozen=True)
class ConfusionTally:
    labels: tuple[str, ...]
    # matrix[i, j]: texts with gold label i predicted as label j
    matrix: np.ndarray = field(compare=False)

    @property
    def tp(self) -> dict[str, int]:
        return dict(zip(self.labels, np.diag(self.matrix).tolist()))

    @property
    def fp(self) -> dict[str, int]:
        col = self.matrix.sum(axis=0) - np.diag(self.matrix)
        return dict(zip(self.labels, col.tolist()))

    @property
    def fn(self) -> dict[str, int]:
        row = self.matrix.sum(axis=1) - np.diag(self.matrix)
        return dict(zip(self.labels, row.tolist()))

    @property
    def n(self) -> int:
        return int(self.matrix.sum())


def tally(predictions: Sequence[str], gold: Sequence[str], label_set: Sequence[str]) -> ConfusionTally:
    if len(predictions) != len(gold):
        raise LengthMismatch(f"{len(predictions)} predictions vs {len(gold)} gold labels")
    index = {label: i for i, label in enumerate(label_set)}
    for label in (*predictions, *gold):
        if label not in index:
            raise UnknownLabel(f"label {label!r} not in the label set")
    matrix = np.zeros((len(index), len(index)), dtype=np.int64)
    if gold:
        np.add.at(matrix, ([index[g] for g in gold], [index[p] for p in predictions]), 1)
    return ConfusionTally(tuple(label_set), matrix)


def per_label_f1(t: ConfusionTally) -> dict[str, float]:
    tp, fp, fn = t.tp, t.fp, t.fn
    out = {}
    for label in t.labels:
        denom = 2 * tp[label] + fp[label] + fn[label]
        out[label] = 2 * tp[label] / denom if denom else 0.0
    return out


def macro_f1(t: ConfusionTally) -> float:
    scores = per_label_f1(t)
    return sum(scores.values()) / len(scores) if scores else 0.0


@dataclass(frozen=True)
class ObjectiveScore:
    macro_f1: float
    per_label_f1: Mapping[str, float]
    n_texts_scored: int
    n_texts_filtered: int
    disqualified: bool = False

    @property
    def value(self) -> float:
        """Comparison value; disqualified scores lose to everything."""
        return float("-inf") if self.disqualified else self.macro_f1

    @classmethod
    def from_tally(cls, t: ConfusionTally, n_filtered: int = 0, disqualified: bool = False) -> "ObjectiveScore":
        return cls(macro_f1(t), per_label_f1(t), t.n, n_filtered, disqualified)
