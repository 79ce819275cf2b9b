"""Word-level prompts with a single condition placeholder, and the three
mutation operators (addition, replacement, removal) that turn one parent
prompt into a batch of children.

A prompt is a sequence of words followed by the placeholder, e.g.
``Write a text that expresses <em>``. Only the words are mutable. Gaps are
numbered ``0..T`` for ``T`` words, gap ``g`` sitting right before word
``g`` (gap ``T`` is just before the placeholder).
"""

from __future__ import annotations

import enum
import hashlib
import logging
import string
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Sequence

from .errors import (
    EmptyPrompt,
    MultiplePlaceholders,
    PlaceholderNotFinal,
    PlaceholderTargeted,
    ProposerEmpty,
    ProposerUnavailable,
    UnknownCondition,
    WouldEmptyPrompt,
    ZeroPlaceholders,
    BackendError,
)

if TYPE_CHECKING:
    from .backends import TokenProposer

logger = logging.getLogger(__name__)

PLACEHOLDER = "<em>"
MASK = "<mask>"


class TokenKind(enum.Enum):
    WORD = "word"
    PLACEHOLDER = "placeholder"


@dataclass(frozen=True)
class PromptToken:
    kind: TokenKind
    surface: str = ""

    def __post_init__(self):
        if self.kind is TokenKind.WORD:
            if not self.surface or any(c.isspace() for c in self.surface):
                raise ValueError(f"invalid word token {self.surface!r}")
        elif self.surface:
            raise ValueError("placeholder tokens carry no surface text")

    @classmethod
    def word(cls, surface: str) -> "PromptToken":
        return cls(TokenKind.WORD, surface)


PLACEHOLDER_TOKEN = PromptToken(TokenKind.PLACEHOLDER)


class Operation(enum.Enum):
    ADDITION = "add"
    REPLACEMENT = "replace"
    REMOVAL = "remove"

    @property
    def short(self) -> str:
        return {"add": "Add.", "replace": "Repl.", "remove": "Rem."}[self.value]


@dataclass(frozen=True)
class OperationDescriptor:
    op: Operation
    position: int
    token: str | None = None

    def __post_init__(self):
        if self.op is Operation.REMOVAL and self.token is not None:
            raise ValueError("removal carries no token")
        if self.op is not Operation.REMOVAL and not self.token:
            raise ValueError(f"{self.op.value} needs a token")

    def sort_key(self) -> tuple[int, int]:
        order = {Operation.ADDITION: 0, Operation.REPLACEMENT: 1, Operation.REMOVAL: 2}
        return order[self.op], self.position


@dataclass(frozen=True)
class Lineage:
    parent_id: str
    descriptor: OperationDescriptor

    def to_json(self) -> dict:
        d = self.descriptor
        return {"parent_id": self.parent_id, "op": d.op.value, "position": d.position, "token": d.token}

    @classmethod
    def from_json(cls, data: dict) -> "Lineage":
        try:
            desc = OperationDescriptor(Operation(data["op"]), int(data["position"]), data.get("token"))
            return cls(str(data["parent_id"]), desc)
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"bad lineage record {data!r}") from exc


def prompt_id(template: str) -> str:
    """Content-derived identifier, so equal prompts share an id across runs."""
    return "p" + hashlib.sha1(template.encode("utf-8")).hexdigest()[:12]


@dataclass(frozen=True)
class Prompt:
    """Immutable prompt. Equality compares tokens only."""

    tokens: tuple[PromptToken, ...]
    placeholder: str = PLACEHOLDER
    lineage: Lineage | None = field(default=None, compare=False)
    # set when a replacement proposed the token it was replacing
    noop: bool = field(default=False, compare=False)

    def __post_init__(self):
        kinds = [t.kind for t in self.tokens]
        n_ph = kinds.count(TokenKind.PLACEHOLDER)
        if n_ph == 0:
            raise ZeroPlaceholders("prompt has no placeholder")
        if n_ph > 1:
            raise MultiplePlaceholders("prompt has more than one placeholder")
        if kinds[-1] is not TokenKind.PLACEHOLDER:
            raise PlaceholderNotFinal("placeholder must be the last token")
        if len(self.tokens) < 2:
            raise EmptyPrompt("prompt needs at least one word besides the placeholder")

    @classmethod
    def from_words(cls, words: Iterable[str], placeholder: str = PLACEHOLDER, **kw) -> "Prompt":
        toks = tuple(PromptToken.word(w) for w in words) + (PLACEHOLDER_TOKEN,)
        return cls(toks, placeholder, **kw)

    @property
    def words(self) -> tuple[str, ...]:
        return tuple(t.surface for t in self.tokens[:-1])

    @property
    def n_mutable(self) -> int:
        return len(self.tokens) - 1

    @property
    def template(self) -> str:
        return " ".join(self.words + (self.placeholder,))

    @property
    def id(self) -> str:
        return prompt_id(self.template)

    def render(self, label: str) -> str:
        return " ".join(self.words + (label,))

    def __str__(self) -> str:
        return self.template


@dataclass(frozen=True)
class ConditionalPrompt:
    source_prompt_id: str
    condition: str
    text: str


def tokenize_prompt(raw: str, placeholder_sentinel: str = PLACEHOLDER) -> Prompt:
    text = raw.strip()
    if not text:
        raise EmptyPrompt("prompt is empty")
    count = text.count(placeholder_sentinel)
    if count == 0:
        raise ZeroPlaceholders(f"prompt {raw!r} lacks the placeholder {placeholder_sentinel!r}")
    if count > 1:
        raise MultiplePlaceholders(f"prompt {raw!r} holds the placeholder {count} times")
    segments = text.split()
    if segments[-1] != placeholder_sentinel:
        raise PlaceholderNotFinal(f"placeholder must end the prompt: {raw!r}")
    if len(segments) == 1:
        raise EmptyPrompt("prompt has no words besides the placeholder")
    return Prompt.from_words(segments[:-1], placeholder_sentinel)


def render(prompt: Prompt, condition: str, labels: Sequence[str] | None = None) -> ConditionalPrompt:
    if labels is not None and condition not in labels:
        raise UnknownCondition(f"unknown condition {condition!r}")
    return ConditionalPrompt(prompt.id, condition, prompt.render(condition))


# -- primitive edits (no proposer) ----------------------------------------------


def _check_gap(prompt: Prompt, gap: int) -> None:
    if not 0 <= gap <= prompt.n_mutable:
        raise IndexError(f"gap {gap} outside 0..{prompt.n_mutable}")


def _check_index(prompt: Prompt, index: int) -> None:
    if index == prompt.n_mutable:
        raise PlaceholderTargeted("the placeholder cannot be replaced or removed")
    if not 0 <= index < prompt.n_mutable:
        raise IndexError(f"token index {index} outside 0..{prompt.n_mutable - 1}")


def _child(parent: Prompt, words: Sequence[str], desc: OperationDescriptor, noop: bool = False) -> Prompt:
    return Prompt.from_words(words, parent.placeholder, lineage=Lineage(parent.id, desc), noop=noop)


def insert_token(prompt: Prompt, gap: int, token: str) -> Prompt:
    _check_gap(prompt, gap)
    words = list(prompt.words)
    words.insert(gap, token)
    return _child(prompt, words, OperationDescriptor(Operation.ADDITION, gap, token))


def replace_token(prompt: Prompt, index: int, token: str) -> Prompt:
    _check_index(prompt, index)
    words = list(prompt.words)
    noop = words[index] == token
    words[index] = token
    return _child(prompt, words, OperationDescriptor(Operation.REPLACEMENT, index, token), noop=noop)


def apply_removal(prompt: Prompt, index: int) -> Prompt:
    _check_index(prompt, index)
    if prompt.n_mutable < 2:
        raise WouldEmptyPrompt("removing the only word would leave a bare placeholder")
    words = list(prompt.words)
    del words[index]
    return _child(prompt, words, OperationDescriptor(Operation.REMOVAL, index))


def apply_descriptor(parent: Prompt, desc: OperationDescriptor) -> Prompt:
    """Re-apply a recorded operation; used to replay lineage."""
    if desc.op is Operation.ADDITION:
        return insert_token(parent, desc.position, desc.token)
    if desc.op is Operation.REPLACEMENT:
        return replace_token(parent, desc.position, desc.token)
    return apply_removal(parent, desc.position)


# -- proposer-backed operators ---------------------------------------------------


def masked_text(
    prompt: Prompt,
    position: int,
    *,
    insert: bool,
    mask: str = MASK,
    context_label: str | None = None,
) -> str:
    """Render ``prompt`` with a mask at a gap (``insert``) or over a word.

    The placeholder stays as its sentinel unless ``context_label`` is given.
    """
    words = list(prompt.words)
    if insert:
        words.insert(position, mask)
    else:
        words[position] = mask
    words.append(context_label if context_label is not None else prompt.placeholder)
    return " ".join(words)


def clean_proposal(token: str, placeholder: str = PLACEHOLDER, mask: str = MASK) -> str:
    parts = token.split()
    if not parts:
        raise ProposerEmpty("proposer returned an empty token")
    word = parts[0]
    if all(c in string.punctuation for c in word):
        raise ProposerEmpty(f"punctuation-only proposal {word!r}")
    if placeholder in word or mask in word:
        raise ProposerEmpty(f"proposal {word!r} contains a reserved sentinel")
    return word


def _top_proposal(proposer: "TokenProposer", text: str, top_k: int, placeholder: str, mask: str) -> str:
    try:
        proposals = proposer.propose(text, top_k)
    except BackendError as exc:
        raise ProposerUnavailable(f"{type(exc).__name__}: {exc}") from exc
    if not proposals:
        raise ProposerEmpty(f"no proposal for {text!r}")
    if len(proposals) > 1:
        logger.debug("alternates for %r: %s", text, [p.token for p in proposals[1:]])
    return clean_proposal(proposals[0].token, placeholder, mask)


def _mask_of(proposer) -> str:
    return getattr(proposer, "mask_sentinel", MASK)


def apply_addition(
    prompt: Prompt,
    gap: int,
    proposer: "TokenProposer",
    *,
    top_k: int = 1,
    context_label: str | None = None,
) -> Prompt:
    _check_gap(prompt, gap)
    mask = _mask_of(proposer)
    text = masked_text(prompt, gap, insert=True, mask=mask, context_label=context_label)
    return insert_token(prompt, gap, _top_proposal(proposer, text, top_k, prompt.placeholder, mask))


def apply_replacement(
    prompt: Prompt,
    index: int,
    proposer: "TokenProposer",
    *,
    top_k: int = 1,
    context_label: str | None = None,
) -> Prompt:
    _check_index(prompt, index)
    mask = _mask_of(proposer)
    text = masked_text(prompt, index, insert=False, mask=mask, context_label=context_label)
    return replace_token(prompt, index, _top_proposal(proposer, text, top_k, prompt.placeholder, mask))


def expand_children(
    prompt: Prompt,
    proposer: "TokenProposer",
    *,
    top_k: int = 1,
    context_label: str | None = None,
    warnings: list[str] | None = None,
) -> list[Prompt]:
    """All single-operation children of ``prompt``, deduplicated.

    Order: additions by gap, replacements by index, removals by index.
    Children identical to the parent or to an earlier child are dropped
    (this includes replacements that propose the word they replace). A
    failed proposal skips that child and appends a message to ``warnings``.
    """
    T = prompt.n_mutable
    jobs = [("add", g) for g in range(T + 1)] + [("replace", i) for i in range(T)]
    if T >= 2:
        jobs += [("remove", i) for i in range(T)]

    seen = {prompt.template}
    children = []
    for kind, pos in jobs:
        try:
            if kind == "add":
                child = apply_addition(prompt, pos, proposer, top_k=top_k, context_label=context_label)
            elif kind == "replace":
                child = apply_replacement(prompt, pos, proposer, top_k=top_k, context_label=context_label)
            else:
                child = apply_removal(prompt, pos)
        except (ProposerUnavailable, ProposerEmpty) as exc:
            msg = f"{kind}@{pos} skipped: {type(exc).__name__}: {exc}"
            logger.warning(msg)
            if warnings is not None:
                warnings.append(msg)
            continue
        if child.template in seen:
            continue
        seen.add(child.template)
        children.append(child)
    return children
