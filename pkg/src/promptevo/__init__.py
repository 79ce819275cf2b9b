"""Evolutionary (1, lambda) prompt optimization for condition-fulfilling
text generation, with pluggable model backends and a deterministic toy
world for testing the search."""

from .backends import (
    BackendSuite,
    ClassifierVerdict,
    GenerationParams,
    HttpSettings,
    TokenProposal,
    http_backends,
)
from .metrics import BleuConfig, ObjectiveScore, bleu_sentence, is_paraphrase, macro_f1, tally
from .optimizer import (
    ISEAR_LABELS,
    Candidate,
    FilterMode,
    OptimizerConfig,
    evaluate_prompt,
    optimize,
    run_iteration,
    select_one_best,
)
from .prompt import (
    Operation,
    OperationDescriptor,
    Prompt,
    apply_addition,
    apply_removal,
    apply_replacement,
    expand_children,
    render,
    tokenize_prompt,
)
from .simworld import ToyWorld, brute_force_best, load_world

__version__ = "0.1.0"
