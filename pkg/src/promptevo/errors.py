"""Exception hierarchy.

Every error carries an ``exit_code`` so the command line can map failures
to process status without a lookup table: 2 for invalid configuration or
prompts, 3 for backends that cannot be reached, 1 for anything else.
"""

from __future__ import annotations


class PromptEvoError(Exception):
    exit_code = 1


class ConfigInvalid(PromptEvoError, ValueError):
    exit_code = 2


# -- prompt structure -------------------------------------------------------


class PromptError(ConfigInvalid):
    """A prompt violates the single-final-placeholder contract."""


class ZeroPlaceholders(PromptError):
    pass


class MultiplePlaceholders(PromptError):
    pass


class EmptyPrompt(PromptError):
    pass


class PlaceholderNotFinal(PromptError):
    pass


class PlaceholderTargeted(PromptError):
    pass


class WouldEmptyPrompt(PromptError):
    pass


class UnknownCondition(PromptError):
    pass


# -- token proposals --------------------------------------------------------


class ProposerError(PromptEvoError):
    pass


class ProposerUnavailable(ProposerError):
    pass


class ProposerEmpty(ProposerError):
    pass


# -- metrics ------------------------------------------------------------------


class MetricError(PromptEvoError, ValueError):
    pass


class EmptyText(MetricError):
    pass


class LengthMismatch(MetricError):
    pass


class UnknownLabel(MetricError):
    pass


# -- wire backends ------------------------------------------------------------


class BackendError(PromptEvoError):
    pass


class BackendUnreachable(BackendError):
    exit_code = 3


class MalformedResponse(BackendError):
    pass


class NoMaskInRequest(BackendError):
    pass


class EmptyGeneration(BackendError):
    pass


class UnknownLabelFromServer(BackendError):
    pass


# -- search / logs --------------------------------------------------------------


class EmptyPool(PromptEvoError):
    pass


class NeighborhoodTooLarge(PromptEvoError):
    pass


class CorruptLog(PromptEvoError):
    pass


class LineageMismatch(CorruptLog):
    pass
