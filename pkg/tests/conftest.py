from __future__ import annotations

import json
from pathlib import Path

import pytest

from promptevo.backends import HttpSettings, TokenProposal
from promptevo.mock_server import MockBackendServer
from promptevo.optimizer import OptimizerConfig
from promptevo.simworld import load_world

DATA = Path(__file__).parent / "data"
SEED = "Write a text that expresses <em>"


class FixedProposer:
    """Returns a scripted top-1 token per masked text, else ``default``."""

    def __init__(self, table=None, default="the", mask_sentinel="<mask>"):
        self.table = dict(table or {})
        self.default = default
        self.mask_sentinel = mask_sentinel
        self.calls = []

    def propose(self, masked_text, top_k):
        self.calls.append(masked_text)
        tok = self.table.get(masked_text, self.default)
        if isinstance(tok, Exception):
            raise tok
        if tok is None:
            return []
        return [TokenProposal(tok, 1.0)][:top_k]


@pytest.fixture
def world():
    return load_world()


@pytest.fixture
def cfg(world):
    return OptimizerConfig(labels=world.labels)


@pytest.fixture
def bleu_pairs():
    return json.loads((DATA / "bleu_pairs.json").read_text())


@pytest.fixture
def server(world):
    with MockBackendServer(world) as srv:
        yield srv


@pytest.fixture
def fast_settings(server):
    return HttpSettings(server.url, timeout=5.0, retries=2, backoff=0.0)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
