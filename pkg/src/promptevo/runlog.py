"""Line-delimited JSON run logs, replay verification and reports.

A log holds, in order: one ``header`` record (resolved configuration), one
``seed`` record, then per iteration one ``child`` record per evaluated
child followed by one ``incumbent`` record, and finally one ``final``
record. Records are serialized with sorted keys, so equal runs give equal
bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Sequence

from .errors import CorruptLog, LineageMismatch, PromptError
from .optimizer import Candidate, IterationRecord, OptimizationResult
from .prompt import Lineage, apply_descriptor, tokenize_prompt

LOG_VERSION = 1


def dumps(record: dict) -> str:
    return json.dumps(record, sort_keys=True, ensure_ascii=False, separators=(",", ":"), allow_nan=False)


def _score_fields(c: Candidate) -> dict:
    s = c.score
    return {
        "macro_f1": None if s.disqualified else s.macro_f1,
        "per_label_f1": None if s.disqualified else dict(s.per_label_f1),
        "disqualified": s.disqualified,
        "n_texts_scored": s.n_texts_scored,
        "n_texts_filtered": s.n_texts_filtered,
    }


def candidate_record(kind: str, iteration: int, c: Candidate, **extra) -> dict:
    p = c.prompt
    rec = {
        "type": kind,
        "iteration": iteration,
        "prompt_id": p.id,
        "prompt_text": p.template,
        "lineage": p.lineage.to_json() if p.lineage else None,
        "per_condition": [cond.to_json() for cond in c.conditions],
        "warnings": list(c.warnings),
        **_score_fields(c),
    }
    rec.update(extra)
    return rec


def _summary(kind: str, iteration: int, c: Candidate, **extra) -> dict:
    p = c.prompt
    return {
        "type": kind,
        "iteration": iteration,
        "prompt_id": p.id,
        "prompt_text": p.template,
        "lineage": p.lineage.to_json() if p.lineage else None,
        "macro_f1": None if c.score.disqualified else c.score.macro_f1,
        "disqualified": c.score.disqualified,
        **extra,
    }


def header_record(seed_prompt: str, config: dict, backends: dict | None = None) -> dict:
    return {
        "type": "header",
        "version": LOG_VERSION,
        "seed_prompt": seed_prompt,
        "config": config,
        "backends": backends or {},
    }


def iteration_records(rec: IterationRecord) -> list[dict]:
    out = [candidate_record("child", rec.iteration, c) for c in rec.children]
    out.append(
        _summary(
            "incumbent",
            rec.iteration,
            rec.incumbent,
            parent_id=rec.parent_id,
            carried_over=rec.carried_over,
            n_children=len(rec.children),
            warnings=list(rec.warnings),
        )
    )
    return out


def final_record(result: OptimizationResult) -> dict:
    return _summary("final", result.best_iteration, result.best)


class RunLogWriter:
    """Single-consumer JSONL writer; also keeps the records in memory."""

    def __init__(self, stream: IO[str] | None = None):
        self.stream = stream
        self.records: list[dict] = []

    def write(self, record: dict) -> None:
        line = dumps(record)
        self.records.append(record)
        if self.stream is not None:
            self.stream.write(line + "\n")
            self.stream.flush()

    def write_all(self, records: Iterable[dict]) -> None:
        for r in records:
            self.write(r)

    def text(self) -> str:
        return "".join(dumps(r) + "\n" for r in self.records)


def result_records(seed_prompt: str, config: dict, result: OptimizationResult, backends: dict | None = None) -> list[dict]:
    """Complete record list for a finished run (same order as streamed)."""
    out = [header_record(seed_prompt, config, backends), candidate_record("seed", 0, result.seed)]
    for rec in result.iterations:
        out.extend(iteration_records(rec))
    out.append(final_record(result))
    return out


# -- reading and verification --------------------------------------------------------


@dataclass
class RunLog:
    header: dict
    seed: dict
    children: dict[int, list[dict]] = field(default_factory=dict)
    incumbents: list[dict] = field(default_factory=list)
    final: dict | None = None

    @property
    def placeholder(self) -> str:
        return self.header.get("config", {}).get("placeholder", "<em>")

    @property
    def pool(self) -> list[dict]:
        return [self.seed] + self.incumbents


def _require(rec: dict, keys: Sequence[str], lineno: int) -> None:
    missing = [k for k in keys if k not in rec]
    if missing:
        raise CorruptLog(f"line {lineno}: record lacks {missing}")


def parse_runlog(lines: Iterable[str]) -> RunLog:
    header = seed = None
    log = None
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except ValueError as exc:
            raise CorruptLog(f"line {lineno}: not JSON") from exc
        if not isinstance(rec, dict) or "type" not in rec:
            raise CorruptLog(f"line {lineno}: not a log record")
        kind = rec["type"]
        if header is None:
            if kind != "header":
                raise CorruptLog("log does not start with a header")
            _require(rec, ("version", "seed_prompt", "config"), lineno)
            if rec["version"] != LOG_VERSION:
                raise CorruptLog(f"unsupported log version {rec['version']}")
            header = rec
            continue
        _require(rec, ("iteration", "prompt_id", "prompt_text", "lineage", "macro_f1", "disqualified"), lineno)
        if kind == "seed":
            if seed is not None:
                raise CorruptLog(f"line {lineno}: second seed record")
            seed = rec
            log = RunLog(header, seed)
        elif log is None:
            raise CorruptLog(f"line {lineno}: {kind} record before the seed")
        elif kind == "child":
            log.children.setdefault(rec["iteration"], []).append(rec)
        elif kind == "incumbent":
            _require(rec, ("parent_id", "carried_over"), lineno)
            log.incumbents.append(rec)
        elif kind == "final":
            log.final = rec
        else:
            raise CorruptLog(f"line {lineno}: unknown record type {kind!r}")
    if log is None:
        raise CorruptLog("log has no seed record")
    if log.final is None:
        raise CorruptLog("log has no final record")
    return log


def read_runlog(path: str | Path) -> RunLog:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_runlog(fh)
    except OSError as exc:
        raise CorruptLog(f"cannot read {path}: {exc}") from exc


def _value(rec: dict) -> float:
    return float("-inf") if rec["disqualified"] else rec["macro_f1"]


def verify_runlog(log: RunLog) -> None:
    """Replay every lineage and check the incumbent chain and final pick."""
    ph = log.placeholder
    try:
        seed_prompt = tokenize_prompt(log.seed["prompt_text"], ph)
    except PromptError as exc:
        raise CorruptLog(f"seed prompt is invalid: {exc}") from exc
    if seed_prompt.template != tokenize_prompt(log.header["seed_prompt"], ph).template:
        raise CorruptLog("seed record does not match the header")

    parent = seed_prompt
    for n, inc in enumerate(log.incumbents, 1):
        if inc["iteration"] != n:
            raise CorruptLog(f"incumbent records out of order at iteration {inc['iteration']}")
        if inc["parent_id"] != parent.id:
            raise LineageMismatch(f"iteration {n}: parent id does not match the previous incumbent")
        children = log.children.get(n, [])
        for child in children:
            if child["lineage"] is None:
                raise LineageMismatch(f"iteration {n}: child {child['prompt_text']!r} has no lineage")
            lineage = Lineage.from_json(child["lineage"])
            if lineage.parent_id != parent.id:
                raise LineageMismatch(f"iteration {n}: child {child['prompt_text']!r} names another parent")
            try:
                replayed = apply_descriptor(parent, lineage.descriptor)
            except (PromptError, IndexError) as exc:
                raise LineageMismatch(f"iteration {n}: lineage of {child['prompt_text']!r} cannot replay") from exc
            if replayed.template != child["prompt_text"]:
                raise LineageMismatch(
                    f"iteration {n}: lineage replays to {replayed.template!r}, log says {child['prompt_text']!r}"
                )
        if inc["carried_over"]:
            if inc["prompt_text"] != parent.template:
                raise LineageMismatch(f"iteration {n}: carried-over incumbent differs from its parent")
            continue
        match = [c for c in children if c["prompt_text"] == inc["prompt_text"]]
        if not match:
            raise LineageMismatch(f"iteration {n}: incumbent is not among the children")
        best = max((_value(c) for c in children), default=float("-inf"))
        if _value(inc) != best:
            raise CorruptLog(f"iteration {n}: incumbent is not the best child")
        parent = tokenize_prompt(inc["prompt_text"], ph)

    values = [_value(r) for r in log.pool]
    best_i = max(range(len(values)), key=lambda i: (values[i], -i))
    if log.final["iteration"] != best_i or log.final["prompt_text"] != log.pool[best_i]["prompt_text"]:
        raise CorruptLog("final selection is not the pool argmax")


# -- reports ------------------------------------------------------------------------------


def _f1(rec: dict) -> str:
    return "disq." if rec["disqualified"] else f"{rec['macro_f1']:.2f}"


def _op(rec: dict) -> str:
    if rec.get("carried_over"):
        return "carry"
    if not rec["lineage"]:
        return "---"
    return {"add": "Add.", "replace": "Repl.", "remove": "Rem."}[rec["lineage"]["op"]]


def report_rows(log: RunLog) -> list[dict]:
    return [
        {
            "iteration": r["iteration"],
            "operation": _op(r),
            "prompt": r["prompt_text"],
            "macro_f1": r["macro_f1"],
            "disqualified": r["disqualified"],
        }
        for r in log.pool
    ]


def render_table(log: RunLog) -> str:
    rows = report_rows(log)
    width = max(len("Prompt"), *(len(r["prompt"]) for r in rows))
    lines = [f"{'Iter.':<6}{'Op.':<7}{'Prompt':<{width}}  F1"]
    for r, rec in zip(rows, log.pool):
        lines.append(f"{r['iteration']:<6}{r['operation']:<7}{r['prompt']:<{width}}  {_f1(rec)}")
    f = log.final
    lines.append("")
    lines.append(f"selected: iteration {f['iteration']}, {f['prompt_text']!r}, F1 {_f1(f)}")
    return "\n".join(lines) + "\n"


def render_json(log: RunLog) -> str:
    f = log.final
    doc = {
        "seed_prompt": log.header["seed_prompt"],
        "rows": report_rows(log),
        "selected": {"iteration": f["iteration"], "prompt": f["prompt_text"], "macro_f1": f["macro_f1"]},
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def render_report(log: RunLog, fmt: str = "table") -> str:
    if fmt == "table":
        return render_table(log)
    if fmt == "json":
        return render_json(log)
    raise ValueError(f"unknown report format {fmt!r}")
