"""``promptevo`` command line: optimize, evaluate, replay.

Settings resolve as flags > environment (backend URLs only) > ``--config``
JSON file > built-in defaults; the resolved set is printed to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import fields
from pathlib import Path

from .backends import ENV_URLS, GenerationParams, http_backends
from .errors import ConfigInvalid, PromptEvoError
from .metrics import BleuConfig
from .optimizer import FilterMode, OptimizerConfig, evaluate_prompt, optimize
from .prompt import PLACEHOLDER, tokenize_prompt
from .runlog import (
    RunLogWriter,
    candidate_record,
    final_record,
    header_record,
    iteration_records,
    parse_runlog,
    read_runlog,
    render_report,
    verify_runlog,
)
from .simworld import load_world

log = logging.getLogger("promptevo")

DEFAULTS = {
    "seed_prompt": None,
    "optimizer": {f.name: None for f in fields(OptimizerConfig) if f.name not in ("bleu", "generation")},
    "bleu": {},
    "generation": {},
    "backends": {
        "sim": None,
        "generator_url": None,
        "proposer_url": None,
        "classifier_url": None,
        "timeout": 30.0,
        "retries": 3,
        "backoff": 0.5,
        "bearer_token": None,
        "concurrency": 4,
        "mask_sentinel": "<mask>",
    },
    "run": {"out": None, "report": "table"},
}
_URL_KEYS = {"generator": "generator_url", "proposer": "proposer_url", "classifier": "classifier_url"}


def _merge(base: dict, extra: dict) -> dict:
    out = dict(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def resolve_settings(args: argparse.Namespace) -> dict:
    settings = json.loads(json.dumps(DEFAULTS))
    if getattr(args, "config", None):
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, ValueError) as exc:
            raise ConfigInvalid(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigInvalid("config file must hold a JSON object")
        settings = _merge(settings, data)

    for role, env in ENV_URLS.items():
        if os.environ.get(env):
            settings["backends"][_URL_KEYS[role]] = os.environ[env]

    opt, b, run = settings["optimizer"], settings["backends"], settings["run"]
    if getattr(args, "seed", None) is not None:
        settings["seed_prompt"] = args.seed
    if getattr(args, "iterations", None) is not None:
        opt["max_iterations"] = args.iterations
    if getattr(args, "labels", None):
        opt["labels"] = [s.strip() for s in args.labels.split(",") if s.strip()]
    if getattr(args, "filter_mode", None):
        opt["filter_mode"] = args.filter_mode
    if getattr(args, "rng_seed", None) is not None:
        opt["rng_seed"] = args.rng_seed
    if getattr(args, "bleu_threshold", None) is not None:
        settings["bleu"]["threshold"] = args.bleu_threshold
    if getattr(args, "sim", None):
        b["sim"] = args.sim
    if getattr(args, "out", None):
        run["out"] = args.out
    if getattr(args, "report", None):
        run["report"] = args.report
    return settings


def build_config(settings: dict, default_labels=None) -> OptimizerConfig:
    opt = {k: v for k, v in settings["optimizer"].items() if v is not None}
    if "labels" not in opt and default_labels:
        opt["labels"] = tuple(default_labels)
    try:
        bleu = BleuConfig(**settings["bleu"])
        gen = GenerationParams(**settings["generation"])
        return OptimizerConfig(bleu=bleu, generation=gen, **opt)
    except TypeError as exc:
        raise ConfigInvalid(f"unknown configuration key: {exc}") from exc
    except ValueError as exc:
        raise ConfigInvalid(str(exc)) from exc


def build_backends(settings: dict):
    """Backend suite plus the label set of a simulated world (or None)."""
    b = settings["backends"]
    if b["sim"]:
        world = load_world(b["sim"])
        return world.backends({"kind": "sim", "fixture": str(b["sim"])}), world.labels
    suite = http_backends(
        b["generator_url"],
        b["proposer_url"],
        b["classifier_url"],
        mask_sentinel=b["mask_sentinel"],
        timeout=b["timeout"],
        retries=b["retries"],
        backoff=b["backoff"],
        bearer_token=b["bearer_token"],
        concurrency=b["concurrency"],
    )
    for client in (suite.proposer, suite.generator, suite.classifier):
        client.probe()
    return suite, None


def _prepare_out(out: str | None) -> Path | None:
    if not out:
        return None
    path = Path(out)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigInvalid(f"cannot create output directory {out}: {exc}") from exc
    if not os.access(path, os.W_OK):
        raise ConfigInvalid(f"output directory {out} is not writable")
    return path


def _print_settings(settings: dict, cfg: OptimizerConfig) -> None:
    shown = json.loads(json.dumps(settings))
    if shown["backends"].get("bearer_token"):
        shown["backends"]["bearer_token"] = "***"
    shown["optimizer"] = cfg.to_json()
    print("resolved settings: " + json.dumps(shown, sort_keys=True), file=sys.stderr)


def _seed_prompt(settings):
    seed = settings.get("seed_prompt")
    if not seed:
        raise ConfigInvalid("no seed prompt given (use --seed or the config file)")
    return tokenize_prompt(seed, settings["optimizer"].get("placeholder") or PLACEHOLDER)


def cmd_optimize(args) -> int:
    settings = resolve_settings(args)
    prompt = _seed_prompt(settings)
    backends, world_labels = build_backends(settings)
    cfg = build_config(settings, world_labels)
    _print_settings(settings, cfg)
    out = _prepare_out(settings["run"]["out"])

    stream = open(out / "runlog.jsonl", "w", encoding="utf-8") if out else None
    writer = RunLogWriter(stream)
    try:
        writer.write(header_record(prompt.template, cfg.to_json(), backends.description))
        result = optimize(
            prompt,
            backends,
            cfg,
            on_seed=lambda c: writer.write(candidate_record("seed", 0, c)),
            on_iteration=lambda rec: writer.write_all(iteration_records(rec)),
        )
        writer.write(final_record(result))
    finally:
        if stream is not None:
            stream.close()

    runlog = parse_runlog(writer.text().splitlines())
    report = render_report(runlog, settings["run"]["report"])
    if out:
        suffix = "json" if settings["run"]["report"] == "json" else "txt"
        (out / f"report.{suffix}").write_text(report, encoding="utf-8")
    sys.stdout.write(report)
    return 0


def cmd_evaluate(args) -> int:
    if args.prompt:
        args.seed = args.prompt
    settings = resolve_settings(args)
    prompt = _seed_prompt(settings)
    backends, world_labels = build_backends(settings)
    cfg = build_config(settings, world_labels)
    _print_settings(settings, cfg)
    cand = evaluate_prompt(prompt, backends, cfg)
    s = cand.score

    if settings["run"]["report"] == "json":
        doc = candidate_record("evaluation", 0, cand)
        sys.stdout.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        return 0
    print(f"prompt: {cand.prompt.template}")
    if s.disqualified:
        print("status: disqualified")
        for w in cand.warnings:
            print(f"  {w}")
        return 0
    for label in cfg.labels:
        print(f"  {label:<12}{s.per_label_f1[label]:.2f}")
    print(f"macro-F1: {s.macro_f1:.2f}  (scored {s.n_texts_scored}, filtered {s.n_texts_filtered})")
    return 0


def cmd_replay(args) -> int:
    runlog = read_runlog(args.runlog)
    verify_runlog(runlog)
    sys.stdout.write(render_report(runlog, args.report or "table"))
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON configuration file")
    p.add_argument("--labels", help="comma-separated condition labels")
    p.add_argument("--bleu-threshold", type=float, dest="bleu_threshold")
    p.add_argument("--filter-mode", choices=[m.value for m in FilterMode], dest="filter_mode")
    p.add_argument("--sim", help="toy world JSON fixture ('standard' for the bundled one)")
    p.add_argument("--rng-seed", type=int, dest="rng_seed")
    p.add_argument("--report", choices=["table", "json"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="promptevo", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimize", help="run the prompt search")
    p.add_argument("--seed", help="seed prompt containing the placeholder, e.g. 'Write a text that expresses <em>'")
    p.add_argument("-n", "--iterations", type=int)
    p.add_argument("--out", help="directory for runlog.jsonl and the report")
    _add_common(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("evaluate", help="score a single prompt")
    p.add_argument("prompt", nargs="?")
    p.add_argument("--seed", help=argparse.SUPPRESS)
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("replay", help="verify a run log and re-render its report")
    p.add_argument("runlog")
    p.add_argument("--report", choices=["table", "json"])
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and 2
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.ERROR,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except PromptEvoError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # unexpected: still a runtime failure, not a crash
        log.exception("unexpected failure")
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
