"""Command line entry point: ``orderpipe {extract,record,evaluate,report}``.

Settings resolve as flags > ``ORDERPIPE_*`` environment variables > a flat
JSON config file (``--config``) > built-in defaults.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

from orderpipe.llm_gateway import (
    GatewayError,
    HttpBackend,
    LLMSettings,
    RecordingBackend,
    ReplayBackend,
    RetryPolicy,
    ScriptedBackend,
)
from orderpipe.metrics import aggregate, score_encounter
from orderpipe.orders import PostprocessConfig, SchemaError, validate_order_schema
from orderpipe.pipeline import run_batch
from orderpipe.strategies import PromptCatalog, ReactConfig
from orderpipe.transcript import TranscriptError, load_dataset

log = logging.getLogger("orderpipe")

EXIT_OK, EXIT_FATAL, EXIT_PARTIAL = 0, 1, 2
ENV_PREFIX = "ORDERPIPE_"


@dataclass
class RunConfig:
    input: str | None = None
    output: str | None = None
    gold: str | None = None
    strategy: str = "oneshot"
    model: str = "medgemma-4b"
    backend: str = "http"
    base_url: str = "http://localhost:8000/v1"
    fixtures: str | None = None
    script: str | None = None
    prompts: str | None = None
    concurrency: int = 4
    max_iterations: int = 3
    wording_threshold: float = 0.6
    max_words: int = 20
    max_orders: int = 10
    max_provenance: int = 5
    temperature: float = 0.0
    max_tokens: int = 2048
    max_attempts: int = 3
    backoff: float = 1.0
    split: str = "custom"
    strict: bool = False
    ordertype_mode: str = "micro"
    require_same_type: bool = False

    def __post_init__(self):
        if self.concurrency < 1:
            raise ValueError("concurrency must be >= 1")

    def react_config(self) -> ReactConfig:
        return ReactConfig(
            max_iterations=self.max_iterations,
            wording_overlap_threshold=self.wording_threshold,
            postprocess=PostprocessConfig(self.max_words, self.max_orders, self.max_provenance),
        )

    def llm_settings(self) -> LLMSettings:
        return LLMSettings(
            model=self.model,
            temperature=self.temperature,
            max_tokens=self.max_tokens,
            retry=RetryPolicy(max_attempts=self.max_attempts, base_backoff=self.backoff),
        )


class ConfigError(Exception):
    pass


def _coerce(name: str, value: Any) -> Any:
    default = RunConfig.__dataclass_fields__[name].default
    if isinstance(default, bool):
        if isinstance(value, str):
            return value.strip().lower() in ("1", "true", "yes", "on")
        return bool(value)
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    return None if value is None else str(value)


def resolve_config(flags: Mapping[str, Any], env: Mapping[str, str] | None = None) -> RunConfig:
    env = os.environ if env is None else env
    names = [f.name for f in dataclasses.fields(RunConfig)]
    values: dict[str, Any] = {}
    if flags.get("config"):
        try:
            doc = json.loads(Path(flags["config"]).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        unknown = set(doc) - set(names)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        values.update(doc)
    for name in names:
        key = ENV_PREFIX + name.upper()
        if key in env:
            values[name] = env[key]
    for name in names:
        if flags.get(name) is not None:
            values[name] = flags[name]
    try:
        return RunConfig(**{k: _coerce(k, v) for k, v in values.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _write_json(path: str | Path, doc: Any) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def _ensure_writable_dir(path: Path) -> None:
    path.mkdir(parents=True, exist_ok=True)
    probe = path / ".write-probe"
    probe.write_text("", encoding="utf-8")
    probe.unlink()


def _backend_factory(cfg: RunConfig, record: bool):
    if record:
        if not cfg.fixtures:
            raise ConfigError("record needs --fixtures")
        try:
            _ensure_writable_dir(Path(cfg.fixtures))
        except OSError as exc:
            raise ConfigError(f"fixture directory not writable: {exc}") from exc
        backend = RecordingBackend(HttpBackend(cfg.base_url), cfg.fixtures)
        return lambda e: backend
    if cfg.backend == "http":
        backend = HttpBackend(cfg.base_url)
        return lambda e: backend
    if cfg.backend == "replay":
        if not cfg.fixtures or not Path(cfg.fixtures).is_dir():
            raise ConfigError("replay backend needs an existing --fixtures directory")
        backend = ReplayBackend(cfg.fixtures)
        return lambda e: backend
    if cfg.backend == "scripted":
        if not cfg.script:
            raise ConfigError("scripted backend needs --script")
        try:
            script = json.loads(Path(cfg.script).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read script: {exc}") from exc
        if isinstance(script, list):
            return lambda e: ScriptedBackend(script)
        # one script per encounter keeps response order deterministic under concurrency
        return lambda e: ScriptedBackend(script.get(e.id, []))
    raise ConfigError(f"unknown backend {cfg.backend!r}")


def cmd_extract(cfg: RunConfig, record: bool = False) -> int:
    if not cfg.input or not cfg.output:
        raise ConfigError("extract needs --input and --output")
    if cfg.strategy not in ("oneshot", "react", "agentic"):
        raise ConfigError(f"unknown strategy {cfg.strategy!r}")
    try:
        dataset = load_dataset(cfg.input, cfg.split, strict=cfg.strict)
    except (OSError, TranscriptError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL
    backend_for = _backend_factory(cfg, record)
    catalog = PromptCatalog(cfg.prompts)
    try:
        batch = run_batch(
            cfg.strategy,
            dataset.encounters,
            backend_for,
            cfg.react_config(),
            cfg.llm_settings(),
            cfg.concurrency,
            fail_fast=cfg.strict,
            catalog=catalog,
        )
    except Exception as exc:
        print(f"error: aborted (strict mode): {exc}", file=sys.stderr)
        return EXIT_FATAL

    _write_json(cfg.output, [r.to_record() for r in batch.results])
    sidecar = Path(cfg.output + ".failed.json")
    if batch.failures:
        _write_json(sidecar, batch.failures)
    elif sidecar.exists():
        sidecar.unlink()

    n_orders = sum(len(r.orders) for r in batch.results)
    n_calls = sum(len(r.diagnostics.calls) for r in batch.results)
    print(
        f"{cfg.strategy}: {len(batch.results)}/{len(dataset)} encounters, "
        f"{n_orders} orders, {n_calls} LLM calls -> {cfg.output}"
    )
    if batch.failures:
        for eid, err in batch.failures.items():
            print(f"failed {eid}: {err}", file=sys.stderr)
        return EXIT_FATAL if not batch.results else EXIT_PARTIAL
    return EXIT_OK


class IdMismatch(Exception):
    pass


def load_predictions(path: str | Path, strict: bool = False) -> dict[str, list]:
    """Read predicted orders per encounter.

    Accepts prediction records (``encounter_id`` + ``orders``) as well as
    encounter records (``id`` + ``expected_orders``), so a gold file can be
    scored against itself.
    """
    text = Path(path).read_text(encoding="utf-8")
    if Path(path).suffix == ".jsonl":
        records = [json.loads(line) for line in text.splitlines() if line.strip()]
    else:
        doc = json.loads(text)
        records = doc if isinstance(doc, list) else [doc]
    out: dict[str, list] = {}
    for rec in records:
        eid = rec.get("encounter_id", rec.get("id"))
        if eid is None:
            raise ValueError("prediction record without encounter_id")
        raw_orders = rec.get("orders", rec.get("expected_orders")) or []
        orders = []
        for k, ro in enumerate(raw_orders):
            try:
                orders.append(validate_order_schema(ro))
            except SchemaError as exc:
                if strict:
                    raise ValueError(f"{eid} order {k}: {exc}") from exc
                log.warning("skipping invalid predicted order %s[%d]: %s", eid, k, exc)
        out[str(eid)] = orders
    return out


def cmd_evaluate(cfg: RunConfig) -> int:
    if not cfg.input or not cfg.gold or not cfg.output:
        raise ConfigError("evaluate needs --input (predictions), --gold and --output (report)")
    try:
        gold = load_dataset(cfg.gold, cfg.split, strict=cfg.strict)
        preds = load_predictions(cfg.input, cfg.strict)
    except (OSError, ValueError, TranscriptError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL
    gold_ids = {e.id for e in gold}
    unknown = sorted(set(preds) - gold_ids)
    if unknown:
        print(f"error: {IdMismatch.__name__}: predictions for unknown encounters {unknown}", file=sys.stderr)
        return EXIT_FATAL
    scores = []
    for e in sorted(gold, key=lambda e: e.id):
        if e.gold_orders is None:
            log.warning("encounter %s has no gold orders; not scored", e.id)
            continue
        scores.append(score_encounter(preds.get(e.id, []), e.gold_orders, e.id, cfg.require_same_type))
    if not scores:
        print("error: no annotated encounters to score", file=sys.stderr)
        return EXIT_FATAL
    report = aggregate(scores, cfg.ordertype_mode)
    label = Path(cfg.input).stem
    doc = {"label": label, **report.to_dict(), "header": report.table_header(), "row": report.table_row(label)}
    _write_json(cfg.output, doc)
    print(report.table_header())
    print(report.table_row(label))
    return EXIT_OK


def cmd_report(paths: Sequence[str]) -> int:
    from orderpipe.metrics.scoring import HEADLINE_COLUMNS

    header = " | ".join([""] + [name for _, name in HEADLINE_COLUMNS] + ["Avg. Score"])
    print(header)
    for p in paths:
        try:
            doc = json.loads(Path(p).read_text(encoding="utf-8"))
            vals = [doc[key] for key, _ in HEADLINE_COLUMNS] + [doc["average_score"]]
        except (OSError, ValueError, KeyError) as exc:
            print(f"error: {p}: {exc}", file=sys.stderr)
            return EXIT_FATAL
        print(" | ".join([doc.get("label", Path(p).stem)] + [f"{v:.3f}" for v in vals]))
    return EXIT_OK


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat JSON file of settings")
    p.add_argument("--input", help="encounter file or directory")
    p.add_argument("--output", help="predictions file to write")
    p.add_argument("--strategy", choices=["oneshot", "react", "agentic"])
    p.add_argument("--model")
    p.add_argument("--backend", choices=["http", "replay", "scripted"])
    p.add_argument("--base-url", dest="base_url")
    p.add_argument("--fixtures", help="fixture directory for replay/record")
    p.add_argument("--script", help="JSON list of responses, or {encounter_id: [responses]}")
    p.add_argument("--prompts", help="directory overriding packaged prompt files")
    p.add_argument("--concurrency", type=int)
    p.add_argument("--max-iterations", dest="max_iterations", type=int)
    p.add_argument("--wording-threshold", dest="wording_threshold", type=float)
    p.add_argument("--max-words", dest="max_words", type=int)
    p.add_argument("--max-orders", dest="max_orders", type=int)
    p.add_argument("--max-provenance", dest="max_provenance", type=int)
    p.add_argument("--temperature", type=float)
    p.add_argument("--max-tokens", dest="max_tokens", type=int)
    p.add_argument("--max-attempts", dest="max_attempts", type=int)
    p.add_argument("--backoff", type=float, help="base retry delay in seconds")
    p.add_argument("--split", choices=["train", "dev", "custom"])
    p.add_argument("--strict", action="store_true", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="orderpipe", description="Medical order extraction and scoring.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    _add_run_flags(sub.add_parser("extract", help="extract orders from a dataset"))
    _add_run_flags(sub.add_parser("record", help="extract over HTTP while saving replay fixtures"))

    ev = sub.add_parser("evaluate", help="score predictions against gold orders")
    ev.add_argument("--config")
    ev.add_argument("--input", "--predictions", dest="input", help="predictions file")
    ev.add_argument("--gold", help="gold encounter file or directory")
    ev.add_argument("--output", help="report file to write")
    ev.add_argument("--split", choices=["train", "dev", "custom"])
    ev.add_argument("--strict", action="store_true", default=None)
    ev.add_argument("--ordertype-mode", dest="ordertype_mode", choices=["micro", "macro"])
    ev.add_argument("--require-same-type", dest="require_same_type", action="store_true", default=None)

    rp = sub.add_parser("report", help="print evaluation reports as table rows")
    rp.add_argument("reports", nargs="+")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.command == "report":
        return cmd_report(args.reports)
    try:
        cfg = resolve_config(vars(args))
        if args.command == "evaluate":
            return cmd_evaluate(cfg)
        return cmd_extract(cfg, record=args.command == "record")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL
    except GatewayError as exc:
        print(f"error: backend: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
