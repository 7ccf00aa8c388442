"""Single-call extraction with one worked example in the prompt."""

from __future__ import annotations

import time

from orderpipe.llm_gateway import Backend, ChatMessage, LLMSettings, Role
from orderpipe.orders import PostprocessConfig, postprocess_orders
from orderpipe.strategies.base import Diagnostics, ExtractionResult, Strategy, call_backend
from orderpipe.strategies.catalog import DEFAULT_CATALOG, PromptCatalog
from orderpipe.strategies.parsing import NoParsableOutput, Stage, parse_orders_response
from orderpipe.transcript import Encounter, render_transcript


def build_oneshot_messages(e: Encounter, catalog: PromptCatalog = DEFAULT_CATALOG) -> list[ChatMessage]:
    instruction = catalog.render("oneshot_instruction", conversation=render_transcript(e.transcript))
    user = catalog.render("oneshot_user", instruction_template=instruction)
    return [ChatMessage(Role.SYSTEM, catalog.get("oneshot_system")), ChatMessage(Role.USER, user)]


def extract_oneshot(
    e: Encounter,
    backend: Backend,
    cfg: PostprocessConfig = PostprocessConfig(),
    settings: LLMSettings | None = None,
    catalog: PromptCatalog = DEFAULT_CATALOG,
) -> ExtractionResult:
    settings = settings or LLMSettings()
    diag = Diagnostics()
    t0 = time.perf_counter()
    system, user = build_oneshot_messages(e, catalog)
    text = call_backend(backend, settings, system.content, user.content, Stage.ONESHOT.value, diag)
    diag.iterations = 1
    try:
        parsed = parse_orders_response(text, Stage.ONESHOT)
        diag.parse_notes.extend(parsed.diagnostics)
        raw_orders = parsed.orders
    except NoParsableOutput as exc:
        diag.parse_notes.append(f"NoParsableOutput: {exc}")
        raw_orders = []
    orders, repairs = postprocess_orders(raw_orders, e.transcript, cfg)
    diag.repair_log.extend(repairs)
    diag.wall_time = time.perf_counter() - t0
    return ExtractionResult(e.id, Strategy.ONESHOT, orders, diag)
