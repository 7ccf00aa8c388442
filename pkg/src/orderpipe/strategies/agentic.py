"""Four sequential agents: Identifier, Mapper, Structurer, Validator."""

from __future__ import annotations

import time

from orderpipe.llm_gateway import Backend, GatewayError, LLMSettings
from orderpipe.orders import PostprocessConfig, postprocess_orders
from orderpipe.strategies.base import Diagnostics, ExtractionResult, Strategy, call_backend
from orderpipe.strategies.catalog import DEFAULT_CATALOG, PromptCatalog
from orderpipe.strategies.parsing import NoParsableOutput, Stage, parse_orders_response
from orderpipe.transcript import Encounter, render_transcript

AGENT_STAGES = (Stage.IDENTIFIER, Stage.MAPPER, Stage.STRUCTURER, Stage.VALIDATOR)


class StageFailed(Exception):
    def __init__(self, stage: Stage, cause: Exception):
        self.stage = stage
        super().__init__(f"{stage.value} stage failed: {cause}")


def extract_agentic(
    e: Encounter,
    backend: Backend,
    cfg: PostprocessConfig = PostprocessConfig(),
    settings: LLMSettings | None = None,
    catalog: PromptCatalog = DEFAULT_CATALOG,
) -> ExtractionResult:
    settings = settings or LLMSettings()
    diag = Diagnostics()
    t0 = time.perf_counter()
    system = catalog.get("agentic_system")
    transcript = render_transcript(e.transcript)

    def run(stage: Stage, user: str) -> str:
        try:
            return call_backend(backend, settings, system, user, stage.value, diag)
        except GatewayError as exc:
            raise StageFailed(stage, exc) from exc

    identified = run(Stage.IDENTIFIER, catalog.render("agentic_identifier", transcript=transcript))
    mapped = run(Stage.MAPPER, catalog.render("agentic_mapper", identifier_output=identified))
    structured = run(Stage.STRUCTURER, catalog.render("agentic_structurer", mapper_output=mapped))
    validated = run(
        Stage.VALIDATOR,
        catalog.render("agentic_validator", structured_output=structured, transcript=transcript),
    )
    diag.iterations = 1

    raw_orders = []
    try:
        parsed = parse_orders_response(validated, Stage.VALIDATOR)
    except NoParsableOutput as exc:
        diag.parse_notes.append(f"validator: NoParsableOutput: {exc}")
        diag.fallback = True
        try:
            parsed = parse_orders_response(structured, Stage.STRUCTURER)
        except NoParsableOutput as exc2:
            diag.parse_notes.append(f"structurer: NoParsableOutput: {exc2}")
            parsed = None
    if parsed is not None:
        diag.parse_notes.extend(parsed.diagnostics)
        raw_orders = parsed.orders

    orders, repairs = postprocess_orders(raw_orders, e.transcript, cfg)
    diag.repair_log.extend(repairs)
    diag.wall_time = time.perf_counter() - t0
    return ExtractionResult(e.id, Strategy.AGENTIC, orders, diag)
