"""Thought / Action / Observation loop with deterministic constraint feedback."""

from __future__ import annotations

import json
import time

from orderpipe.llm_gateway import Backend, LLMSettings
from orderpipe.orders import postprocess_orders
from orderpipe.strategies.base import Diagnostics, ExtractionResult, Strategy, call_backend
from orderpipe.strategies.catalog import DEFAULT_CATALOG, PromptCatalog
from orderpipe.strategies.parsing import CandidateOrder, NoParsableOutput, Stage, parse_orders_response
from orderpipe.strategies.validation import ReactConfig, Violation, ViolationKind, validate_candidates
from orderpipe.transcript import Encounter, doctor_turns, render_transcript


def build_react_prompts(
    e: Encounter,
    cfg: ReactConfig,
    previous: str | None = None,
    violations: list[Violation] | None = None,
    catalog: PromptCatalog = DEFAULT_CATALOG,
) -> tuple[str, str]:
    pp = cfg.postprocess
    system = catalog.render(
        "react_system", max_words=pp.max_words, max_orders=pp.max_orders, max_provenance=pp.max_provenance
    )
    docs = sorted(doctor_turns(e.transcript))
    user = catalog.render(
        "react_user",
        transcript=render_transcript(e.transcript),
        doctor_turns=", ".join(map(str, docs)) if docs else "none",
    )
    if violations:
        user += catalog.render(
            "react_observation",
            violations="\n".join(str(v) for v in violations),
            previous_output=previous if cfg.include_previous_output and previous is not None else "(not shown)",
        )
    return system, user


def extract_react(
    e: Encounter,
    backend: Backend,
    cfg: ReactConfig = ReactConfig(),
    settings: LLMSettings | None = None,
    catalog: PromptCatalog = DEFAULT_CATALOG,
) -> ExtractionResult:
    """Generate, validate, and regenerate with feedback until clean or out of iterations.

    When the last iteration still has violations, every candidate named by a
    violation is dropped and the rest are kept.
    """
    settings = settings or LLMSettings()
    diag = Diagnostics()
    t0 = time.perf_counter()
    previous: str | None = None
    violations: list[Violation] = []
    cands: list[CandidateOrder] = []

    for i in range(1, cfg.max_iterations + 1):
        system, user = build_react_prompts(e, cfg, previous, violations, catalog)
        text = call_backend(backend, settings, system, user, f"react_{i}", diag)
        diag.iterations = i
        try:
            parsed = parse_orders_response(text, Stage.REACT_ACTION)
            cands = parsed.candidates
            diag.parse_notes.extend(f"iteration {i}: {note}" for note in parsed.diagnostics)
            violations = validate_candidates(cands, e.transcript, cfg)
            previous = json.dumps([c.raw for c in cands], ensure_ascii=False)
        except NoParsableOutput as exc:
            cands = []
            diag.parse_notes.append(f"iteration {i}: NoParsableOutput: {exc}")
            violations = [Violation(
                ViolationKind.BAD_SCHEMA, None,
                "no JSON array of orders was found; put the Action as a JSON array (use [] for no orders)",
            )]
            previous = text
        diag.violations.append([str(v) for v in violations])
        if not violations:
            break
    else:
        diag.exhausted = True

    flagged = {v.candidate for v in violations}
    kept = [c.order for k, c in enumerate(cands) if c.order is not None and k not in flagged]
    orders, repairs = postprocess_orders(kept, e.transcript, cfg.postprocess)
    diag.repair_log.extend(repairs)
    diag.wall_time = time.perf_counter() - t0
    return ExtractionResult(e.id, Strategy.REACT, orders, diag)
