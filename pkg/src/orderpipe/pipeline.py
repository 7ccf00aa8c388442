"""Run one strategy over many encounters with bounded concurrency."""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from typing import Callable, Sequence

from orderpipe.llm_gateway import Backend, LLMSettings, map_bounded
from orderpipe.strategies import (
    ExtractionResult,
    PromptCatalog,
    ReactConfig,
    Strategy,
    extract_agentic,
    extract_oneshot,
    extract_react,
)
from orderpipe.strategies.catalog import DEFAULT_CATALOG
from orderpipe.transcript import Encounter

log = logging.getLogger(__name__)


def run_strategy(
    strategy: Strategy | str,
    e: Encounter,
    backend: Backend,
    react: ReactConfig = ReactConfig(),
    settings: LLMSettings | None = None,
    catalog: PromptCatalog = DEFAULT_CATALOG,
) -> ExtractionResult:
    strategy = Strategy(strategy)
    if strategy is Strategy.ONESHOT:
        return extract_oneshot(e, backend, react.postprocess, settings, catalog)
    if strategy is Strategy.REACT:
        return extract_react(e, backend, react, settings, catalog)
    return extract_agentic(e, backend, react.postprocess, settings, catalog)


@dataclass
class BatchResult:
    results: list[ExtractionResult] = field(default_factory=list)
    failures: dict[str, str] = field(default_factory=dict)  # encounter id -> error


def run_batch(
    strategy: Strategy | str,
    encounters: Sequence[Encounter],
    backend_for: Callable[[Encounter], Backend],
    react: ReactConfig = ReactConfig(),
    settings: LLMSettings | None = None,
    concurrency: int = 4,
    fail_fast: bool = False,
    catalog: PromptCatalog = DEFAULT_CATALOG,
) -> BatchResult:
    """Extract every encounter; results come back sorted by encounter id.

    A failing encounter is recorded in ``failures`` and the batch goes on,
    unless ``fail_fast`` is set, in which case the first error propagates.
    """
    done = 0
    lock = threading.Lock()
    total = len(encounters)

    def one(e: Encounter):
        nonlocal done
        try:
            res = run_strategy(strategy, e, backend_for(e), react, settings, catalog)
            out = (e.id, res, None)
        except Exception as exc:
            if fail_fast:
                raise
            log.error("encounter %s failed: %s", e.id, exc)
            out = (e.id, None, f"{type(exc).__name__}: {exc}")
        with lock:
            done += 1
            log.info("[%d/%d] %s", done, total, e.id)
        return out

    batch = BatchResult()
    for eid, res, err in sorted(map_bounded(one, list(encounters), concurrency), key=lambda r: r[0]):
        if err is None:
            batch.results.append(res)
        else:
            batch.failures[eid] = err
    return batch
