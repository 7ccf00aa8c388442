"""Shared result types and the backend call used by every strategy."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from orderpipe.llm_gateway import Backend, ChatMessage, LLMSettings, Role, complete_with_retry
from orderpipe.orders import MedicalOrder


class Strategy(str, Enum):
    ONESHOT = "oneshot"
    REACT = "react"
    AGENTIC = "agentic"


@dataclass
class Diagnostics:
    calls: list[str] = field(default_factory=list)  # stage name per backend call, in order
    raw_responses: list[str] = field(default_factory=list)
    parse_notes: list[str] = field(default_factory=list)
    violations: list[list[str]] = field(default_factory=list)  # one list per ReAct iteration
    iterations: int = 0
    exhausted: bool = False
    fallback: bool = False
    repair_log: list[str] = field(default_factory=list)
    wall_time: float = 0.0

    def summary(self) -> dict:
        """Run-independent view (no timings) written into prediction files."""
        return {
            "calls": len(self.calls),
            "stages": list(self.calls),
            "iterations": self.iterations,
            "violations_per_iteration": [len(v) for v in self.violations],
            "exhausted": self.exhausted,
            "fallback": self.fallback,
            "parse_notes": list(self.parse_notes),
            "repairs": list(self.repair_log),
        }


@dataclass
class ExtractionResult:
    encounter_id: str
    strategy: Strategy
    orders: list[MedicalOrder]
    diagnostics: Diagnostics

    def to_record(self) -> dict:
        return {
            "encounter_id": self.encounter_id,
            "strategy": self.strategy.value,
            "orders": [o.to_dict() for o in self.orders],
            "diagnostics": self.diagnostics.summary(),
        }


def call_backend(
    backend: Backend,
    settings: LLMSettings,
    system: str,
    user: str,
    stage: str,
    diag: Diagnostics,
) -> str:
    messages: Sequence[ChatMessage] = (ChatMessage(Role.SYSTEM, system), ChatMessage(Role.USER, user))
    resp = complete_with_retry(backend, settings.request(messages), settings.retry)
    diag.calls.append(stage)
    diag.raw_responses.append(resp.text)
    return resp.text
