from orderpipe.strategies.agentic import AGENT_STAGES, StageFailed, extract_agentic
from orderpipe.strategies.base import Diagnostics, ExtractionResult, Strategy
from orderpipe.strategies.catalog import DEFAULT_CATALOG, PromptCatalog
from orderpipe.strategies.oneshot import build_oneshot_messages, extract_oneshot
from orderpipe.strategies.parsing import (
    CandidateOrder,
    NoParsableOutput,
    ParsedResponse,
    Stage,
    parse_orders_response,
)
from orderpipe.strategies.react import build_react_prompts, extract_react
from orderpipe.strategies.validation import ReactConfig, Violation, ViolationKind, validate_candidates

__all__ = [
    "AGENT_STAGES",
    "CandidateOrder",
    "DEFAULT_CATALOG",
    "Diagnostics",
    "ExtractionResult",
    "NoParsableOutput",
    "ParsedResponse",
    "PromptCatalog",
    "ReactConfig",
    "Stage",
    "StageFailed",
    "Strategy",
    "Violation",
    "ViolationKind",
    "build_oneshot_messages",
    "build_react_prompts",
    "extract_agentic",
    "extract_oneshot",
    "extract_react",
    "parse_orders_response",
    "validate_candidates",
]
