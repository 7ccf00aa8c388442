"""Pull order arrays out of free-form model output."""

from __future__ import annotations

import ast
import json
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from orderpipe.orders import MedicalOrder, SchemaError, SchemaViolation, validate_order_schema


class Stage(str, Enum):
    ONESHOT = "oneshot"
    REACT_ACTION = "react_action"
    IDENTIFIER = "identifier"
    MAPPER = "mapper"
    STRUCTURER = "structurer"
    VALIDATOR = "validator"


@dataclass
class CandidateOrder:
    raw: Any
    source_stage: Stage
    order: MedicalOrder | None = None
    schema_violations: list[SchemaViolation] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return self.order is not None


@dataclass
class ParsedResponse:
    candidates: list[CandidateOrder]
    diagnostics: list[str] = field(default_factory=list)

    @property
    def orders(self) -> list[MedicalOrder]:
        return [c.order for c in self.candidates if c.order is not None]


class NoParsableOutput(ValueError):
    pass


_FENCE = re.compile(r"```[ \t]*[A-Za-z0-9_-]*[ \t]*\n?(.*?)```", re.DOTALL)
_TRAILING_COMMA = re.compile(r",(\s*[\]}])")
_CLOSE = {"[": "]", "{": "}"}


def strip_code_fences(text: str) -> str:
    blocks = _FENCE.findall(text)
    if blocks:
        return "\n".join(blocks)
    return text.replace("```", "")


def _balanced_end(text: str, start: int) -> int | None:
    """Index one past the bracket closing ``text[start]``; string literals are skipped."""
    stack = [_CLOSE[text[start]]]
    in_str = False
    escaped = False
    for k in range(start + 1, len(text)):
        ch = text[k]
        if in_str:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_str = False
        elif ch == '"':
            in_str = True
        elif ch in _CLOSE:
            stack.append(_CLOSE[ch])
        elif ch in "]}":
            if ch != stack.pop():
                return None
            if not stack:
                return k + 1
    return None


def _loads_lenient(snippet: str) -> Any:
    try:
        return json.loads(snippet)
    except json.JSONDecodeError:
        pass
    fixed = _TRAILING_COMMA.sub(r"\1", snippet)
    try:
        return json.loads(fixed)
    except json.JSONDecodeError:
        pass
    # single-quoted, Python-literal style output
    try:
        return ast.literal_eval(fixed)
    except (ValueError, SyntaxError, MemoryError, RecursionError):
        return None


def top_level_spans(text: str) -> list[tuple[int, int]]:
    """Balanced ``[...]`` / ``{...}`` spans not nested inside one another, left to right."""
    spans = []
    k = 0
    while k < len(text):
        if text[k] in _CLOSE:
            end = _balanced_end(text, k)
            if end is not None:
                spans.append((k, end))
                k = end
                continue
        k += 1
    return spans


def find_orders_payload(text: str) -> list:
    """Return the first parsable top-level JSON array in ``text``.

    Falls back to the first parsable top-level object: an object holding a
    single list of objects (``{"orders": [...]}``) yields that list, any other
    object is wrapped as a one-element list.
    """
    body = strip_code_fences(text)
    objects = []
    for start, end in top_level_spans(body):
        value = _loads_lenient(body[start:end])
        if body[start] == "[" and isinstance(value, list):
            return value
        if body[start] == "{" and isinstance(value, dict):
            objects.append(value)
    for obj in objects:
        lists = [v for v in obj.values() if isinstance(v, list)]
        if len(obj) == 1 and len(lists) == 1 and all(isinstance(x, dict) for x in lists[0]):
            return lists[0]
        return [obj]
    raise NoParsableOutput(f"no JSON array or object found in output: {text[:120]!r}")


def parse_orders_response(text: str, stage: Stage = Stage.ONESHOT) -> ParsedResponse:
    """Parse model output into candidates; schema failures are kept and described, not dropped."""
    payload = find_orders_payload(text)
    out = ParsedResponse([])
    for k, raw in enumerate(payload):
        try:
            order = validate_order_schema(raw)
        except SchemaError as exc:
            out.candidates.append(CandidateOrder(raw, stage, None, exc.violations))
            out.diagnostics.append(f"BAD_SCHEMA element {k}: {exc}")
            continue
        out.candidates.append(CandidateOrder(raw, stage, order))
    return out
