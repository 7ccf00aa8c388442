"""Constraint checks run on ReAct candidates; each violation is fed back to the model."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from orderpipe.metrics.text import tokenize
from orderpipe.orders import OrderType, PostprocessConfig, word_count
from orderpipe.strategies.parsing import CandidateOrder
from orderpipe.transcript import Speaker, Transcript


class ViolationKind(str, Enum):
    NOT_DOCTOR_INITIATED = "NOT_DOCTOR_INITIATED"
    WORDING_MISMATCH = "WORDING_MISMATCH"
    TOO_LONG = "TOO_LONG"
    COMPOUND = "COMPOUND"
    DUPLICATE = "DUPLICATE"
    OVER_CAP = "OVER_CAP"
    BAD_SCHEMA = "BAD_SCHEMA"


@dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    candidate: int | None  # None: applies to the whole answer
    message: str

    def __str__(self) -> str:
        return f"- [{self.kind.value}] {self.message}"


@dataclass(frozen=True)
class ReactConfig:
    max_iterations: int = 3
    wording_overlap_threshold: float = 0.6
    include_previous_output: bool = True
    postprocess: PostprocessConfig = field(default_factory=PostprocessConfig)

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 0.0 <= self.wording_overlap_threshold <= 1.0:
            raise ValueError("wording_overlap_threshold must be in [0, 1]")


# Keywords that mark an order item, grouped by the order type they usually signal.
COMPOUND_KEYWORDS: dict[OrderType, tuple[str, ...]] = {
    OrderType.LAB: ("test", "panel", "level", "a1c"),
    OrderType.IMAGING: ("scan", "x-ray", "mri", "ct", "ultrasound"),
    OrderType.MEDICATION: ("prescription", "refill"),
    OrderType.FOLLOWUP: ("follow",),
}
_KEYWORD_SEQS = [tuple(tokenize(kw)) for group in COMPOUND_KEYWORDS.values() for kw in group]


def _has_keyword(tokens: Sequence[str]) -> bool:
    for seq in _KEYWORD_SEQS:
        n = len(seq)
        if any(tuple(tokens[k : k + n]) == seq for k in range(len(tokens) - n + 1)):
            return True
    return False


def is_compound(description: str) -> bool:
    """True when "and" joins two segments that each contain an order keyword."""
    segments: list[list[str]] = [[]]
    for tok in tokenize(description):
        if tok == "and":
            segments.append([])
        else:
            segments[-1].append(tok)
    flags = [_has_keyword(seg) for seg in segments]
    return any(a and b for a, b in zip(flags, flags[1:]))


def wording_coverage(description: str, t: Transcript, provenance: Sequence[int]) -> float:
    """Fraction of description tokens that occur in the cited turns."""
    desc = tokenize(description)
    if not desc:
        return 0.0
    vocab: set[str] = set()
    for idx in provenance:
        turn = t.turn(idx)
        if turn is not None:
            vocab.update(tokenize(turn.text))
    return sum(tok in vocab for tok in desc) / len(desc)


def validate_candidates(cands: Sequence[CandidateOrder], t: Transcript, cfg: ReactConfig = ReactConfig()) -> list[Violation]:
    pp = cfg.postprocess
    out: list[Violation] = []
    seen: dict[tuple, int] = {}
    n_valid = 0
    for k, c in enumerate(cands):
        if c.order is None:
            problems = "; ".join(str(v) for v in c.schema_violations) or "not an order object"
            out.append(Violation(ViolationKind.BAD_SCHEMA, k, f"order {k} does not match the required schema: {problems}"))
            continue
        o = c.order
        label = f"order {k} ({o.description!r})"

        bad_turns = [i for i in o.provenance if t.speaker_of(i) is not Speaker.DOCTOR]
        if bad_turns:
            out.append(Violation(
                ViolationKind.NOT_DOCTOR_INITIATED, k,
                f"{label} cites turns {bad_turns}, which are not doctor turns; cite only turns where the doctor gives the order",
            ))

        cov = wording_coverage(o.description, t, o.provenance)
        if cov < cfg.wording_overlap_threshold:
            out.append(Violation(
                ViolationKind.WORDING_MISMATCH, k,
                f"{label}: only {cov:.0%} of its words appear in the cited turns; use the doctor's exact wording",
            ))

        for name, text in (("description", o.description), ("reason", o.reason)):
            n = word_count(text)
            if n > pp.max_words:
                out.append(Violation(
                    ViolationKind.TOO_LONG, k, f"{label}: {name} has {n} words; the limit is {pp.max_words}",
                ))

        if is_compound(o.description):
            out.append(Violation(
                ViolationKind.COMPOUND, k, f"{label} combines several items; emit one order per item",
            ))

        first = seen.get(o.dedup_key)
        if first is not None:
            out.append(Violation(
                ViolationKind.DUPLICATE, k, f"{label} repeats order {first}; list each order once",
            ))
        else:
            seen[o.dedup_key] = k

        n_valid += 1
        if n_valid > pp.max_orders:
            out.append(Violation(
                ViolationKind.OVER_CAP, k, f"{label} exceeds the limit of {pp.max_orders} orders",
            ))
        if len(set(o.provenance)) > pp.max_provenance:
            out.append(Violation(
                ViolationKind.OVER_CAP, k,
                f"{label} cites {len(set(o.provenance))} turns; the limit is {pp.max_provenance}",
            ))
    return out
