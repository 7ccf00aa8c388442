"""Medical order data model, schema validation and deterministic post-processing."""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import TYPE_CHECKING, Any, Mapping, Sequence

if TYPE_CHECKING:
    from orderpipe.transcript import Transcript


class OrderType(str, Enum):
    # declaration order is the tie-break order when sorting orders
    MEDICATION = "medication"
    LAB = "lab"
    IMAGING = "imaging"
    FOLLOWUP = "followup"

    @property
    def rank(self) -> int:
        return _TYPE_RANK[self]


_TYPE_RANK = {t: k for k, t in enumerate(OrderType)}

# keys are folded labels: lowercase, alphanumerics only
_TYPE_LABELS = {
    "medication": OrderType.MEDICATION,
    "med": OrderType.MEDICATION,
    "prescription": OrderType.MEDICATION,
    "lab": OrderType.LAB,
    "laboratory": OrderType.LAB,
    "labtest": OrderType.LAB,
    "imaging": OrderType.IMAGING,
    "radiology": OrderType.IMAGING,
    "followup": OrderType.FOLLOWUP,
    "referral": OrderType.FOLLOWUP,
}


def normalize_order_type(s: Any) -> OrderType | None:
    """Fold a raw label onto an :class:`OrderType`; ``None`` means unknown."""
    if isinstance(s, OrderType):
        return s
    if not isinstance(s, str):
        return None
    return _TYPE_LABELS.get(re.sub(r"[^0-9a-z]", "", s.lower()))


@dataclass(frozen=True)
class MedicalOrder:
    order_type: OrderType
    description: str
    reason: str = ""
    provenance: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "provenance", tuple(self.provenance))

    def to_dict(self) -> dict:
        return {
            "order_type": self.order_type.value,
            "description": self.description,
            "reason": self.reason,
            "provenance": list(self.provenance),
        }

    @property
    def dedup_key(self) -> tuple[OrderType, str]:
        return self.order_type, " ".join(self.description.split()).casefold()


@dataclass(frozen=True)
class SchemaViolation:
    kind: str  # MissingField | BadType | UnknownOrderType | EmptyProvenance
    field: str
    detail: str = ""

    def __str__(self) -> str:
        return f"{self.kind}({self.field}{': ' + self.detail if self.detail else ''})"


class SchemaError(ValueError):
    def __init__(self, violations: Sequence[SchemaViolation]):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


_TURN_REF = re.compile(r"^\s*(?:turn\s*)?#?\s*(\d+)\s*$", re.IGNORECASE)


def _coerce_turn(x: Any) -> int | None:
    if isinstance(x, bool):
        return None
    if isinstance(x, int):
        return x if x >= 0 else None
    if isinstance(x, float) and x.is_integer() and x >= 0:
        return int(x)
    if isinstance(x, str):
        m = _TURN_REF.match(x)
        if m:
            return int(m.group(1))
    return None


def validate_order_schema(raw: Any) -> MedicalOrder:
    """Check one structured order and build a :class:`MedicalOrder`.

    Both ``order_type`` and ``order type`` keys are accepted, a missing reason
    becomes the empty string, and provenance entries are coerced to ints
    (``126``, ``"126"``, ``"Turn 126"``). All problems are collected and
    raised together as a :class:`SchemaError`.
    """
    if not isinstance(raw, Mapping):
        raise SchemaError([SchemaViolation("BadType", "order", f"expected an object, got {type(raw).__name__}")])
    problems: list[SchemaViolation] = []

    label = raw.get("order_type", raw.get("order type"))
    order_type = None
    if label is None:
        problems.append(SchemaViolation("MissingField", "order_type"))
    elif not isinstance(label, str):
        problems.append(SchemaViolation("BadType", "order_type", repr(label)))
    else:
        order_type = normalize_order_type(label)
        if order_type is None:
            problems.append(SchemaViolation("UnknownOrderType", "order_type", label))

    desc = raw.get("description")
    if desc is None or (isinstance(desc, str) and not desc.strip()):
        problems.append(SchemaViolation("MissingField", "description"))
    elif not isinstance(desc, str):
        problems.append(SchemaViolation("BadType", "description", repr(desc)))

    reason = raw.get("reason")
    if reason is None:
        reason = ""
    elif not isinstance(reason, str):
        problems.append(SchemaViolation("BadType", "reason", repr(reason)))

    prov = raw.get("provenance")
    turns: list[int] = []
    if prov is None or prov == [] or prov == "":
        problems.append(SchemaViolation("EmptyProvenance", "provenance"))
    else:
        items = prov if isinstance(prov, (list, tuple)) else [prov]
        bad = [x for x in items if _coerce_turn(x) is None]
        if bad:
            problems.append(SchemaViolation("BadType", "provenance", f"not turn numbers: {bad!r}"))
        else:
            turns = [_coerce_turn(x) for x in items]

    if problems:
        raise SchemaError(problems)
    return MedicalOrder(order_type, desc, reason, tuple(turns))


def truncate_words(s: str, n: int) -> str:
    """Keep the first ``n`` whitespace-separated words, rejoined with single spaces."""
    if n < 1:
        raise ValueError("word cap must be >= 1")
    return " ".join(s.split()[:n])


def word_count(s: str) -> int:
    return len(s.split())


@dataclass(frozen=True)
class PostprocessConfig:
    max_words: int = 20
    max_orders: int = 10
    max_provenance: int = 5
    require_doctor_provenance: bool = True

    def __post_init__(self):
        for name in ("max_words", "max_orders", "max_provenance"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


@dataclass
class RepairLog:
    entries: list[str] = field(default_factory=list)

    def add(self, msg: str) -> None:
        self.entries.append(msg)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def _sort_key(o: MedicalOrder):
    return (min(o.provenance), o.order_type.rank, o.description)


def postprocess_orders(
    raw: Sequence[MedicalOrder], t: "Transcript", cfg: PostprocessConfig = PostprocessConfig()
) -> tuple[list[MedicalOrder], RepairLog]:
    """Make a list of schema-valid orders consistent with the transcript and the caps.

    Steps, in order: drop provenance turns that are absent (or, when
    ``require_doctor_provenance``, not spoken by the doctor) and orders left
    without provenance; truncate description/reason to ``max_words``; merge
    duplicates on (type, folded description) keeping the first and uniting
    provenance; sort and cap each provenance list; sort orders by earliest
    turn, then type, then description; cap the list at ``max_orders``.
    The result is a fixed point: running it again changes nothing.
    """
    log = RepairLog()
    present = t.indices()
    doctor = {turn.index for turn in t.turns if turn.speaker.value == "DOCTOR"}
    allowed = doctor if cfg.require_doctor_provenance else present

    kept: list[MedicalOrder] = []
    for k, o in enumerate(raw):
        prov = [i for i in o.provenance if i in allowed]
        dropped = [i for i in o.provenance if i not in allowed]
        if dropped:
            missing = [i for i in dropped if i not in present]
            other = [i for i in dropped if i in present]
            if missing:
                log.add(f"order {k}: dropped provenance {missing} (not in transcript)")
            if other:
                log.add(f"order {k}: dropped provenance {other} (not a doctor turn)")
        if not prov:
            log.add(f"order {k}: dropped {o.description!r} (no valid provenance left)")
            continue
        kept.append(replace(o, provenance=tuple(prov)))

    truncated = []
    for o in kept:
        desc = truncate_words(o.description, cfg.max_words)
        reason = " ".join(o.reason.split()[: cfg.max_words])
        if word_count(o.description) > cfg.max_words:
            log.add(f"truncated description {o.description!r} to {cfg.max_words} words")
        if word_count(o.reason) > cfg.max_words:
            log.add(f"truncated reason {o.reason!r} to {cfg.max_words} words")
        truncated.append(replace(o, description=desc, reason=reason))

    merged: list[MedicalOrder] = []
    by_key: dict[tuple, int] = {}
    for o in truncated:
        pos = by_key.get(o.dedup_key)
        if pos is None:
            by_key[o.dedup_key] = len(merged)
            merged.append(o)
            continue
        first = merged[pos]
        union = tuple(dict.fromkeys(first.provenance + o.provenance))
        merged[pos] = replace(first, provenance=union)
        log.add(f"merged duplicate {o.order_type.value} {o.description!r} into earlier order")

    capped = []
    for o in merged:
        prov = sorted(set(o.provenance))
        if len(prov) > cfg.max_provenance:
            log.add(f"capped provenance of {o.description!r} from {len(prov)} to {cfg.max_provenance} turns")
            prov = prov[: cfg.max_provenance]
        capped.append(replace(o, provenance=tuple(prov)))

    ordered = sorted(capped, key=_sort_key)
    if ordered != capped:
        log.add("reordered orders by provenance")

    if len(ordered) > cfg.max_orders:
        log.add(f"capped order list from {len(ordered)} to {cfg.max_orders}")
        ordered = ordered[: cfg.max_orders]
    return ordered, log
