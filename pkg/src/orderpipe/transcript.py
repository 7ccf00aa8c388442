"""Encounter transcripts: parsing, speaker normalization, rendering and dataset loading."""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping

from orderpipe.orders import MedicalOrder, OrderType, SchemaError, validate_order_schema

log = logging.getLogger(__name__)


class Speaker(str, Enum):
    DOCTOR = "DOCTOR"
    PATIENT = "PATIENT"
    OTHER = "OTHER"


# Case-insensitive prefixes, checked in order.
SPEAKER_PREFIXES: tuple[tuple[str, Speaker], ...] = (
    ("doctor", Speaker.DOCTOR),
    ("physician", Speaker.DOCTOR),
    ("dr", Speaker.DOCTOR),
    ("patient", Speaker.PATIENT),
    ("pt", Speaker.PATIENT),
)


def normalize_speaker(raw: str) -> Speaker:
    """Map a free-form speaker label onto DOCTOR / PATIENT / OTHER.

    Matching is a case-insensitive prefix test after stripping whitespace and
    a leading bracket, so ``"Dr."``, ``"[doctor]"`` and ``"PHYSICIAN_1"`` are
    all doctors and ``"Pt"`` is a patient. Anything else is OTHER.
    """
    s = str(raw).strip().lstrip("[(").lower()
    for prefix, speaker in SPEAKER_PREFIXES:
        if s.startswith(prefix):
            return speaker
    return Speaker.OTHER


@dataclass(frozen=True)
class Turn:
    index: int
    speaker: Speaker
    text: str = ""

    def __post_init__(self):
        if self.index < 0:
            raise ValueError(f"turn index must be >= 0, got {self.index}")


@dataclass(frozen=True)
class Transcript:
    turns: tuple[Turn, ...] = ()
    # "source" when indices come from the record, "sequential" when assigned 0..n-1
    id_mode: str = "source"

    def __post_init__(self):
        object.__setattr__(self, "turns", tuple(self.turns))
        for prev, cur in zip(self.turns, self.turns[1:]):
            if cur.index <= prev.index:
                raise ValueError(
                    f"turn indices must strictly increase: {prev.index} then {cur.index}"
                )

    def __len__(self) -> int:
        return len(self.turns)

    def __iter__(self) -> Iterator[Turn]:
        return iter(self.turns)

    def indices(self) -> frozenset[int]:
        return frozenset(t.index for t in self.turns)

    def turn(self, index: int) -> Turn | None:
        for t in self.turns:
            if t.index == index:
                return t
        return None

    def speaker_of(self, index: int) -> Speaker | None:
        t = self.turn(index)
        return None if t is None else t.speaker


@dataclass(frozen=True)
class Encounter:
    id: str
    transcript: Transcript
    gold_orders: tuple[MedicalOrder, ...] | None = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("encounter id must be non-empty")
        if self.gold_orders is not None:
            object.__setattr__(self, "gold_orders", tuple(self.gold_orders))


class TranscriptError(Exception):
    pass


class MalformedRecord(TranscriptError):
    def __init__(self, message: str, encounter_id: str | None = None):
        self.encounter_id = encounter_id
        prefix = f"encounter {encounter_id!r}: " if encounter_id else ""
        super().__init__(prefix + message)


class BadProvenance(TranscriptError):
    def __init__(self, encounter_id: str, index: int):
        self.encounter_id = encounter_id
        self.index = index
        super().__init__(
            f"encounter {encounter_id!r}: gold order cites turn {index}, which is not in the transcript"
        )


@dataclass(frozen=True)
class FieldMap:
    """Names of the on-disk fields. Remap here when a source uses other names."""

    id: str = "id"
    transcript: str = "transcript"
    turn_id: str = "turn_id"
    speaker: str = "speaker"
    text: str = "text"
    orders: str = "expected_orders"

    @classmethod
    def from_mapping(cls, m: Mapping[str, str]) -> "FieldMap":
        return cls(**{k: v for k, v in m.items() if k in cls.__dataclass_fields__})


DEFAULT_FIELDS = FieldMap()


def doctor_turns(t: Transcript) -> set[int]:
    return {turn.index for turn in t.turns if turn.speaker is Speaker.DOCTOR}


def render_transcript(t: Transcript) -> str:
    """One ``Turn {index} - {SPEAKER}: {text}`` line per turn, newline-joined."""
    return "\n".join(f"Turn {turn.index} - {turn.speaker.value}: {turn.text}" for turn in t.turns)


def parse_transcript(raw_turns: Any, encounter_id: str | None = None, fields: FieldMap = DEFAULT_FIELDS) -> Transcript:
    if not isinstance(raw_turns, list):
        raise MalformedRecord("transcript must be a list of turns", encounter_id)
    has_ids = [isinstance(rt, Mapping) and rt.get(fields.turn_id) is not None for rt in raw_turns]
    if any(has_ids) and not all(has_ids):
        raise MalformedRecord("some turns carry a turn id and some do not", encounter_id)
    preserve = all(has_ids) and bool(raw_turns)
    turns = []
    for pos, rt in enumerate(raw_turns):
        if not isinstance(rt, Mapping):
            raise MalformedRecord(f"turn {pos} is not an object", encounter_id)
        if fields.speaker not in rt:
            raise MalformedRecord(f"turn {pos} has no speaker", encounter_id)
        if preserve:
            try:
                index = int(rt[fields.turn_id])
            except (TypeError, ValueError):
                raise MalformedRecord(f"turn {pos} has a non-integer id {rt[fields.turn_id]!r}", encounter_id)
        else:
            index = pos
        text = rt.get(fields.text) or ""
        try:
            turns.append(Turn(index, normalize_speaker(rt[fields.speaker]), str(text)))
        except ValueError as exc:
            raise MalformedRecord(str(exc), encounter_id) from None
    try:
        return Transcript(tuple(turns), id_mode="source" if preserve else "sequential")
    except ValueError as exc:
        raise MalformedRecord(str(exc), encounter_id) from None


def parse_encounter(doc: Any, fields: FieldMap = DEFAULT_FIELDS) -> Encounter:
    """Build an :class:`Encounter` from one input record.

    Raises :class:`MalformedRecord` for structural problems and
    :class:`BadProvenance` when a gold order cites a turn the transcript lacks.
    """
    if not isinstance(doc, Mapping):
        raise MalformedRecord("record is not an object")
    eid = doc.get(fields.id)
    if eid is None or str(eid).strip() == "":
        raise MalformedRecord(f"missing {fields.id!r}")
    eid = str(eid)
    if fields.transcript not in doc:
        raise MalformedRecord(f"missing {fields.transcript!r}", eid)
    transcript = parse_transcript(doc[fields.transcript], eid, fields)

    gold = None
    raw_orders = doc.get(fields.orders)
    if raw_orders is not None:
        if not isinstance(raw_orders, list):
            raise MalformedRecord(f"{fields.orders!r} must be a list", eid)
        present = transcript.indices()
        gold = []
        for k, ro in enumerate(raw_orders):
            try:
                order = validate_order_schema(ro)
            except SchemaError as exc:
                raise MalformedRecord(f"gold order {k}: {exc}", eid) from None
            for idx in order.provenance:
                if idx not in present:
                    raise BadProvenance(eid, idx)
            gold.append(order)
    return Encounter(eid, transcript, None if gold is None else tuple(gold))


def serialize_encounter(e: Encounter, fields: FieldMap = DEFAULT_FIELDS) -> dict:
    doc: dict[str, Any] = {fields.id: e.id}
    turns = []
    for t in e.transcript.turns:
        rt: dict[str, Any] = {}
        if e.transcript.id_mode == "source":
            rt[fields.turn_id] = t.index
        rt[fields.speaker] = t.speaker.value.lower()
        rt[fields.text] = t.text
        turns.append(rt)
    doc[fields.transcript] = turns
    if e.gold_orders is not None:
        doc[fields.orders] = [o.to_dict() for o in e.gold_orders]
    return doc


# Reference order counts for the official shared-task splits.
REFERENCE_STATS = {
    "train": {"encounters": 63, "followup": 25, "imaging": 14, "lab": 29, "medication": 75, "total": 143},
    "dev": {"encounters": 100, "followup": 41, "imaging": 26, "lab": 71, "medication": 117, "total": 255},
}


@dataclass
class DatasetStats:
    encounters: int = 0
    by_type: dict[str, int] = field(default_factory=lambda: {t.value: 0 for t in OrderType})
    total: int = 0

    @classmethod
    def of(cls, encounters: Iterable[Encounter]) -> "DatasetStats":
        counts: Counter[str] = Counter()
        n = 0
        for e in encounters:
            n += 1
            for o in e.gold_orders or ():
                counts[o.order_type.value] += 1
        by_type = {t.value: counts.get(t.value, 0) for t in OrderType}
        return cls(n, by_type, sum(by_type.values()))

    def as_dict(self) -> dict[str, int]:
        return {"encounters": self.encounters, **self.by_type, "total": self.total}


@dataclass
class Dataset:
    encounters: list[Encounter]
    stats: DatasetStats
    errors: list[str] = field(default_factory=list)
    # Reference counts that disagree with what was loaded, for train/dev splits.
    stats_mismatch: dict[str, tuple[int, int]] = field(default_factory=dict)

    def __iter__(self):
        return iter(self.encounters)

    def __len__(self) -> int:
        return len(self.encounters)


def _iter_records(path: Path) -> Iterator[tuple[str, Any]]:
    if path.is_dir():
        files = sorted(p for p in path.iterdir() if p.suffix in (".json", ".jsonl") and p.is_file())
    else:
        files = [path]
    for f in files:
        text = f.read_text(encoding="utf-8")
        if f.suffix == ".jsonl":
            for lineno, line in enumerate(text.splitlines(), 1):
                if line.strip():
                    yield f"{f.name}:{lineno}", json.loads(line)
        else:
            if not text.strip():
                continue
            doc = json.loads(text)
            if isinstance(doc, list):
                for k, rec in enumerate(doc):
                    yield f"{f.name}[{k}]", rec
            else:
                yield f.name, doc


def load_dataset(
    path: str | Path,
    split: str = "custom",
    strict: bool = False,
    fields: FieldMap = DEFAULT_FIELDS,
) -> Dataset:
    """Load every encounter under ``path`` (a file or a directory of ``.json``/``.jsonl``).

    In strict mode the first bad record raises; otherwise bad records are
    skipped and described in ``Dataset.errors``. For the ``train`` and ``dev``
    splits the loaded counts are compared with the reference distribution.
    """
    if split not in ("train", "dev", "custom"):
        raise ValueError(f"unknown split {split!r}")
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)

    encounters: list[Encounter] = []
    errors: list[str] = []
    seen: set[str] = set()
    try:
        records = list(_iter_records(path))
    except (OSError, json.JSONDecodeError) as exc:
        raise OSError(f"cannot read dataset at {path}: {exc}") from exc
    for where, rec in records:
        try:
            enc = parse_encounter(rec, fields)
            if enc.id in seen:
                raise MalformedRecord("duplicate encounter id", enc.id)
        except TranscriptError as exc:
            if strict:
                raise
            errors.append(f"{where}: {exc}")
            log.warning("skipping %s: %s", where, exc)
            continue
        seen.add(enc.id)
        encounters.append(enc)

    stats = DatasetStats.of(encounters)
    mismatch = {}
    if split in REFERENCE_STATS:
        got = stats.as_dict()
        for key, want in REFERENCE_STATS[split].items():
            if got[key] != want:
                mismatch[key] = (got[key], want)
        if mismatch:
            log.warning("%s split differs from reference counts: %s", split, mismatch)
    return Dataset(encounters, stats, errors, mismatch)
