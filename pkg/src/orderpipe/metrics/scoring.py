"""Per-encounter scores and corpus aggregation."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Sequence

from orderpipe.metrics.alignment import align_orders
from orderpipe.metrics.text import multilabel_fraction, rouge1_fraction
from orderpipe.orders import MedicalOrder

HEADLINE_COLUMNS = (
    ("description_rouge1", "Description (Rouge1_F1)"),
    ("reason_rouge1", "Reason (Rouge1_F1)"),
    ("ordertype_strict_f1", "Order Type (Strict_F1)"),
    ("provenance_multilabel_f1", "Provenance (MultiLabel_F1)"),
)


@dataclass
class EncounterScore:
    description_rouge1: float
    reason_rouge1: float
    ordertype_tp: int
    ordertype_fp: int
    ordertype_fn: int
    provenance_f1: float
    n_pred: int
    n_gold: int
    encounter_id: str = ""

    @property
    def ordertype_f1(self) -> float:
        return strict_f1(self.ordertype_tp, self.ordertype_fp, self.ordertype_fn)


def strict_f1(tp: int, fp: int, fn: int) -> float:
    if tp + fp + fn == 0:
        return 1.0
    return 2 * tp / (2 * tp + fp + fn)


def score_encounter(
    pred: Sequence[MedicalOrder],
    gold: Sequence[MedicalOrder],
    encounter_id: str = "",
    require_same_type: bool = False,
) -> EncounterScore:
    """Align predictions to gold and score the four components.

    Text and provenance scores average over ``max(n_pred, n_gold)`` slots, so
    every unmatched prediction or gold order counts as a zero.
    """
    n_pred, n_gold = len(pred), len(gold)
    if n_pred == 0 and n_gold == 0:
        return EncounterScore(1.0, 1.0, 0, 0, 0, 1.0, 0, 0, encounter_id)
    al = align_orders(pred, gold, require_same_type)
    slots = max(n_pred, n_gold)
    desc = reason = prov = Fraction(0)
    tp = 0
    for i, j in al.pairs:
        p, g = pred[i], gold[j]
        desc += rouge1_fraction(p.description, g.description)
        reason += rouge1_fraction(p.reason, g.reason)
        prov += multilabel_fraction(p.provenance, g.provenance)
        tp += p.order_type == g.order_type
    return EncounterScore(
        float(desc / slots),
        float(reason / slots),
        tp,
        n_pred - tp,
        n_gold - tp,
        float(prov / slots),
        n_pred,
        n_gold,
        encounter_id,
    )


def average_score(components: Sequence[float]) -> float:
    return sum(components) / len(components)


@dataclass
class CorpusReport:
    description_rouge1: float
    reason_rouge1: float
    ordertype_strict_f1: float
    provenance_multilabel_f1: float
    average_score: float
    per_encounter: list[EncounterScore] = field(default_factory=list)
    ordertype_mode: str = "micro"

    def headline(self) -> dict[str, float]:
        return {key: getattr(self, key) for key, _ in HEADLINE_COLUMNS}

    def table_header(self, label: str = "") -> str:
        return " | ".join([label] + [name for _, name in HEADLINE_COLUMNS] + ["Avg. Score"])

    def table_row(self, label: str = "") -> str:
        vals = [f"{v:.3f}" for v in self.headline().values()] + [f"{self.average_score:.3f}"]
        return " | ".join([label] + vals)

    def to_dict(self) -> dict:
        return {
            **self.headline(),
            "average_score": self.average_score,
            "ordertype_mode": self.ordertype_mode,
            "columns": {name: getattr(self, key) for key, name in HEADLINE_COLUMNS} | {"Avg. Score": self.average_score},
            "per_encounter": [asdict(s) | {"ordertype_f1": s.ordertype_f1} for s in self.per_encounter],
        }


def aggregate(scores: Sequence[EncounterScore], ordertype_mode: str = "micro") -> CorpusReport:
    """Corpus metrics: macro mean for text and provenance, pooled (micro) strict F1 for type.

    ``ordertype_mode="macro"`` averages per-encounter strict F1 instead.
    """
    if not scores:
        raise ValueError("cannot aggregate an empty list of scores")
    n = len(scores)
    desc = sum(s.description_rouge1 for s in scores) / n
    reason = sum(s.reason_rouge1 for s in scores) / n
    prov = sum(s.provenance_f1 for s in scores) / n
    if ordertype_mode == "micro":
        otype = strict_f1(
            sum(s.ordertype_tp for s in scores),
            sum(s.ordertype_fp for s in scores),
            sum(s.ordertype_fn for s in scores),
        )
    elif ordertype_mode == "macro":
        otype = sum(s.ordertype_f1 for s in scores) / n
    else:
        raise ValueError(f"unknown ordertype_mode {ordertype_mode!r}")
    return CorpusReport(
        desc, reason, otype, prov, average_score([desc, reason, otype, prov]), list(scores), ordertype_mode
    )
