from orderpipe.metrics.alignment import Alignment, align_orders
from orderpipe.metrics.scoring import (
    CorpusReport,
    EncounterScore,
    aggregate,
    average_score,
    score_encounter,
    strict_f1,
)
from orderpipe.metrics.text import multilabel_f1, rouge1_f1, tokenize

__all__ = [
    "Alignment",
    "CorpusReport",
    "EncounterScore",
    "aggregate",
    "align_orders",
    "average_score",
    "multilabel_f1",
    "rouge1_f1",
    "score_encounter",
    "strict_f1",
    "tokenize",
]
