"""Unigram ROUGE-1 F1 and set-based multi-label F1."""

from __future__ import annotations

import re
from collections import Counter
from fractions import Fraction
from typing import Iterable

_SPLIT = re.compile(r"[^0-9a-z]+")


def tokenize(s: str) -> list[str]:
    """Lowercase and split on every non-alphanumeric character. No stemming, no stopwords."""
    return [tok for tok in _SPLIT.split(s.lower()) if tok]


def rouge1_fraction(pred: str, ref: str) -> Fraction:
    """Exact ROUGE-1 F1 as a rational number.

    With clipped unigram overlap ``o`` the F1 reduces to ``2o / (|pred| + |ref|)``.
    """
    p, r = tokenize(pred), tokenize(ref)
    if not p and not r:
        return Fraction(1)
    if not p or not r:
        return Fraction(0)
    overlap = sum((Counter(p) & Counter(r)).values())
    return Fraction(2 * overlap, len(p) + len(r))


def rouge1_f1(pred: str, ref: str) -> float:
    return float(rouge1_fraction(pred, ref))


def multilabel_fraction(pred: Iterable[int], gold: Iterable[int]) -> Fraction:
    p, g = set(pred), set(gold)
    if not p and not g:
        return Fraction(1)
    return Fraction(2 * len(p & g), len(p) + len(g))


def multilabel_f1(pred: Iterable[int], gold: Iterable[int]) -> float:
    return float(multilabel_fraction(pred, gold))
