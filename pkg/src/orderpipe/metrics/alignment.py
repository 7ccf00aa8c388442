"""Exact maximum-weight pairing of predicted and gold orders."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from orderpipe.metrics.text import rouge1_fraction
from orderpipe.orders import MedicalOrder

_INF = float("inf")


@dataclass
class Alignment:
    pairs: list[tuple[int, int]] = field(default_factory=list)
    unmatched_pred: list[int] = field(default_factory=list)
    unmatched_gold: list[int] = field(default_factory=list)
    weight: Fraction = Fraction(0)


def _hungarian_min(cost: list[list[Fraction]]) -> list[int]:
    """Square min-cost assignment (shortest augmenting paths with potentials).

    Returns ``col_of_row``. Works on exact rationals, so optimal values compare exactly.
    """
    k = len(cost)
    u = [Fraction(0)] * (k + 1)
    v = [Fraction(0)] * (k + 1)
    p = [0] * (k + 1)  # p[j]: row assigned to column j (1-based, 0 = free)
    way = [0] * (k + 1)
    for i in range(1, k + 1):
        p[0] = i
        j0 = 0
        minv = [_INF] * (k + 1)
        used = [False] * (k + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta, j1 = _INF, 0
            for j in range(1, k + 1):
                if used[j]:
                    continue
                cur = cost[i0 - 1][j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta, j1 = minv[j], j
            for j in range(k + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    col_of_row = [0] * k
    for j in range(1, k + 1):
        col_of_row[p[j] - 1] = j - 1
    return col_of_row


def max_matching_weight(w: Sequence[Sequence[Fraction]], rows: Sequence[int], cols: Sequence[int]) -> Fraction:
    """Best total weight pairing ``rows`` with ``cols`` (weights are >= 0, zero = no edge)."""
    rows, cols = list(rows), list(cols)
    if not rows or not cols:
        return Fraction(0)
    k = max(len(rows), len(cols))
    cost = [[Fraction(0)] * k for _ in range(k)]
    for a, i in enumerate(rows):
        for b, j in enumerate(cols):
            cost[a][b] = -w[i][j]
    assign = _hungarian_min(cost)
    return sum(
        (w[rows[a]][cols[b]] for a, b in enumerate(assign) if a < len(rows) and b < len(cols)),
        Fraction(0),
    )


def match_weights(w: Sequence[Sequence[Fraction]], n_pred: int, n_gold: int) -> Alignment:
    """Maximum-weight matching with a deterministic choice among optimal ones.

    Zero-weight pairs never appear. Among all optimal matchings the one chosen
    gives pred 0 the lowest-indexed gold it can take while staying optimal
    (or leaves it unmatched only if no gold works), then pred 1, and so on.
    """
    best = max_matching_weight(w, range(n_pred), range(n_gold))
    free_gold = list(range(n_gold))
    acc = Fraction(0)
    pairs = []
    unmatched_pred = []
    for i in range(n_pred):
        later = range(i + 1, n_pred)
        for j in free_gold:
            if w[i][j] <= 0:
                continue
            rest = [c for c in free_gold if c != j]
            if acc + w[i][j] + max_matching_weight(w, later, rest) == best:
                pairs.append((i, j))
                acc += w[i][j]
                free_gold = rest
                break
        else:
            unmatched_pred.append(i)
    assert acc == best
    return Alignment(pairs, unmatched_pred, free_gold, acc)


def weight_matrix(
    pred: Sequence[MedicalOrder], gold: Sequence[MedicalOrder], require_same_type: bool = False
) -> list[list[Fraction]]:
    return [
        [
            Fraction(0)
            if require_same_type and p.order_type != g.order_type
            else rouge1_fraction(p.description, g.description)
            for g in gold
        ]
        for p in pred
    ]


def align_orders(
    pred: Sequence[MedicalOrder], gold: Sequence[MedicalOrder], require_same_type: bool = False
) -> Alignment:
    """Pair predictions with gold orders to maximise total description ROUGE-1 F1."""
    return match_weights(weight_matrix(pred, gold, require_same_type), len(pred), len(gold))
