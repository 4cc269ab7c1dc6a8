"""Per-window clearing: the best set of pairwise non-overlapping variants.

Scores enter the dynamic program as integers (``round(score * 1e9)``) so
every comparison is exact and the selected set does not depend on float
summation order.  Equal totals resolve toward including the variant with
the higher score, then the older age anchor, then the smaller id.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from operator import itemgetter
from typing import Optional, Sequence

from .core import ScoredVariant

SCORE_SCALE = 10**9


def scaled_score(score: float) -> int:
    return round(score * SCORE_SCALE)


@dataclass(frozen=True)
class ClearingResult:
    selected: tuple[ScoredVariant, ...] = ()
    total_score: float = 0.0
    rejected: tuple[str, ...] = field(default=())

    @property
    def selected_ids(self) -> tuple[str, ...]:
        return tuple(sv.variant_id for sv in self.selected)


def _preference(sv: ScoredVariant):
    # smaller sorts as more preferred
    return (-scaled_score(sv.score), sv.age_anchor, sv.variant_id)


def select_best_compatible(pool: Sequence[ScoredVariant]) -> ClearingResult:
    if not pool:
        return ClearingResult()
    # rows: (end, start, weight, preference, variant)
    rows = []
    for sv in pool:
        v = sv.variant
        w = scaled_score(sv.score)
        rows.append((v.t_start + v.predicted_duration, v.t_start, w, (-w, sv.age_anchor, v.variant_id), sv))
    # within one end time the most preferred variant is visited last, so the
    # ">=" below lets it win ties
    rows.sort(key=itemgetter(3), reverse=True)
    rows.sort(key=itemgetter(0))
    ends = [r[0] for r in rows]

    m = len(rows)
    best = [0] * (m + 1)
    pred = [0] * (m + 1)
    take = [False] * (m + 1)
    for j in range(1, m + 1):
        _, start, w, _, _ = rows[j - 1]
        p = bisect_right(ends, start, 0, j - 1)
        include = w + best[p]
        if include >= best[j - 1]:
            best[j], take[j], pred[j] = include, True, p
        else:
            best[j] = best[j - 1]

    chosen = []
    j = m
    while j > 0:
        if take[j]:
            chosen.append(rows[j - 1][4])
            j = pred[j]
        else:
            j -= 1
    chosen.reverse()
    chosen_ids = {id(sv) for sv in chosen}
    rejected = tuple(sv.variant_id for sv in pool if id(sv) not in chosen_ids)
    total = math.fsum(sv.score for sv in chosen)
    return ClearingResult(tuple(chosen), total, rejected)


def max_score_variant(pool: Sequence[ScoredVariant]) -> Optional[ScoredVariant]:
    """Single highest-scoring bid under the same tie-break (the greedy baseline's pick)."""
    if not pool:
        return None
    return min(pool, key=_preference)


def single_pick(pool: Sequence[ScoredVariant]) -> ClearingResult:
    best = max_score_variant(pool)
    if best is None:
        return ClearingResult()
    rejected = tuple(sv.variant_id for sv in pool if sv is not best)
    return ClearingResult((best,), best.score, rejected)
