"""Pareto frontier of (performance, fairness) points and the 80% rule."""

from __future__ import annotations

from typing import Any, Callable, Sequence

import numpy as np

RULE80 = 0.8


def pareto_frontier(points: Sequence[tuple[float, float]]) -> list[int]:
    """Indices of points that no other point strictly dominates (both maximised).

    ``q`` dominates ``p`` when it is at least as good on both coordinates and
    better on one, so exact duplicates of a frontier point are all kept.
    Runs in O(n log n): sweeping by decreasing performance, a point survives
    iff its fairness beats every strictly-better-performing point and is
    the best among points with equal performance.
    """
    P = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(P) == 0:
        return []
    order = np.lexsort((-P[:, 1], -P[:, 0]))
    keep = []
    best_above = -np.inf
    i = 0
    while i < len(order):
        perf = P[order[i], 0]
        j = i
        while j < len(order) and P[order[j], 0] == perf:
            j += 1
        block = order[i:j]
        top = P[block[0], 1]
        if top > best_above:
            keep.extend(int(k) for k in block if P[k, 1] == top)
        best_above = max(best_above, top)
        i = j
    return sorted(keep)


def rule80_winner(
    points: Sequence[Any],
    metric: str,
    performance: Callable[[Any], float] = lambda p: p.performance,
    fairness: Callable[[Any, str], float] = lambda p, m: p.fairness[m],
    model_id: Callable[[Any], Any] = lambda p: p.model_id,
    threshold: float = RULE80,
):
    """Best-performing point with fairness at least ``threshold``, or None.

    Ties go to higher fairness, then to the lower model id.
    """
    eligible = [p for p in points if fairness(p, metric) >= threshold]
    if not eligible:
        return None
    return min(eligible, key=lambda p: (-performance(p), -fairness(p, metric), model_id(p)))
