"""Paired statistics for per-case IFS differences."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

EXACT_LIMIT = 25


class Degenerate(ValueError):
    """No non-zero differences to test."""


@dataclass(frozen=True)
class WilcoxonResult:
    W: float
    p: float
    n_effective: int
    method: str


def average_ranks(values: Sequence[float]) -> list[float]:
    """1-based ranks with ties sharing the mean of their positions."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        rank = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = rank
        i = j + 1
    return ranks


def _exact_p(doubled_ranks: list[int], w_doubled: int) -> float:
    # counts[s] = number of sign assignments whose positive-rank sum is s/2
    total = sum(doubled_ranks)
    counts = [0] * (total + 1)
    counts[0] = 1
    for r in doubled_ranks:
        for s in range(total, r - 1, -1):
            counts[s] += counts[s - r]
    hits = sum(c for s, c in enumerate(counts) if c and min(s, total - s) <= w_doubled)
    return min(1.0, hits / 2 ** len(doubled_ranks))


def wilcoxon_signed_rank(deltas: Sequence[float]) -> WilcoxonResult:
    """Two-sided Wilcoxon signed-rank test, zeros dropped, ties mid-ranked.

    Up to 25 non-zero differences the p-value is the exact probability,
    under random signs, that min(W+, W-) is at most the observed value.
    Beyond that a normal approximation with tie-corrected variance and no
    continuity correction is used.
    """
    d = [float(x) for x in deltas if float(x) != 0.0]
    n = len(d)
    if n == 0:
        raise Degenerate("all differences are zero")
    ranks = average_ranks([abs(x) for x in d])
    w_plus = sum(r for r, x in zip(ranks, d) if x > 0)
    w_minus = sum(r for r, x in zip(ranks, d) if x < 0)
    w = min(w_plus, w_minus)
    if n <= EXACT_LIMIT:
        doubled = [int(round(2 * r)) for r in ranks]
        return WilcoxonResult(w, _exact_p(doubled, int(round(2 * w))), n, "exact")
    mean = n * (n + 1) / 4
    tie_sizes: dict[float, int] = {}
    for r in ranks:
        tie_sizes[r] = tie_sizes.get(r, 0) + 1
    var = n * (n + 1) * (2 * n + 1) / 24 - sum(t**3 - t for t in tie_sizes.values()) / 48
    z = (w - mean) / math.sqrt(var)
    p = math.erfc(abs(z) / math.sqrt(2))
    return WilcoxonResult(w, min(1.0, p), n, "normal")


def bootstrap_ci(
    values: Sequence[float], resamples: int = 10_000, level: float = 0.95, seed: int = 0
) -> tuple[float, float]:
    """Percentile bootstrap interval for the mean of ``values``."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValueError("bootstrap needs at least one value")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, x.size, size=(resamples, x.size))
    means = x[idx].mean(axis=1)
    alpha = (1 - level) / 2
    lo, hi = np.quantile(means, [alpha, 1 - alpha])
    return float(lo), float(hi)
