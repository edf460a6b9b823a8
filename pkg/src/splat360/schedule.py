"""Iteration-budget schedules for incremental view fusion.

A schedule splits a total optimization budget into K = ceil(views / m)
counts n_1..n_K, one per update step. Growth laws:

  constant   n_k = floor(total / K)
  linear     n_{k+1} = (a * k) * n_k
  quadratic  n_{k+1} = (a^2 * k) * n_k
  cosine     n_k proportional to 1 - cos(pi * k / K)

For linear/quadratic, n_1 is free (default total / 2K) and a is the largest
value keeping the floored sum within budget, found by bisection. Counts are
floored, clamped to >= 1, and the residual is added to n_K so the counts
always sum to the budget exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BudgetTooSmall

KINDS = ("constant", "linear", "quadratic", "cosine")


@dataclass(frozen=True)
class Schedule:
    kind: str
    m: int
    counts: tuple
    growth: float  # solved factor a (1.0 for constant/cosine)

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))

    @property
    def total(self):
        return sum(self.counts)

    def __len__(self):
        return len(self.counts)

    def to_dict(self):
        return {
            "kind": self.kind,
            "m": self.m,
            "counts": list(self.counts),
            "growth": self.growth,
            "total": self.total,
        }


def _raw_counts(kind, a, n1, k_steps):
    """Counts before flooring, via the recurrence n_{k+1} = f(k) n_k."""
    counts = np.empty(k_steps)
    counts[0] = n1
    for k in range(1, k_steps):
        f = a * k if kind == "linear" else (a * a) * k
        counts[k] = counts[k - 1] * f
        if not np.isfinite(counts[k]):
            counts[k] = np.inf
    return counts


def _clamped_sum(kind, a, n1, k_steps, total):
    counts = _raw_counts(kind, a, n1, k_steps)
    floored = np.floor(np.minimum(counts, total + 1.0))
    return np.maximum(floored, 1.0), float(np.maximum(floored, 1.0).sum())


def solve_schedule(total, views, m, kind="quadratic", n1_hint=None):
    """Solve for per-step iteration counts summing exactly to the budget."""
    if kind not in KINDS:
        raise ValueError(f"unknown schedule kind {kind!r}; choose from {KINDS}")
    if views < 1 or m < 1:
        raise ValueError("views and m must be >= 1")
    k_steps = math.ceil(views / m)
    if total < k_steps:
        raise BudgetTooSmall(
            f"budget {total} cannot give every one of {k_steps} steps at least 1 iteration"
        )

    if k_steps == 1:
        return Schedule(kind=kind, m=m, counts=(total,), growth=1.0)

    if kind == "constant":
        base = total // k_steps
        counts = [base] * k_steps
        counts[-1] += total - base * k_steps
        return Schedule(kind=kind, m=m, counts=tuple(counts), growth=1.0)

    if kind == "cosine":
        weights = 1.0 - np.cos(np.pi * np.arange(1, k_steps + 1) / k_steps)
        raw = total * weights / weights.sum()
        counts = np.maximum(np.floor(raw), 1.0)
        counts[-1] += total - counts.sum()
        if counts[-1] < 1:  # residual was negative: take it from the largest steps
            deficit = int(1 - counts[-1])
            counts[-1] = 1
            order = np.argsort(-counts)
            for idx in order:
                take = min(deficit, int(counts[idx] - 1))
                counts[idx] -= take
                deficit -= take
                if deficit == 0:
                    break
        return Schedule(kind=kind, m=m, counts=tuple(int(c) for c in counts), growth=1.0)

    # linear / quadratic: bisect on the growth factor a
    n1 = float(n1_hint) if n1_hint is not None else max(total / (2.0 * k_steps), 1.0)
    n1 = max(min(n1, float(total - k_steps + 1)), 1.0)  # keep a=0 feasible
    lo, hi = 0.0, 1.0
    while _clamped_sum(kind, hi, n1, k_steps, total)[1] <= total:
        hi *= 2.0
        if hi > 1e6:
            break
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _clamped_sum(kind, mid, n1, k_steps, total)[1] <= total:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-9:
            break
    a = lo
    counts, s = _clamped_sum(kind, a, n1, k_steps, total)
    counts = counts.astype(np.int64)
    counts[-1] += int(total - s)
    if counts[-1] < 1:
        deficit = int(1 - counts[-1])
        counts[-1] = 1
        order = np.argsort(-counts)
        for idx in order:
            take = min(deficit, int(counts[idx] - 1))
            counts[idx] -= take
            deficit -= take
            if deficit == 0:
                break
    return Schedule(kind=kind, m=m, counts=tuple(int(c) for c in counts), growth=a)
