"""Quality measures for recovered coefficient vectors.

Support recovery is scored by rank-based AUC of |beta_hat| against the
true support, accuracy by the relative squared error, and cost by wall
time. Summaries use the linear-interpolation quartile convention (the
"inclusive" one), with even-size medians at the midpoint.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.stats

METRIC_FIELDS = ("auc", "re", "time")


@dataclass
class MetricRow:
    model: str
    algorithm: str  # mnr | amnr | closed_form
    repetition: int
    auc: float
    re: float
    time: float
    lambda_selected: float
    n: int = 0
    error: Optional[str] = None

    def __post_init__(self):
        if self.error is None:
            if not (0.0 <= self.auc <= 1.0):
                raise ValueError(f"auc must be in [0, 1], got {self.auc}")
            if self.re < 0:
                raise ValueError("re must be >= 0")
            if self.time < 0:
                raise ValueError("time must be >= 0")


def auc(scores, labels) -> float:
    """Mann-Whitney AUC with midranks (half credit for tied scores).

    scores are |beta_hat|; labels mark the true support. Both label
    classes must be present.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be vectors of equal length")
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("labels are degenerate: need at least one of each class")
    ranks = scipy.stats.rankdata(scores)  # average rank for ties
    pos_rank_sum = float(ranks[labels].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def relative_error(beta_true, beta_hat) -> float:
    """sum((beta_true - beta_hat)^2) / sum(beta_true^2)."""
    bt = np.asarray(beta_true, dtype=float)
    bh = np.asarray(beta_hat, dtype=float)
    if bt.shape != bh.shape:
        raise ValueError("beta_true and beta_hat must have equal shape")
    denom = float(bt @ bt)
    if denom == 0.0:
        raise ValueError("beta_true is identically zero")
    diff = bt - bh
    return float(diff @ diff) / denom


@dataclass
class GroupSummary:
    key: tuple
    count: int
    stats: dict = field(default_factory=dict)  # metric -> {median,q1,q3,mean,sd}


def _stat_block(values: np.ndarray) -> dict:
    q1, med, q3 = np.percentile(values, [25, 50, 75])  # linear interpolation
    sd = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
    return {
        "median": float(med),
        "q1": float(q1),
        "q3": float(q3),
        "mean": float(np.mean(values)),
        "sd": sd,
    }


def summarize(rows, group_by=("model", "algorithm")) -> list:
    """Order statistics of auc/re/time per group, in first-seen group order.

    Error-tagged rows are excluded from the statistics; a group with
    nothing but errors is reported as empty and raises.
    """
    if not rows:
        raise ValueError("no rows to summarize")
    groups: dict = {}
    order: list = []
    for row in rows:
        key = tuple(getattr(row, k) for k in group_by)
        if key not in groups:
            groups[key] = []
            order.append(key)
        if row.error is None:
            groups[key].append(row)
    out = []
    for key in order:
        members = groups[key]
        if not members:
            raise ValueError(f"group {key} has no usable rows (all error-tagged)")
        summary = GroupSummary(key=key, count=len(members))
        for metric in METRIC_FIELDS:
            values = np.asarray([getattr(r, metric) for r in members], dtype=float)
            summary.stats[metric] = _stat_block(values)
        out.append(summary)
    return out
