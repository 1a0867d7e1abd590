"""Structured linear operators used inside penalty terms.

Operators are stored as explicit dense matrices. At the problem sizes this
package targets (p up to a few thousand) that is simpler and fast enough,
and the active-set solver needs them as plain matrix blocks anyway.
Weighted Gram matrices for the stencil kinds are assembled band-wise
without forming L^T D L explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

KINDS = ("identity", "first_difference", "second_difference", "custom")

# smallest p for which each stencil has at least one row
_MIN_P = {"identity": 1, "first_difference": 2, "second_difference": 3}


@dataclass(frozen=True)
class LinearOperator:
    kind: str
    rows: int
    cols: int
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown operator kind: {self.kind!r}")
        if self.entries.shape != (self.rows, self.cols):
            raise ValueError("entries shape does not match (rows, cols)")


def make_operator(kind: str, p: int) -> LinearOperator:
    """Build one of the stencil operators (identity / differences) for size p."""
    if kind not in _MIN_P:
        raise ValueError(f"make_operator does not build kind {kind!r}")
    if p < _MIN_P[kind]:
        raise ValueError(f"{kind} operator needs p >= {_MIN_P[kind]}, got {p}")
    if kind == "identity":
        entries = np.eye(p)
    elif kind == "first_difference":
        entries = np.zeros((p - 1, p))
        idx = np.arange(p - 1)
        entries[idx, idx] = -1.0
        entries[idx, idx + 1] = 1.0
    else:  # second_difference
        entries = np.zeros((p - 2, p))
        idx = np.arange(p - 2)
        entries[idx, idx] = 1.0
        entries[idx, idx + 1] = -2.0
        entries[idx, idx + 2] = 1.0
    return LinearOperator(kind, entries.shape[0], p, entries)


def custom_operator(matrix) -> LinearOperator:
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2:
        raise ValueError("custom operator must be a 2-d matrix")
    if not np.all(np.isfinite(m)):
        raise ValueError("custom operator has non-finite entries")
    return LinearOperator("custom", m.shape[0], m.shape[1], m)


def apply(op: LinearOperator, beta) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (op.cols,):
        raise ValueError(f"operator expects a vector of length {op.cols}, got shape {beta.shape}")
    if op.kind == "identity":
        return beta.copy()
    if op.kind == "first_difference":
        return np.diff(beta)
    if op.kind == "second_difference":
        return np.diff(beta, n=2)
    return op.entries @ beta


def weighted_gram(op: LinearOperator, d) -> np.ndarray:
    """Return L^T diag(d) L for this operator, exploiting the band structure."""
    d = np.asarray(d, dtype=float)
    if d.shape != (op.rows,):
        raise ValueError(f"weight vector must have length {op.rows}, got shape {d.shape}")
    if not np.all(np.isfinite(d)):
        raise ValueError("weights must be finite")
    p = op.cols
    if op.kind == "identity":
        return np.diag(d)
    if op.kind == "first_difference":
        g = np.zeros((p, p))
        # row i of L is (-1 at i, +1 at i+1), so d_i contributes a 2x2 block
        main = np.zeros(p)
        main[:-1] += d
        main[1:] += d
        off = -d
        g[np.arange(p), np.arange(p)] = main
        g[np.arange(p - 1), np.arange(1, p)] = off
        g[np.arange(1, p), np.arange(p - 1)] = off
        return g
    if op.kind == "second_difference":
        g = np.zeros((p, p))
        main = np.zeros(p)
        main[:-2] += d
        main[1:-1] += 4.0 * d
        main[2:] += d
        off1 = np.zeros(p - 1)
        off1[:-1] += -2.0 * d
        off1[1:] += -2.0 * d
        off2 = d
        g[np.arange(p), np.arange(p)] = main
        g[np.arange(p - 1), np.arange(1, p)] = off1
        g[np.arange(1, p), np.arange(p - 1)] = off1
        g[np.arange(p - 2), np.arange(2, p)] = off2
        g[np.arange(2, p), np.arange(p - 2)] = off2
        return g
    return op.entries.T @ (d[:, None] * op.entries)
