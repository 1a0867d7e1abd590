"""Problem data, penalty model, and objective evaluation.

A model is a least-squares fidelity term plus a weighted sum of penalty
terms. Each term applies a scalar penalty function (absolute value or
square) to the entries of L beta for some linear operator L. One global
level lambda is split across terms through fixed proportions, so only a
single scalar ever needs tuning.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .operators import LinearOperator, apply

L1 = "l1"
L2 = "l2"

SIGN_MODES = ("unconstrained", "nonnegative_weights")


def _as_finite_array(a, name, ndim):
    a = np.asarray(a, dtype=float)
    if a.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {a.shape}")
    if a.size == 0:
        raise ValueError(f"{name} must be nonempty")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


@dataclass(frozen=True)
class Problem:
    """A regression instance: design matrix X (n x p) and response y (n)."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = _as_finite_array(self.X, "X", 2)
        y = _as_finite_array(self.y, "y", 1)
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"X has {X.shape[0]} rows but y has length {y.shape[0]}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class PenaltyTerm:
    """One penalty block: kind in {l1, l2}, an operator, a proportion, weights.

    kind "l1" is g(theta) = |theta|, kind "l2" is g(theta) = theta^2.
    gamma holds optional per-row nonnegative weights (adaptive case);
    absent gamma means all ones.
    """

    kind: str
    operator: LinearOperator
    proportion: float = 1.0
    gamma: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in (L1, L2):
            raise ValueError(f"penalty kind must be 'l1' or 'l2', got {self.kind!r}")
        if self.proportion < 0:
            raise ValueError("proportion must be >= 0")
        if self.gamma is not None:
            g = _as_finite_array(self.gamma, "gamma", 1)
            if g.shape != (self.operator.rows,):
                raise ValueError(
                    f"gamma must have length {self.operator.rows}, got {g.shape[0]}"
                )
            if np.any(g < 0):
                raise ValueError("gamma weights must be >= 0")
            object.__setattr__(self, "gamma", g)

    def weights(self) -> np.ndarray:
        if self.gamma is None:
            return np.ones(self.operator.rows)
        return self.gamma


@dataclass(frozen=True)
class ModelSpec:
    """Penalty terms plus the global level lambda and sign handling."""

    terms: tuple
    lam: float
    sign_mode: str = "unconstrained"
    reference: Optional[np.ndarray] = None

    def __post_init__(self):
        terms = tuple(self.terms)
        if len(terms) == 0:
            raise ValueError("ModelSpec needs at least one penalty term")
        total = sum(t.proportion for t in terms)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"term proportions must sum to 1, got {total!r}")
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if self.sign_mode not in SIGN_MODES:
            raise ValueError(f"unknown sign_mode {self.sign_mode!r}")
        if self.sign_mode == "nonnegative_weights" and self.reference is None:
            raise ValueError("nonnegative_weights requires a reference vector")
        if self.reference is not None:
            ref = _as_finite_array(self.reference, "reference", 1)
            object.__setattr__(self, "reference", ref)
        object.__setattr__(self, "terms", terms)

    @property
    def lambdas(self) -> np.ndarray:
        """Per-term levels lambda * proportion."""
        return split_lambda(self.lam, [t.proportion for t in self.terms])


@dataclass
class Solution:
    beta: np.ndarray
    lam: float
    objective: float
    iterations: int
    converged: bool
    wall_time: float
    beta_sparse: Optional[np.ndarray] = None
    epsilon: Optional[float] = None
    descent_gaps: Optional[np.ndarray] = None


def split_lambda(lam: float, proportions) -> np.ndarray:
    props = np.asarray(proportions, dtype=float)
    if np.any(props < 0):
        raise ValueError("proportions must be >= 0")
    if abs(props.sum() - 1.0) > 1e-12:
        raise ValueError(f"proportions must sum to 1, got {props.sum()!r}")
    return lam * props


def _check_beta(spec_p: int, beta) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (spec_p,):
        raise ValueError(f"beta must have length {spec_p}, got shape {beta.shape}")
    if not np.all(np.isfinite(beta)):
        raise ValueError("beta contains non-finite entries")
    return beta


def _term_dims_ok(problem: Problem, spec: ModelSpec):
    for t in spec.terms:
        if t.operator.cols != problem.p:
            raise ValueError(
                f"operator has {t.operator.cols} columns but problem has p={problem.p}"
            )


def objective(problem: Problem, spec: ModelSpec, beta) -> float:
    """Evaluate 0.5*||y - X beta||^2 plus the weighted penalty terms."""
    beta = _check_beta(problem.p, beta)
    _term_dims_ok(problem, spec)
    r = problem.y - problem.X @ beta
    value = 0.5 * float(r @ r)
    for lam_r, term in zip(spec.lambdas, spec.terms):
        theta = apply(term.operator, beta)
        a = np.abs(theta)
        g = a if term.kind == L1 else a * a
        value += lam_r * float(term.weights() @ g)
    return value


def perturbed_penalty_diag(theta, kind: str, gamma, epsilon: float) -> np.ndarray:
    """Diagonal d_i = gamma_i * g'(|theta_i|) / (epsilon + |theta_i|).

    For l1 the numerator is 1; for l2 it is 2|theta_i|.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    a = np.abs(np.asarray(theta, dtype=float))
    if gamma is None:
        gamma = np.ones_like(a)
    else:
        gamma = np.asarray(gamma, dtype=float)
    if kind == L1:
        return gamma / (epsilon + a)
    if kind == L2:
        return 2.0 * gamma * a / (epsilon + a)
    raise ValueError(f"unknown penalty kind {kind!r}")


def _perturbed_g(kind: str, a: np.ndarray, epsilon: float) -> np.ndarray:
    # antiderivatives matching the d_i reweighting; both vanish at 0
    if kind == L1:
        return a - epsilon * np.log1p(a / epsilon)
    return a * a - 2.0 * epsilon * a + 2.0 * epsilon**2 * np.log1p(a / epsilon)


def perturbed_objective(problem: Problem, spec: ModelSpec, beta, epsilon: float) -> float:
    """The epsilon-smoothed objective whose gradient is smooth_gradient."""
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    beta = _check_beta(problem.p, beta)
    _term_dims_ok(problem, spec)
    r = problem.y - problem.X @ beta
    value = 0.5 * float(r @ r)
    for lam_r, term in zip(spec.lambdas, spec.terms):
        a = np.abs(apply(term.operator, beta))
        value += lam_r * float(term.weights() @ _perturbed_g(term.kind, a, epsilon))
    return value


def smooth_gradient(problem: Problem, spec: ModelSpec, beta, epsilon: float) -> np.ndarray:
    """Gradient of the perturbed objective:
    -X^T(y - X beta) + sum_r lambda_r L^T D^(r) L beta."""
    beta = _check_beta(problem.p, beta)
    _term_dims_ok(problem, spec)
    grad = -problem.X.T @ (problem.y - problem.X @ beta)
    for lam_r, term in zip(spec.lambdas, spec.terms):
        theta = apply(term.operator, beta)
        d = perturbed_penalty_diag(theta, term.kind, term.gamma, epsilon)
        grad += lam_r * (term.operator.entries.T @ (d * theta))
    return grad
